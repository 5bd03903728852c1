// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_FLAT_MODEL_HPP
#define TYPOMINE_FLAT_MODEL_HPP

#include <array>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"
#include "typomine/numerics.hpp"

namespace typomine {

// Default noise prior: mean error rate 0.05 with CDF(0.1) as close to 0.5 as
// the Beta family allows (the exact pair mean=0.05, CDF(0.1)=0.5 has no
// solution; see solve_noise_prior). b = 19a keeps the mean at 0.05 exactly.
inline constexpr double kDefaultEpsA = 0.3352093044051698;
inline constexpr double kDefaultEpsB = 19.0 * kDefaultEpsA;

// Test hook: pin the continuous parameters so binary latents can be checked
// against exhaustive enumeration.
struct FrozenParams {
  std::vector<double> pi;  // one per feature column (antecedents then consequent)
  double eps_n = 0.05;     // shared per-language error rate
};

struct FlatHyper {
  double m_prior = 0.5;
  double pi_alpha = 1.0;
  double pi_beta = 1.0;
  double eps_a = kDefaultEpsA;
  double eps_b = kDefaultEpsB;
  double kappa = 10.0;  // concentration tying per-language rates to the global rate
  int rejection_attempts = 20;
  int iterations = 1000;
  int burn_in = 200;
  std::uint64_t seed = 0;
  std::optional<FrozenParams> frozen;

  void validate() const {
    if (iterations <= burn_in) throw ConfigError("iterations must exceed burn_in");
    if (m_prior <= 0 || m_prior >= 1) throw ConfigError("m_prior must be in (0,1)");
    if (pi_alpha <= 0 || pi_beta <= 0 || eps_a <= 0 || eps_b <= 0 || kappa <= 0)
      throw ConfigError("hyperparameters must be positive");
    if (rejection_attempts < 1) throw ConfigError("rejection_attempts must be >= 1");
  }
};

// Internal generalized case: 1 or 2 antecedent columns plus one consequent.
struct GenRow {
  std::uint32_t language;
  std::array<Ternary, 3> v;  // antecedents then consequent
};

struct GenCase {
  int n_ante = 1;
  std::array<std::uint32_t, 3> features{};  // matrix feature indices, same layout
  std::vector<GenRow> rows;

  int n_cols() const { return n_ante + 1; }
};

inline GenCase to_gen(const PairCase& pc) {
  GenCase g;
  g.n_ante = 1;
  g.features = {std::uint32_t(pc.f1_index), std::uint32_t(pc.f2_index), 0};
  g.rows.reserve(pc.rows.size());
  for (const auto& r : pc.rows) g.rows.push_back(GenRow{r.language, {r.v1, r.v2, Ternary::Unknown}});
  return g;
}

inline GenCase to_gen(const TripleCase& tc) {
  GenCase g;
  g.n_ante = 2;
  g.features = {std::uint32_t(tc.fa_index), std::uint32_t(tc.fb_index), std::uint32_t(tc.fc_index)};
  g.rows.reserve(tc.rows.size());
  for (const auto& r : tc.rows) g.rows.push_back(GenRow{r.language, {r.va, r.vb, r.vc}});
  return g;
}

// Log-likelihood of one row of the pair model given effective values
// g1 = f1 xor e1, g2 = f2 xor e2. -inf signals zero likelihood (the forced
// branch m = g1 = 1, g2 = 0).
inline double pair_log_likelihood(int g1, int g2, int m, double pi1, double pi2) {
  double lp = g1 ? std::log(pi1) : std::log1p(-pi1);
  if (m && g1) {
    if (!g2) return -std::numeric_limits<double>::infinity();
    return lp;  // g2 forced true with probability 1
  }
  return lp + (g2 ? std::log(pi2) : std::log1p(-pi2));
}

struct ImputedMarginal {
  std::uint32_t language;
  std::uint32_t feature;
  double mean;
};

struct PosteriorSummary {
  double score = 0;                 // flat: mean of m; hier: mean of s(m_root)
  std::vector<double> pi_mean;      // per feature column
  double eps_mean = 0;
  std::vector<std::uint32_t> row_languages;
  std::vector<std::array<double, 3>> error_marginals;  // per row, per column
  std::vector<ImputedMarginal> imputed;
  // hier extras (empty for the flat model)
  std::map<std::string, double> node_means;
  std::vector<double> z_marginals;  // per row
};

// Shared data-side state of one chain: feature priors, noise hierarchy,
// error bits, imputed cells, and the per-row implication bit (the flat model
// keeps all rows equal to its single m; the hierarchical model stores z_n).
class CaseChain {
public:
  CaseChain(GenCase c, const FlatHyper& h)
      : case_(std::move(c)), hyper_(h), rng_(make_rng(h.seed)) {
    hyper_.validate();
    const std::size_t n = case_.rows.size();
    const int nc = case_.n_cols();
    if (hyper_.frozen && int(hyper_.frozen->pi.size()) != nc)
      throw ConfigError("frozen pi vector must have one entry per feature column");
    pi_.fill(0.5);
    if (hyper_.frozen)
      for (int j = 0; j < nc; ++j) pi_[j] = hyper_.frozen->pi[j];
    eps_ = hyper_.frozen ? hyper_.frozen->eps_n : hyper_.eps_a / (hyper_.eps_a + hyper_.eps_b);
    eps_n_.assign(n, eps_);
    e_.assign(n, {0, 0, 0});
    fill_.assign(n, {0, 0, 0});
    unknown_.assign(n, {false, false, false});
    zrow_.assign(n, 0);
    std::bernoulli_distribution coin(0.5);
    for (std::size_t r = 0; r < n; ++r)
      for (int j = 0; j < nc; ++j) {
        unknown_[r][j] = !known(case_.rows[r].v[j]);
        if (unknown_[r][j]) fill_[r][j] = coin(rng_) ? 1 : 0;
      }
  }

  const GenCase& gen_case() const { return case_; }
  const FlatHyper& hyper() const { return hyper_; }
  Rng& rng() { return rng_; }
  std::size_t n_rows() const { return case_.rows.size(); }
  int n_cols() const { return case_.n_cols(); }

  double pi(int j) const { return pi_[j]; }
  double eps() const { return eps_; }
  double eps_n(std::size_t r) const { return eps_n_[r]; }
  int ebit(std::size_t r, int j) const { return e_[r][j]; }
  int fill(std::size_t r, int j) const { return fill_[r][j]; }
  bool is_unknown(std::size_t r, int j) const { return unknown_[r][j]; }
  int zbit(std::size_t r) const { return zrow_[r]; }
  void set_zbit(std::size_t r, int z) { zrow_[r] = std::uint8_t(z); }
  void set_pi(int j, double v) { pi_[j] = v; }
  void set_ebit(std::size_t r, int j, int v) { e_[r][j] = std::uint8_t(v); }
  void set_fill(std::size_t r, int j, int v) { fill_[r][j] = std::uint8_t(v); }

  // effective value: (observed or imputed) xor error bit
  int g(std::size_t r, int j) const {
    int v = unknown_[r][j] ? fill_[r][j] : (case_.rows[r].v[j] == Ternary::True ? 1 : 0);
    return v ^ e_[r][j];
  }

  bool ante_all_true(std::size_t r) const {
    for (int j = 0; j < case_.n_ante; ++j)
      if (!g(r, j)) return false;
    return true;
  }

  // joint probability of the row's feature values under implication bit z
  double row_weight(std::size_t r, int z) const {
    double w = 1;
    bool all1 = true;
    for (int j = 0; j < case_.n_ante; ++j) {
      int gj = g(r, j);
      w *= gj ? pi_[j] : 1 - pi_[j];
      if (!gj) all1 = false;
    }
    int gc = g(r, case_.n_ante);
    if (z && all1) return gc ? w : 0.0;
    return w * (gc ? pi_[case_.n_ante] : 1 - pi_[case_.n_ante]);
  }

  // (1) imputed cells: exact Bernoulli conditionals
  void update_fills() {
    const int nc = n_cols();
    for (std::size_t r = 0; r < n_rows(); ++r)
      for (int j = 0; j < nc; ++j) {
        if (!unknown_[r][j]) continue;
        fill_[r][j] = 0;
        double w0 = row_weight(r, zrow_[r]);
        fill_[r][j] = 1;
        double w1 = row_weight(r, zrow_[r]);
        fill_[r][j] = sample_binary(w0, w1);
      }
  }

  // (2) error bits: exact Bernoulli conditionals (prior Bernoulli(eps_n)
  // times the likelihood with the effective value flipped / unflipped)
  void update_ebits() {
    const int nc = n_cols();
    for (std::size_t r = 0; r < n_rows(); ++r)
      for (int j = 0; j < nc; ++j) {
        e_[r][j] = 0;
        double w0 = (1 - eps_n_[r]) * row_weight(r, zrow_[r]);
        e_[r][j] = 1;
        double w1 = eps_n_[r] * row_weight(r, zrow_[r]);
        e_[r][j] = std::uint8_t(sample_binary(w0, w1));
      }
  }

  // (3) per-language rates: conjugate Beta given the global rate
  void update_eps_n() {
    if (hyper_.frozen) return;
    const int nc = n_cols();
    for (std::size_t r = 0; r < n_rows(); ++r) {
      int se = 0;
      for (int j = 0; j < nc; ++j) se += e_[r][j];
      eps_n_[r] = sample_beta(hyper_.kappa * eps_ + se,
                              hyper_.kappa * (1 - eps_) + nc - se, rng_);
    }
  }

  // global rate: Metropolized independence proposals from the Beta prior
  void update_eps() {
    if (hyper_.frozen) return;
    auto loglik = [&](double eps) {
      double a = hyper_.kappa * eps, b = hyper_.kappa * (1 - eps);
      double s = 0;
      for (double en : eps_n_) s += log_beta_pdf(en, a, b);
      return s;
    };
    double cur = loglik(eps_);
    std::uniform_real_distribution<double> unif(0, 1);
    for (int t = 0; t < hyper_.rejection_attempts; ++t) {
      double prop = sample_beta(hyper_.eps_a, hyper_.eps_b, rng_);
      double cand = loglik(prop);
      if (std::log(unif(rng_)) < cand - cur) {
        eps_ = prop;
        break;
      }
    }
  }

  // feature priors: conjugate Beta counts; the consequent excludes rows where
  // it is forced (z = 1 and all antecedents effectively true)
  void update_pi_ante() {
    if (hyper_.frozen) return;
    for (int j = 0; j < case_.n_ante; ++j) {
      int s = 0;
      for (std::size_t r = 0; r < n_rows(); ++r) s += g(r, j);
      pi_[j] = sample_beta(hyper_.pi_alpha + s, hyper_.pi_beta + int(n_rows()) - s, rng_);
    }
  }

  void update_pi_cons() {
    if (hyper_.frozen) return;
    int s = 0, n = 0;
    for (std::size_t r = 0; r < n_rows(); ++r) {
      if (zrow_[r] && ante_all_true(r)) continue;
      s += g(r, case_.n_ante);
      ++n;
    }
    pi_[case_.n_ante] = sample_beta(hyper_.pi_alpha + s, hyper_.pi_beta + n - s, rng_);
  }

  // Marginal likelihood of row r under implication bit z: sums the joint
  // weight (error-bit prior times feature likelihood) over every
  // configuration of the row's error bits and imputed cells. At most
  // 2^(3 + 3) = 64 terms. Used by the blocked (m, e, fill) update.
  double row_marginal(std::size_t r, int z) const {
    const int nc = n_cols();
    int ucols[3], nu = 0;
    for (int j = 0; j < nc; ++j)
      if (unknown_[r][j]) ucols[nu++] = j;
    double total = 0;
    for (int fm = 0; fm < (1 << nu); ++fm)
      for (int em = 0; em < (1 << nc); ++em) total += config_weight(r, z, fm, em, ucols, nu);
    return total;
  }

  // Redraws row r's error bits and imputed cells jointly from their exact
  // conditional given implication bit z (the second half of the blocked
  // update: first m from the per-row marginals, then a consistent state).
  void redraw_row(std::size_t r, int z) {
    const int nc = n_cols();
    int ucols[3], nu = 0;
    for (int j = 0; j < nc; ++j)
      if (unknown_[r][j]) ucols[nu++] = j;
    double w[64];
    double total = 0;
    int count = 0;
    for (int fm = 0; fm < (1 << nu); ++fm)
      for (int em = 0; em < (1 << nc); ++em) {
        w[count] = config_weight(r, z, fm, em, ucols, nu);
        total += w[count++];
      }
    if (total <= 0) throw NumericError("zero-probability row; state inconsistent");
    std::uniform_real_distribution<double> unif(0, 1);
    double target = unif(rng_) * total;
    int pick = 0;
    for (double acc = w[0]; pick + 1 < count && acc < target; acc += w[++pick]) {
    }
    int fm = pick >> nc, em = pick & ((1 << nc) - 1);
    for (int u = 0; u < nu; ++u) fill_[r][ucols[u]] = std::uint8_t((fm >> u) & 1);
    for (int j = 0; j < nc; ++j) e_[r][j] = std::uint8_t((em >> j) & 1);
  }

protected:
  // joint weight of one (fill, error-bit) configuration of row r under z
  double config_weight(std::size_t r, int z, int fm, int em, const int* ucols, int nu) const {
    const int nc = n_cols();
    int fill_of[3] = {0, 0, 0};
    for (int u = 0; u < nu; ++u) fill_of[ucols[u]] = (fm >> u) & 1;
    double w = 1;
    int gv[3];
    for (int j = 0; j < nc; ++j) {
      int v = unknown_[r][j] ? fill_of[j] : (case_.rows[r].v[j] == Ternary::True ? 1 : 0);
      int e = (em >> j) & 1;
      w *= e ? eps_n_[r] : 1 - eps_n_[r];
      gv[j] = v ^ e;
    }
    bool all1 = true;
    for (int j = 0; j < case_.n_ante; ++j) {
      w *= gv[j] ? pi_[j] : 1 - pi_[j];
      if (!gv[j]) all1 = false;
    }
    if (z && all1) return gv[case_.n_ante] ? w : 0.0;
    return w * (gv[case_.n_ante] ? pi_[case_.n_ante] : 1 - pi_[case_.n_ante]);
  }

  int sample_binary(double w0, double w1) {
    if (w0 + w1 <= 0)
      throw NumericError("zero-probability full conditional; state inconsistent");
    std::uniform_real_distribution<double> unif(0, 1);
    return unif(rng_) * (w0 + w1) < w1 ? 1 : 0;
  }

  GenCase case_;
  FlatHyper hyper_;
  Rng rng_;
  std::array<double, 3> pi_{};
  double eps_ = 0;
  std::vector<double> eps_n_;
  std::vector<std::array<std::uint8_t, 3>> e_;
  std::vector<std::array<std::uint8_t, 3>> fill_;
  std::vector<std::array<bool, 3>> unknown_;
  std::vector<std::uint8_t> zrow_;
};

// One MCMC chain of the flat model: a single implication bit m shared by all
// rows. Single-threaded; run different candidates concurrently with
// independent seeds instead.
class FlatChain : public CaseChain {
public:
  FlatChain(GenCase c, const FlatHyper& h) : CaseChain(std::move(c), h) {}

  int m() const { return m_; }
  void set_m(int m) {
    m_ = m;
    for (auto& z : zrow_) z = std::uint8_t(m);
  }

  // Blocked update of (m, error bits, imputed cells): m is drawn from its
  // exact Bernoulli conditional given the continuous parameters, with each
  // row's likelihood summed over that row's error bits and imputed cells;
  // then every row's bits are redrawn from their joint conditional given the
  // new m. Conditioning m on the current bits instead would leave the chain
  // trapped: flipping m to 1 requires every violating row's error explanation
  // to be switched on in the same sweep, which takes time exponential in the
  // violation count.
  void update_m() {
    double logit = std::log(hyper_.m_prior) - std::log1p(-hyper_.m_prior);
    for (std::size_t r = 0; r < n_rows(); ++r)
      logit += std::log(row_marginal(r, 1)) - std::log(row_marginal(r, 0));
    std::uniform_real_distribution<double> unif(0, 1);
    set_m(unif(rng_) < sigmoid(logit) ? 1 : 0);
    for (std::size_t r = 0; r < n_rows(); ++r) redraw_row(r, m_);
  }

  // one full sweep in fixed order: imputations, error bits, per-language
  // rates, feature priors, global rate, implication bit
  void sweep() {
    update_fills();
    update_ebits();
    update_eps_n();
    update_pi_ante();
    update_pi_cons();
    update_eps();
    update_m();
  }

private:
  int m_ = 0;
};

inline PosteriorSummary run_flat(const GenCase& c, const FlatHyper& hyper) {
  if (c.rows.empty()) throw ValidationError("run_flat: case has no rows");
  FlatChain chain(c, hyper);
  const std::size_t n = chain.n_rows();
  const int nc = chain.n_cols();
  double m_sum = 0, eps_sum = 0;
  std::vector<double> pi_sum(nc, 0);
  std::vector<std::array<double, 3>> e_sum(n, {0, 0, 0});
  std::vector<std::array<double, 3>> fill_sum(n, {0, 0, 0});
  int retained = 0;
  for (int it = 0; it < hyper.iterations; ++it) {
    chain.sweep();
    if (it < hyper.burn_in) continue;
    ++retained;
    m_sum += chain.m();
    eps_sum += chain.eps();
    for (int j = 0; j < nc; ++j) pi_sum[j] += chain.pi(j);
    for (std::size_t r = 0; r < n; ++r)
      for (int j = 0; j < nc; ++j) {
        e_sum[r][j] += chain.ebit(r, j);
        if (chain.is_unknown(r, j)) fill_sum[r][j] += chain.fill(r, j);
      }
  }
  PosteriorSummary s;
  s.score = m_sum / retained;
  s.eps_mean = eps_sum / retained;
  for (int j = 0; j < nc; ++j) s.pi_mean.push_back(pi_sum[j] / retained);
  s.row_languages.reserve(n);
  s.error_marginals.assign(n, {0, 0, 0});
  for (std::size_t r = 0; r < n; ++r) {
    s.row_languages.push_back(c.rows[r].language);
    for (int j = 0; j < nc; ++j) {
      s.error_marginals[r][j] = e_sum[r][j] / retained;
      if (chain.is_unknown(r, j))
        s.imputed.push_back(ImputedMarginal{c.rows[r].language, c.features[j],
                                            fill_sum[r][j] / retained});
    }
  }
  return s;
}

inline PosteriorSummary run_flat(const PairCase& pc, const FlatHyper& hyper) {
  return run_flat(to_gen(pc), hyper);
}

inline PosteriorSummary run_flat(const TripleCase& tc, const FlatHyper& hyper) {
  return run_flat(to_gen(tc), hyper);
}

}  // namespace typomine

#endif
