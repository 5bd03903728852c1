// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "typomine/flat_model.hpp"
#include "typomine/numerics.hpp"

using namespace typomine;

namespace {

// Independent oracle for P(m=1 | data) with frozen continuous parameters:
// exhaustively enumerate every configuration of (m, error bits, imputed
// cells). Written directly from the generative story, not via the sampler's
// row_weight helper.
double exact_m_posterior(const GenCase& c, const FrozenParams& fp, double m_prior) {
  const int nc = c.n_ante + 1;
  std::vector<std::pair<std::size_t, int>> unknown;  // (row, col)
  for (std::size_t r = 0; r < c.rows.size(); ++r)
    for (int j = 0; j < nc; ++j)
      if (!known(c.rows[r].v[j])) unknown.emplace_back(r, j);
  const std::size_t n_e = c.rows.size() * nc;
  const std::size_t n_u = unknown.size();
  REQUIRE(n_e + n_u <= 20);  // keep enumeration tractable

  double total[2] = {0, 0};
  for (int m = 0; m <= 1; ++m) {
    double pm = m ? m_prior : 1 - m_prior;
    for (std::uint64_t eb = 0; eb < (1ull << n_e); ++eb) {
      for (std::uint64_t ub = 0; ub < (1ull << n_u); ++ub) {
        double w = pm;
        for (std::size_t r = 0; r < c.rows.size() && w > 0; ++r) {
          // reconstruct effective values g = f xor e for this configuration
          int g[3];
          for (int j = 0; j < nc; ++j) {
            int f;
            if (known(c.rows[r].v[j])) {
              f = c.rows[r].v[j] == Ternary::True ? 1 : 0;
            } else {
              std::size_t slot = 0;
              while (unknown[slot] != std::make_pair(r, j)) ++slot;
              f = int((ub >> slot) & 1);
            }
            int e = int((eb >> (r * nc + j)) & 1);
            w *= e ? fp.eps_n : 1 - fp.eps_n;
            g[j] = f ^ e;
          }
          bool all_ante = true;
          for (int j = 0; j < c.n_ante; ++j) {
            w *= g[j] ? fp.pi[j] : 1 - fp.pi[j];
            if (!g[j]) all_ante = false;
          }
          if (m && all_ante) {
            if (!g[c.n_ante]) w = 0;  // forced consequent violated
          } else {
            w *= g[c.n_ante] ? fp.pi[c.n_ante] : 1 - fp.pi[c.n_ante];
          }
        }
        total[m] += w;
      }
    }
  }
  return total[1] / (total[0] + total[1]);
}

GenCase random_pair_case(Rng& rng, std::size_t max_rows) {
  std::uniform_int_distribution<std::size_t> nrows(1, max_rows);
  std::uniform_int_distribution<int> tern(0, 5);
  GenCase c;
  c.n_ante = 1;
  c.features = {0, 1, 0};
  std::size_t n = nrows(rng);
  for (std::size_t r = 0; r < n; ++r) {
    auto draw = [&] {
      int t = tern(rng);  // unknown with probability 1/3
      return t < 2 ? Ternary::False : t < 4 ? Ternary::True : Ternary::Unknown;
    };
    Ternary a = draw(), b = draw();
    if (!known(a) && !known(b)) a = Ternary::True;  // pair views never carry such rows
    c.rows.push_back(GenRow{std::uint32_t(r), {a, b, Ternary::Unknown}});
  }
  return c;
}

}  // namespace

TEST_CASE("sigmoid matches frozen values and is symmetric") {
  REQUIRE(sigmoid(0.0) == Catch::Approx(0.5));
  REQUIRE(sigmoid(2.0) == Catch::Approx(0.8807970779778823).epsilon(1e-12));
  REQUIRE(sigmoid(-2.0) == Catch::Approx(1 - 0.8807970779778823).epsilon(1e-12));
  REQUIRE(sigmoid(800.0) == Catch::Approx(1.0));
  REQUIRE(sigmoid(-800.0) == Catch::Approx(0.0).margin(1e-300));
}

TEST_CASE("beta cdf matches closed forms and frozen quadrature values") {
  REQUIRE(beta_cdf(0.3, 1, 1) == Catch::Approx(0.3).epsilon(1e-12));       // uniform
  REQUIRE(beta_cdf(0.3, 2, 1) == Catch::Approx(0.09).epsilon(1e-12));      // x^2
  REQUIRE(beta_cdf(0.5, 2, 2) == Catch::Approx(0.5).epsilon(1e-12));       // symmetric
  REQUIRE(beta_cdf(0.2, 2, 5) == Catch::Approx(0.34464).epsilon(1e-10));   // frozen
  REQUIRE(beta_cdf(-1, 2, 2) == 0.0);
  REQUIRE(beta_cdf(2, 2, 2) == 1.0);
}

TEST_CASE("log beta pdf matches closed form") {
  // Beta(2,2): pdf(x) = 6 x (1-x)
  REQUIRE(log_beta_pdf(0.5, 2, 2) == Catch::Approx(std::log(1.5)).epsilon(1e-12));
  REQUIRE(log_beta_pdf(0.25, 2, 2) == Catch::Approx(std::log(6 * 0.25 * 0.75)).epsilon(1e-12));
}

TEST_CASE("beta and inverse-gamma samplers have the right moments") {
  Rng rng = make_rng(42);
  const int n = 200000;
  double s = 0, s2 = 0;
  for (int i = 0; i < n; ++i) {
    double x = sample_beta(2, 3, rng);
    s += x;
    s2 += x * x;
  }
  double mean = s / n, var = s2 / n - mean * mean;
  REQUIRE(mean == Catch::Approx(0.4).margin(0.005));   // a/(a+b)
  REQUIRE(var == Catch::Approx(0.04).margin(0.003));   // ab/((a+b)^2(a+b+1))

  s = 0;
  for (int i = 0; i < n; ++i) s += sample_inverse_gamma(3, 2, rng);
  REQUIRE(s / n == Catch::Approx(1.0).margin(0.02));   // scale/(shape-1)
}

TEST_CASE("noise prior solve: feasible constraints give an exact Beta pair") {
  auto [a, b] = solve_noise_prior(0.05, 0.1, 0.9);
  REQUIRE(a / (a + b) == Catch::Approx(0.05).epsilon(1e-12));  // mean exact by construction
  REQUIRE(beta_cdf(0.1, a, b) == Catch::Approx(0.9).epsilon(1e-8));
  // frozen scipy.brentq oracle (the lower of the two roots)
  REQUIRE(a == Catch::Approx(0.0356279179559779).epsilon(1e-6));

  auto [a2, b2] = solve_noise_prior(0.2, 0.5, 0.95);
  REQUIRE(a2 / (a2 + b2) == Catch::Approx(0.2).epsilon(1e-12));
  REQUIRE(beta_cdf(0.5, a2, b2) == Catch::Approx(0.95).epsilon(1e-8));
}

TEST_CASE("noise prior solve: infeasible constraints raise a numeric error") {
  // a median only twice the mean is impossible for every distribution
  // (Markov: P(X > 2 mean) < 1/2 strictly), so the Beta search has no root
  REQUIRE_THROWS_AS(solve_noise_prior(0.05, 0.1, 0.5), NumericError);
  REQUIRE_THROWS_AS(solve_noise_prior(0.5, 0.4, 0.5), ConfigError);  // mean >= mass_limit
  REQUIRE_THROWS_AS(solve_noise_prior(0.05, 0.1, 1.5), ConfigError);
}

TEST_CASE("closest-feasible noise prior keeps the mean and minimizes the gap") {
  auto [a, b] = closest_noise_prior(0.05, 0.1, 0.5);
  REQUIRE(a / (a + b) == Catch::Approx(0.05).epsilon(1e-10));
  // the best achievable CDF(0.1) over the whole family is about 0.8333
  REQUIRE(beta_cdf(0.1, a, b) == Catch::Approx(0.833295945239993).epsilon(1e-6));
  REQUIRE(a == Catch::Approx(kDefaultEpsA).epsilon(1e-6));
  // feasible inputs fall through to the exact solver
  auto [af, bf] = closest_noise_prior(0.05, 0.1, 0.9);
  REQUIRE(beta_cdf(0.1, af, bf) == Catch::Approx(0.9).epsilon(1e-8));
}

TEST_CASE("pair log likelihood matches its branch table") {
  double pi1 = 0.3, pi2 = 0.7;
  REQUIRE(pair_log_likelihood(0, 0, 0, pi1, pi2) ==
          Catch::Approx(std::log(0.7) + std::log(0.3)));
  REQUIRE(pair_log_likelihood(1, 1, 0, pi1, pi2) ==
          Catch::Approx(std::log(0.3) + std::log(0.7)));
  // m=1, antecedent true: consequent forced
  REQUIRE(pair_log_likelihood(1, 1, 1, pi1, pi2) == Catch::Approx(std::log(0.3)));
  REQUIRE(std::isinf(pair_log_likelihood(1, 0, 1, pi1, pi2)));
  // m=1 but antecedent false: plain product
  REQUIRE(pair_log_likelihood(0, 1, 1, pi1, pi2) ==
          Catch::Approx(std::log(0.7) + std::log(0.7)));
}

TEST_CASE("flat sampler matches exhaustive enumeration with frozen parameters") {
  FrozenParams fp;
  fp.pi = {0.6, 0.4};
  fp.eps_n = 0.08;
  FlatHyper h;
  h.frozen = fp;
  h.iterations = 4000;
  h.burn_in = 500;

  Rng gen = make_rng(314);
  for (int rep = 0; rep < 12; ++rep) {
    GenCase c = random_pair_case(gen, 4);
    double exact = exact_m_posterior(c, fp, h.m_prior);
    h.seed = 1000 + rep;
    auto s = run_flat(c, h);
    INFO("case " << rep << " rows=" << c.rows.size() << " exact=" << exact);
    REQUIRE(s.score == Catch::Approx(exact).margin(0.05));
    // frozen parameters are reported untouched
    REQUIRE(s.pi_mean[0] == Catch::Approx(0.6));
    REQUIRE(s.eps_mean == Catch::Approx(0.08));
  }
}

TEST_CASE("flat sampler enumeration oracle also covers conjunction cases") {
  FrozenParams fp;
  fp.pi = {0.5, 0.5, 0.5};
  fp.eps_n = 0.05;
  FlatHyper h;
  h.frozen = fp;
  h.iterations = 4000;
  h.burn_in = 500;
  GenCase c;
  c.n_ante = 2;
  c.features = {0, 1, 2};
  c.rows = {
      GenRow{0, {Ternary::True, Ternary::True, Ternary::True}},
      GenRow{1, {Ternary::True, Ternary::True, Ternary::True}},
      GenRow{2, {Ternary::True, Ternary::False, Ternary::False}},
  };
  double exact = exact_m_posterior(c, fp, h.m_prior);
  h.seed = 77;
  auto s = run_flat(c, h);
  REQUIRE(s.score == Catch::Approx(exact).margin(0.05));
}

TEST_CASE("supported implications score high, contradicted ones score low") {
  FlatHyper h;
  h.iterations = 20000;  // the contradicted case's noise rates mix slowly
  h.burn_in = 3000;      // (Metropolized); give them room to settle
  h.seed = 5;
  GenCase support;
  support.n_ante = 1;
  support.features = {0, 1, 0};
  GenCase refute = support;
  Rng rng = make_rng(8);
  std::uniform_real_distribution<double> unif(0, 1);
  for (int r = 0; r < 40; ++r) {
    bool f1 = unif(rng) < 0.5;
    support.rows.push_back(GenRow{std::uint32_t(r),
                                  {f1 ? Ternary::True : Ternary::False,
                                   f1 ? Ternary::True : (unif(rng) < 0.5 ? Ternary::True : Ternary::False),
                                   Ternary::Unknown}});
    refute.rows.push_back(GenRow{std::uint32_t(r),
                                 {f1 ? Ternary::True : Ternary::False,
                                  f1 ? Ternary::False : Ternary::True, Ternary::Unknown}});
  }
  double s_support = run_flat(support, h).score;
  double s_refute = run_flat(refute, h).score;
  REQUIRE(s_support > 0.9);
  REQUIRE(s_refute < 0.25);
  REQUIRE(s_refute < s_support);
}

TEST_CASE("posterior summary reports rows, error marginals, and imputations") {
  FlatHyper h;
  h.iterations = 500;
  h.burn_in = 100;
  h.seed = 3;
  GenCase c;
  c.n_ante = 1;
  c.features = {4, 9, 0};
  c.rows = {GenRow{7, {Ternary::True, Ternary::Unknown, Ternary::Unknown}},
            GenRow{9, {Ternary::False, Ternary::True, Ternary::Unknown}}};
  auto s = run_flat(c, h);
  REQUIRE(s.row_languages == std::vector<std::uint32_t>{7, 9});
  REQUIRE(s.error_marginals.size() == 2);
  REQUIRE(s.imputed.size() == 1);
  REQUIRE(s.imputed[0].language == 7);
  REQUIRE(s.imputed[0].feature == 9);  // consequent column maps to feature 9
  REQUIRE(s.imputed[0].mean >= 0.0);
  REQUIRE(s.imputed[0].mean <= 1.0);
  REQUIRE(s.pi_mean.size() == 2);
}

TEST_CASE("chains are deterministic in the seed and sensitive to it") {
  FlatHyper h;
  h.iterations = 400;
  h.burn_in = 100;
  h.seed = 12;
  GenCase c;
  c.n_ante = 1;
  c.features = {0, 1, 0};
  Rng rng = make_rng(21);
  c = random_pair_case(rng, 4);
  auto s1 = run_flat(c, h);
  auto s2 = run_flat(c, h);
  REQUIRE(s1.score == s2.score);
  REQUIRE(s1.eps_mean == s2.eps_mean);
  REQUIRE(s1.pi_mean == s2.pi_mean);
  h.seed = 13;
  auto s3 = run_flat(c, h);
  REQUIRE((s1.score != s3.score || s1.eps_mean != s3.eps_mean));
}

TEST_CASE("hyperparameter validation") {
  FlatHyper h;
  h.iterations = 100;
  h.burn_in = 100;
  REQUIRE_THROWS_AS(h.validate(), ConfigError);
  h = FlatHyper{};
  h.m_prior = 1.0;
  REQUIRE_THROWS_AS(h.validate(), ConfigError);
  h = FlatHyper{};
  h.rejection_attempts = 0;
  REQUIRE_THROWS_AS(h.validate(), ConfigError);
  h = FlatHyper{};
  h.frozen = FrozenParams{{0.5}, 0.05};  // needs 2 entries for a pair case
  GenCase c;
  c.n_ante = 1;
  c.rows = {GenRow{0, {Ternary::True, Ternary::True, Ternary::Unknown}}};
  REQUIRE_THROWS_AS(FlatChain(c, h), ConfigError);
  REQUIRE_THROWS_AS(run_flat(GenCase{}, FlatHyper{}), ValidationError);  // no rows
}

TEST_CASE("default noise hyperparameters keep mean 0.05") {
  REQUIRE(kDefaultEpsA / (kDefaultEpsA + kDefaultEpsB) == Catch::Approx(0.05).epsilon(1e-12));
}
