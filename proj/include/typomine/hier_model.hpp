// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_HIER_MODEL_HPP
#define TYPOMINE_HIER_MODEL_HPP

#include <algorithm>
#include <cmath>
#include <optional>
#include <string>
#include <vector>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"
#include "typomine/flat_model.hpp"
#include "typomine/numerics.hpp"
#include "typomine/trees.hpp"

namespace typomine {

struct HierHyper {
  FlatHyper base;
  double sigma2_shape = 2.0;  // inverse-gamma prior on the tied tree variance
  double sigma2_scale = 1.0;
  std::optional<double> frozen_sigma2;  // test hook

  void validate() const {
    base.validate();
    if (sigma2_shape <= 0 || sigma2_scale <= 0)
      throw ConfigError("sigma2 prior parameters must be positive");
    if (frozen_sigma2 && *frozen_sigma2 <= 0) throw ConfigError("frozen sigma2 must be positive");
  }
};

// One chain of the hierarchical model: real implication strengths on the
// internal nodes of a language tree, a real score u_n and an obedience bit
// z_n per case language, and the flat model's data/noise likelihood with z_n
// in place of the global m.
//
// Subtrees with no case language are pruned before sampling; they carry no
// likelihood terms and marginalize out of the posterior exactly.
class HierChain : public CaseChain {
public:
  HierChain(GenCase c, const LanguageTree& tree, const HierHyper& h)
      : CaseChain(std::move(c), h.base), hyper2_(h) {
    hyper2_.validate();
    build_sampler_tree(tree);
    sigma2_ = hyper2_.frozen_sigma2 ? *hyper2_.frozen_sigma2
                                    : hyper2_.sigma2_scale / std::max(1.0, hyper2_.sigma2_shape - 1);
    m_node_.assign(n_internal_, 0.0);
    u_.assign(n_rows(), 0.0);
  }

  std::size_t n_internal() const { return n_internal_; }
  double m_node(std::size_t i) const { return m_node_[i]; }
  void set_m_node(std::size_t i, double v) { m_node_[i] = v; }
  double u(std::size_t r) const { return u_[r]; }
  void set_u(std::size_t r, double v) { u_[r] = v; }
  double sigma2() const { return sigma2_; }
  void set_sigma2(double v) { sigma2_ = v; }
  double root_value() const { return m_node_[0]; }
  const std::string& node_key(std::size_t i) const { return node_key_[i]; }

  // Exact Gaussian full conditional for an internal node: the parent edge
  // (root's parent is the zero-mean prior) plus one edge per child carrying a
  // real value (internal m or leaf u); z bits do not enter.
  void sample_internal(std::size_t i) {
    double parent_value = (i == 0) ? 0.0 : m_node_[parent_[i]];
    double sum = parent_value;
    std::size_t count = 1;
    for (std::size_t ch : internal_children_[i]) {
      sum += m_node_[ch];
      ++count;
    }
    for (std::size_t r : leaf_children_[i]) {
      sum += u_[r];
      ++count;
    }
    std::normal_distribution<double> d(sum / double(count), std::sqrt(sigma2_ / double(count)));
    m_node_[i] = d(rng_);
  }

  // Rejection sampler for a leaf score: propose from the parent Gaussian,
  // accept with probability s(u) for z=1 and 1-s(u) for z=0 (both bounded by
  // 1, so this is a valid rejection scheme). Keeps the previous value when
  // every attempt is rejected.
  void sample_leaf(std::size_t r) {
    double m_par = m_node_[leaf_parent_[r]];
    std::normal_distribution<double> prop(m_par, std::sqrt(sigma2_));
    std::uniform_real_distribution<double> unif(0, 1);
    for (int t = 0; t < hyper_.rejection_attempts; ++t) {
      double cand = prop(rng_);
      double acc = zrow_[r] ? sigmoid(cand) : 1 - sigmoid(cand);
      if (unif(rng_) < acc) {
        u_[r] = cand;
        return;
      }
    }
  }

  // Exact Bernoulli conditional for the obedience bit.
  void sample_obedience_bit(std::size_t r) {
    double s = sigmoid(u_[r]);
    double w1 = s * row_weight(r, 1);
    double w0 = (1 - s) * row_weight(r, 0);
    zrow_[r] = std::uint8_t(sample_binary(w0, w1));
  }

  // Conjugate inverse-gamma update from the edge residuals (root pseudo-edge
  // to 0 included).
  void sample_sigma2() {
    if (hyper2_.frozen_sigma2) return;
    double ssr = 0;
    std::size_t edges = 0;
    for (std::size_t i = 0; i < n_internal_; ++i) {
      double pv = (i == 0) ? 0.0 : m_node_[parent_[i]];
      double d = m_node_[i] - pv;
      ssr += d * d;
      ++edges;
    }
    for (std::size_t r = 0; r < n_rows(); ++r) {
      double d = u_[r] - m_node_[leaf_parent_[r]];
      ssr += d * d;
      ++edges;
    }
    sigma2_ = sample_inverse_gamma(hyper2_.sigma2_shape + edges / 2.0,
                                   hyper2_.sigma2_scale + ssr / 2.0, rng_);
  }

  // Sweep order: imputations, error bits, per-language rates, global rate,
  // feature priors, obedience bits, leaf scores, internal nodes bottom-up,
  // tree variance.
  void sweep() {
    update_fills();
    update_ebits();
    update_eps_n();
    update_eps();
    update_pi_ante();
    update_pi_cons();
    for (std::size_t r = 0; r < n_rows(); ++r) sample_obedience_bit(r);
    for (std::size_t r = 0; r < n_rows(); ++r) sample_leaf(r);
    for (std::size_t i : bottom_up_) sample_internal(i);
    sample_sigma2();
  }

private:
  void build_sampler_tree(const LanguageTree& tree) {
    // every case language must sit at a leaf
    std::string missing;
    for (const auto& row : case_.rows)
      if (!tree.has_language(row.language)) {
        if (!missing.empty()) missing += ", ";
        missing += std::to_string(row.language);
      }
    if (!missing.empty())
      throw ValidationError("case languages missing from tree (indices): " + missing);

    const auto& nodes = tree.nodes();
    std::vector<int> row_of_node(nodes.size(), -1);
    for (std::size_t r = 0; r < case_.rows.size(); ++r)
      row_of_node[tree.leaf_for(case_.rows[r].language)] = int(r);

    // keep internal nodes with at least one case leaf underneath (children
    // precede nothing in the node array, so scan in reverse child-to-parent)
    std::vector<char> keep(nodes.size(), 0);
    for (std::size_t i = nodes.size(); i-- > 0;) {
      if (nodes[i].is_leaf()) {
        keep[i] = row_of_node[i] >= 0;
      } else {
        for (int ch : nodes[i].children)
          if (keep[ch]) keep[i] = 1;
      }
    }
    keep[0] = 1;  // root survives even with zero data (prior predictive)

    std::vector<int> new_index(nodes.size(), -1);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!keep[i] || nodes[i].is_leaf()) continue;
      new_index[i] = int(n_internal_++);
      parent_.push_back(nodes[i].parent < 0 ? 0 : std::size_t(new_index[nodes[i].parent]));
      node_key_.push_back("n" + std::to_string(i) + ":" + nodes[i].label);
    }
    internal_children_.assign(n_internal_, {});
    leaf_children_.assign(n_internal_, {});
    leaf_parent_.assign(case_.rows.size(), 0);
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      if (!keep[i] || nodes[i].parent < 0) continue;
      std::size_t p = std::size_t(new_index[nodes[i].parent]);
      if (nodes[i].is_leaf()) {
        leaf_children_[p].push_back(std::size_t(row_of_node[i]));
        leaf_parent_[row_of_node[i]] = p;
      } else {
        internal_children_[p].push_back(std::size_t(new_index[i]));
      }
    }
    // children before parents: node indices are in insertion (pre-)order, so
    // a reversed scan visits every child before its parent
    bottom_up_.resize(n_internal_);
    for (std::size_t i = 0; i < n_internal_; ++i) bottom_up_[i] = n_internal_ - 1 - i;
  }

  HierHyper hyper2_;
  std::size_t n_internal_ = 0;
  std::vector<std::size_t> parent_;  // per internal node (root's entry unused)
  std::vector<std::vector<std::size_t>> internal_children_;
  std::vector<std::vector<std::size_t>> leaf_children_;  // row indices
  std::vector<std::size_t> leaf_parent_;                 // per row
  std::vector<std::size_t> bottom_up_;
  std::vector<std::string> node_key_;
  std::vector<double> m_node_;
  std::vector<double> u_;
  double sigma2_ = 1;
};

inline PosteriorSummary run_hier(const GenCase& c, const LanguageTree& tree,
                                 const HierHyper& hyper) {
  HierChain chain(c, tree, hyper);
  const std::size_t n = chain.n_rows();
  const int nc = chain.n_cols();
  const auto& h = hyper.base;
  double score_sum = 0, eps_sum = 0;
  std::vector<double> pi_sum(nc, 0), node_sum(chain.n_internal(), 0), z_sum(n, 0);
  std::vector<std::array<double, 3>> e_sum(n, {0, 0, 0}), fill_sum(n, {0, 0, 0});
  int retained = 0;
  for (int it = 0; it < h.iterations; ++it) {
    chain.sweep();
    if (it < h.burn_in) continue;
    ++retained;
    score_sum += sigmoid(chain.root_value());
    eps_sum += chain.eps();
    for (int j = 0; j < nc; ++j) pi_sum[j] += chain.pi(j);
    for (std::size_t i = 0; i < chain.n_internal(); ++i) node_sum[i] += chain.m_node(i);
    for (std::size_t r = 0; r < n; ++r) {
      z_sum[r] += chain.zbit(r);
      for (int j = 0; j < nc; ++j) {
        e_sum[r][j] += chain.ebit(r, j);
        if (chain.is_unknown(r, j)) fill_sum[r][j] += chain.fill(r, j);
      }
    }
  }
  PosteriorSummary s;
  s.score = score_sum / retained;
  s.eps_mean = eps_sum / retained;
  for (int j = 0; j < nc; ++j) s.pi_mean.push_back(pi_sum[j] / retained);
  for (std::size_t i = 0; i < chain.n_internal(); ++i)
    s.node_means[chain.node_key(i)] = node_sum[i] / retained;
  s.row_languages.reserve(n);
  s.error_marginals.assign(n, {0, 0, 0});
  for (std::size_t r = 0; r < n; ++r) {
    s.row_languages.push_back(c.rows[r].language);
    s.z_marginals.push_back(z_sum[r] / retained);
    for (int j = 0; j < nc; ++j) {
      s.error_marginals[r][j] = e_sum[r][j] / retained;
      if (chain.is_unknown(r, j))
        s.imputed.push_back(ImputedMarginal{c.rows[r].language, c.features[j],
                                            fill_sum[r][j] / retained});
    }
  }
  return s;
}

inline PosteriorSummary run_hier(const PairCase& pc, const LanguageTree& tree,
                                 const HierHyper& hyper) {
  return run_hier(to_gen(pc), tree, hyper);
}

inline PosteriorSummary run_hier(const TripleCase& tc, const LanguageTree& tree,
                                 const HierHyper& hyper) {
  return run_hier(to_gen(tc), tree, hyper);
}

}  // namespace typomine

#endif
