// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_SEARCH_HPP
#define TYPOMINE_SEARCH_HPP

#include <algorithm>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"
#include "typomine/flat_model.hpp"
#include "typomine/hier_model.hpp"

namespace typomine {

struct FilterSpec {
  int min_both_known = 250;   // languages with every involved feature known
  int min_joint_true = 15;    // languages where antecedent(s) and consequent all hold
  double min_conditional = 0.5;  // P(consequent | antecedents) among known

  void validate() const {
    if (min_both_known < 0 || min_joint_true < 0)
      throw ConfigError("filter counts must be nonnegative");
    if (min_conditional < 0 || min_conditional > 1)
      throw ConfigError("min_conditional must be in [0,1]");
  }
};

struct Support {
  int both_known = 0;
  int joint_true = 0;
  double conditional_rate = 0;
};

// One candidate implication: 1 or 2 antecedent features and a consequent.
struct Candidate {
  std::vector<std::uint32_t> implicants;
  std::uint32_t implicand = 0;
  Support support;
};

struct RankedImplication {
  std::vector<std::string> implicants;
  std::string implicand;
  double score = 0;
  Support support;
  std::string model;
};

// Blocklist of banned implications, `feature_id -> feature_id` per line.
class Blocklist {
public:
  Blocklist() = default;

  void add(const std::string& implicant, const std::string& implicand) {
    banned_.insert(implicant + "\x1f" + implicand);
  }

  bool banned(const std::string& implicant, const std::string& implicand) const {
    return banned_.count(implicant + "\x1f" + implicand) != 0;
  }

  static Blocklist parse(std::istream& in) {
    Blocklist b;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      std::string t = trim(line);
      if (t.empty() || t[0] == '#') continue;
      auto arrow = t.find("->");
      if (arrow == std::string::npos)
        throw ParseError("blocklist line " + std::to_string(line_no) +
                         ": expected 'feature_id -> feature_id'");
      b.add(trim(t.substr(0, arrow)), trim(t.substr(arrow + 2)));
    }
    return b;
  }

  static Blocklist parse_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open blocklist file: " + path);
    return parse(in);
  }

private:
  std::set<std::string> banned_;
};

namespace detail {

inline bool pair_support(const FeatureMatrix& m, std::size_t f1, std::size_t f2, Support& s) {
  int both = 0, joint = 0, denom = 0;
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    Ternary a = m.cell(l, f1), b = m.cell(l, f2);
    if (known(a) && known(b)) ++both;
    if (a == Ternary::True && known(b)) {
      ++denom;
      if (b == Ternary::True) ++joint;
    }
  }
  s.both_known = both;
  s.joint_true = joint;
  s.conditional_rate = denom > 0 ? double(joint) / denom : 0.0;
  return denom > 0;
}

inline bool triple_support(const FeatureMatrix& m, std::size_t fa, std::size_t fb, std::size_t fc,
                           Support& s) {
  int both = 0, joint = 0, denom = 0;
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    Ternary a = m.cell(l, fa), b = m.cell(l, fb), c = m.cell(l, fc);
    if (known(a) && known(b) && known(c)) ++both;
    if (a == Ternary::True && b == Ternary::True && known(c)) {
      ++denom;
      if (c == Ternary::True) ++joint;
    }
  }
  s.both_known = both;
  s.joint_true = joint;
  s.conditional_rate = denom > 0 ? double(joint) / denom : 0.0;
  return denom > 0;
}

inline bool passes(const Support& s, const FilterSpec& f) {
  return s.both_known >= f.min_both_known && s.joint_true >= f.min_joint_true &&
         s.conditional_rate >= f.min_conditional;
}

}  // namespace detail

// All ordered pairs of distinct binary features (same-raw and blocklisted
// pairs excluded) that pass every filter, at >= thresholds.
inline std::vector<Candidate> enumerate_pairs(const FeatureMatrix& m, const FilterSpec& filter,
                                              const Blocklist& blocklist = {}) {
  filter.validate();
  std::vector<Candidate> out;
  for (std::size_t f1 = 0; f1 < m.n_features(); ++f1) {
    for (std::size_t f2 = 0; f2 < m.n_features(); ++f2) {
      if (f1 == f2 || m.feature(f1).raw_index == m.feature(f2).raw_index) continue;
      if (blocklist.banned(m.feature(f1).id(), m.feature(f2).id())) continue;
      Support s;
      detail::pair_support(m, f1, f2, s);
      if (!detail::passes(s, filter)) continue;
      out.push_back(Candidate{{std::uint32_t(f1)}, std::uint32_t(f2), s});
    }
  }
  return out;
}

// Unordered implicant pairs with a third-feature implicand; "antecedent true"
// in the filters means both implicants true.
inline std::vector<Candidate> enumerate_triples(const FeatureMatrix& m, const FilterSpec& filter,
                                                const Blocklist& blocklist = {}) {
  filter.validate();
  std::vector<Candidate> out;
  for (std::size_t fa = 0; fa < m.n_features(); ++fa) {
    for (std::size_t fb = fa + 1; fb < m.n_features(); ++fb) {
      if (m.feature(fa).raw_index == m.feature(fb).raw_index) continue;
      for (std::size_t fc = 0; fc < m.n_features(); ++fc) {
        if (fc == fa || fc == fb) continue;
        if (m.feature(fc).raw_index == m.feature(fa).raw_index ||
            m.feature(fc).raw_index == m.feature(fb).raw_index)
          continue;
        if (blocklist.banned(m.feature(fa).id(), m.feature(fc).id()) ||
            blocklist.banned(m.feature(fb).id(), m.feature(fc).id()))
          continue;
        Support s;
        detail::triple_support(m, fa, fb, fc, s);
        if (!detail::passes(s, filter)) continue;
        out.push_back(Candidate{{std::uint32_t(fa), std::uint32_t(fb)}, std::uint32_t(fc), s});
      }
    }
  }
  return out;
}

enum class Model { Flat, HierPhylo, HierAreal, Random };

inline std::string model_name(Model m) {
  switch (m) {
    case Model::Flat: return "flat";
    case Model::HierPhylo: return "hier-phylo";
    case Model::HierAreal: return "hier-areal";
    case Model::Random: return "random";
  }
  return "?";
}

inline std::optional<Model> model_from_name(const std::string& s) {
  if (s == "flat") return Model::Flat;
  if (s == "hier-phylo") return Model::HierPhylo;
  if (s == "hier-areal") return Model::HierAreal;
  if (s == "random") return Model::Random;
  return std::nullopt;
}

inline std::uint64_t candidate_seed(std::uint64_t global_seed, const FeatureMatrix& m,
                                    const Candidate& c) {
  std::vector<std::string_view> parts;
  std::vector<std::string> ids;
  for (auto f : c.implicants) ids.push_back(m.feature(f).id());
  ids.push_back(m.feature(c.implicand).id());
  std::uint64_t h = global_seed;
  for (const auto& id : ids) h = stable_hash(h, {id});
  return h;
}

inline GenCase candidate_case(const FeatureMatrix& m, const Candidate& c) {
  if (c.implicants.size() == 1) return to_gen(pair_view(m, c.implicants[0], c.implicand));
  return to_gen(triple_view(m, c.implicants[0], c.implicants[1], c.implicand));
}

// The random baseline scores everything 0.5 and imputes unknown cells with
// seeded uniform marginals; it predicts as badly as it ranks.
inline PosteriorSummary run_random(const GenCase& c, std::uint64_t seed) {
  PosteriorSummary s;
  s.score = 0.5;
  s.pi_mean.assign(c.n_cols(), 0.5);
  s.eps_mean = 0;
  Rng rng = make_rng(seed);
  std::uniform_real_distribution<double> unif(0, 1);
  s.error_marginals.assign(c.rows.size(), {0, 0, 0});
  for (std::size_t r = 0; r < c.rows.size(); ++r) {
    s.row_languages.push_back(c.rows[r].language);
    for (int j = 0; j < c.n_cols(); ++j)
      if (!known(c.rows[r].v[j]))
        s.imputed.push_back(ImputedMarginal{c.rows[r].language, c.features[j], unif(rng)});
  }
  return s;
}

struct ScoreOptions {
  Model model = Model::Flat;
  HierHyper hyper;  // hyper.base carries the flat parameters and global seed
  const LanguageTree* tree = nullptr;  // required for hier models
  int workers = 1;
};

inline PosteriorSummary score_candidate(const FeatureMatrix& m, const Candidate& c,
                                        const ScoreOptions& opt) {
  HierHyper h = opt.hyper;
  h.base.seed = candidate_seed(opt.hyper.base.seed, m, c);
  GenCase gc = candidate_case(m, c);
  switch (opt.model) {
    case Model::Flat: return run_flat(gc, h.base);
    case Model::HierPhylo:
    case Model::HierAreal:
      if (!opt.tree) throw ConfigError("hierarchical model requires a tree");
      return run_hier(gc, *opt.tree, h);
    case Model::Random: return run_random(gc, h.base.seed);
  }
  throw ConfigError("unknown model");
}

// Parallel map over candidates. Per-candidate seeds are derived from the
// global seed and the feature ids, so the result is identical for any worker
// count.
inline std::vector<PosteriorSummary> score_candidates(const FeatureMatrix& m,
                                                      const std::vector<Candidate>& cands,
                                                      const ScoreOptions& opt) {
  std::vector<PosteriorSummary> out(cands.size());
  std::exception_ptr err;
  std::mutex err_mu;
  parallel_for(cands.size(), opt.workers, [&](std::size_t i) {
    try {
      out[i] = score_candidate(m, cands[i], opt);
    } catch (...) {
      std::lock_guard<std::mutex> lock(err_mu);
      if (!err) err = std::current_exception();
    }
  });
  if (err) std::rethrow_exception(err);
  return out;
}

// Permutation of candidate indices, descending by score; ties broken by
// joint_true descending, then by lexicographic feature ids.
inline std::vector<std::size_t> ranked_indices(const FeatureMatrix& m,
                                               const std::vector<Candidate>& cands,
                                               const std::vector<PosteriorSummary>& summaries) {
  if (cands.size() != summaries.size())
    throw ValidationError("rank: candidate/summary count mismatch");
  std::vector<std::vector<std::string>> imp_ids(cands.size());
  std::vector<std::string> con_ids(cands.size());
  for (std::size_t i = 0; i < cands.size(); ++i) {
    for (auto f : cands[i].implicants) imp_ids[i].push_back(m.feature(f).id());
    con_ids[i] = m.feature(cands[i].implicand).id();
  }
  std::vector<std::size_t> idx(cands.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  std::stable_sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    if (summaries[a].score != summaries[b].score) return summaries[a].score > summaries[b].score;
    if (cands[a].support.joint_true != cands[b].support.joint_true)
      return cands[a].support.joint_true > cands[b].support.joint_true;
    if (imp_ids[a] != imp_ids[b]) return imp_ids[a] < imp_ids[b];
    return con_ids[a] < con_ids[b];
  });
  return idx;
}

inline std::vector<RankedImplication> rank(const FeatureMatrix& m,
                                           const std::vector<Candidate>& cands,
                                           const std::vector<PosteriorSummary>& summaries,
                                           Model model) {
  auto order = ranked_indices(m, cands, summaries);
  std::vector<RankedImplication> out;
  out.reserve(cands.size());
  for (std::size_t i : order) {
    RankedImplication r;
    for (auto f : cands[i].implicants) r.implicants.push_back(m.feature(f).id());
    r.implicand = m.feature(cands[i].implicand).id();
    r.score = summaries[i].score;
    r.support = cands[i].support;
    r.model = model_name(model);
    out.push_back(std::move(r));
  }
  return out;
}

// Random baseline ordering: a seeded shuffle of the filtered list.
inline std::vector<std::size_t> random_order(std::size_t n, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng = make_rng(stable_hash(seed, {"random-rank"}));
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> d(0, i - 1);
    std::swap(idx[i - 1], idx[d(rng)]);
  }
  return idx;
}

inline std::vector<RankedImplication> rank_random(const FeatureMatrix& m,
                                                  const std::vector<Candidate>& cands,
                                                  std::uint64_t seed) {
  auto order = random_order(cands.size(), seed);
  std::vector<RankedImplication> out;
  out.reserve(cands.size());
  for (std::size_t i : order) {
    RankedImplication r;
    for (auto f : cands[i].implicants) r.implicants.push_back(m.feature(f).id());
    r.implicand = m.feature(cands[i].implicand).id();
    r.score = 0.5;
    r.support = cands[i].support;
    r.model = model_name(Model::Random);
    out.push_back(std::move(r));
  }
  return out;
}

// Counts of each feature's appearances as an implicant in the top K.
inline std::map<std::string, int> implicant_frequency(
    const std::vector<RankedImplication>& ranked, std::size_t top_k) {
  if (top_k > ranked.size()) throw ValidationError("implicant_frequency: K exceeds list length");
  std::map<std::string, int> out;
  for (std::size_t i = 0; i < top_k; ++i)
    for (const auto& f : ranked[i].implicants) ++out[f];
  return out;
}

}  // namespace typomine

#endif
