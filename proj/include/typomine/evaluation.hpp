// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_EVALUATION_HPP
#define TYPOMINE_EVALUATION_HPP

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <unordered_map>
#include <vector>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"
#include "typomine/search.hpp"
#include "typomine/trees.hpp"

namespace typomine {

// A hide-and-predict fold: known cells masked out uniformly at random.
struct Fold {
  std::uint64_t seed = 0;
  double fraction = 0.10;
  std::vector<std::pair<std::uint32_t, std::uint32_t>> hidden;  // (language, feature)
};

inline std::pair<FeatureMatrix, Fold> make_fold(const FeatureMatrix& m, double fraction,
                                                std::uint64_t seed) {
  if (fraction <= 0 || fraction >= 1) throw ConfigError("fold fraction must be in (0,1)");
  auto cells = m.known_cells();
  std::size_t k = std::size_t(std::llround(fraction * double(cells.size())));
  if (k == 0) throw ConfigError("fold fraction hides zero cells");
  Rng rng = make_rng(stable_hash(seed, {"fold"}));
  // partial Fisher-Yates: first k entries are a uniform sample w/o replacement
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> d(i, cells.size() - 1);
    std::swap(cells[i], cells[d(rng)]);
  }
  Fold fold;
  fold.seed = seed;
  fold.fraction = fraction;
  fold.hidden.assign(cells.begin(), cells.begin() + k);
  return {m.masked(fold.hidden), std::move(fold)};
}

struct PredictionReport {
  std::map<std::pair<std::uint32_t, std::uint32_t>, bool> predictions;
  std::size_t covered = 0;   // hidden cells seen by at least one candidate
  std::size_t correct = 0;
  std::optional<double> accuracy;  // missing when nothing was covered
};

// Predict each hidden cell from the imputed-cell posterior marginals of the
// candidates that cover it: marginals are averaged across candidates and
// thresholded at 0.5 (exactly 0.5 predicts false). By default cells no
// candidate covers are excluded from the denominator; count_uncovered_as_errors
// switches to charging them as mistakes.
inline PredictionReport predict_hidden(const std::vector<PosteriorSummary>& summaries,
                                       const Fold& fold, const FeatureMatrix& truth,
                                       bool count_uncovered_as_errors = false) {
  std::set<std::pair<std::uint32_t, std::uint32_t>> hidden(fold.hidden.begin(), fold.hidden.end());
  std::map<std::pair<std::uint32_t, std::uint32_t>, std::pair<double, int>> acc;
  for (const auto& s : summaries)
    for (const auto& im : s.imputed) {
      auto key = std::make_pair(im.language, im.feature);
      if (!hidden.count(key)) continue;
      auto& slot = acc[key];
      slot.first += im.mean;
      slot.second += 1;
    }
  PredictionReport rep;
  for (const auto& [key, slot] : acc) {
    bool pred = slot.first / slot.second > 0.5;
    rep.predictions[key] = pred;
    ++rep.covered;
    bool actual = truth.cell(key.first, key.second) == Ternary::True;
    if (pred == actual) ++rep.correct;
  }
  std::size_t denom = count_uncovered_as_errors ? fold.hidden.size() : rep.covered;
  if (denom > 0) rep.accuracy = double(rep.correct) / double(denom);
  return rep;
}

// Kendall rank correlation between two orderings of the same id set.
// tau_standard is the usual [-1,1] statistic; tau01 = C / (n(n-1)/2) rescales
// to [0,1] with 1 = identical and 0 = reversed.
struct KendallTau {
  double tau_standard = 0;
  double tau01 = 0;
};

inline KendallTau kendall_tau(const std::vector<std::string>& list_a,
                              const std::vector<std::string>& list_b) {
  if (list_a.size() != list_b.size())
    throw ValidationError("kendall_tau: lists differ in length");
  if (list_a.size() < 2) throw ValidationError("kendall_tau: need at least 2 items");
  std::unordered_map<std::string, std::size_t> pos_b;
  for (std::size_t i = 0; i < list_b.size(); ++i)
    if (!pos_b.emplace(list_b[i], i).second)
      throw ValidationError("kendall_tau: duplicate id '" + list_b[i] + "'");
  std::vector<std::size_t> ranks;
  ranks.reserve(list_a.size());
  std::set<std::string> seen;
  for (const auto& id : list_a) {
    auto it = pos_b.find(id);
    if (it == pos_b.end()) throw ValidationError("kendall_tau: id '" + id + "' missing from B");
    if (!seen.insert(id).second) throw ValidationError("kendall_tau: duplicate id '" + id + "'");
    ranks.push_back(it->second);
  }
  const std::size_t n = ranks.size();
  long long concordant = 0, discordant = 0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      (ranks[i] < ranks[j] ? concordant : discordant)++;
  double total = double(n) * double(n - 1) / 2.0;
  KendallTau t;
  t.tau_standard = double(concordant - discordant) / total;
  t.tau01 = double(concordant) / total;
  return t;
}

// For each leaf-pair distance realized in tree A, the mean distance of the
// same pairs in tree B. Distances are edge counts; `sibling_distance_a`
// restates the key in the convention where sibling leaves are at distance 0
// (edge count minus 2, distinct leaves only).
struct DistanceProfileRow {
  int distance_a = 0;          // edge count in A
  int sibling_distance_a = 0;  // same, sibling-is-zero convention
  double mean_distance_b = 0;
  std::size_t pairs = 0;
};

inline std::vector<DistanceProfileRow> tree_distance_profile(const LanguageTree& a,
                                                             const LanguageTree& b) {
  std::vector<std::size_t> common;
  for (const auto& [lang, leaf] : a.leaf_map())
    if (b.has_language(std::size_t(lang))) common.push_back(std::size_t(lang));
  std::sort(common.begin(), common.end());
  std::map<int, std::pair<double, std::size_t>> buckets;
  for (std::size_t i = 0; i < common.size(); ++i)
    for (std::size_t j = i + 1; j < common.size(); ++j) {
      int da = a.tree_distance(common[i], common[j]);
      int db = b.tree_distance(common[i], common[j]);
      auto& slot = buckets[da];
      slot.first += db;
      slot.second += 1;
    }
  std::vector<DistanceProfileRow> out;
  for (const auto& [da, slot] : buckets) {
    DistanceProfileRow row;
    row.distance_a = da;
    row.sibling_distance_a = da - 2;
    row.mean_distance_b = slot.first / double(slot.second);
    row.pairs = slot.second;
    out.push_back(row);
  }
  return out;
}

struct AccuracyCurve {
  std::string model;
  std::vector<int> k_values;
  std::vector<double> mean_accuracy;  // NaN where no fold covered any cell
  std::vector<double> std_accuracy;
  std::vector<std::size_t> covered_cells;  // summed over folds
  std::size_t folds = 0;
};

inline std::vector<int> default_k_grid() { return {2, 4, 8, 16, 32, 64, 128, 256, 512, 1024}; }

struct EvalOptions {
  std::vector<Model> models = {Model::HierPhylo, Model::Flat, Model::Random};
  std::vector<int> k_grid = default_k_grid();
  int folds = 10;
  double hide_fraction = 0.10;
  FilterSpec filter;
  Blocklist blocklist;
  HierHyper hyper;
  ClusterSpec cluster;  // for the areal tree
  int workers = 1;
  bool count_uncovered_as_errors = false;
};

// Full hide-and-predict protocol: per fold, mask, enumerate candidates on the
// masked matrix, run each model on every candidate, and score the top-k
// candidates' predictions of the hidden cells against the unmasked truth.
inline std::vector<AccuracyCurve> evaluate_models(const FeatureMatrix& truth,
                                                  const EvalOptions& opt) {
  std::vector<AccuracyCurve> curves;
  for (Model model : opt.models) {
    AccuracyCurve c;
    c.model = model_name(model);
    c.k_values = opt.k_grid;
    c.folds = opt.folds;
    c.mean_accuracy.assign(opt.k_grid.size(), 0);
    c.std_accuracy.assign(opt.k_grid.size(), 0);
    c.covered_cells.assign(opt.k_grid.size(), 0);
    curves.push_back(std::move(c));
  }
  // per model, per k: accuracies across folds
  std::vector<std::vector<std::vector<double>>> accs(
      opt.models.size(), std::vector<std::vector<double>>(opt.k_grid.size()));

  for (int fold_i = 0; fold_i < opt.folds; ++fold_i) {
    auto [masked, fold] = make_fold(truth, opt.hide_fraction,
                                    stable_hash(opt.hyper.base.seed, {"fold", std::to_string(fold_i)}));
    auto cands = enumerate_pairs(masked, opt.filter, opt.blocklist);
    if (cands.empty()) continue;
    std::optional<LanguageTree> phylo, areal;
    for (std::size_t mi = 0; mi < opt.models.size(); ++mi) {
      Model model = opt.models[mi];
      ScoreOptions so;
      so.model = model;
      so.hyper = opt.hyper;
      so.workers = opt.workers;
      if (model == Model::HierPhylo) {
        if (!phylo) phylo = build_phylo_tree(masked);
        so.tree = &*phylo;
      } else if (model == Model::HierAreal) {
        if (!areal) areal = build_areal_tree(masked, opt.cluster);
        so.tree = &*areal;
      }
      std::vector<PosteriorSummary> summaries;
      std::vector<std::size_t> order;
      if (model == Model::Random) {
        summaries.resize(cands.size());
        for (std::size_t i = 0; i < cands.size(); ++i)
          summaries[i] = run_random(candidate_case(masked, cands[i]),
                                    candidate_seed(opt.hyper.base.seed, masked, cands[i]));
        order = random_order(cands.size(), opt.hyper.base.seed);
      } else {
        summaries = score_candidates(masked, cands, so);
        order = ranked_indices(masked, cands, summaries);
      }
      for (std::size_t ki = 0; ki < opt.k_grid.size(); ++ki) {
        std::size_t k = std::min<std::size_t>(opt.k_grid[ki], order.size());
        std::vector<PosteriorSummary> top;
        for (std::size_t i = 0; i < k; ++i) top.push_back(summaries[order[i]]);
        auto rep = predict_hidden(top, fold, truth, opt.count_uncovered_as_errors);
        curves[mi].covered_cells[ki] += rep.covered;
        if (rep.accuracy) accs[mi][ki].push_back(*rep.accuracy);
      }
    }
  }
  for (std::size_t mi = 0; mi < opt.models.size(); ++mi)
    for (std::size_t ki = 0; ki < opt.k_grid.size(); ++ki) {
      const auto& v = accs[mi][ki];
      if (v.empty()) {
        curves[mi].mean_accuracy[ki] = std::nan("");
        curves[mi].std_accuracy[ki] = std::nan("");
        continue;
      }
      double mean = 0;
      for (double x : v) mean += x;
      mean /= v.size();
      double var = 0;
      for (double x : v) var += (x - mean) * (x - mean);
      curves[mi].mean_accuracy[ki] = mean;
      curves[mi].std_accuracy[ki] = v.size() > 1 ? std::sqrt(var / (v.size() - 1)) : 0.0;
    }
  return curves;
}

}  // namespace typomine

#endif
