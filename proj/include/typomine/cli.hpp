// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_CLI_HPP
#define TYPOMINE_CLI_HPP

#include <cctype>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"
#include "typomine/evaluation.hpp"
#include "typomine/search.hpp"
#include "typomine/synthgen.hpp"
#include "typomine/trees.hpp"

namespace typomine {

// Effective run configuration. Every command is a pure function of
// (input files, config, seed); the applied defaults are echoed to
// `config.effective` in the output directory so a run can be reproduced
// from its own output.
struct RunConfig {
  std::string dataset;
  std::string merges;
  std::string blocklist;
  std::string tree_file;  // optional: load the hierarchy instead of building it
  std::string out = "out";
  std::string model = "flat";
  std::vector<std::string> eval_models = {"hier-phylo", "flat", "random"};
  bool triples = false;
  int min_both_known = 250;
  int min_joint_true = 15;
  double min_conditional = 0.5;
  int iterations = 1000;
  int burn_in = 200;
  int rejection = 20;
  double m_prior = 0.5;
  double kappa = 10.0;
  double sigma2_shape = 2.0;
  double sigma2_scale = 1.0;
  std::uint64_t seed = 0;
  int workers = 1;
  int top = 30;
  int folds = 10;
  double hide_fraction = 0.10;
  std::vector<int> k_grid = default_k_grid();
  std::size_t macro_clusters = 6;
  std::size_t micro_clusters = 25;

  FilterSpec filter() const {
    FilterSpec f;
    f.min_both_known = min_both_known;
    f.min_joint_true = min_joint_true;
    f.min_conditional = min_conditional;
    f.validate();
    return f;
  }

  HierHyper hyper() const {
    HierHyper h;
    h.base.iterations = iterations;
    h.base.burn_in = burn_in;
    h.base.rejection_attempts = rejection;
    h.base.m_prior = m_prior;
    h.base.kappa = kappa;
    h.base.seed = seed;
    h.sigma2_shape = sigma2_shape;
    h.sigma2_scale = sigma2_scale;
    h.validate();
    return h;
  }

  ClusterSpec cluster() const {
    ClusterSpec c;
    c.macro_count = macro_clusters;
    c.micro_count = micro_clusters;
    c.seed = seed;
    return c;
  }
};

namespace detail {

inline std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  for (const auto& p : split(s, ',')) {
    std::string t = trim(p);
    if (!t.empty()) out.push_back(std::stoi(t));
  }
  return out;
}

inline std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s;
}

inline std::string join_strings(const std::vector<std::string>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += v[i];
  }
  return s;
}

}  // namespace detail

inline void apply_config_entry(RunConfig& c, const std::string& key, const std::string& value) {
  if (key == "dataset") c.dataset = value;
  else if (key == "merges") c.merges = value;
  else if (key == "blocklist") c.blocklist = value;
  else if (key == "tree") c.tree_file = value;
  else if (key == "out") c.out = value;
  else if (key == "model") c.model = value;
  else if (key == "eval_models") { c.eval_models.clear(); for (auto& s : split(value, ',')) c.eval_models.push_back(trim(s)); }
  else if (key == "triples") c.triples = (value == "true" || value == "1");
  else if (key == "min_both_known") c.min_both_known = std::stoi(value);
  else if (key == "min_joint_true") c.min_joint_true = std::stoi(value);
  else if (key == "min_conditional") c.min_conditional = std::stod(value);
  else if (key == "iterations") c.iterations = std::stoi(value);
  else if (key == "burn_in") c.burn_in = std::stoi(value);
  else if (key == "rejection") c.rejection = std::stoi(value);
  else if (key == "m_prior") c.m_prior = std::stod(value);
  else if (key == "kappa") c.kappa = std::stod(value);
  else if (key == "sigma2_shape") c.sigma2_shape = std::stod(value);
  else if (key == "sigma2_scale") c.sigma2_scale = std::stod(value);
  else if (key == "seed") c.seed = std::stoull(value);
  else if (key == "workers") c.workers = std::stoi(value);
  else if (key == "top") c.top = std::stoi(value);
  else if (key == "folds") c.folds = std::stoi(value);
  else if (key == "hide_fraction") c.hide_fraction = std::stod(value);
  else if (key == "k_grid") c.k_grid = detail::parse_int_list(value);
  else if (key == "macro_clusters") c.macro_clusters = std::stoul(value);
  else if (key == "micro_clusters") c.micro_clusters = std::stoul(value);
  else throw ConfigError("unknown config key '" + key + "'");
}

// Flat `key = value` config file, '#' comments.
inline RunConfig load_config(std::istream& in, RunConfig base = {}) {
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    apply_config_entry(base, trim(t.substr(0, eq)), trim(t.substr(eq + 1)));
  }
  return base;
}

inline RunConfig load_config_file(const std::string& path, RunConfig base = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  return load_config(in, base);
}

inline void write_effective_config(const RunConfig& c, std::ostream& out) {
  out << "blocklist = " << c.blocklist << '\n'
      << "burn_in = " << c.burn_in << '\n'
      << "dataset = " << c.dataset << '\n'
      << "eval_models = " << detail::join_strings(c.eval_models) << '\n'
      << "folds = " << c.folds << '\n'
      << "hide_fraction = " << c.hide_fraction << '\n'
      << "iterations = " << c.iterations << '\n'
      << "k_grid = " << detail::join_ints(c.k_grid) << '\n'
      << "kappa = " << c.kappa << '\n'
      << "m_prior = " << c.m_prior << '\n'
      << "macro_clusters = " << c.macro_clusters << '\n'
      << "merges = " << c.merges << '\n'
      << "micro_clusters = " << c.micro_clusters << '\n'
      << "min_both_known = " << c.min_both_known << '\n'
      << "min_conditional = " << c.min_conditional << '\n'
      << "min_joint_true = " << c.min_joint_true << '\n'
      << "model = " << c.model << '\n'
      << "out = " << c.out << '\n'
      << "rejection = " << c.rejection << '\n'
      << "seed = " << c.seed << '\n'
      << "sigma2_scale = " << c.sigma2_scale << '\n'
      << "sigma2_shape = " << c.sigma2_shape << '\n'
      << "top = " << c.top << '\n'
      << "tree = " << c.tree_file << '\n'
      << "triples = " << (c.triples ? "true" : "false") << '\n'
      << "workers = " << c.workers << '\n';
}

inline nlohmann::json summary_to_json(const PosteriorSummary& s, const FeatureMatrix& m) {
  nlohmann::json j;
  char buf[32];
  auto num = [&](double v) {
    std::snprintf(buf, sizeof buf, "%.6f", v);
    return std::stod(buf);  // fixed precision keeps reruns byte-identical
  };
  j["score"] = num(s.score);
  for (std::size_t i = 0; i < s.pi_mean.size(); ++i)
    j["pi" + std::to_string(i + 1) + "_mean"] = num(s.pi_mean[i]);
  j["eps_mean"] = num(s.eps_mean);
  nlohmann::json em = nlohmann::json::object();
  for (std::size_t r = 0; r < s.row_languages.size(); ++r) {
    nlohmann::json arr = nlohmann::json::array();
    for (std::size_t jcol = 0; jcol < s.pi_mean.size(); ++jcol)
      arr.push_back(num(s.error_marginals[r][jcol]));
    em[m.language(s.row_languages[r]).id] = arr;
  }
  j["error_marginals"] = em;
  nlohmann::json im = nlohmann::json::object();
  for (const auto& cell : s.imputed)
    im[m.language(cell.language).id + ":" + m.feature(cell.feature).id()] = num(cell.mean);
  j["imputed_marginals"] = im;
  if (!s.node_means.empty() || !s.z_marginals.empty()) {
    j["root_score"] = num(s.score);
    nlohmann::json nm = nlohmann::json::object();
    for (const auto& [k, v] : s.node_means) nm[k] = num(v);
    j["node_means"] = nm;
    nlohmann::json zm = nlohmann::json::object();
    for (std::size_t r = 0; r < s.z_marginals.size(); ++r)
      zm[m.language(s.row_languages[r]).id] = num(s.z_marginals[r]);
    j["z_marginals"] = zm;
  }
  return j;
}

inline void write_ranked_tsv(const std::vector<RankedImplication>& ranked, std::ostream& out) {
  out << "rank\tmodel\timplicants\timplicand\tscore\tboth_known\tjoint_true\tconditional_rate\n";
  char buf[64];
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    const auto& r = ranked[i];
    std::string imps;
    for (std::size_t k = 0; k < r.implicants.size(); ++k) {
      if (k) imps += ';';
      imps += r.implicants[k];
    }
    std::snprintf(buf, sizeof buf, "%.6f\t%d\t%d\t%.6f", r.score, r.support.both_known,
                  r.support.joint_true, r.support.conditional_rate);
    out << (i + 1) << '\t' << r.model << '\t' << imps << '\t' << r.implicand << '\t' << buf << '\n';
  }
}

inline std::vector<RankedImplication> read_ranked_tsv(std::istream& in,
                                                      const std::string& source = "<stream>") {
  std::vector<RankedImplication> out;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || trim(line).empty()) continue;  // header
    auto f = split(line, '\t');
    if (f.size() != 8)
      throw ParseError(source + ": line " + std::to_string(line_no) + ": expected 8 columns");
    RankedImplication r;
    r.model = f[1];
    for (auto& s : split(f[2], ';')) r.implicants.push_back(trim(s));
    r.implicand = trim(f[3]);
    r.score = std::stod(f[4]);
    r.support.both_known = std::stoi(f[5]);
    r.support.joint_true = std::stoi(f[6]);
    r.support.conditional_rate = std::stod(f[7]);
    out.push_back(std::move(r));
  }
  return out;
}

inline std::vector<RankedImplication> read_ranked_tsv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ranked file: " + path);
  return read_ranked_tsv(in, path);
}

namespace detail {

inline std::string sanitize_filename(const std::string& s) {
  std::string out;
  for (char c : s)
    out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '.') ? c : '_';
  return out;
}

struct LoadedInputs {
  FeatureMatrix matrix;
  Blocklist blocklist;
};

inline LoadedInputs load_inputs(const RunConfig& cfg) {
  if (cfg.dataset.empty()) throw UsageError("no dataset given");
  std::vector<MergeRule> merges;
  if (!cfg.merges.empty()) merges = parse_merge_rules_file(cfg.merges);
  LoadedInputs in{parse_dataset_file(cfg.dataset, merges), {}};
  if (!cfg.blocklist.empty()) in.blocklist = Blocklist::parse_file(cfg.blocklist);
  return in;
}

inline LanguageTree tree_for_model(Model model, const RunConfig& cfg, const FeatureMatrix& m) {
  if (!cfg.tree_file.empty()) return LanguageTree::load_file(cfg.tree_file, m.languages());
  if (model == Model::HierPhylo) return build_phylo_tree(m);
  return build_areal_tree(m, cfg.cluster());
}

}  // namespace detail

// Mine implications: enumerate, score with one model, rank, and write
// `ranked.tsv`, `summaries/*.json` and `config.effective` under cfg.out.
inline std::vector<RankedImplication> cmd_mine(const RunConfig& cfg, std::ostream& log = std::cout) {
  auto t0 = std::chrono::steady_clock::now();
  auto model = model_from_name(cfg.model);
  if (!model) throw UsageError("unknown model tag '" + cfg.model + "'");
  auto inputs = detail::load_inputs(cfg);
  const FeatureMatrix& m = inputs.matrix;

  auto cands = cfg.triples ? enumerate_triples(m, cfg.filter(), inputs.blocklist)
                           : enumerate_pairs(m, cfg.filter(), inputs.blocklist);
  log << "candidates: " << cands.size() << "\n";

  std::optional<LanguageTree> tree;
  ScoreOptions so;
  so.model = *model;
  so.hyper = cfg.hyper();
  so.workers = cfg.workers;
  if (*model == Model::HierPhylo || *model == Model::HierAreal) {
    tree = detail::tree_for_model(*model, cfg, m);
    so.tree = &*tree;
  }

  std::vector<RankedImplication> ranked;
  std::vector<PosteriorSummary> summaries;
  std::vector<std::size_t> order;
  if (*model == Model::Random) {
    summaries.resize(cands.size());
    for (std::size_t i = 0; i < cands.size(); ++i)
      summaries[i] = run_random(candidate_case(m, cands[i]), candidate_seed(cfg.seed, m, cands[i]));
    order = random_order(cands.size(), cfg.seed);
    ranked = rank_random(m, cands, cfg.seed);
  } else {
    summaries = score_candidates(m, cands, so);
    order = ranked_indices(m, cands, summaries);
    ranked = rank(m, cands, summaries, *model);
  }

  namespace fs = std::filesystem;
  fs::create_directories(fs::path(cfg.out) / "summaries");
  {
    std::ofstream out(fs::path(cfg.out) / "ranked.tsv");
    if (!out) throw ConfigError("cannot write output under " + cfg.out);
    write_ranked_tsv(ranked, out);
  }
  std::size_t n_summaries = std::min<std::size_t>(cfg.top > 0 ? cfg.top : ranked.size(), ranked.size());
  for (std::size_t i = 0; i < n_summaries; ++i) {
    const auto& r = ranked[i];
    std::string imps;
    for (const auto& s : r.implicants) imps += s + ";";
    char prefix[32];
    std::snprintf(prefix, sizeof prefix, "%04zu_", i + 1);
    std::string name = prefix + detail::sanitize_filename(imps + "_" + r.implicand) + ".json";
    std::ofstream out(fs::path(cfg.out) / "summaries" / name);
    out << summary_to_json(summaries[order[i]], m).dump(2) << '\n';
  }
  {
    std::ofstream out(fs::path(cfg.out) / "config.effective");
    write_effective_config(cfg, out);
  }
  auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  log << "wall_time_s: " << dt << "\n";
  return ranked;
}

// Hide-and-predict evaluation over several models; writes `curve.csv` and
// `config.effective` under cfg.out.
inline std::vector<AccuracyCurve> cmd_eval(const RunConfig& cfg, std::ostream& log = std::cout) {
  auto inputs = detail::load_inputs(cfg);
  EvalOptions opt;
  opt.models.clear();
  for (const auto& name : cfg.eval_models) {
    auto model = model_from_name(name);
    if (!model) throw UsageError("unknown model tag '" + name + "'");
    opt.models.push_back(*model);
  }
  opt.k_grid = cfg.k_grid;
  opt.folds = cfg.folds;
  opt.hide_fraction = cfg.hide_fraction;
  opt.filter = cfg.filter();
  opt.blocklist = inputs.blocklist;
  opt.hyper = cfg.hyper();
  opt.cluster = cfg.cluster();
  opt.workers = cfg.workers;
  auto curves = evaluate_models(inputs.matrix, opt);

  namespace fs = std::filesystem;
  fs::create_directories(cfg.out);
  std::ofstream out(fs::path(cfg.out) / "curve.csv");
  if (!out) throw ConfigError("cannot write output under " + cfg.out);
  out << "k,model,mean_accuracy,std_accuracy,folds,covered_cells\n";
  char buf[64];
  for (const auto& c : curves)
    for (std::size_t ki = 0; ki < c.k_values.size(); ++ki) {
      std::snprintf(buf, sizeof buf, "%.6f,%.6f", c.mean_accuracy[ki], c.std_accuracy[ki]);
      out << c.k_values[ki] << ',' << c.model << ',' << buf << ',' << c.folds << ','
          << c.covered_cells[ki] << '\n';
    }
  {
    std::ofstream cfg_out(fs::path(cfg.out) / "config.effective");
    write_effective_config(cfg, cfg_out);
  }
  log << "curves written: " << curves.size() << " models x " << cfg.k_grid.size() << " k values\n";
  return curves;
}

struct CompareReport {
  KendallTau tau;
  std::size_t n = 0;
};

// Kendall tau between two ranked result files over the same candidate set.
inline CompareReport cmd_compare(const std::string& path_a, const std::string& path_b,
                                 std::ostream& log = std::cout) {
  auto to_ids = [](const std::vector<RankedImplication>& v) {
    std::vector<std::string> ids;
    for (const auto& r : v) {
      std::string id;
      for (const auto& s : r.implicants) id += s + ";";
      id += "->" + r.implicand;
      ids.push_back(id);
    }
    return ids;
  };
  auto ids_a = to_ids(read_ranked_tsv_file(path_a));
  auto ids_b = to_ids(read_ranked_tsv_file(path_b));
  std::set<std::string> sa(ids_a.begin(), ids_a.end()), sb(ids_b.begin(), ids_b.end());
  if (sa != sb) {
    std::size_t diff = 0;
    for (const auto& x : sa)
      if (!sb.count(x)) ++diff;
    for (const auto& x : sb)
      if (!sa.count(x)) ++diff;
    throw ValidationError("ranked files cover different candidate sets (" +
                          std::to_string(diff) + " differing entries)");
  }
  CompareReport rep;
  rep.tau = kendall_tau(ids_a, ids_b);
  rep.n = ids_a.size();
  char buf[128];
  std::snprintf(buf, sizeof buf, "n: %zu\ntau_standard: %.4f\ntau01: %.4f\n", rep.n,
                rep.tau.tau_standard, rep.tau.tau01);
  log << buf;
  return rep;
}

// Distance profile between two trees over the same languages.
inline std::vector<DistanceProfileRow> cmd_treestats(const std::string& tree_a,
                                                     const std::string& tree_b,
                                                     const RunConfig& cfg,
                                                     std::ostream& log = std::cout) {
  auto inputs = detail::load_inputs(cfg);
  auto a = LanguageTree::load_file(tree_a, inputs.matrix.languages());
  auto b = LanguageTree::load_file(tree_b, inputs.matrix.languages());
  auto profile = tree_distance_profile(a, b);
  log << "dist_a\tsibling_dist_a\tmean_dist_b\tpairs\n";
  char buf[64];
  for (const auto& row : profile) {
    std::snprintf(buf, sizeof buf, "%d\t%d\t%.4f\t%zu", row.distance_a, row.sibling_distance_a,
                  row.mean_distance_b, row.pairs);
    log << buf << '\n';
  }
  return profile;
}

}  // namespace typomine

#endif
