// Apache License, Version 2.0, refer to LICENSE.txt
//
// Command-line driver: mine implications, run the hide-and-predict
// evaluation, compare ranked lists, report tree-distance profiles, and
// generate synthetic datasets.

#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "typomine/cli.hpp"
#include "typomine/synthgen.hpp"

namespace {

using namespace typomine;

void add_common_flags(CLI::App* cmd, RunConfig& cfg, std::string& config_path) {
  cmd->add_option("--config", config_path, "flat key = value config file");
  cmd->add_option("--dataset", cfg.dataset, "dataset CSV");
  cmd->add_option("--merges", cfg.merges, "merge rules file");
  cmd->add_option("--blocklist", cfg.blocklist, "banned implications file");
  cmd->add_option("--tree", cfg.tree_file, "hierarchy file (overrides built trees)");
  cmd->add_option("--iterations", cfg.iterations, "Gibbs iterations per candidate");
  cmd->add_option("--burn-in", cfg.burn_in, "burn-in iterations to drop");
  cmd->add_option("--rejection", cfg.rejection, "rejection sampler attempts");
  cmd->add_option("--seed", cfg.seed, "global RNG seed");
  cmd->add_option("--workers", cfg.workers, "parallel workers");
  cmd->add_option("--out", cfg.out, "output directory");
  cmd->add_option("--filters", [&cfg](const std::vector<std::string>& vals) {
    auto parts = split(vals.at(0), ',');
    if (parts.size() != 3) throw CLI::ValidationError("--filters expects a,b,c");
    cfg.min_both_known = std::stoi(trim(parts[0]));
    cfg.min_joint_true = std::stoi(trim(parts[1]));
    cfg.min_conditional = std::stod(trim(parts[2]));
    return true;
  }, "filter thresholds: min_both_known,min_joint_true,min_conditional");
}

// flags override config-file values: reparse flags after loading the file
RunConfig effective_config(CLI::App* cmd, const RunConfig& flag_cfg, const std::string& config_path) {
  if (config_path.empty()) return flag_cfg;
  RunConfig cfg = load_config_file(config_path);
  // re-apply any flag the user actually passed
  RunConfig merged = cfg;
  auto passed = [&](const std::string& name) { return cmd->count(name) > 0; };
  if (passed("--dataset")) merged.dataset = flag_cfg.dataset;
  if (passed("--merges")) merged.merges = flag_cfg.merges;
  if (passed("--blocklist")) merged.blocklist = flag_cfg.blocklist;
  if (passed("--tree")) merged.tree_file = flag_cfg.tree_file;
  if (passed("--iterations")) merged.iterations = flag_cfg.iterations;
  if (passed("--burn-in")) merged.burn_in = flag_cfg.burn_in;
  if (passed("--rejection")) merged.rejection = flag_cfg.rejection;
  if (passed("--seed")) merged.seed = flag_cfg.seed;
  if (passed("--workers")) merged.workers = flag_cfg.workers;
  if (passed("--out")) merged.out = flag_cfg.out;
  if (passed("--filters")) {
    merged.min_both_known = flag_cfg.min_both_known;
    merged.min_joint_true = flag_cfg.min_joint_true;
    merged.min_conditional = flag_cfg.min_conditional;
  }
  return merged;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"typomine: mining universal implications from typological databases"};
  app.require_subcommand(1);

  RunConfig cfg;
  std::string config_path;

  auto* mine = app.add_subcommand("mine", "score and rank candidate implications");
  add_common_flags(mine, cfg, config_path);
  mine->add_option("--model", cfg.model, "flat | hier-phylo | hier-areal | random");
  mine->add_option("--top", cfg.top, "summaries to write for the top ranks");
  mine->add_flag("--triples", cfg.triples, "search conjunctions of two implicants");

  auto* eval = app.add_subcommand("eval", "hide-and-predict accuracy curves");
  add_common_flags(eval, cfg, config_path);
  std::string models_csv, kgrid_csv;
  eval->add_option("--models", models_csv, "comma-separated model tags");
  eval->add_option("--folds", cfg.folds, "number of folds");
  eval->add_option("--k-grid", kgrid_csv, "comma-separated k values");
  eval->add_option("--hide-fraction", cfg.hide_fraction, "fraction of known cells to hide");

  auto* compare = app.add_subcommand("compare", "Kendall tau between two ranked.tsv files");
  std::string ranked_a, ranked_b;
  compare->add_option("ranked_a", ranked_a, "first ranked.tsv")->required();
  compare->add_option("ranked_b", ranked_b, "second ranked.tsv")->required();

  auto* treestats = app.add_subcommand("treestats", "distance profile between two trees");
  std::string tree_a, tree_b;
  add_common_flags(treestats, cfg, config_path);
  treestats->add_option("tree_a", tree_a, "first tree file")->required();
  treestats->add_option("tree_b", tree_b, "second tree file")->required();

  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  typomine::SynthSpec spec;
  std::string synth_out = "synth.csv", synth_truth, synth_kind = "flat", plants_csv;
  synth->add_option("--languages", spec.languages);
  synth->add_option("--families", spec.families);
  synth->add_option("--features", spec.features);
  synth->add_option("--noise", spec.noise_mean);
  synth->add_option("--missing", spec.missing_fraction);
  synth->add_option("--seed", spec.seed);
  synth->add_option("--kind", synth_kind, "flat | hier");
  synth->add_option("--plant", plants_csv, "planted implications f1>f2[@family], comma-separated");
  synth->add_option("--out", synth_out, "dataset CSV path");
  synth->add_option("--truth", synth_truth, "ground-truth JSON sidecar path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  using namespace typomine;
  try {
    if (mine->parsed()) {
      RunConfig rc = effective_config(mine, cfg, config_path);
      if (mine->count("--model")) rc.model = cfg.model;
      if (mine->count("--top")) rc.top = cfg.top;
      if (mine->count("--triples")) rc.triples = cfg.triples;
      cmd_mine(rc);
    } else if (eval->parsed()) {
      RunConfig rc = effective_config(eval, cfg, config_path);
      if (eval->count("--models")) {
        rc.eval_models.clear();
        for (auto& s : split(models_csv, ',')) rc.eval_models.push_back(trim(s));
      }
      if (eval->count("--folds")) rc.folds = cfg.folds;
      if (eval->count("--k-grid")) rc.k_grid = typomine::detail::parse_int_list(kgrid_csv);
      if (eval->count("--hide-fraction")) rc.hide_fraction = cfg.hide_fraction;
      cmd_eval(rc);
    } else if (compare->parsed()) {
      cmd_compare(ranked_a, ranked_b);
    } else if (treestats->parsed()) {
      RunConfig rc = effective_config(treestats, cfg, config_path);
      cmd_treestats(tree_a, tree_b, rc);
    } else if (synth->parsed()) {
      if (!plants_csv.empty()) {
        for (auto& p : split(plants_csv, ',')) {
          auto gt = p.find('>');
          if (gt == std::string::npos) throw UsageError("--plant expects f1>f2[@family]");
          PlantedImplication pl;
          pl.f1 = std::stoul(trim(p.substr(0, gt)));
          std::string rest = trim(p.substr(gt + 1));
          auto at = rest.find('@');
          if (at == std::string::npos) {
            pl.f2 = std::stoul(rest);
          } else {
            pl.f2 = std::stoul(rest.substr(0, at));
            pl.scope = std::stoi(rest.substr(at + 1));
          }
          spec.implications.push_back(pl);
        }
      }
      auto [matrix, truth] = synth_kind == "hier" ? generate_hier(spec) : generate_flat(spec);
      std::ofstream out(synth_out);
      if (!out) throw ConfigError("cannot write: " + synth_out);
      write_dataset_csv(matrix, out);
      if (!synth_truth.empty()) {
        nlohmann::json j;
        j["families"] = truth.family_of;
        j["eps_n"] = truth.eps_n;
        j["true_values"] = truth.true_values;
        j["noise_flips"] = truth.noise_flips;
        if (!truth.z.empty()) j["z"] = truth.z;
        if (!truth.node_strength.empty()) j["node_strength"] = truth.node_strength;
        std::ofstream tout(synth_truth);
        tout << j.dump(2) << '\n';
      }
      std::cout << "languages: " << matrix.n_languages() << " features: " << matrix.n_features()
                << "\n";
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  } catch (const NumericError& e) {
    std::cerr << "numeric error: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
