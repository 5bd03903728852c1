// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_SYNTHGEN_HPP
#define TYPOMINE_SYNTHGEN_HPP

#include <cmath>
#include <cstdio>
#include <string>
#include <vector>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"
#include "typomine/numerics.hpp"
#include "typomine/trees.hpp"

namespace typomine {

struct PlantedImplication {
  std::size_t f1 = 0;
  std::size_t f2 = 0;
  int scope = -1;  // -1 = global, otherwise family index
};

struct SynthSpec {
  std::size_t languages = 100;
  std::size_t families = 1;  // balanced round-robin assignment
  std::size_t features = 10;
  std::vector<PlantedImplication> implications;
  std::vector<double> pi;  // per-feature Bernoulli rate; missing entries default to 0.5
  double noise_mean = 0.0;
  double kappa = 10.0;  // concentration of per-language rates around noise_mean
  double missing_fraction = 0.0;
  std::uint64_t seed = 0;
  double strength = 4.0;  // hierarchical planting strength (+/-)
  double sigma2 = 0.25;   // tree edge variance for the hierarchical generator

  double pi_of(std::size_t f) const { return f < pi.size() ? pi[f] : 0.5; }

  void validate() const {
    if (languages == 0 || features == 0) throw ValidationError("empty synthetic spec");
    if (families == 0 || families > languages)
      throw ValidationError("families must be in [1, languages]");
    if (missing_fraction < 0 || missing_fraction >= 1)
      throw ValidationError("missing_fraction must be in [0,1)");
    if (noise_mean < 0 || noise_mean >= 0.5)
      throw ValidationError("noise_mean must be in [0, 0.5)");
    for (const auto& p : implications) {
      if (p.f1 >= features || p.f2 >= features)
        throw ValidationError("planted implication references feature out of range");
      if (p.f1 == p.f2) throw ValidationError("planted implication must relate two features");
      if (p.scope >= int(families)) throw ValidationError("planted scope family out of range");
    }
  }
};

struct SynthTruth {
  std::vector<std::vector<std::uint8_t>> true_values;  // [language][feature], pre-noise
  std::vector<std::vector<std::uint8_t>> noise_flips;  // [language][feature]
  std::vector<double> eps_n;                           // per language
  std::vector<int> family_of;                          // per language
  // hierarchical generator only
  std::vector<std::vector<std::uint8_t>> z;            // [implication][language]
  std::vector<std::vector<double>> node_strength;      // [implication][root, fam0, fam1, ...]
};

namespace detail {

inline FeatureMatrix assemble_synth_matrix(const SynthSpec& spec, SynthTruth& truth, Rng& rng) {
  std::vector<BinaryFeature> feats;
  for (std::size_t f = 0; f < spec.features; ++f) {
    char name[16];
    std::snprintf(name, sizeof name, "F%02zu", f);
    feats.push_back(BinaryFeature{name, "true", f});
  }
  std::vector<Language> langs;
  // families get well-separated coordinate blobs so the same fixtures can
  // exercise areal clustering
  std::uniform_real_distribution<double> jitter(-2.0, 2.0);
  for (std::size_t l = 0; l < spec.languages; ++l) {
    int fam = int(l % spec.families);
    Language lang;
    char id[16];
    std::snprintf(id, sizeof id, "L%04zu", l);
    lang.id = id;
    lang.name = lang.id;
    lang.family_path = {"Fam" + std::to_string(fam)};
    double base_lat = -60.0 + 120.0 * double(fam) / double(spec.families);
    double base_lon = -150.0 + 300.0 * double(fam) / double(spec.families);
    lang.latitude = base_lat + jitter(rng);
    lang.longitude = base_lon + jitter(rng);
    langs.push_back(std::move(lang));
    truth.family_of.push_back(fam);
  }
  std::uniform_real_distribution<double> unif(0, 1);
  std::vector<Ternary> cells(spec.languages * spec.features, Ternary::Unknown);
  truth.noise_flips.assign(spec.languages, std::vector<std::uint8_t>(spec.features, 0));
  truth.eps_n.resize(spec.languages);
  for (std::size_t l = 0; l < spec.languages; ++l) {
    double en = 0;
    if (spec.noise_mean > 0)
      en = sample_beta(spec.kappa * spec.noise_mean, spec.kappa * (1 - spec.noise_mean), rng);
    truth.eps_n[l] = en;
    for (std::size_t f = 0; f < spec.features; ++f) {
      int v = truth.true_values[l][f];
      if (en > 0 && unif(rng) < en) {
        v ^= 1;
        truth.noise_flips[l][f] = 1;
      }
      if (unif(rng) < spec.missing_fraction) continue;
      cells[l * spec.features + f] = v ? Ternary::True : Ternary::False;
    }
  }
  return FeatureMatrix(std::move(langs), std::move(feats), std::move(cells));
}

}  // namespace detail

// Forward-sample the flat generative process: independent Bernoulli features,
// planted implications enforced (f2 set true wherever f1 true, cascaded to a
// fixpoint), then noise flips and missingness.
inline std::pair<FeatureMatrix, SynthTruth> generate_flat(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(stable_hash(spec.seed, {"synth-flat"}));
  SynthTruth truth;
  std::uniform_real_distribution<double> unif(0, 1);
  truth.true_values.assign(spec.languages, std::vector<std::uint8_t>(spec.features, 0));
  for (std::size_t l = 0; l < spec.languages; ++l) {
    for (std::size_t f = 0; f < spec.features; ++f)
      truth.true_values[l][f] = unif(rng) < spec.pi_of(f) ? 1 : 0;
    bool changed = true;
    while (changed) {
      changed = false;
      for (const auto& p : spec.implications) {
        if (truth.true_values[l][p.f1] && !truth.true_values[l][p.f2]) {
          truth.true_values[l][p.f2] = 1;
          changed = true;
        }
      }
    }
  }
  FeatureMatrix m = detail::assemble_synth_matrix(spec, truth, rng);
  return {std::move(m), std::move(truth)};
}

// Forward-sample the hierarchical process over a two-level tree (root ->
// families -> languages). Per implication: family strengths follow the root
// by a Gaussian step, except scoped plantings which pin the scoped family to
// +strength and the others to -strength; leaf scores follow their family and
// obedience bits are Bernoulli(sigmoid(score)).
inline std::pair<FeatureMatrix, SynthTruth> generate_hier(const SynthSpec& spec) {
  spec.validate();
  Rng rng = make_rng(stable_hash(spec.seed, {"synth-hier"}));
  SynthTruth truth;
  std::uniform_real_distribution<double> unif(0, 1);
  double sd = std::sqrt(spec.sigma2);
  std::normal_distribution<double> step(0.0, sd);

  truth.true_values.assign(spec.languages, std::vector<std::uint8_t>(spec.features, 0));
  for (std::size_t l = 0; l < spec.languages; ++l)
    for (std::size_t f = 0; f < spec.features; ++f)
      truth.true_values[l][f] = unif(rng) < spec.pi_of(f) ? 1 : 0;

  for (const auto& p : spec.implications) {
    std::vector<double> strengths(1 + spec.families, 0.0);
    bool global = p.scope < 0;
    strengths[0] = global ? spec.strength : 0.0;
    for (std::size_t fam = 0; fam < spec.families; ++fam) {
      if (global) strengths[1 + fam] = strengths[0] + step(rng);
      else strengths[1 + fam] = (int(fam) == p.scope) ? spec.strength : -spec.strength;
    }
    std::vector<std::uint8_t> z(spec.languages, 0);
    for (std::size_t l = 0; l < spec.languages; ++l) {
      double u = strengths[1 + (l % spec.families)] + step(rng);
      z[l] = unif(rng) < sigmoid(u) ? 1 : 0;
      if (z[l] && truth.true_values[l][p.f1]) truth.true_values[l][p.f2] = 1;
    }
    truth.z.push_back(std::move(z));
    truth.node_strength.push_back(std::move(strengths));
  }
  FeatureMatrix m = detail::assemble_synth_matrix(spec, truth, rng);
  return {std::move(m), std::move(truth)};
}

// Dataset CSV in the parse_dataset format: raw two-valued features with
// cells "true"/"false" and unknowns left empty.
inline void write_dataset_csv(const FeatureMatrix& m, std::ostream& out) {
  out << "id,name,latitude,longitude,family,subfamily,genus";
  for (const auto& f : m.features()) out << ',' << f.raw_name;
  out << '\n';
  char buf[40];
  auto coord = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
  };
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    const Language& lang = m.language(l);
    out << lang.id << ',' << lang.name << ',' << coord(lang.latitude) << ','
        << coord(lang.longitude);
    for (int k = 0; k < 3; ++k)
      out << ',' << (k < int(lang.family_path.size()) ? lang.family_path[k] : "");
    for (std::size_t j = 0; j < m.n_features(); ++j) {
      Ternary t = m.cell(l, j);
      out << ',' << (t == Ternary::True ? "true" : t == Ternary::False ? "false" : "");
    }
    out << '\n';
  }
}

}  // namespace typomine

#endif
