// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_DATASET_HPP
#define TYPOMINE_DATASET_HPP

#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "typomine/common.hpp"

namespace typomine {

struct Language {
  std::string id;
  std::string name;
  std::optional<double> latitude;   // degrees, [-90, 90]
  std::optional<double> longitude;  // degrees, [-180, 180]
  std::vector<std::string> family_path;  // family, subfamily, genus (0-3 entries)

  bool has_coordinates() const { return latitude.has_value() && longitude.has_value(); }
};

// One column of the binarized matrix: raw feature "raw_name" taking "value".
struct BinaryFeature {
  std::string raw_name;
  std::string value;
  std::size_t raw_index = 0;  // index of the raw feature this came from

  std::string id() const { return raw_name + "=" + value; }
};

struct MergeRule {
  std::string feature;
  std::set<std::string> source_values;
  std::string target_value;
};

// Sparse ternary language x binary-feature matrix. Immutable after
// construction; safe to share across threads.
class FeatureMatrix {
public:
  FeatureMatrix() = default;
  FeatureMatrix(std::vector<Language> languages, std::vector<BinaryFeature> features,
                std::vector<Ternary> cells)
      : languages_(std::move(languages)), features_(std::move(features)), cells_(std::move(cells)) {
    if (cells_.size() != languages_.size() * features_.size())
      throw ValidationError("FeatureMatrix: cell count does not match dimensions");
  }

  std::size_t n_languages() const { return languages_.size(); }
  std::size_t n_features() const { return features_.size(); }
  const std::vector<Language>& languages() const { return languages_; }
  const std::vector<BinaryFeature>& features() const { return features_; }
  const Language& language(std::size_t i) const { return languages_[i]; }
  const BinaryFeature& feature(std::size_t j) const { return features_[j]; }

  Ternary cell(std::size_t lang, std::size_t feat) const {
    return cells_[lang * features_.size() + feat];
  }

  std::size_t known_cell_count() const {
    std::size_t n = 0;
    for (Ternary t : cells_)
      if (known(t)) ++n;
    return n;
  }

  std::vector<std::pair<std::uint32_t, std::uint32_t>> known_cells() const {
    std::vector<std::pair<std::uint32_t, std::uint32_t>> out;
    for (std::size_t l = 0; l < n_languages(); ++l)
      for (std::size_t f = 0; f < n_features(); ++f)
        if (known(cell(l, f))) out.emplace_back(std::uint32_t(l), std::uint32_t(f));
    return out;
  }

  // Copy with the given cells forced to Unknown. The copy carries no path
  // back to the hidden truth values.
  FeatureMatrix masked(const std::vector<std::pair<std::uint32_t, std::uint32_t>>& hidden) const {
    std::vector<Ternary> c = cells_;
    for (auto [l, f] : hidden) c[std::size_t(l) * features_.size() + f] = Ternary::Unknown;
    return FeatureMatrix(languages_, features_, std::move(c));
  }

  std::optional<std::size_t> feature_index(const std::string& feature_id) const {
    for (std::size_t j = 0; j < features_.size(); ++j)
      if (features_[j].id() == feature_id) return j;
    return std::nullopt;
  }

private:
  std::vector<Language> languages_;
  std::vector<BinaryFeature> features_;
  std::vector<Ternary> cells_;
};

// 2 x N view (with per-row language index) for one ordered feature pair.
// Rows where both values are unknown are never present.
struct PairRow {
  std::uint32_t language;
  Ternary v1;
  Ternary v2;
};

struct PairCase {
  std::size_t f1_index = 0;
  std::size_t f2_index = 0;
  std::vector<PairRow> rows;
};

struct TripleRow {
  std::uint32_t language;
  Ternary va;
  Ternary vb;
  Ternary vc;
};

// Conjunction case: (fa and fb) implies fc.
struct TripleCase {
  std::size_t fa_index = 0;
  std::size_t fb_index = 0;
  std::size_t fc_index = 0;
  std::vector<TripleRow> rows;
};

namespace detail {

struct RawTable {
  std::vector<Language> languages;
  std::vector<std::string> feature_names;           // in file column order
  std::vector<std::vector<std::string>> cells;      // [language][feature], "" = unknown
};

// Minimal CSV field splitter with double-quote support.
inline std::vector<std::string> csv_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

inline std::string csv_escape(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += "\"\"";
    else out += c;
  }
  out += '"';
  return out;
}

inline bool unknown_marker(const std::string& s) { return s.empty() || s == "?"; }

inline std::optional<double> parse_coord(const std::string& s, double lo, double hi,
                                         const std::string& what, int line_no) {
  if (unknown_marker(s)) return std::nullopt;
  char* end = nullptr;
  double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw ParseError("line " + std::to_string(line_no) + ": bad " + what + " '" + s + "'");
  if (v < lo || v > hi)
    throw ParseError("line " + std::to_string(line_no) + ": " + what + " out of range: " + s);
  return v;
}

inline void validate_merge_rules(const std::vector<MergeRule>& rules,
                                 const std::vector<std::string>& feature_names) {
  std::map<std::string, std::set<std::string>> seen;  // feature -> union of sources
  for (const auto& r : rules) {
    if (r.source_values.empty())
      throw ValidationError("merge rule for '" + r.feature + "' has empty source set");
    if (std::find(feature_names.begin(), feature_names.end(), r.feature) == feature_names.end())
      throw ValidationError("merge rule names unknown feature '" + r.feature + "'");
    auto& u = seen[r.feature];
    for (const auto& v : r.source_values) {
      if (!u.insert(v).second)
        throw ValidationError("merge rules for feature '" + r.feature +
                              "' have overlapping source value '" + v + "'");
    }
  }
}

}  // namespace detail

// Replace every raw value listed in a rule's source set by the rule's target.
// Values not mentioned pass through; unknown cells stay unknown.
inline std::vector<std::vector<std::string>> apply_merges(
    std::vector<std::vector<std::string>> cells, const std::vector<std::string>& feature_names,
    const std::vector<MergeRule>& rules) {
  detail::validate_merge_rules(rules, feature_names);
  for (const auto& r : rules) {
    std::size_t col =
        std::find(feature_names.begin(), feature_names.end(), r.feature) - feature_names.begin();
    for (auto& row : cells) {
      std::string& v = row[col];
      if (!detail::unknown_marker(v) && r.source_values.count(v)) v = r.target_value;
    }
  }
  return cells;
}

// One-vs-rest binarization. Raw features keep file order; values within a raw
// feature are ordered lexicographically. Raw features with fewer than two
// distinct known values are dropped.
inline FeatureMatrix binarize(const detail::RawTable& raw) {
  std::vector<BinaryFeature> feats;
  std::vector<std::vector<std::string>> values_of;  // per raw feature, sorted distinct values
  values_of.resize(raw.feature_names.size());
  for (std::size_t f = 0; f < raw.feature_names.size(); ++f) {
    std::set<std::string> vals;
    for (const auto& row : raw.cells)
      if (!detail::unknown_marker(row[f])) vals.insert(row[f]);
    if (vals.size() < 2) continue;  // constant feature carries no implication
    values_of[f].assign(vals.begin(), vals.end());
    for (const auto& v : values_of[f]) feats.push_back(BinaryFeature{raw.feature_names[f], v, f});
  }
  std::vector<Ternary> cells(raw.languages.size() * feats.size(), Ternary::Unknown);
  for (std::size_t l = 0; l < raw.languages.size(); ++l) {
    for (std::size_t j = 0; j < feats.size(); ++j) {
      const std::string& v = raw.cells[l][feats[j].raw_index];
      if (detail::unknown_marker(v)) continue;
      cells[l * feats.size() + j] = (v == feats[j].value) ? Ternary::True : Ternary::False;
    }
  }
  return FeatureMatrix(raw.languages, std::move(feats), std::move(cells));
}

// Dataset CSV: header `id,name,latitude,longitude,family,subfamily,genus`
// then one column per raw feature; unknown cells are empty or "?".
inline FeatureMatrix parse_dataset(std::istream& in, const std::vector<MergeRule>& merge_rules,
                                   const std::string& source = "<stream>") {
  static const char* kLeading[7] = {"id", "name", "latitude", "longitude",
                                    "family", "subfamily", "genus"};
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": line 1: missing header");
  auto header = detail::csv_fields(line);
  if (header.size() < 7) throw ParseError(source + ": line 1: malformed header, expected at least 7 columns");
  for (int i = 0; i < 7; ++i)
    if (trim(header[i]) != kLeading[i])
      throw ParseError(source + ": line 1: malformed header, column " + std::to_string(i + 1) +
                       " must be '" + kLeading[i] + "'");
  detail::RawTable raw;
  for (std::size_t i = 7; i < header.size(); ++i) raw.feature_names.push_back(trim(header[i]));

  std::unordered_set<std::string> ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = detail::csv_fields(line);
    if (f.size() != header.size())
      throw ParseError(source + ": line " + std::to_string(line_no) + ": expected " +
                       std::to_string(header.size()) + " fields, got " + std::to_string(f.size()));
    Language lang;
    lang.id = trim(f[0]);
    if (lang.id.empty())
      throw ValidationError(source + ": line " + std::to_string(line_no) + ": empty language id");
    if (!ids.insert(lang.id).second)
      throw ValidationError(source + ": line " + std::to_string(line_no) +
                            ": duplicate language id '" + lang.id + "'");
    lang.name = f[1];
    lang.latitude = detail::parse_coord(f[2], -90, 90, "latitude", line_no);
    lang.longitude = detail::parse_coord(f[3], -180, 180, "longitude", line_no);
    if (lang.latitude.has_value() != lang.longitude.has_value())
      throw ValidationError(source + ": line " + std::to_string(line_no) +
                            ": language '" + lang.id + "' has only one coordinate");
    for (int k = 4; k < 7; ++k) {
      std::string seg = trim(f[k]);
      if (!seg.empty()) lang.family_path.push_back(seg);
      else break;  // path is a prefix: family, subfamily, genus
    }
    raw.languages.push_back(std::move(lang));
    std::vector<std::string> row;
    for (std::size_t k = 7; k < f.size(); ++k) {
      std::string v = trim(f[k]);
      row.push_back(detail::unknown_marker(v) ? std::string() : v);
    }
    raw.cells.push_back(std::move(row));
  }
  raw.cells = apply_merges(std::move(raw.cells), raw.feature_names, merge_rules);
  return binarize(raw);
}

inline FeatureMatrix parse_dataset_file(const std::string& path,
                                        const std::vector<MergeRule>& merge_rules = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open dataset file: " + path);
  return parse_dataset(in, merge_rules, path);
}

// Merge rules file: `feature<TAB>v1|v2|...<TAB>target`, '#' comments.
inline std::vector<MergeRule> parse_merge_rules(std::istream& in) {
  std::vector<MergeRule> rules;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    auto parts = split(line, '\t');
    if (parts.size() != 3)
      throw ParseError("merge rules line " + std::to_string(line_no) +
                       ": expected 3 tab-separated fields");
    MergeRule r;
    r.feature = trim(parts[0]);
    for (const auto& v : split(parts[1], '|')) {
      std::string s = trim(v);
      if (!s.empty()) r.source_values.insert(s);
    }
    r.target_value = trim(parts[2]);
    rules.push_back(std::move(r));
  }
  return rules;
}

inline std::vector<MergeRule> parse_merge_rules_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open merge rules file: " + path);
  return parse_merge_rules(in);
}

// Ternary matrix format: same leading columns as the dataset CSV, then one
// column per binary feature (named "raw=value") with cells 1/0/?.
inline void save_ternary(const FeatureMatrix& m, std::ostream& out) {
  out << "id,name,latitude,longitude,family,subfamily,genus";
  for (const auto& f : m.features()) out << ',' << detail::csv_escape(f.id());
  out << '\n';
  char buf[40];
  auto coord = [&](const std::optional<double>& v) -> std::string {
    if (!v) return "";
    std::snprintf(buf, sizeof buf, "%.17g", *v);
    return buf;
  };
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    const Language& lang = m.language(l);
    out << detail::csv_escape(lang.id) << ',' << detail::csv_escape(lang.name) << ','
        << coord(lang.latitude) << ',' << coord(lang.longitude);
    for (int k = 0; k < 3; ++k)
      out << ',' << (k < int(lang.family_path.size()) ? detail::csv_escape(lang.family_path[k]) : "");
    for (std::size_t j = 0; j < m.n_features(); ++j) {
      Ternary t = m.cell(l, j);
      out << ',' << (t == Ternary::True ? "1" : t == Ternary::False ? "0" : "?");
    }
    out << '\n';
  }
}

inline void save_ternary_file(const FeatureMatrix& m, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write: " + path);
  save_ternary(m, out);
}

inline FeatureMatrix load_ternary(std::istream& in, const std::string& source = "<stream>") {
  std::string line;
  if (!std::getline(in, line)) throw ParseError(source + ": line 1: missing header");
  auto header = detail::csv_fields(line);
  if (header.size() < 7) throw ParseError(source + ": line 1: malformed header");
  std::vector<BinaryFeature> feats;
  std::map<std::string, std::size_t> raw_index;
  for (std::size_t i = 7; i < header.size(); ++i) {
    std::string id = header[i];
    auto eq = id.find('=');
    if (eq == std::string::npos)
      throw ParseError(source + ": column '" + id + "' is not of the form raw=value");
    BinaryFeature f;
    f.raw_name = id.substr(0, eq);
    f.value = id.substr(eq + 1);
    auto it = raw_index.find(f.raw_name);
    if (it == raw_index.end()) {
      f.raw_index = raw_index.size();
      raw_index.emplace(f.raw_name, f.raw_index);
    } else {
      f.raw_index = it->second;
    }
    feats.push_back(std::move(f));
  }
  std::vector<Language> langs;
  std::vector<Ternary> cells;
  std::unordered_set<std::string> ids;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (trim(line).empty()) continue;
    auto f = detail::csv_fields(line);
    if (f.size() != header.size())
      throw ParseError(source + ": line " + std::to_string(line_no) + ": wrong field count");
    Language lang;
    lang.id = trim(f[0]);
    if (!ids.insert(lang.id).second)
      throw ValidationError(source + ": duplicate language id '" + lang.id + "'");
    lang.name = f[1];
    lang.latitude = detail::parse_coord(f[2], -90, 90, "latitude", line_no);
    lang.longitude = detail::parse_coord(f[3], -180, 180, "longitude", line_no);
    for (int k = 4; k < 7; ++k) {
      std::string seg = trim(f[k]);
      if (!seg.empty()) lang.family_path.push_back(seg);
      else break;
    }
    langs.push_back(std::move(lang));
    for (std::size_t j = 7; j < f.size(); ++j) {
      std::string v = trim(f[j]);
      if (v == "1") cells.push_back(Ternary::True);
      else if (v == "0") cells.push_back(Ternary::False);
      else if (v == "?" || v.empty()) cells.push_back(Ternary::Unknown);
      else throw ParseError(source + ": line " + std::to_string(line_no) + ": bad cell '" + v + "'");
    }
  }
  return FeatureMatrix(std::move(langs), std::move(feats), std::move(cells));
}

inline FeatureMatrix load_ternary_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open ternary matrix file: " + path);
  return load_ternary(in, path);
}

// Ordered pair view. Rows where both features are unknown are dropped; rows
// with exactly one unknown are retained.
inline PairCase pair_view(const FeatureMatrix& m, std::size_t f1, std::size_t f2) {
  if (f1 == f2) throw ValidationError("pair_view: f1 and f2 must differ");
  if (m.feature(f1).raw_index == m.feature(f2).raw_index)
    throw ValidationError("pair_view: '" + m.feature(f1).id() + "' and '" + m.feature(f2).id() +
                          "' derive from the same raw feature (tautological complements)");
  PairCase pc;
  pc.f1_index = f1;
  pc.f2_index = f2;
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    Ternary a = m.cell(l, f1), b = m.cell(l, f2);
    if (!known(a) && !known(b)) continue;
    pc.rows.push_back(PairRow{std::uint32_t(l), a, b});
  }
  return pc;
}

// Conjunction view for (fa and fb) implies fc; rows with all three unknown
// are dropped.
inline TripleCase triple_view(const FeatureMatrix& m, std::size_t fa, std::size_t fb,
                              std::size_t fc) {
  std::size_t ra = m.feature(fa).raw_index, rb = m.feature(fb).raw_index,
              rc = m.feature(fc).raw_index;
  if (fa == fb || fa == fc || fb == fc || ra == rb || ra == rc || rb == rc)
    throw ValidationError("triple_view: features must come from three distinct raw features");
  TripleCase tc;
  tc.fa_index = fa;
  tc.fb_index = fb;
  tc.fc_index = fc;
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    Ternary a = m.cell(l, fa), b = m.cell(l, fb), c = m.cell(l, fc);
    if (!known(a) && !known(b) && !known(c)) continue;
    tc.rows.push_back(TripleRow{std::uint32_t(l), a, b, c});
  }
  return tc;
}

}  // namespace typomine

#endif
