// Apache License, Version 2.0, refer to LICENSE.txt

#ifndef TYPOMINE_TREES_HPP
#define TYPOMINE_TREES_HPP

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <string>
#include <unordered_map>
#include <vector>

#include "typomine/common.hpp"
#include "typomine/dataset.hpp"

namespace typomine {

struct TreeNode {
  std::string label;
  int parent = -1;
  std::vector<int> children;
  int language = -1;  // leaf: index into the matrix's language list
  int depth = 0;

  bool is_leaf() const { return language >= 0; }
};

struct TreeSummary {
  std::size_t internal_nodes = 0;
  std::size_t leaves = 0;
  std::size_t root_children = 0;
  int max_depth = 0;
};

// Rooted tree whose leaves are languages. Immutable after construction;
// distance queries are safe concurrently.
class LanguageTree {
public:
  LanguageTree() { nodes_.push_back(TreeNode{"root", -1, {}, -1, 0}); }

  int root() const { return 0; }
  std::size_t size() const { return nodes_.size(); }
  const TreeNode& node(int i) const { return nodes_[i]; }
  const std::vector<TreeNode>& nodes() const { return nodes_; }

  int add_node(int parent, std::string label, int language = -1) {
    if (parent < 0 || parent >= int(nodes_.size()))
      throw ValidationError("add_node: bad parent index");
    if (language >= 0) {
      if (leaf_of_.count(language))
        throw ValidationError("language index " + std::to_string(language) +
                              " already has a leaf");
      leaf_of_[language] = int(nodes_.size());
    }
    nodes_.push_back(TreeNode{std::move(label), parent, {}, language,
                              parent < 0 ? 0 : nodes_[parent].depth + 1});
    nodes_[parent].children.push_back(int(nodes_.size()) - 1);
    return int(nodes_.size()) - 1;
  }

  bool has_language(std::size_t lang) const { return leaf_of_.count(int(lang)) != 0; }

  int leaf_for(std::size_t lang) const {
    auto it = leaf_of_.find(int(lang));
    if (it == leaf_of_.end())
      throw ValidationError("language index " + std::to_string(lang) + " is not in the tree");
    return it->second;
  }

  const std::unordered_map<int, int>& leaf_map() const { return leaf_of_; }

  TreeSummary summary() const {
    TreeSummary s;
    for (const auto& n : nodes_) {
      if (n.is_leaf()) ++s.leaves;
      else ++s.internal_nodes;
      s.max_depth = std::max(s.max_depth, n.depth);
    }
    s.root_children = nodes_[0].children.size();
    return s;
  }

  // Edge count on the unique path between two leaf languages.
  int tree_distance(std::size_t a, std::size_t b) const {
    if (a == b) {
      leaf_for(a);  // existence check
      return 0;
    }
    int x = leaf_for(a), y = leaf_for(b);
    int d = 0;
    while (nodes_[x].depth > nodes_[y].depth) { x = nodes_[x].parent; ++d; }
    while (nodes_[y].depth > nodes_[x].depth) { y = nodes_[y].parent; ++d; }
    while (x != y) { x = nodes_[x].parent; y = nodes_[y].parent; d += 2; }
    return d;
  }

  // Indented text: one node per line, `depth<TAB>label`, leaves as
  // `depth<TAB>@language_id`. Round-trippable given the language list.
  void save(std::ostream& out, const std::vector<Language>& languages) const {
    save_rec(out, 0, languages);
  }

  void save_file(const std::string& path, const std::vector<Language>& languages) const {
    std::ofstream out(path);
    if (!out) throw ConfigError("cannot write tree file: " + path);
    save(out, languages);
  }

  static LanguageTree load(std::istream& in, const std::vector<Language>& languages,
                           const std::string& source = "<stream>") {
    std::unordered_map<std::string, int> lang_index;
    for (std::size_t i = 0; i < languages.size(); ++i) lang_index[languages[i].id] = int(i);
    LanguageTree t;
    std::vector<int> stack = {0};  // stack[d] = last node seen at depth d
    std::string line;
    int line_no = 0;
    bool saw_root = false;
    while (std::getline(in, line)) {
      ++line_no;
      if (trim(line).empty()) continue;
      auto tab = line.find('\t');
      if (tab == std::string::npos)
        throw ParseError(source + ": line " + std::to_string(line_no) + ": expected depth<TAB>label");
      int depth = std::stoi(line.substr(0, tab));
      std::string label = trim(line.substr(tab + 1));
      if (depth == 0) {
        if (saw_root)
          throw ParseError(source + ": line " + std::to_string(line_no) + ": multiple roots");
        saw_root = true;
        t.nodes_[0].label = label;
        continue;
      }
      if (!saw_root || depth > int(stack.size()))
        throw ParseError(source + ": line " + std::to_string(line_no) + ": bad depth " +
                         std::to_string(depth));
      int parent = stack[depth - 1];
      int node;
      if (!label.empty() && label[0] == '@') {
        std::string id = label.substr(1);
        auto it = lang_index.find(id);
        if (it == lang_index.end())
          throw ValidationError(source + ": line " + std::to_string(line_no) +
                                ": unknown language id '" + id + "'");
        node = t.add_node(parent, id, it->second);
      } else {
        node = t.add_node(parent, label);
      }
      stack.resize(depth);
      stack.push_back(node);
    }
    return t;
  }

  static LanguageTree load_file(const std::string& path, const std::vector<Language>& languages) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open tree file: " + path);
    return load(in, languages, path);
  }

private:
  void save_rec(std::ostream& out, int i, const std::vector<Language>& languages) const {
    const TreeNode& n = nodes_[i];
    out << n.depth << '\t';
    if (n.is_leaf()) out << '@' << languages[n.language].id;
    else out << n.label;
    out << '\n';
    for (int c : n.children) save_rec(out, c, languages);
  }

  std::vector<TreeNode> nodes_;
  std::unordered_map<int, int> leaf_of_;  // language index -> node index
};

// Phylogenetic tree: root -> family -> subfamily -> genus -> language, with
// missing path segments padded by repeating the previous label so every leaf
// sits at depth 4.
inline LanguageTree build_phylo_tree(const FeatureMatrix& m) {
  std::string missing;
  for (const auto& lang : m.languages())
    if (lang.family_path.empty() || lang.family_path[0].empty()) {
      if (!missing.empty()) missing += ", ";
      missing += lang.id;
    }
  if (!missing.empty())
    throw ValidationError("languages with empty family: " + missing);

  LanguageTree t;
  std::map<std::vector<std::string>, int> node_of_path;
  for (std::size_t l = 0; l < m.n_languages(); ++l) {
    std::vector<std::string> path = m.language(l).family_path;
    while (path.size() < 3) path.push_back(path.back());
    int cur = t.root();
    std::vector<std::string> prefix;
    for (const auto& seg : path) {
      prefix.push_back(seg);
      auto it = node_of_path.find(prefix);
      if (it == node_of_path.end()) {
        cur = t.add_node(cur, seg);
        node_of_path.emplace(prefix, cur);
      } else {
        cur = it->second;
      }
    }
    t.add_node(cur, m.language(l).id, int(l));
  }
  return t;
}

struct ClusterSpec {
  std::size_t macro_count = 6;
  std::size_t micro_count = 25;
  std::uint64_t seed = 0;
  std::size_t max_iterations = 100;
};

namespace detail {

struct Point2 {
  double x, y;
};

inline double sqdist(Point2 a, Point2 b) {
  double dx = a.x - b.x, dy = a.y - b.y;
  return dx * dx + dy * dy;
}

// Lloyd's k-means with farthest-point seeding. Deterministic given rng state;
// ties broken by lowest index. Empty clusters are reseeded with the point
// farthest from its assigned centroid.
inline std::vector<int> kmeans(const std::vector<Point2>& pts, std::size_t k, Rng& rng,
                               std::size_t max_iter) {
  const std::size_t n = pts.size();
  if (k > n) throw ValidationError("kmeans: k exceeds point count");
  std::vector<Point2> centroids;
  std::uniform_int_distribution<std::size_t> first(0, n - 1);
  centroids.push_back(pts[first(rng)]);
  std::vector<double> nearest(n);
  while (centroids.size() < k) {
    std::size_t far = 0;
    double best = -1;
    for (std::size_t i = 0; i < n; ++i) {
      double d = std::numeric_limits<double>::max();
      for (const auto& c : centroids) d = std::min(d, sqdist(pts[i], c));
      if (d > best) { best = d; far = i; }
    }
    centroids.push_back(pts[far]);
  }
  std::vector<int> assign(n, 0);
  for (std::size_t iter = 0; iter < max_iter; ++iter) {
    bool changed = false;
    for (std::size_t i = 0; i < n; ++i) {
      int bestc = 0;
      double bd = std::numeric_limits<double>::max();
      for (std::size_t c = 0; c < k; ++c) {
        double d = sqdist(pts[i], centroids[c]);
        if (d < bd) { bd = d; bestc = int(c); }
      }
      if (assign[i] != bestc) { assign[i] = bestc; changed = true; }
    }
    std::vector<Point2> sums(k, Point2{0, 0});
    std::vector<std::size_t> counts(k, 0);
    for (std::size_t i = 0; i < n; ++i) {
      sums[assign[i]].x += pts[i].x;
      sums[assign[i]].y += pts[i].y;
      ++counts[assign[i]];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) {
        // reseed with the point farthest from its current centroid
        std::size_t far = 0;
        double best = -1;
        for (std::size_t i = 0; i < n; ++i) {
          double d = sqdist(pts[i], centroids[assign[i]]);
          if (d > best) { best = d; far = i; }
        }
        centroids[c] = pts[far];
        changed = true;
      } else {
        centroids[c] = Point2{sums[c].x / counts[c], sums[c].y / counts[c]};
      }
    }
    if (!changed) break;
  }
  return assign;
}

}  // namespace detail

// Areal tree: k-means over (latitude, longitude) into macro clusters, then
// each macro cluster into min(micro_count, size) micro clusters. Languages
// without coordinates are excluded. Longitude wraparound is ignored.
inline LanguageTree build_areal_tree(const FeatureMatrix& m, const ClusterSpec& spec) {
  if (spec.macro_count < 1 || spec.micro_count < 1)
    throw ValidationError("cluster counts must be >= 1");
  std::vector<std::size_t> located;
  std::vector<detail::Point2> pts;
  for (std::size_t l = 0; l < m.n_languages(); ++l)
    if (m.language(l).has_coordinates()) {
      located.push_back(l);
      pts.push_back(detail::Point2{*m.language(l).latitude, *m.language(l).longitude});
    }
  if (located.size() < spec.macro_count)
    throw ValidationError("need at least " + std::to_string(spec.macro_count) +
                          " located languages, have " + std::to_string(located.size()) +
                          " (short by " + std::to_string(spec.macro_count - located.size()) + ")");
  Rng rng = make_rng(spec.seed);
  auto macro = detail::kmeans(pts, spec.macro_count, rng, spec.max_iterations);

  LanguageTree t;
  for (std::size_t c = 0; c < spec.macro_count; ++c) {
    std::vector<std::size_t> member;  // index into located/pts
    for (std::size_t i = 0; i < located.size(); ++i)
      if (macro[i] == int(c)) member.push_back(i);
    if (member.empty()) continue;
    int macro_node = t.add_node(t.root(), "macro" + std::to_string(c));
    std::vector<detail::Point2> sub;
    for (auto i : member) sub.push_back(pts[i]);
    std::size_t k2 = std::min(spec.micro_count, member.size());
    auto micro = detail::kmeans(sub, k2, rng, spec.max_iterations);
    for (std::size_t mc = 0; mc < k2; ++mc) {
      int micro_node = -1;
      for (std::size_t i = 0; i < member.size(); ++i) {
        if (micro[i] != int(mc)) continue;
        if (micro_node < 0)
          micro_node = t.add_node(macro_node,
                                  "macro" + std::to_string(c) + ".micro" + std::to_string(mc));
        std::size_t l = located[member[i]];
        t.add_node(micro_node, m.language(l).id, int(l));
      }
    }
  }
  return t;
}

}  // namespace typomine

#endif
