// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>

#include <sstream>

#include "typomine/synthgen.hpp"
#include "typomine/trees.hpp"

using namespace typomine;

namespace {

const char* kFixtureCsv =
    "id,name,latitude,longitude,family,subfamily,genus,order,case,tone\n"
    "eng,English,52.0,0.0,Indo-European,Germanic,West Germanic,SVO,none,no\n"
    "hin,Hindi,25.0,77.0,Indo-European,Indo-Iranian,Indic,SOV,rich,no\n"
    "cmn,Mandarin,40.0,116.5,Sino-Tibetan,Chinese,Chinese,SVO,none,yes\n"
    "rus,Russian,56.0,38.0,Indo-European,Slavic,East Slavic,SVO,rich,no\n"
    "tkb,\"Tukang Besi\",-5.5,123.5,Austronesian,Malayo-Polynesian,Celebic,?,none,no\n"
    "zul,Zulu,-25.0,30.0,Niger-Congo,Bantoid,Bantu,SVO,,yes\n";

FeatureMatrix fixture() {
  std::istringstream in(kFixtureCsv);
  return parse_dataset(in, {});
}

}  // namespace

TEST_CASE("phylo tree: every leaf at depth 4, distances match by hand") {
  auto m = fixture();
  auto t = build_phylo_tree(m);
  auto s = t.summary();
  REQUIRE(s.leaves == 6);
  REQUIRE(s.max_depth == 4);
  REQUIRE(s.root_children == 4);  // four families
  for (const auto& [lang, leaf] : t.leaf_map()) REQUIRE(t.node(leaf).depth == 4);

  // English and Russian share only the family node (depth 1): 3 + 3 edges
  REQUIRE(t.tree_distance(0, 3) == 6);
  // English and Mandarin meet at the root: 4 + 4 edges
  REQUIRE(t.tree_distance(0, 2) == 8);
  REQUIRE(t.tree_distance(0, 0) == 0);
}

TEST_CASE("phylo tree pads short family paths by repeating the last label") {
  std::istringstream in(
      "id,name,latitude,longitude,family,subfamily,genus,f\n"
      "a,a,,,OnlyFam,,,1\n"
      "b,b,,,OnlyFam,,,2\n");
  auto m = parse_dataset(in, {});
  auto t = build_phylo_tree(m);
  // root -> OnlyFam -> OnlyFam -> OnlyFam -> {a, b}: siblings at distance 2
  REQUIRE(t.summary().max_depth == 4);
  REQUIRE(t.tree_distance(0, 1) == 2);
}

TEST_CASE("phylo tree rejects languages without a family") {
  std::istringstream in(
      "id,name,latitude,longitude,family,subfamily,genus,f\n"
      "a,a,,,X,,,1\n"
      "b,b,,,,,,2\n");
  auto m = parse_dataset(in, {});
  REQUIRE_THROWS_WITH(build_phylo_tree(m), Catch::Matchers::ContainsSubstring("b"));
}

TEST_CASE("tree distance is a metric on leaves") {
  auto m = fixture();
  auto t = build_phylo_tree(m);
  for (std::size_t a = 0; a < 6; ++a) {
    REQUIRE(t.tree_distance(a, a) == 0);
    for (std::size_t b = 0; b < 6; ++b) {
      REQUIRE(t.tree_distance(a, b) == t.tree_distance(b, a));
      for (std::size_t c = 0; c < 6; ++c)
        REQUIRE(t.tree_distance(a, c) <= t.tree_distance(a, b) + t.tree_distance(b, c));
    }
  }
}

TEST_CASE("tree text format round trips") {
  auto m = fixture();
  auto t = build_phylo_tree(m);
  std::ostringstream out;
  t.save(out, m.languages());
  std::istringstream in(out.str());
  auto t2 = LanguageTree::load(in, m.languages());
  REQUIRE(t2.size() == t.size());
  for (std::size_t a = 0; a < 6; ++a)
    for (std::size_t b = 0; b < 6; ++b) REQUIRE(t2.tree_distance(a, b) == t.tree_distance(a, b));
  std::ostringstream out2;
  t2.save(out2, m.languages());
  REQUIRE(out2.str() == out.str());
}

TEST_CASE("tree load validates structure and language ids") {
  auto m = fixture();
  std::istringstream unknown_lang("0\troot\n1\t@nope\n");
  REQUIRE_THROWS_AS(LanguageTree::load(unknown_lang, m.languages()), ValidationError);
  std::istringstream bad_depth("0\troot\n3\tdeep\n");
  REQUIRE_THROWS_AS(LanguageTree::load(bad_depth, m.languages()), ParseError);
  std::istringstream no_tab("0 root\n");
  REQUIRE_THROWS_AS(LanguageTree::load(no_tab, m.languages()), ParseError);
  std::istringstream two_roots("0\ta\n0\tb\n");
  REQUIRE_THROWS_AS(LanguageTree::load(two_roots, m.languages()), ParseError);
}

TEST_CASE("kmeans recovers well-separated blobs deterministically") {
  std::vector<detail::Point2> pts;
  // three tight blobs around (0,0), (10,0), (0,10)
  for (int i = 0; i < 5; ++i) {
    pts.push_back({0.0 + 0.1 * i, 0.0});
    pts.push_back({10.0 + 0.1 * i, 0.0});
    pts.push_back({0.0, 10.0 + 0.1 * i});
  }
  Rng rng = make_rng(1);
  auto a1 = detail::kmeans(pts, 3, rng, 100);
  Rng rng2 = make_rng(1);
  auto a2 = detail::kmeans(pts, 3, rng2, 100);
  REQUIRE(a1 == a2);  // deterministic given the seed
  // each blob is a single cluster
  for (int blob = 0; blob < 3; ++blob)
    for (int i = 1; i < 5; ++i) REQUIRE(a1[blob + 3 * i] == a1[blob]);
  REQUIRE(a1[0] != a1[1]);
  REQUIRE(a1[0] != a1[2]);
  REQUIRE(a1[1] != a1[2]);
}

TEST_CASE("kmeans k equal to n gives every point its own cluster") {
  std::vector<detail::Point2> pts = {{0, 0}, {5, 0}, {0, 5}, {5, 5}};
  Rng rng = make_rng(3);
  auto a = detail::kmeans(pts, 4, rng, 100);
  std::set<int> distinct(a.begin(), a.end());
  REQUIRE(distinct.size() == 4);
  Rng rng2 = make_rng(3);
  REQUIRE_THROWS_AS(detail::kmeans(pts, 5, rng2, 100), ValidationError);
}

TEST_CASE("areal tree: two-level clustering over coordinates") {
  SynthSpec spec;
  spec.languages = 90;
  spec.families = 6;  // six separated coordinate blobs
  spec.features = 3;
  spec.seed = 11;
  auto [m, truth] = generate_flat(spec);
  ClusterSpec cs;
  cs.macro_count = 6;
  cs.micro_count = 4;
  cs.seed = 5;
  auto t = build_areal_tree(m, cs);
  auto s = t.summary();
  REQUIRE(s.leaves == 90);
  REQUIRE(s.max_depth == 3);  // root -> macro -> micro -> leaf
  REQUIRE(s.root_children == 6);
  // same blob -> same macro cluster: distance at most 4 (via the macro node)
  REQUIRE(t.tree_distance(0, 6) <= 4);   // languages 0 and 6 share family 0
  REQUIRE(t.tree_distance(0, 1) == 6);   // different blobs meet at the root
}

TEST_CASE("areal tree reports the located-language deficit") {
  std::istringstream in(
      "id,name,latitude,longitude,family,subfamily,genus,f\n"
      "a,a,1,1,X,,,1\n"
      "b,b,2,2,X,,,2\n"
      "c,c,,,X,,,1\n");
  auto m = parse_dataset(in, {});
  ClusterSpec cs;
  cs.macro_count = 6;
  REQUIRE_THROWS_WITH(build_areal_tree(m, cs), Catch::Matchers::ContainsSubstring("short by 4"));
}

TEST_CASE("areal tree is deterministic in its seed") {
  SynthSpec spec;
  spec.languages = 40;
  spec.families = 4;
  spec.features = 2;
  spec.seed = 2;
  auto [m, truth] = generate_flat(spec);
  ClusterSpec cs;
  cs.macro_count = 4;
  cs.micro_count = 3;
  cs.seed = 9;
  auto t1 = build_areal_tree(m, cs);
  auto t2 = build_areal_tree(m, cs);
  std::ostringstream o1, o2;
  t1.save(o1, m.languages());
  t2.save(o2, m.languages());
  REQUIRE(o1.str() == o2.str());
}
