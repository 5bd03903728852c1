// Apache License, Version 2.0, refer to LICENSE.txt

#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <sstream>

#include "typomine/hier_model.hpp"
#include "typomine/synthgen.hpp"

using namespace typomine;

namespace {

// Tiny dense Gaussian-elimination solve for the closed-form tree posterior.
std::vector<double> solve_linear(std::vector<std::vector<double>> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t p = i;
    for (std::size_t r = i + 1; r < n; ++r)
      if (std::abs(a[r][i]) > std::abs(a[p][i])) p = r;
    std::swap(a[i], a[p]);
    std::swap(b[i], b[p]);
    for (std::size_t r = i + 1; r < n; ++r) {
      double f = a[r][i] / a[i][i];
      for (std::size_t c = i; c < n; ++c) a[r][c] -= f * a[i][c];
      b[r] -= f * b[i];
    }
  }
  std::vector<double> x(n);
  for (std::size_t i = n; i-- > 0;) {
    double s = b[i];
    for (std::size_t c = i + 1; c < n; ++c) s -= a[i][c] * x[c];
    x[i] = s / a[i][i];
  }
  return x;
}

// Matrix with three languages in one known column so a pair case exists.
FeatureMatrix three_language_matrix() {
  std::istringstream in(
      "id,name,latitude,longitude,family,subfamily,genus,f,g\n"
      "a,a,0,0,A,,,1,1\n"
      "b,b,0,1,A,,,1,1\n"
      "c,c,5,5,B,,,1,1\n"
      "d,d,5,6,B,,,2,2\n");  // fourth language keeps both features two-valued
  return parse_dataset(in, {});
}

GenCase three_row_case() {
  GenCase c;
  c.n_ante = 1;
  c.features = {0, 2, 0};
  c.rows = {GenRow{0, {Ternary::True, Ternary::True, Ternary::Unknown}},
            GenRow{1, {Ternary::True, Ternary::True, Ternary::Unknown}},
            GenRow{2, {Ternary::True, Ternary::True, Ternary::Unknown}}};
  return c;
}

// root -> {A -> {a, b}, B -> {c}}
LanguageTree three_leaf_tree() {
  LanguageTree t;
  int na = t.add_node(t.root(), "A");
  int nb = t.add_node(t.root(), "B");
  t.add_node(na, "a", 0);
  t.add_node(na, "b", 1);
  t.add_node(nb, "c", 2);
  return t;
}

}  // namespace

TEST_CASE("internal-node Gibbs matches the closed-form Gaussian posterior") {
  HierHyper h;
  h.base.seed = 99;
  h.frozen_sigma2 = 0.7;
  const double s2 = *h.frozen_sigma2;
  HierChain chain(three_row_case(), three_leaf_tree(), h);
  REQUIRE(chain.n_internal() == 3);  // root, A, B

  const double u0 = 1.3, u1 = -0.4, u2 = 2.1;
  chain.set_u(0, u0);
  chain.set_u(1, u1);
  chain.set_u(2, u2);
  chain.set_sigma2(s2);

  // precision (in units of 1/sigma2): root has the zero-mean pseudo-edge plus
  // edges to A and B; A carries two leaf edges; B carries one
  std::vector<std::vector<double>> lam = {{3 / s2, -1 / s2, -1 / s2},
                                          {-1 / s2, 3 / s2, 0},
                                          {-1 / s2, 0, 2 / s2}};
  std::vector<double> rhs = {0, (u0 + u1) / s2, u2 / s2};
  auto expect = solve_linear(lam, rhs);

  // run the internal-node block of the sweep only, leaves held fixed
  const int iters = 20000, burn = 2000;
  std::vector<double> sum(3, 0);
  for (int it = 0; it < iters; ++it) {
    for (std::size_t i = chain.n_internal(); i-- > 0;) chain.sample_internal(i);
    if (it < burn) continue;
    for (std::size_t i = 0; i < 3; ++i) sum[i] += chain.m_node(i);
  }
  for (std::size_t i = 0; i < 3; ++i) {
    INFO("node " << i << " closed form " << expect[i]);
    REQUIRE(sum[i] / (iters - burn) == Catch::Approx(expect[i]).margin(0.05));
  }
}

TEST_CASE("leaf rejection sampler matches quadrature truth (KS)") {
  HierHyper h;
  h.base.seed = 7;
  h.frozen_sigma2 = 1.0;
  HierChain chain(three_row_case(), three_leaf_tree(), h);
  const double m_par = 0.8, s2 = 1.0;
  chain.set_sigma2(s2);
  chain.set_m_node(1, m_par);  // parent of rows 0 and 1
  chain.set_zbit(0, 1);

  const int n = 10000;
  std::vector<double> draws;
  draws.reserve(n);
  for (int i = 0; i < n; ++i) {
    chain.sample_leaf(0);
    draws.push_back(chain.u(0));
  }
  std::sort(draws.begin(), draws.end());

  // quadrature CDF of p(u) proportional to N(u; m_par, s2) * sigmoid(u)
  const int grid = 20000;
  const double lo = m_par - 8, hi = m_par + 8, dx = (hi - lo) / grid;
  std::vector<double> cdf(grid + 1, 0);
  auto dens = [&](double u) {
    return std::exp(-(u - m_par) * (u - m_par) / (2 * s2)) * sigmoid(u);
  };
  for (int i = 1; i <= grid; ++i)
    cdf[i] = cdf[i - 1] + 0.5 * dx * (dens(lo + (i - 1) * dx) + dens(lo + i * dx));
  for (auto& v : cdf) v /= cdf[grid];

  double ks = 0;
  for (int i = 0; i < n; ++i) {
    double u = draws[i];
    int cell = std::clamp(int((u - lo) / dx), 0, grid);
    double f = cdf[cell];
    ks = std::max(ks, std::abs(f - double(i + 1) / n));
    ks = std::max(ks, std::abs(f - double(i) / n));
  }
  REQUIRE(ks < 0.05);
  // disobedient leaf: acceptance 1 - sigmoid(u) shifts mass left
  chain.set_zbit(0, 0);
  double s = 0;
  for (int i = 0; i < n; ++i) {
    chain.sample_leaf(0);
    s += chain.u(0);
  }
  REQUIRE(s / n < m_par - 0.2);
}

TEST_CASE("tree variance update matches the conjugate inverse-gamma") {
  HierHyper h;
  h.base.seed = 55;
  h.sigma2_shape = 3.0;
  h.sigma2_scale = 2.0;
  HierChain chain(three_row_case(), three_leaf_tree(), h);
  chain.set_m_node(0, 0.5);
  chain.set_m_node(1, 1.0);
  chain.set_m_node(2, -0.5);
  chain.set_u(0, 1.5);
  chain.set_u(1, 0.5);
  chain.set_u(2, 0.0);
  // residuals: root 0.5; A-root 0.5; B-root -1.0; leaves 0.5, -0.5, 0.5
  double ssr = 0.25 + 0.25 + 1.0 + 0.25 + 0.25 + 0.25;
  double edges = 6;
  double expect_mean = (h.sigma2_scale + ssr / 2) / (h.sigma2_shape + edges / 2 - 1);
  const int n = 200000;
  double s = 0;
  for (int i = 0; i < n; ++i) {
    chain.set_m_node(0, 0.5);  // sample_sigma2 reads but does not change these
    chain.sample_sigma2();
    s += chain.sigma2();
  }
  REQUIRE(s / n == Catch::Approx(expect_mean).epsilon(0.02));
}

TEST_CASE("empty subtrees marginalize out: pruning leaves results unchanged") {
  auto m = three_language_matrix();
  GenCase c = three_row_case();  // rows for languages 0..2 only
  LanguageTree minimal = three_leaf_tree();
  LanguageTree padded = three_leaf_tree();
  int extra = padded.add_node(padded.root(), "Unused");
  int deeper = padded.add_node(extra, "Deeper");
  padded.add_node(deeper, "d", 3);  // whole subtree carries no case language

  HierHyper h;
  h.base.iterations = 400;
  h.base.burn_in = 100;
  h.base.seed = 17;
  auto s1 = run_hier(c, minimal, h);
  auto s2 = run_hier(c, padded, h);
  REQUIRE(s1.score == s2.score);
  REQUIRE(s1.z_marginals == s2.z_marginals);
  REQUIRE(s1.eps_mean == s2.eps_mean);
  REQUIRE(s1.node_means.size() == s2.node_means.size());
}

TEST_CASE("languages missing from the tree are reported") {
  GenCase c = three_row_case();
  LanguageTree t;
  int na = t.add_node(t.root(), "A");
  t.add_node(na, "a", 0);
  t.add_node(na, "b", 1);  // language 2 has no leaf
  HierHyper h;
  REQUIRE_THROWS_WITH(run_hier(c, t, h), Catch::Matchers::ContainsSubstring("2"));
}

TEST_CASE("zero-row case gives the prior predictive score") {
  GenCase c;
  c.n_ante = 1;
  LanguageTree t = three_leaf_tree();
  HierHyper h;
  h.base.iterations = 20000;
  h.base.burn_in = 1000;
  h.base.seed = 31;
  auto s = run_hier(c, t, h);
  // root is a zero-mean Gaussian, so E[sigmoid(root)] = 1/2 by symmetry
  REQUIRE(s.score == Catch::Approx(0.5).margin(0.03));
  REQUIRE(s.node_means.size() == 1);  // only the root survives pruning
}

TEST_CASE("hier summary carries node means and z marginals") {
  GenCase c = three_row_case();
  HierHyper h;
  h.base.iterations = 600;
  h.base.burn_in = 100;
  h.base.seed = 2;
  auto s = run_hier(c, three_leaf_tree(), h);
  REQUIRE(s.z_marginals.size() == 3);
  REQUIRE(s.node_means.size() == 3);
  REQUIRE(s.node_means.count("n0:root") == 1);
  for (double z : s.z_marginals) {
    REQUIRE(z >= 0.0);
    REQUIRE(z <= 1.0);
  }
  // consistently obeyed implication: root strength goes positive
  REQUIRE(s.score > 0.5);
}

TEST_CASE("family-confounded data: obedient family follows, other resists") {
  // family A languages obey f1 -> f2; family B languages contradict it
  GenCase c;
  c.n_ante = 1;
  c.features = {0, 1, 0};
  LanguageTree t;
  int na = t.add_node(t.root(), "A");
  int nb = t.add_node(t.root(), "B");
  for (int i = 0; i < 8; ++i) {
    t.add_node(i < 4 ? na : nb, "L" + std::to_string(i), i);
    bool obeys = i < 4;
    c.rows.push_back(GenRow{std::uint32_t(i),
                            {Ternary::True, obeys ? Ternary::True : Ternary::False,
                             Ternary::Unknown}});
  }
  HierHyper h;
  h.base.iterations = 4000;
  h.base.burn_in = 800;
  h.base.seed = 23;
  auto s = run_hier(c, t, h);
  double mean_a = 0, mean_b = 0;
  for (int i = 0; i < 4; ++i) mean_a += s.z_marginals[i] / 4;
  for (int i = 4; i < 8; ++i) mean_b += s.z_marginals[i] / 4;
  REQUIRE(mean_a > mean_b + 0.2);
  auto node_a = s.node_means.at("n1:A");
  auto node_b = s.node_means.at("n2:B");
  REQUIRE(node_a > node_b);
}

TEST_CASE("hier chains are deterministic in the seed") {
  GenCase c = three_row_case();
  c.rows[1].v[1] = Ternary::Unknown;
  HierHyper h;
  h.base.iterations = 300;
  h.base.burn_in = 50;
  h.base.seed = 101;
  auto s1 = run_hier(c, three_leaf_tree(), h);
  auto s2 = run_hier(c, three_leaf_tree(), h);
  REQUIRE(s1.score == s2.score);
  REQUIRE(s1.node_means == s2.node_means);
  REQUIRE(s1.imputed.size() == s2.imputed.size());
  REQUIRE(s1.imputed[0].mean == s2.imputed[0].mean);
  h.base.seed = 102;
  auto s3 = run_hier(c, three_leaf_tree(), h);
  REQUIRE(s1.score != s3.score);
}

TEST_CASE("hier hyper validation") {
  HierHyper h;
  h.sigma2_shape = 0;
  REQUIRE_THROWS_AS(h.validate(), ConfigError);
  h = HierHyper{};
  h.frozen_sigma2 = -1.0;
  REQUIRE_THROWS_AS(h.validate(), ConfigError);
}
