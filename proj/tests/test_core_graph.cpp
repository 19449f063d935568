#include <gtest/gtest.h>

#include <set>

#include "rcm/graph.hpp"
#include "rcm/lattice.hpp"
#include "support.hpp"

using namespace rcm;
using rcm::fixture::random_edge_field;
using rcm::fixture::random_env;
using rcm::fixture::random_vertex_field;
using rcm::fixture::rel_err;

namespace {

std::size_t vtx(const TorusLattice& lat, std::initializer_list<std::int64_t> c) {
  const Point p(c);
  return lat.index(p);
}

}  // namespace

TEST(Lattice, CountsAndNeighbors) {
  for (int d : {2, 3}) {
    const TorusLattice lat(d, 5);
    EXPECT_EQ(lat.num_vertices(), static_cast<std::size_t>(std::pow(5, d)));
    EXPECT_EQ(lat.num_edges(), lat.num_vertices() * d);
    for (std::size_t v = 0; v < lat.num_vertices(); ++v) {
      std::set<std::size_t> nb;
      for (int i = 0; i < d; ++i) {
        nb.insert(lat.neighbor(v, i, +1));
        nb.insert(lat.neighbor(v, i, -1));
        EXPECT_EQ(lat.neighbor(lat.neighbor(v, i, +1), i, -1), v);
      }
      EXPECT_EQ(nb.size(), static_cast<std::size_t>(2 * d));
      EXPECT_EQ(nb.count(v), 0u);
    }
  }
}

TEST(Lattice, LastCoordinateFastest) {
  const TorusLattice lat(3, 4);
  EXPECT_EQ(vtx(lat, {0, 0, 1}), 1u);
  EXPECT_EQ(vtx(lat, {0, 1, 0}), 4u);
  EXPECT_EQ(vtx(lat, {1, 0, 0}), 16u);
  EXPECT_EQ(vtx(lat, {-1, 0, 0}), 48u);
  EXPECT_EQ(lat.coords(27), (Point{1, 2, 3}));
}

TEST(Lattice, RejectsDegenerateShapes) {
  EXPECT_THROW(TorusLattice(1, 5), InvalidArgument);
  EXPECT_THROW(TorusLattice(2, 2), InvalidArgument);
}

TEST(Lattice, CanonicalEdges) {
  const TorusLattice lat(2, 3);
  const std::size_t e = lat.edge(0, 0);
  EXPECT_EQ(lat.edge_tail(e), 0u);
  EXPECT_EQ(lat.edge_head(e), vtx(lat, {1, 0}));
  const std::size_t wrap = lat.edge(vtx(lat, {2, 0}), 0);
  EXPECT_EQ(lat.edge_head(wrap), 0u);
}

TEST(Ball, MembershipMatchesBruteForce) {
  const TorusLattice lat(2, 11);
  Xoshiro256 rng(3);
  for (int t = 0; t < 20; ++t) {
    const std::size_t c = rng() % lat.num_vertices();
    const double r = static_cast<double>(rng() % 8);
    const auto set = ball_vertices(lat, Ball{c, r});
    std::vector<std::size_t> brute;
    for (std::size_t v = 0; v < lat.num_vertices(); ++v) {
      if (static_cast<double>(lat.distance(c, v)) <= r) brute.push_back(v);
    }
    EXPECT_EQ(set, brute);
  }
}

TEST(Ball, EmbeddedBallHasLatticeVolume) {
  // |B(0, r)| in Z^2 is 2r^2 + 2r + 1.
  const TorusLattice lat(2, 21);
  for (std::int64_t r = 0; r <= 10; ++r) {
    const Ball b{0, static_cast<double>(r)};
    ASSERT_TRUE(b.embeds_in(lat));
    EXPECT_EQ(ball_vertices(lat, b).size(), static_cast<std::size_t>(2 * r * r + 2 * r + 1));
  }
  EXPECT_FALSE((Ball{0, 11.0}.embeds_in(lat)));
}

TEST(Gradient, ConstantIsZero) {
  const TorusLattice lat(2, 5);
  const VertexField f(lat, 7.0);
  const EdgeField g = gradient(f);
  for (double v : g.values()) EXPECT_EQ(v, 0.0);
}

TEST(Gradient, IndicatorIncrements) {
  const TorusLattice lat(2, 3);
  const auto g = gradient(indicator(lat, 0));
  EXPECT_EQ(g[lat.edge(0, 0)], -1.0);
  EXPECT_EQ(g[lat.edge(vtx(lat, {2, 0}), 0)], 1.0);
  EXPECT_EQ(g[lat.edge(vtx(lat, {0, 2}), 1)], 1.0);
  double abs_sum = 0.0;
  for (double v : g.values()) abs_sum += std::abs(v);
  EXPECT_EQ(abs_sum, 4.0);
}

TEST(Gradient, AdjointOfDivergence) {
  Xoshiro256 rng(11);
  for (int t = 0; t < 100; ++t) {
    const TorusLattice lat(2 + t % 2, 3 + t % 5);
    const auto f = random_vertex_field(lat, rng);
    const auto F = random_edge_field(lat, rng);
    const auto gf = gradient(f);
    const auto dF = divergence(F);
    double scale = 0.0;
    for (std::size_t e = 0; e < gf.size(); ++e) scale += std::abs(gf[e] * F[e]);
    EXPECT_LE(rel_err(inner(gf, F), inner(f, dF), scale), 1e-12);
  }
}

TEST(Divergence, SingleEdge) {
  const TorusLattice lat(2, 3);
  EdgeField F(lat, 0.0);
  F[lat.edge(0, 0)] = 1.0;
  const auto div = divergence(F);
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    const double want = x == 0 ? -1.0 : (x == vtx(lat, {1, 0}) ? 1.0 : 0.0);
    EXPECT_EQ(div[x], want);
  }
}

TEST(Divergence, SumsToZero) {
  Xoshiro256 rng(5);
  const TorusLattice lat(3, 6);
  for (int t = 0; t < 10; ++t) {
    const auto dF = divergence(random_edge_field(lat, rng));
    const auto dG = divergence(gradient(random_vertex_field(lat, rng)));
    double s = 0.0, g = 0.0;
    for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
      s += dF[x];
      g += dG[x];
    }
    EXPECT_LE(std::abs(s), 1e-10);
    EXPECT_LE(std::abs(g), 1e-10);
  }
  EXPECT_EQ(max_abs(divergence(EdgeField(lat, 0.0))), 0.0);
}

TEST(Laplacian, UnitConductanceIndicator) {
  const TorusLattice lat(2, 3);
  const Environment env(EdgeField(lat, 1.0));
  const auto lf = laplacian(env, indicator(lat, 0));
  EXPECT_EQ(lf[0], -4.0);
  EXPECT_EQ(lf[vtx(lat, {1, 0})], 1.0);
  EXPECT_EQ(lf[vtx(lat, {1, 1})], 0.0);
}

TEST(Laplacian, TwoFormulasAgree) {
  Xoshiro256 rng(21);
  for (int t = 0; t < 100; ++t) {
    const Environment env = random_env(2 + t % 2, 3 + t % 4, 100 + t);
    const auto f = random_vertex_field(env.lattice(), rng);
    const auto a = laplacian(env, f);
    const auto b = laplacian_divergence_form(env, f);
    for (std::size_t x = 0; x < a.size(); ++x) {
      const double scale = env.mu()[x] * (std::abs(f[x]) + max_abs(f));
      ASSERT_LE(rel_err(a[x], b[x], scale), 1e-12);
    }
  }
}

TEST(Laplacian, AnnihilatesConstants) {
  const Environment env = random_env(3, 5, 9);
  const auto lf = laplacian(env, VertexField(env.lattice(), -3.25));
  EXPECT_LE(max_abs(lf), 1e-14 * 3.25 * 12);
}

TEST(DirichletForm, IndicatorEnergy) {
  const TorusLattice lat(2, 3);
  const Environment env(EdgeField(lat, 1.0));
  const auto f = indicator(lat, 0);
  EXPECT_EQ(dirichlet_form(env, f, f), 4.0);
}

TEST(DirichletForm, SymmetricNonnegativeAndIntegrationByParts) {
  Xoshiro256 rng(31);
  for (int t = 0; t < 100; ++t) {
    const Environment env = random_env(2, 4 + t % 3, 200 + t);
    const auto f = random_vertex_field(env.lattice(), rng);
    const auto g = random_vertex_field(env.lattice(), rng);
    const double fg = dirichlet_form(env, f, g);
    const double gf = dirichlet_form(env, g, f);
    const double scale = std::sqrt(dirichlet_form(env, f, f) * dirichlet_form(env, g, g));
    EXPECT_LE(rel_err(fg, gf, scale), 1e-12);
    EXPECT_GE(dirichlet_form(env, f, f), 0.0);
    const auto lg = laplacian(env, g);
    const double ibp = -inner(f, lg);
    EXPECT_LE(rel_err(fg, ibp, scale), 1e-12);
    EXPECT_LE(rel_err(fg, inner(gradient(f), weight(env, gradient(g))), scale), 1e-12);
  }
}

TEST(DirichletForm, HalfNeighborSum) {
  Xoshiro256 rng(8);
  const Environment env = random_env(3, 4, 3);
  const TorusLattice& lat = env.lattice();
  const auto f = random_vertex_field(lat, rng);
  double s = 0.0;
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    for (int i = 0; i < lat.dim(); ++i) {
      for (int sign : {-1, 1}) {
        const double diff = f[lat.neighbor(x, i, sign)] - f[x];
        s += env.conductance(x, i, sign) * diff * diff;
      }
    }
  }
  const double e = dirichlet_form(env, f, f);
  EXPECT_LE(rel_err(e, 0.5 * s, e), 1e-12);
}

TEST(WeightedDirichletForm, Limits) {
  Xoshiro256 rng(4);
  const Environment env = random_env(2, 6, 1);
  const TorusLattice& lat = env.lattice();
  const auto u = random_vertex_field(lat, rng);
  const double full = dirichlet_form(env, u, u);
  EXPECT_LE(rel_err(weighted_dirichlet_form(env, VertexField(lat, 1.0), u), full, full), 1e-14);
  EXPECT_EQ(weighted_dirichlet_form(env, VertexField(lat, 0.0), u), 0.0);
  for (int t = 0; t < 100; ++t) {
    const auto eta = make_vertex_field(lat, [&](std::size_t) { return rng.uniform(); });
    const auto v = random_vertex_field(lat, rng);
    EXPECT_LE(weighted_dirichlet_form(env, eta, v), dirichlet_form(env, v, v) * (1 + 1e-14));
  }
  EXPECT_THROW(weighted_dirichlet_form(env, VertexField(lat, 1.5), u), InvalidArgument);
  EXPECT_THROW(weighted_dirichlet_form(env, VertexField(lat, -0.1), u), InvalidArgument);
}

TEST(WeightedDirichletForm, EdgeWeightFormula) {
  Xoshiro256 rng(14);
  const Environment env = random_env(2, 5, 2);
  const TorusLattice& lat = env.lattice();
  const auto eta = make_vertex_field(lat, [&](std::size_t) { return rng.uniform(); });
  const auto u = random_vertex_field(lat, rng);
  const auto gu = gradient(u);
  double s = 0.0;
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    const double a = eta[lat.edge_tail(e)], b = eta[lat.edge_head(e)];
    s += 0.5 * (a * a + b * b) * env.conductance(e) * gu[e] * gu[e];
  }
  EXPECT_LE(rel_err(weighted_dirichlet_form(env, eta, u), s, s), 1e-13);
}

TEST(Norms, ConstantAndIndicator) {
  const TorusLattice lat(2, 7);
  const VertexField c(lat, -2.5);
  for (double p : {1.0, 2.0, 3.5, kInf}) {
    EXPECT_NEAR(norm_avg(c, p, Ball{3, 2.0}), 2.5, 1e-14);
  }
  std::vector<std::size_t> all(lat.num_vertices());
  for (std::size_t v = 0; v < all.size(); ++v) all[v] = v;
  EXPECT_NEAR(norm_avg(indicator(lat, 5), 1.0, all), 1.0 / 49.0, 1e-16);
  EXPECT_THROW(norm_avg(c, 2.0, std::span<const std::size_t>{}), InvalidArgument);
}

TEST(Norms, HolderMonotone) {
  Xoshiro256 rng(41);
  const TorusLattice lat(2, 9);
  const Ball b{40, 4.0};
  const double ps[] = {1.0, 1.5, 2.0, 4.0, 8.0, kInf};
  for (int t = 0; t < 100; ++t) {
    const auto f = random_vertex_field(lat, rng);
    for (std::size_t k = 0; k + 1 < std::size(ps); ++k) {
      EXPECT_LE(norm_avg(f, ps[k], b), norm_avg(f, ps[k + 1], b) * (1 + 1e-14));
    }
  }
}

TEST(Norms, MuWeighted) {
  const TorusLattice lat(2, 5);
  const Environment env(EdgeField(lat, 0.5));
  const VertexField f(lat, 3.0);
  // mu = 2 in every vertex, so the weighted p-norm is 2^{1/p} |f|.
  EXPECT_NEAR(norm_avg_mu(env, f, 2.0, Ball{0, 2.0}), std::sqrt(2.0) * 3.0, 1e-13);
}

TEST(EdgeProducts, Conventions) {
  Xoshiro256 rng(2);
  const TorusLattice lat(2, 3);
  const auto F = random_edge_field(lat, rng);
  const auto ones = edge_products(VertexField(lat, 1.0), F);
  EXPECT_EQ(ones.tail, F);
  EXPECT_EQ(ones.head, F);
  EdgeField single(lat, 0.0);
  single[lat.edge(0, 0)] = 1.0;
  const auto p = edge_products(indicator(lat, 0), single);
  EXPECT_EQ(p.tail, single);
  EXPECT_EQ(max_abs(p.head), 0.0);
}

TEST(EdgeProducts, ProductRule) {
  Xoshiro256 rng(17);
  for (int t = 0; t < 100; ++t) {
    const TorusLattice lat(2 + t % 2, 4);
    const auto f = random_vertex_field(lat, rng);
    const auto g = random_vertex_field(lat, rng);
    const auto fg = make_vertex_field(lat, [&](std::size_t x) { return f[x] * g[x]; });
    const auto lhs = gradient(fg);
    // grad(fg)(e) = g(e^-) grad f(e) + f(e^+) grad g(e)
    const auto a = edge_products(g, gradient(f)).tail;
    const auto b = edge_products(f, gradient(g)).head;
    for (std::size_t e = 0; e < lhs.size(); ++e) {
      const double scale = std::abs(a[e]) + std::abs(b[e]);
      ASSERT_LE(rel_err(lhs[e], a[e] + b[e], scale), 1e-12);
    }
  }
}

TEST(Orientation, ReversalLeavesOperatorsInvariant) {
  // Reversing every edge negates gradients edge by edge; L, E and |grad f|
  // must not change. Oracle: recompute with tail and head swapped.
  Xoshiro256 rng(23);
  const Environment env = random_env(2, 5, 77);
  const TorusLattice& lat = env.lattice();
  const auto f = random_vertex_field(lat, rng);
  const auto g = gradient(f);
  EdgeField reversed_grad(lat, 0.0);
  for (std::size_t e = 0; e < lat.num_edges(); ++e) reversed_grad[e] = f[lat.edge_tail(e)] - f[lat.edge_head(e)];
  VertexField reversed_div(lat, 0.0);
  // Reversed divergence: heads and tails exchange roles.
  const auto flux = make_edge_field(lat, [&](std::size_t e) { return env.conductance(e) * reversed_grad[e]; });
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    reversed_div[lat.edge_tail(e)] += flux[e];
    reversed_div[lat.edge_head(e)] -= flux[e];
  }
  const auto lf = laplacian(env, f);
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    EXPECT_NEAR(-reversed_div[x], lf[x], 1e-12 * (1 + std::abs(lf[x])));
  }
  double energy_rev = 0.0;
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    EXPECT_EQ(std::abs(reversed_grad[e]), std::abs(g[e]));
    energy_rev += env.conductance(e) * reversed_grad[e] * reversed_grad[e];
  }
  const double energy = dirichlet_form(env, f, f);
  EXPECT_LE(rel_err(energy, energy_rev, energy), 1e-13);
}

TEST(Isoperimetry, SingleVertexAndSmallBalls) {
  const TorusLattice lat(2, 15);
  const std::size_t c = vtx(lat, {7, 7});
  for (std::int64_t r : {1, 2, 3, 5}) {
    const Ball b{c, static_cast<double>(r)};
    const std::vector<std::size_t> single{c};
    EXPECT_DOUBLE_EQ(isoperimetric_ratio(lat, b, single), static_cast<double>(r));
  }
  const Ball b1{c, 1.0};
  const std::vector<std::size_t> edge_vertex{vtx(lat, {8, 7})};
  EXPECT_DOUBLE_EQ(isoperimetric_ratio(lat, b1, edge_vertex), 1.0);
  EXPECT_GE(isoperimetry_probe(lat, c, 1, 50, 1), 1.0);
}

TEST(Isoperimetry, HalfBoxExhaustive) {
  // A = {x in B(0,r) : x_1 < 0}. Its boundary relative to B is the column
  // x_1 = -1 minus the row ends with no neighbor in B: |dA| = 2r - 1, |A| = r^2.
  const TorusLattice lat(2, 21);
  const std::size_t c = vtx(lat, {10, 10});
  for (std::int64_t r = 2; r <= 6; ++r) {
    const Ball b{c, static_cast<double>(r)};
    std::vector<std::size_t> half;
    for (std::size_t v : ball_vertices(lat, b)) {
      if (lat.coord(v, 0) < 10) half.push_back(v);
    }
    ASSERT_EQ(half.size(), static_cast<std::size_t>(r * r));
    const double ratio = isoperimetric_ratio(lat, b, half);
    EXPECT_DOUBLE_EQ(ratio, static_cast<double>(r * (2 * r - 1)) / static_cast<double>(r * r));
    const double probe = isoperimetry_probe(lat, c, r, 200, 3);
    EXPECT_GT(probe, 0.5);
    EXPECT_LE(probe, ratio);
  }
}
