#ifndef RCM_CORRECTOR_HPP
#define RCM_CORRECTOR_HPP

// Periodic corrector on the torus. For each coordinate j the corrector chi_j
// is the mean-zero solution of
//
//     (-L) chi_j = div V_j,    V_j(e) = w(e) (e^+ - e^-)_j,
//
// which is the statement that Phi_j = Pi_j - chi_j is L-harmonic, Pi_j being
// the j-th coordinate seen through its unit edge increments. Because the
// increments are periodic, Phi_j extends to an exactly harmonic function on
// Z^d over the periodized environment.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcm/cg.hpp"
#include "rcm/environment.hpp"
#include "rcm/error.hpp"
#include "rcm/graph.hpp"
#include "rcm/io.hpp"

namespace rcm {

/// Local drift V_j: the canonical edge (x, x+e_i) carries w(e) delta_ij / scale.
/// scale = n gives the diffusively rescaled drift.
inline EdgeField local_drift(const Environment& env, int j, double scale = 1.0) {
  const TorusLattice& lat = env.lattice();
  require(j >= 0 && j < lat.dim(), "drift coordinate out of range");
  require(scale > 0.0, "drift scale must be positive");
  return make_edge_field(lat, [&](std::size_t e) {
    return lat.edge_dir(e) == j ? env.conductance(e) / scale : 0.0;
  });
}

/// Applies -L (the positive semidefinite operator) on the whole torus.
inline void apply_negative_generator(const Environment& env, std::span<const double> in, std::span<double> out) {
  const TorusLattice& lat = env.lattice();
  const int d = lat.dim();
  const auto& w = env.conductance();
  const auto& mu = env.mu();
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    double s = mu[x] * in[x];
    for (int i = 0; i < d; ++i) {
      const std::size_t xf = lat.neighbor(x, i, +1);
      const std::size_t xb = lat.neighbor(x, i, -1);
      s -= w[lat.edge(x, i)] * in[xf] + w[lat.edge(xb, i)] * in[xb];
    }
    out[x] = s;
  }
}

struct CorrectorSolution {
  Environment env;
  std::vector<VertexField> chi;  ///< chi[j], mean zero under counting measure
  std::vector<double> residual;  ///< relative 2-norm residual per coordinate
  std::vector<int> iterations;

  int dim() const { return static_cast<int>(chi.size()); }
  const TorusLattice& lattice() const { return env.lattice(); }
};

namespace detail {

inline void subtract_mean(std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  const double m = s / static_cast<double>(v.size());
  for (double& x : v) x -= m;
}

}  // namespace detail

/// Solves for a single coordinate j. Throws ConvergenceError when the
/// tolerance is not met within cfg.max_iter iterations.
inline CorrectorSolution solve_corrector(const Environment& env, int j, const SolverConfig& cfg = {}) {
  const TorusLattice& lat = env.lattice();
  require(j >= 0 && j < lat.dim(), "corrector coordinate out of range");
  std::vector<double> rhs = divergence(local_drift(env, j)).values();
  detail::subtract_mean(rhs);
  std::vector<double> x(lat.num_vertices(), 0.0);
  const auto result = conjugate_gradient(
      [&](std::span<const double> in, std::span<double> out) { apply_negative_generator(env, in, out); },
      env.mu().values(), rhs, x, cfg);
  if (!result.converged) {
    throw ConvergenceError("corrector solve for coordinate " + std::to_string(j + 1) +
                               " did not converge (relative residual " + format_double(result.residual) + ")",
                           result.residual, result.iterations);
  }
  detail::subtract_mean(x);
  CorrectorSolution sol;
  sol.env = env;
  sol.chi.push_back(VertexField(lat, std::move(x)));
  sol.residual.push_back(result.residual);
  sol.iterations.push_back(result.iterations);
  return sol;
}

/// All d coordinates.
inline CorrectorSolution solve_corrector(const Environment& env, const SolverConfig& cfg = {}) {
  CorrectorSolution sol;
  sol.env = env;
  for (int j = 0; j < env.lattice().dim(); ++j) {
    auto one = solve_corrector(env, j, cfg);
    sol.chi.push_back(std::move(one.chi[0]));
    sol.residual.push_back(one.residual[0]);
    sol.iterations.push_back(one.iterations[0]);
  }
  return sol;
}

/// Edge increments of the harmonic coordinates: dPhi_j(e) = delta_{dir(e), j}
/// - grad chi_j(e). The displacement is the unit step along the canonical
/// edge, never a wrapped coordinate difference.
struct HarmonicCoordinate {
  std::vector<EdgeField> increments;
};

inline HarmonicCoordinate harmonic_coordinate(const CorrectorSolution& sol) {
  const TorusLattice& lat = sol.lattice();
  HarmonicCoordinate h;
  for (int j = 0; j < sol.dim(); ++j) {
    EdgeField inc = gradient(sol.chi[j]);
    for (std::size_t e = 0; e < inc.size(); ++e) inc[e] = (lat.edge_dir(e) == j ? 1.0 : 0.0) - inc[e];
    h.increments.push_back(std::move(inc));
  }
  return h;
}

/// max_x |L Phi_j(x)| = max_x |div(w dPhi_j)(x)|.
inline double harmonicity_residual(const Environment& env, const HarmonicCoordinate& h, int j) {
  return max_abs(divergence(weight(env, h.increments.at(j))));
}

/// Finite-volume effective covariance
///   Sigma_ij = |torus|^{-1} sum_x sum_{y~x} w_xy dPhi_i(x,y) dPhi_j(x,y),
/// i.e. twice the edge average since each canonical edge is seen from both ends.
inline Eigen::MatrixXd sigma_from_corrector(const CorrectorSolution& sol) {
  const auto h = harmonic_coordinate(sol);
  const int d = sol.dim();
  const TorusLattice& lat = sol.lattice();
  Eigen::MatrixXd s = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      double acc = 0.0;
      for (std::size_t e = 0; e < lat.num_edges(); ++e) {
        acc += sol.env.conductance(e) * h.increments[i][e] * h.increments[j][e];
      }
      s(i, j) = s(j, i) = 2.0 * acc / static_cast<double>(lat.num_vertices());
    }
  }
  return s;
}

struct ProfileRow {
  std::int64_t n = 0;
  int j = 0;  ///< 0-based coordinate
  double value = 0.0;
};

/// For each n, solves on a torus of side ceil(4 L n) and reports
/// max_{x in B(0, L n)} |chi_j(x)| / n. chi is the global mean-zero
/// representative, not re-centered on the ball.
inline std::vector<ProfileRow> sublinearity_profile(const EnvSpec& spec, std::span<const std::int64_t> sizes,
                                                    double L, const SolverConfig& cfg = {}) {
  require(L >= 1.0, "sublinearity profile needs L >= 1");
  std::vector<ProfileRow> rows;
  for (std::int64_t n : sizes) {
    require(n >= 1, "profile sizes must be positive");
    EnvSpec s = spec;
    s.n = std::max<std::int64_t>(3, static_cast<std::int64_t>(std::ceil(4.0 * L * static_cast<double>(n))));
    if (const auto* lay = std::get_if<law::Layered>(&s.law)) {
      const auto len = static_cast<std::int64_t>(lay->profile.size());
      s.n = (s.n + len - 1) / len * len;
    }
    const Environment env = generate_env(s);
    const auto sol = solve_corrector(env, cfg);
    const auto ball = ball_vertices(env.lattice(), Ball{0, L * static_cast<double>(n)});
    for (int j = 0; j < sol.dim(); ++j) {
      rows.push_back({n, j, norm_avg(sol.chi[j], kInf, ball) / static_cast<double>(n)});
    }
  }
  return rows;
}

/// Rows (n, j, n^{-d} sum_{x in B(0,n)} |chi_j(x)| / n) from one solution.
inline std::vector<ProfileRow> l1_profile(const CorrectorSolution& sol, std::span<const std::int64_t> sizes) {
  const TorusLattice& lat = sol.lattice();
  std::vector<ProfileRow> rows;
  for (std::int64_t n : sizes) {
    require(n >= 1 && 2 * n < lat.side(), "l1 profile ball B(0, n) must embed in the torus");
    const auto ball = ball_vertices(lat, Ball{0, static_cast<double>(n)});
    const double vol = std::pow(static_cast<double>(n), lat.dim());
    for (int j = 0; j < sol.dim(); ++j) {
      double s = 0.0;
      for (std::size_t x : ball) s += std::abs(sol.chi[j][x]);
      rows.push_back({n, j, s / vol / static_cast<double>(n)});
    }
  }
  return rows;
}

/// n^{-d} sum_{x in nC} chi_j(x) / n for the box C = prod [lo_i, hi_i];
/// lattice points are taken with unwrapped coordinates and reduced modulo
/// the torus side, which must not double count.
inline std::vector<double> cube_average(const CorrectorSolution& sol, std::span<const double> lo,
                                        std::span<const double> hi, std::int64_t n) {
  const TorusLattice& lat = sol.lattice();
  const int d = lat.dim();
  require(static_cast<int>(lo.size()) == d && static_cast<int>(hi.size()) == d, "cube corners need d coordinates");
  require(n >= 1, "cube scale must be positive");
  Point first(d), last(d);
  for (int i = 0; i < d; ++i) {
    require(lo[i] <= hi[i], "cube corners out of order");
    first[i] = static_cast<std::int64_t>(std::ceil(lo[i] * static_cast<double>(n) - 1e-9));
    last[i] = static_cast<std::int64_t>(std::floor(hi[i] * static_cast<double>(n) + 1e-9));
    require(last[i] - first[i] + 1 <= lat.side(), "cube nC does not fit in the torus");
  }
  std::vector<double> out(sol.dim(), 0.0);
  Point x = first;
  bool empty = false;
  for (int i = 0; i < d; ++i) empty = empty || last[i] < first[i];
  while (!empty) {
    const std::size_t v = lat.index(x);
    for (int j = 0; j < sol.dim(); ++j) out[j] += sol.chi[j][v];
    int i = d - 1;
    while (i >= 0 && x[i] == last[i]) {
      x[i] = first[i];
      --i;
    }
    if (i < 0) break;
    ++x[i];
  }
  const double scale = std::pow(static_cast<double>(n), d) * static_cast<double>(n);
  for (double& v : out) v /= scale;
  return out;
}

/// CSV with columns vertex_index, chi_1..chi_d.
inline std::string corrector_csv(const CorrectorSolution& sol) {
  std::vector<std::string> header{"vertex_index"};
  for (int j = 0; j < sol.dim(); ++j) header.push_back("chi_" + std::to_string(j + 1));
  Csv csv(header);
  for (std::size_t x = 0; x < sol.lattice().num_vertices(); ++x) {
    std::vector<std::string> row{std::to_string(x)};
    for (int j = 0; j < sol.dim(); ++j) row.push_back(format_double(sol.chi[j][x]));
    csv.row(row);
  }
  return csv.str();
}

/// d x d matrix block with header col_1..col_d.
inline std::string matrix_csv(const Eigen::MatrixXd& m) {
  std::vector<std::string> header;
  for (int j = 0; j < m.cols(); ++j) header.push_back("col_" + std::to_string(j + 1));
  Csv csv(header);
  for (int i = 0; i < m.rows(); ++i) {
    std::vector<double> row;
    for (int j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
    csv.row(row);
  }
  return csv.str();
}

}  // namespace rcm

#endif  // RCM_CORRECTOR_HPP
