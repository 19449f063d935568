#ifndef RCM_MOSER_HPP
#define RCM_MOSER_HPP

// Numerical side of the Moser iteration: Sobolev exponents, nested cutoffs,
// the weighted Sobolev and energy inequalities, Dirichlet Poisson solves on
// balls, the maximum inequality with its level-by-level recursion, and the
// l1-Poincare ratio. Every inequality is returned as (lhs, rhs without the
// constant); constants are calibrated elsewhere.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rcm/cg.hpp"
#include "rcm/error.hpp"
#include "rcm/graph.hpp"
#include "rcm/ineq.hpp"
#include "rcm/io.hpp"

namespace rcm {

/// Sobolev exponents for (d, p, q), p, q in (1, inf].
struct Exponents {
  int d = 2;
  double p = kInf;
  double q = kInf;
  double rho = 0.0;     ///< d / ((d-2) + d/q)
  double p_star = 1.0;  ///< p / (p-1)
  double r = 0.0;       ///< rho / p_star
  double kappa = kInf;  ///< (1/2) sum_k r^{-k}; infinite when r <= 1
  bool contracts = false;

  double alpha(int k) const { return std::pow(r, k); }
};

inline double conjugate_exponent(double p) {
  require(p > 1.0, "exponent must lie in (1, inf]");
  return std::isinf(p) ? 1.0 : p / (p - 1.0);
}

inline Exponents exponents(int d, double p, double q) {
  require(d >= 2, "dimension must be >= 2");
  require(p > 1.0 && q > 1.0, "p and q must lie in (1, inf]");
  const double dd = d;
  const double d_over_q = std::isinf(q) ? 0.0 : dd / q;
  const double d_over_p = std::isinf(p) ? 0.0 : dd / p;
  const double denom = (dd - 2.0) + d_over_q;
  require(denom > 0.0, "rho is undefined for d = 2 and q = inf");
  Exponents e;
  e.d = d;
  e.p = p;
  e.q = q;
  e.rho = dd / denom;
  e.p_star = conjugate_exponent(p);
  // Computed directly rather than as rho / p_star so that r = 1 exactly on
  // the boundary 1/p + 1/q = 2/d.
  e.r = (dd - d_over_p) / denom;
  e.contracts = check_moment_condition(p, q, d);
  // The moment condition is decided in exact-friendly form; near the
  // boundary the quotient above can round to the wrong side of 1.
  if (e.contracts && e.r <= 1.0) e.r = std::nextafter(1.0, 2.0);
  if (!e.contracts && e.r > 1.0) e.r = 1.0;
  e.kappa = e.contracts ? 0.5 * e.r / (e.r - 1.0) : kInf;
  return e;
}

/// Pointwise |u|^alpha sign(u).
inline VertexField signed_power_field(const VertexField& u, double alpha) {
  require(alpha != 0.0, "signed power needs alpha != 0");
  return u.map([alpha](double v) { return signed_pow(v, alpha); });
}

namespace detail {

/// The ball must look like a ball of Z^d: no wrap-around, and no edge
/// between its extreme layers.
inline void require_unwrapped(const TorusLattice& lat, const Ball& ball) {
  require(2 * ball.int_radius() + 1 < lat.side(),
          "ball of radius " + format_double(ball.radius) + " wraps around a torus of side " +
              std::to_string(lat.side()));
}

inline double max_over(const VertexField& f, std::span<const std::size_t> set) {
  double m = 0.0;
  for (std::size_t x : set) m = std::max(m, std::abs(f[x]));
  return m;
}

}  // namespace detail

/// Linear cutoffs between the nested balls B(sigma_k n) around x0, with
/// sigma_k = sigma' + 2^{-k}(sigma - sigma') and radii R_k = floor(sigma_k n).
/// eta_k = clamp((R_k - dist) / (R_k - R_{k+1}), 0, 1). Level k exists while
/// R_k - R_{k+1} >= tau_k n, which is what the gradient bound needs.
class CutoffFamily {
 public:
  CutoffFamily(const TorusLattice& lat, std::size_t x0, std::int64_t n, double sigma, double sigma_prime)
      : lat_(lat), x0_(x0), n_(n), sigma_(sigma), sigma_prime_(sigma_prime) {
    require(n >= 1, "cutoff scale n must be >= 1");
    require(0.5 <= sigma_prime && sigma_prime < sigma && sigma <= 1.0, "need 1/2 <= sigma' < sigma <= 1");
    require(x0 < lat.num_vertices(), "cutoff center out of range");
    detail::require_unwrapped(lat, Ball{x0, static_cast<double>(n)});
    dist_.resize(lat.num_vertices());
    for (std::size_t v = 0; v < lat.num_vertices(); ++v) dist_[v] = lat.distance(x0, v);
  }

  std::size_t center() const { return x0_; }
  std::int64_t scale() const { return n_; }
  double sigma() const { return sigma_; }
  double sigma_prime() const { return sigma_prime_; }

  double sigma_level(int k) const { return sigma_prime_ + std::ldexp(sigma_ - sigma_prime_, -k); }
  double tau(int k) const { return std::ldexp(sigma_ - sigma_prime_, -k - 1); }

  std::int64_t radius(int k) const {
    return static_cast<std::int64_t>(std::floor(sigma_level(k) * static_cast<double>(n_) + 1e-9));
  }

  Ball ball(int k) const { return Ball{x0_, static_cast<double>(radius(k))}; }

  bool constructible(int k) const {
    return static_cast<double>(radius(k) - radius(k + 1)) >= tau(k) * static_cast<double>(n_) - 1e-9;
  }

  /// Levels 0..num_levels()-1 are constructible.
  int num_levels() const {
    int k = 0;
    while (k < 64 && constructible(k)) ++k;
    return k;
  }

  VertexField eta(int k) const {
    if (!constructible(k)) {
      throw InvalidArgument("cutoff level " + std::to_string(k) + " needs R_k - R_{k+1} >= tau_k n; got " +
                            std::to_string(radius(k) - radius(k + 1)) + " < " +
                            format_double(tau(k) * static_cast<double>(n_)));
    }
    const double rk = static_cast<double>(radius(k));
    const double width = static_cast<double>(radius(k) - radius(k + 1));
    std::vector<double> out(lat_.num_vertices());
    for (std::size_t v = 0; v < out.size(); ++v) {
      out[v] = std::clamp((rk - static_cast<double>(dist_[v])) / width, 0.0, 1.0);
    }
    return VertexField(lat_, std::move(out));
  }

  /// 1 / (tau_k n).
  double gradient_bound(int k) const { return 1.0 / (tau(k) * static_cast<double>(n_)); }

 private:
  TorusLattice lat_;
  std::size_t x0_;
  std::int64_t n_;
  double sigma_;
  double sigma_prime_;
  std::vector<std::int64_t> dist_;
};

/// Checks 0 <= eta <= 1, eta = 0 off B and on the internal boundary of B.
inline void validate_cutoff(const VertexField& eta, std::span<const std::size_t> b_set) {
  const TorusLattice& lat = eta.lattice();
  const auto in_b = vertex_mask(lat, b_set);
  for (std::size_t x = 0; x < eta.size(); ++x) {
    require(eta[x] >= 0.0 && eta[x] <= 1.0, "cutoff must take values in [0, 1]");
    require(in_b[x] || eta[x] == 0.0, "cutoff must vanish outside the ball");
  }
  for (std::size_t x : ball_boundary(lat, b_set)) {
    require(eta[x] == 0.0, "cutoff must vanish on the boundary of the ball");
  }
}

/// (sum |u|^{d/(d-1)})^{(d-1)/d} / sum_edges |grad u| for finitely supported u:
/// every axis must have a hyperplane on which u vanishes, so the torus can be
/// cut open into a box of Z^d.
inline double sobolev_s1_ratio(const VertexField& u) {
  const TorusLattice& lat = u.lattice();
  const int d = lat.dim();
  for (int i = 0; i < d; ++i) {
    std::vector<char> plane_nonzero(static_cast<std::size_t>(lat.side()), 0);
    for (std::size_t x = 0; x < u.size(); ++x) {
      if (u[x] != 0.0) plane_nonzero[static_cast<std::size_t>(lat.coord(x, i))] = 1;
    }
    require(std::find(plane_nonzero.begin(), plane_nonzero.end(), 0) != plane_nonzero.end(),
            "support of u wraps around the torus along axis " + std::to_string(i + 1));
  }
  const double s = static_cast<double>(d) / (d - 1.0);
  double num = 0.0;
  for (double v : u.values()) num += std::pow(std::abs(v), s);
  num = std::pow(num, 1.0 / s);
  double den = 0.0;
  const EdgeField grad = gradient(u);
  for (double g : grad.values()) den += std::abs(g);
  require(den > 0.0, "Sobolev ratio undefined for u = 0");
  return num / den;
}

struct InequalitySides {
  double lhs = 0.0;
  double rhs = 0.0;  ///< without the calibrated constant

  double ratio() const { return rhs > 0.0 ? lhs / rhs : (lhs > 0.0 ? kInf : 0.0); }
};

namespace detail {

// E_{eta^2}(u) / |B| + ||grad eta||_inf^2 ||u^2||_{1,B,mu}
inline double sobolev_bracket(const Environment& env, std::span<const std::size_t> b_set, const VertexField& eta,
                              const VertexField& u) {
  const double energy = weighted_dirichlet_form(env, eta, u) / static_cast<double>(b_set.size());
  const double g = max_abs(gradient(eta));
  return energy + g * g * power_avg_mu(env, u, 2.0, b_set);
}

}  // namespace detail

/// lhs = ||(eta u)^2||_{rho,B},
/// rhs = |B|^{2/d} ||nu||_{q,B} (E_{eta^2}(u)/|B| + ||grad eta||^2_inf ||u^2||_{1,B,mu}).
inline InequalitySides sobolev_check(const Environment& env, const Ball& ball, const VertexField& eta,
                                     const VertexField& u, double q) {
  const TorusLattice& lat = env.lattice();
  require_same_lattice(lat, u.lattice());
  require_same_lattice(lat, eta.lattice());
  detail::require_unwrapped(lat, ball);
  const auto b_set = ball_vertices(lat, ball);
  validate_cutoff(eta, b_set);
  const int d = lat.dim();
  const double rho = exponents(d, std::numeric_limits<double>::infinity(), q).rho;
  const VertexField eu2 = make_vertex_field(lat, [&](std::size_t x) { return eta[x] * eta[x] * u[x] * u[x]; });
  InequalitySides out;
  out.lhs = norm_avg(eu2, rho, b_set);
  const double vol = static_cast<double>(b_set.size());
  out.rhs = std::pow(vol, 2.0 / d) * norm_avg(env.nu(), q, b_set) * detail::sobolev_bracket(env, b_set, eta, u);
  return out;
}

/// mu-weighted form: lhs = ||(eta u)^2||_{r,B,mu},
/// rhs = |B|^{2/d} ||nu||_{q,B} ||mu||_{p,B}^{1/r} (same bracket).
inline InequalitySides sobolev_check_weighted(const Environment& env, const Ball& ball, const VertexField& eta,
                                              const VertexField& u, const Exponents& exps) {
  const TorusLattice& lat = env.lattice();
  require_same_lattice(lat, u.lattice());
  require_same_lattice(lat, eta.lattice());
  require(exps.d == lat.dim(), "exponents computed for a different dimension");
  detail::require_unwrapped(lat, ball);
  const auto b_set = ball_vertices(lat, ball);
  validate_cutoff(eta, b_set);
  const VertexField eu2 = make_vertex_field(lat, [&](std::size_t x) { return eta[x] * eta[x] * u[x] * u[x]; });
  InequalitySides out;
  out.lhs = norm_avg_mu(env, eu2, exps.r, b_set);
  const double vol = static_cast<double>(b_set.size());
  out.rhs = std::pow(vol, 2.0 / exps.d) * norm_avg(env.nu(), exps.q, b_set) *
            std::pow(norm_avg(env.mu(), exps.p, b_set), 1.0 / exps.r) *
            detail::sobolev_bracket(env, b_set, eta, u);
  return out;
}

/// max_{x in B} |L u(x) - div V(x)|.
inline double poisson_residual(const Environment& env, std::span<const std::size_t> b_set, const VertexField& u,
                               const EdgeField& V) {
  const VertexField lu = laplacian(env, u);
  const VertexField dv = divergence(V);
  double m = 0.0;
  for (std::size_t x : b_set) m = std::max(m, std::abs(lu[x] - dv[x]));
  return m;
}

/// Solves L u = div V at every vertex of B with u = 0 off B. The restricted
/// operator -L_B is symmetric positive definite.
inline VertexField poisson_solve_dirichlet(const Environment& env, const Ball& ball, const EdgeField& V,
                                           const SolverConfig& cfg = {}) {
  const TorusLattice& lat = env.lattice();
  require_same_lattice(lat, V.lattice());
  detail::require_unwrapped(lat, ball);
  for (double v : V.values()) require(std::isfinite(v), "drift field must be finite");
  const auto b_set = ball_vertices(lat, ball);
  const std::size_t m = b_set.size();
  std::vector<std::int64_t> local(lat.num_vertices(), -1);
  for (std::size_t k = 0; k < m; ++k) local[b_set[k]] = static_cast<std::int64_t>(k);
  const int d = lat.dim();
  // Neighbor lists in local indices (-1 = outside) with conductances.
  std::vector<std::int64_t> nbr(m * 2 * d);
  std::vector<double> cond(m * 2 * d);
  std::vector<double> diag(m);
  for (std::size_t k = 0; k < m; ++k) {
    const std::size_t x = b_set[k];
    diag[k] = env.mu()[x];
    int slot = 0;
    for (int i = 0; i < d; ++i) {
      for (int s : {+1, -1}) {
        nbr[k * 2 * d + slot] = local[lat.neighbor(x, i, s)];
        cond[k * 2 * d + slot] = env.conductance(x, i, s);
        ++slot;
      }
    }
  }
  const VertexField dv = divergence(V);
  std::vector<double> rhs(m);
  for (std::size_t k = 0; k < m; ++k) rhs[k] = -dv[b_set[k]];
  std::vector<double> sol(m, 0.0);
  const auto apply = [&](std::span<const double> in, std::span<double> out) {
    for (std::size_t k = 0; k < m; ++k) {
      double s = diag[k] * in[k];
      for (int slot = 0; slot < 2 * d; ++slot) {
        const std::int64_t j = nbr[k * 2 * d + slot];
        if (j >= 0) s -= cond[k * 2 * d + slot] * in[static_cast<std::size_t>(j)];
      }
      out[k] = s;
    }
  };
  const auto res = conjugate_gradient(apply, diag, rhs, sol, cfg);
  if (!res.converged) {
    throw ConvergenceError("Dirichlet Poisson solve did not converge (relative residual " +
                               format_double(res.residual) + ")",
                           res.residual, res.iterations);
  }
  std::vector<double> u(lat.num_vertices(), 0.0);
  for (std::size_t k = 0; k < m; ++k) u[b_set[k]] = sol[k];
  return VertexField(lat, std::move(u));
}

/// Energy estimate for a solution of L u = div(w grad f) on B:
///   lhs = E_{eta^2}(u~^al) / |B|
///   rhs = al^4/(2al-1)^2 ||grad eta||^2 ||u||_{2al,B,mu}^{2al}
///       + al^4/(2al-1)^2 ||grad f||^2 ||u||_{2(al-1),B,mu}^{2(al-1)}
///       + al^2/(2al-1) ||grad eta grad f|| ||u||_{2al-1,B,mu}^{2al-1}
/// with sup norms over edges touching B. Throws when u does not solve the
/// equation on B.
inline InequalitySides energy_estimate_check(const Environment& env, const Ball& ball, const VertexField& eta,
                                             const VertexField& u, double alpha, const VertexField& f) {
  const TorusLattice& lat = env.lattice();
  require_same_lattice(lat, u.lattice());
  require_same_lattice(lat, eta.lattice());
  require_same_lattice(lat, f.lattice());
  require(alpha >= 1.0, "energy estimate needs alpha >= 1");
  detail::require_unwrapped(lat, ball);
  const auto b_set = ball_vertices(lat, ball);
  validate_cutoff(eta, b_set);

  const EdgeField grad_f = gradient(f);
  const EdgeField V = weight(env, grad_f);
  const double resid = poisson_residual(env, b_set, u, V);
  double scale = 0.0;
  const VertexField dv = divergence(V);
  for (std::size_t x : b_set) scale = std::max({scale, std::abs(dv[x]), env.mu()[x] * std::abs(u[x])});
  require(resid <= 1e-7 * scale + 1e-300, "u does not solve L u = div(w grad f) on the ball (residual " +
                                              format_double(resid) + ")");

  const auto in_b = vertex_mask(lat, b_set);
  const EdgeField grad_eta = gradient(eta);
  double g_eta = 0.0, g_f = 0.0, g_prod = 0.0;
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    if (!in_b[lat.edge_tail(e)] && !in_b[lat.edge_head(e)]) continue;
    g_eta = std::max(g_eta, std::abs(grad_eta[e]));
    g_f = std::max(g_f, std::abs(grad_f[e]));
    g_prod = std::max(g_prod, std::abs(grad_eta[e] * grad_f[e]));
  }
  const double c4 = std::pow(alpha, 4) / ((2.0 * alpha - 1.0) * (2.0 * alpha - 1.0));
  const double c2 = alpha * alpha / (2.0 * alpha - 1.0);
  InequalitySides out;
  out.lhs = weighted_dirichlet_form(env, eta, signed_power_field(u, alpha)) / static_cast<double>(b_set.size());
  out.rhs = c4 * g_eta * g_eta * power_avg_mu(env, u, 2.0 * alpha, b_set) +
            c4 * g_f * g_f * power_avg_mu(env, u, 2.0 * (alpha - 1.0), b_set) +
            c2 * g_prod * power_avg_mu(env, u, 2.0 * alpha - 1.0, b_set);
  return out;
}

struct MoserLevel {
  int k = 0;
  double alpha = 1.0;  ///< r^k
  double sigma = 1.0;  ///< sigma_k
  std::int64_t radius = 0;
  double norm = 0.0;   ///< ||u||_{2 alpha_k p_*, B(sigma_k n)}
  double gamma = 1.0;  ///< 1 if norm >= 1, else 1 - 1/alpha_k
  /// log of the smallest c with norm_{k+1} <= (c 4^k alpha_k^2 M / (sigma-sigma')^2)^{1/(2 alpha_k)} norm_k^{gamma_k},
  /// M = ||mu||_{p,B(n)} ||nu||_{q,B(n)}; -inf when norm_{k+1} = 0, NaN on the last level.
  double log_recursion_constant = std::numeric_limits<double>::quiet_NaN();
};

struct MoserReport {
  Exponents exps;
  std::size_t center = 0;
  std::int64_t n = 0;
  double sigma = 1.0;
  double sigma_prime = 0.5;
  std::vector<MoserLevel> levels;
  double gamma = 1.0;          ///< product of gamma_k over k >= 1
  double mu_nu = 0.0;          ///< ||mu||_{p,B(n)} ||nu||_{q,B(n)}
  double norm_2rho = 0.0;      ///< ||u||_{2 rho, B(sigma n)}
  double max_inner = 0.0;      ///< max_{B(sigma' n)} |u|
  double rhs_core = 0.0;       ///< ((1 v mu_nu)/(sigma-sigma')^2)^kappa norm_2rho^gamma
  double ratio = 0.0;          ///< max_inner / rhs_core (0 when both vanish)
  double max_log_recursion_constant = -kInf;
  std::vector<double> abs_u_outer;  ///< |u| on B(sigma n), for the small-exponent bound

  /// (1 v mu_nu) / (sigma - sigma')^2.
  double scale_factor() const {
    const double gap = sigma - sigma_prime;
    return std::max(1.0, mu_nu) / (gap * gap);
  }
};

inline MoserReport moser_iterate(const Environment& env, std::size_t x0, std::int64_t n, const VertexField& u,
                                 const Exponents& exps, double sigma = 1.0, double sigma_prime = 0.5) {
  const TorusLattice& lat = env.lattice();
  require_same_lattice(lat, u.lattice());
  require(exps.d == lat.dim(), "exponents computed for a different dimension");
  require(exps.contracts, "Moser iteration needs r > 1 (1/p + 1/q < 2/d)");
  const CutoffFamily family(lat, x0, n, sigma, sigma_prime);
  const int levels = family.num_levels();
  require(levels >= 1, "ball B(sigma n) too small for a single cutoff level");

  MoserReport rep;
  rep.exps = exps;
  rep.center = x0;
  rep.n = n;
  rep.sigma = sigma;
  rep.sigma_prime = sigma_prime;

  const auto full = ball_vertices(lat, Ball{x0, static_cast<double>(n)});
  rep.mu_nu = norm_avg(env.mu(), exps.p, full) * norm_avg(env.nu(), exps.q, full);
  const double gap = sigma - sigma_prime;

  for (int k = 0; k <= levels; ++k) {
    MoserLevel lv;
    lv.k = k;
    lv.alpha = exps.alpha(k);
    lv.sigma = family.sigma_level(k);
    lv.radius = family.radius(k);
    const auto set = ball_vertices(lat, family.ball(k));
    lv.norm = norm_avg(u, 2.0 * lv.alpha * exps.p_star, set);
    lv.gamma = lv.norm >= 1.0 ? 1.0 : 1.0 - 1.0 / lv.alpha;
    rep.levels.push_back(lv);
  }
  for (int k = 0; k < levels; ++k) {
    MoserLevel& lv = rep.levels[k];
    const double next = rep.levels[k + 1].norm;
    if (next == 0.0) {
      lv.log_recursion_constant = -kInf;
      continue;
    }
    const double cur_term = lv.gamma == 0.0 ? 0.0 : lv.gamma * std::log(lv.norm);
    lv.log_recursion_constant = 2.0 * lv.alpha * (std::log(next) - cur_term) -
                                std::log(std::ldexp(lv.alpha * lv.alpha * rep.mu_nu / (gap * gap), 2 * k));
    rep.max_log_recursion_constant = std::max(rep.max_log_recursion_constant, lv.log_recursion_constant);
  }
  for (int k = 1; k <= levels; ++k) rep.gamma *= rep.levels[k].gamma;

  const auto outer = ball_vertices(lat, Ball{x0, sigma * static_cast<double>(n)});
  const auto inner = ball_vertices(lat, Ball{x0, sigma_prime * static_cast<double>(n)});
  rep.norm_2rho = norm_avg(u, 2.0 * exps.rho, outer);
  rep.max_inner = detail::max_over(u, inner);
  rep.rhs_core = std::pow(rep.scale_factor(), exps.kappa) * std::pow(rep.norm_2rho, rep.gamma);
  rep.ratio = rep.max_inner == 0.0 ? 0.0 : rep.max_inner / rep.rhs_core;
  rep.abs_u_outer.reserve(outer.size());
  for (std::size_t x : outer) rep.abs_u_outer.push_back(std::abs(u[x]));
  return rep;
}

struct SmallExponentBound {
  double theta = 1.0;
  double gamma_prime = 1.0;
  double kappa_prime = 0.0;
  double exponent = 1.0;  ///< 1 / (1 - gamma + gamma theta)
  double bound = 0.0;     ///< J^{kappa'} ||u||_{alpha,B(sigma n)}^{gamma'}, J = (1 v mu_nu)/(sigma-sigma')^2
  double ratio = 0.0;     ///< max_inner / bound
};

/// Maximum bound in terms of ||u||_alpha for small alpha. With theta =
/// alpha / (2 rho): gamma' = gamma theta / (1 - gamma + gamma theta),
/// kappa' = kappa / (1 - gamma + gamma theta). For alpha >= 2 rho the
/// exponents are left unchanged (norms are monotone in alpha).
inline SmallExponentBound small_exponent_bound(const MoserReport& rep, double alpha, double gamma, double kappa) {
  require(alpha > 0.0 && std::isfinite(alpha), "small-exponent bound needs alpha in (0, inf)");
  require(gamma > 0.0 && gamma <= 1.0, "gamma must lie in (0, 1]");
  require(!rep.abs_u_outer.empty(), "report carries no field values");
  SmallExponentBound b;
  const double two_rho = 2.0 * rep.exps.rho;
  if (alpha < two_rho) {
    b.theta = alpha / two_rho;
    b.exponent = 1.0 / (1.0 - gamma + gamma * b.theta);
    b.gamma_prime = gamma * b.theta * b.exponent;
  } else {
    b.theta = 1.0;
    b.exponent = 1.0;
    b.gamma_prime = gamma;
  }
  b.kappa_prime = kappa * b.exponent;
  double m = 0.0;
  for (double v : rep.abs_u_outer) m = std::max(m, v);
  double norm = 0.0;
  if (m > 0.0) {
    double s = 0.0;
    for (double v : rep.abs_u_outer) s += std::pow(v / m, alpha);
    norm = m * std::pow(s / static_cast<double>(rep.abs_u_outer.size()), 1.0 / alpha);
  }
  b.bound = std::pow(rep.scale_factor(), b.kappa_prime) * std::pow(norm, b.gamma_prime);
  b.ratio = rep.max_inner == 0.0 ? 0.0 : rep.max_inner / b.bound;
  return b;
}

/// sum_{x in B} |u - u_B| / (radius * sum_{edges inside B} |grad u|); 0 for
/// u constant on B.
inline double poincare_l1_check(const VertexField& u, const Ball& ball) {
  const TorusLattice& lat = u.lattice();
  detail::require_unwrapped(lat, ball);
  require(ball.radius > 0.0, "Poincare check needs a positive radius");
  const auto b_set = ball_vertices(lat, ball);
  const auto in_b = vertex_mask(lat, b_set);
  double mean = 0.0;
  for (std::size_t x : b_set) mean += u[x];
  mean /= static_cast<double>(b_set.size());
  double lhs = 0.0;
  for (std::size_t x : b_set) lhs += std::abs(u[x] - mean);
  double grad = 0.0;
  for (std::size_t x : b_set) {
    for (int i = 0; i < lat.dim(); ++i) {
      const std::size_t y = lat.neighbor(x, i, +1);
      if (in_b[y]) grad += std::abs(u[y] - u[x]);
    }
  }
  const double den = ball.radius * grad;
  return den == 0.0 ? 0.0 : lhs / den;
}

/// Per-level rows followed by one summary row.
inline std::string moser_report_csv(const MoserReport& rep) {
  Csv csv({"row", "k", "alpha", "sigma", "radius", "norm", "gamma", "log_recursion_constant", "max_inner",
           "rhs_core", "ratio", "kappa"});
  for (const auto& lv : rep.levels) {
    csv.row({"level", std::to_string(lv.k), format_double(lv.alpha), format_double(lv.sigma),
             std::to_string(lv.radius), format_double(lv.norm), format_double(lv.gamma),
             std::isnan(lv.log_recursion_constant) ? std::string() : format_double(lv.log_recursion_constant), "",
             "", "", ""});
  }
  csv.row({"summary", "", "", format_double(rep.sigma_prime), "", format_double(rep.norm_2rho),
           format_double(rep.gamma), format_double(rep.max_log_recursion_constant), format_double(rep.max_inner),
           format_double(rep.rhs_core), format_double(rep.ratio), format_double(rep.exps.kappa)});
  return csv.str();
}

}  // namespace rcm

#endif  // RCM_MOSER_HPP
