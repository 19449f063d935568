#ifndef RCM_GRAPH_HPP
#define RCM_GRAPH_HPP

// Discrete calculus on the weighted torus: gradient, divergence, the
// generator L f(x) = sum_y w_xy (f(y) - f(x)), Dirichlet forms and
// space-averaged norms.

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/field.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Strictly positive conductances on the canonical edges, with the vertex
/// measures mu(x) = sum_y w_xy and nu(x) = sum_y 1/w_xy cached. Immutable;
/// copies share storage.
class Environment {
 public:
  Environment() = default;

  explicit Environment(EdgeField conductance) {
    const TorusLattice& lat = conductance.lattice();
    for (std::size_t e = 0; e < conductance.size(); ++e) {
      const double w = conductance[e];
      require(w > 0.0 && std::isfinite(w),
              "conductance must be positive and finite at edge " + std::to_string(e));
    }
    VertexField mu(lat, 0.0);
    VertexField nu(lat, 0.0);
    const int d = lat.dim();
    for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
      for (int i = 0; i < d; ++i) {
        const double wf = conductance[lat.edge(x, i)];
        const double wb = conductance[lat.edge(lat.neighbor(x, i, -1), i)];
        mu[x] += wf + wb;
        nu[x] += 1.0 / wf + 1.0 / wb;
      }
    }
    data_ = std::make_shared<const Data>(Data{std::move(conductance), std::move(mu), std::move(nu)});
  }

  const TorusLattice& lattice() const { return data_->omega.lattice(); }
  const EdgeField& conductance() const { return data_->omega; }
  double conductance(std::size_t e) const { return data_->omega[e]; }

  /// Conductance of the edge between x and x + sign * e_i.
  double conductance(std::size_t x, int i, int sign) const {
    const TorusLattice& lat = lattice();
    return sign > 0 ? data_->omega[lat.edge(x, i)] : data_->omega[lat.edge(lat.neighbor(x, i, -1), i)];
  }

  const VertexField& mu() const { return data_->mu; }
  const VertexField& nu() const { return data_->nu; }

  friend bool operator==(const Environment& a, const Environment& b) {
    return a.data_ == b.data_ || a.conductance() == b.conductance();
  }

 private:
  struct Data {
    EdgeField omega;
    VertexField mu;
    VertexField nu;
  };
  std::shared_ptr<const Data> data_;
};

inline double inner(const VertexField& f, const VertexField& g) {
  require_same_lattice(f.lattice(), g.lattice());
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * g[k];
  return s;
}

inline double inner(const EdgeField& f, const EdgeField& g) {
  require_same_lattice(f.lattice(), g.lattice());
  double s = 0.0;
  for (std::size_t k = 0; k < f.size(); ++k) s += f[k] * g[k];
  return s;
}

/// grad f(e) = f(e^+) - f(e^-).
inline EdgeField gradient(const VertexField& f) {
  const TorusLattice& lat = f.lattice();
  const int d = lat.dim();
  std::vector<double> out(lat.num_edges());
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    for (int i = 0; i < d; ++i) out[lat.edge(x, i)] = f[lat.neighbor(x, i, +1)] - f[x];
  }
  return EdgeField(lat, std::move(out));
}

/// div F(x) = sum_{e^+ = x} F(e) - sum_{e^- = x} F(e); the adjoint of gradient.
inline VertexField divergence(const EdgeField& F) {
  const TorusLattice& lat = F.lattice();
  const int d = lat.dim();
  std::vector<double> out(lat.num_vertices(), 0.0);
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) s += F[lat.edge(lat.neighbor(x, i, -1), i)] - F[lat.edge(x, i)];
    out[x] = s;
  }
  return VertexField(lat, std::move(out));
}

/// Neighbor-sum form of the generator: (L f)(x) = sum_y w_xy (f(y) - f(x)).
inline VertexField laplacian(const Environment& env, const VertexField& f) {
  const TorusLattice& lat = env.lattice();
  require_same_lattice(lat, f.lattice());
  const int d = lat.dim();
  std::vector<double> out(lat.num_vertices());
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    double s = 0.0;
    for (int i = 0; i < d; ++i) {
      s += env.conductance(x, i, +1) * (f[lat.neighbor(x, i, +1)] - f[x]);
      s += env.conductance(x, i, -1) * (f[lat.neighbor(x, i, -1)] - f[x]);
    }
    out[x] = s;
  }
  return VertexField(lat, std::move(out));
}

/// Pointwise product w * F of conductances with an edge field.
inline EdgeField weight(const Environment& env, const EdgeField& F) {
  require_same_lattice(env.lattice(), F.lattice());
  EdgeField out = F;
  for (std::size_t e = 0; e < out.size(); ++e) out[e] *= env.conductance(e);
  return out;
}

/// Divergence form of the generator: L f = -div(w grad f).
inline VertexField laplacian_divergence_form(const Environment& env, const VertexField& f) {
  return divergence(weight(env, gradient(f))).map([](double v) { return -v; });
}

/// E(f, g) = <grad f, w grad g>_E = <f, -L g>_V.
inline double dirichlet_form(const Environment& env, const VertexField& f, const VertexField& g) {
  require_same_lattice(env.lattice(), f.lattice());
  require_same_lattice(f.lattice(), g.lattice());
  const TorusLattice& lat = env.lattice();
  double s = 0.0;
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    const std::size_t x = lat.edge_tail(e);
    const std::size_t y = lat.edge_head(e);
    s += env.conductance(e) * (f[y] - f[x]) * (g[y] - g[x]);
  }
  return s;
}

/// Dirichlet form with w(e) replaced by (eta^2(e^-) + eta^2(e^+)) w(e) / 2.
inline double weighted_dirichlet_form(const Environment& env, const VertexField& eta, const VertexField& u) {
  require_same_lattice(env.lattice(), eta.lattice());
  require_same_lattice(env.lattice(), u.lattice());
  for (std::size_t x = 0; x < eta.size(); ++x) {
    require(eta[x] >= 0.0 && eta[x] <= 1.0, "cutoff eta must take values in [0, 1]");
  }
  const TorusLattice& lat = env.lattice();
  double s = 0.0;
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    const std::size_t x = lat.edge_tail(e);
    const std::size_t y = lat.edge_head(e);
    const double w = 0.5 * (eta[x] * eta[x] + eta[y] * eta[y]) * env.conductance(e);
    const double du = u[y] - u[x];
    s += w * du * du;
  }
  return s;
}

/// (f . F)(e) = f(e^-) F(e) and (F . f)(e) = f(e^+) F(e).
struct EdgeProducts {
  EdgeField tail;
  EdgeField head;
};

inline EdgeProducts edge_products(const VertexField& f, const EdgeField& F) {
  require_same_lattice(f.lattice(), F.lattice());
  const TorusLattice& lat = f.lattice();
  EdgeProducts out{F, F};
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    out.tail[e] = f[lat.edge_tail(e)] * F[e];
    out.head[e] = f[lat.edge_head(e)] * F[e];
  }
  return out;
}

namespace detail {

// Values are divided by the set maximum before raising to p, so exponents in
// the hundreds neither overflow nor underflow.
template <class Weight>
double averaged_norm(const VertexField& f, double p, std::span<const std::size_t> set, Weight&& weight) {
  require(!set.empty(), "norm over an empty set");
  require(p > 0.0, "norm exponent must be positive");
  double m = 0.0;
  for (std::size_t x : set) m = std::max(m, std::abs(f[x]));
  if (std::isinf(p) || m == 0.0) return m;
  double s = 0.0;
  for (std::size_t x : set) s += weight(x) * std::pow(std::abs(f[x]) / m, p);
  return m * std::pow(s / static_cast<double>(set.size()), 1.0 / p);
}

}  // namespace detail

/// (|B|^{-1} sum_{x in B} |f(x)|^p)^{1/p}; p = infinity gives the maximum.
inline double norm_avg(const VertexField& f, double p, std::span<const std::size_t> set) {
  return detail::averaged_norm(f, p, set, [](std::size_t) { return 1.0; });
}

inline double norm_avg(const VertexField& f, double p, const Ball& ball) {
  const auto set = ball_vertices(f.lattice(), ball);
  return norm_avg(f, p, set);
}

/// mu-weighted variant (|B|^{-1} sum_{x in B} mu(x) |f(x)|^p)^{1/p}.
inline double norm_avg_mu(const Environment& env, const VertexField& f, double p,
                          std::span<const std::size_t> set) {
  require_same_lattice(env.lattice(), f.lattice());
  const VertexField& mu = env.mu();
  return detail::averaged_norm(f, p, set, [&](std::size_t x) { return mu[x]; });
}

inline double norm_avg_mu(const Environment& env, const VertexField& f, double p, const Ball& ball) {
  const auto set = ball_vertices(f.lattice(), ball);
  return norm_avg_mu(env, f, p, set);
}

/// |B|^{-1} sum_{x in B} mu(x) |f(x)|^p, i.e. the p-th power of norm_avg_mu,
/// with |0|^0 = 1 so that p = 0 gives the average of mu.
inline double power_avg_mu(const Environment& env, const VertexField& f, double p,
                           std::span<const std::size_t> set) {
  require(!set.empty(), "norm over an empty set");
  const VertexField& mu = env.mu();
  double s = 0.0;
  for (std::size_t x : set) s += mu[x] * (p == 0.0 ? 1.0 : std::pow(std::abs(f[x]), p));
  return s / static_cast<double>(set.size());
}

inline double max_abs(const EdgeField& F) {
  double m = 0.0;
  for (double v : F.values()) m = std::max(m, std::abs(v));
  return m;
}

inline double max_abs(const VertexField& f) {
  double m = 0.0;
  for (double v : f.values()) m = std::max(m, std::abs(v));
  return m;
}

}  // namespace rcm

#endif  // RCM_GRAPH_HPP
