#ifndef RCM_ENVIRONMENT_HPP
#define RCM_ENVIRONMENT_HPP

// Conductance laws, environment generation, moment diagnostics and shifts.

#include <cmath>
#include <cstdint>
#include <optional>
#include <sstream>
#include <string>
#include <type_traits>
#include <variant>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/gff.hpp"
#include "rcm/graph.hpp"
#include "rcm/rng.hpp"

namespace rcm {

namespace law {

struct Constant {
  double c = 1.0;
};

/// i.i.d. Uniform(c_low, c_high).
struct UniformElliptic {
  double c_low = 1.0;
  double c_high = 1.0;
};

/// i.i.d. two-sided Pareto mixture: with probability 1/2 w = U^{-1/a}
/// (moments finite exactly below a), otherwise w = U^{1/b} (inverse moments
/// finite exactly below b).
struct ParetoMix {
  double a = 1.0;
  double b = 1.0;
};

/// Edges along `axis` carry profile[x_axis mod profile.size()]; all other
/// edges carry 1.
struct Layered {
  int axis = 0;
  std::vector<double> profile{1.0};
};

/// w_xy = exp(scale * (phi(x) + phi(y))) with phi the torus free field; d >= 3.
struct GffExp {
  double scale = 1.0;
};

}  // namespace law

using EnvLaw = std::variant<law::Constant, law::UniformElliptic, law::ParetoMix, law::Layered, law::GffExp>;

struct EnvSpec {
  EnvLaw law = law::Constant{};
  int d = 2;
  std::int64_t n = 16;
  std::uint64_t seed = 0;
};

inline std::string law_name(const EnvLaw& l) {
  return std::visit(
      [](const auto& v) -> std::string {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, law::Constant>) return "constant";
        if constexpr (std::is_same_v<T, law::UniformElliptic>) return "uniform_elliptic";
        if constexpr (std::is_same_v<T, law::ParetoMix>) return "iid_pareto_mix";
        if constexpr (std::is_same_v<T, law::Layered>) return "layered";
        if constexpr (std::is_same_v<T, law::GffExp>) return "gff_exp";
      },
      l);
}

/// Short human-readable descriptor, e.g. "uniform_elliptic(0.5,2) d=2 n=32 seed=1".
inline std::string describe(const EnvSpec& spec) {
  std::ostringstream os;
  os << law_name(spec.law) << '(';
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, law::Constant>) os << v.c;
        if constexpr (std::is_same_v<T, law::UniformElliptic>) os << v.c_low << ',' << v.c_high;
        if constexpr (std::is_same_v<T, law::ParetoMix>) os << v.a << ',' << v.b;
        if constexpr (std::is_same_v<T, law::Layered>) {
          os << "axis=" << v.axis << ",profile=";
          for (std::size_t k = 0; k < v.profile.size(); ++k) os << (k ? ":" : "") << v.profile[k];
        }
        if constexpr (std::is_same_v<T, law::GffExp>) os << v.scale;
      },
      spec.law);
  os << ") d=" << spec.d << " n=" << spec.n << " seed=" << spec.seed;
  return os.str();
}

inline void validate(const EnvSpec& spec) {
  const TorusLattice lat(spec.d, spec.n);
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, law::Constant>) {
          require(v.c > 0.0 && std::isfinite(v.c), "constant law needs c > 0");
        }
        if constexpr (std::is_same_v<T, law::UniformElliptic>) {
          require(v.c_low > 0.0 && v.c_low <= v.c_high && std::isfinite(v.c_high),
                  "uniform_elliptic law needs 0 < c_low <= c_high");
        }
        if constexpr (std::is_same_v<T, law::ParetoMix>) {
          require(v.a > 0.0 && v.b > 0.0, "iid_pareto_mix law needs a > 0 and b > 0");
        }
        if constexpr (std::is_same_v<T, law::Layered>) {
          require(v.axis >= 0 && v.axis < spec.d, "layered law axis out of range");
          require(!v.profile.empty(), "layered law needs a nonempty profile");
          require(spec.n % static_cast<std::int64_t>(v.profile.size()) == 0,
                  "layered law needs the torus side to be a multiple of the profile length");
          for (double c : v.profile) require(c > 0.0 && std::isfinite(c), "layered profile must be positive");
        }
        if constexpr (std::is_same_v<T, law::GffExp>) {
          require(spec.d >= 3, "gff_exp law needs d >= 3 (the massless field is defined for d >= 3)");
          require(std::isfinite(v.scale), "gff_exp scale must be finite");
        }
      },
      spec.law);
  (void)lat;
}

/// Deterministic function of (spec, seed): each edge's draw uses the
/// counter-based generator keyed by its edge index.
inline Environment generate_env(const EnvSpec& spec) {
  validate(spec);
  const TorusLattice lat(spec.d, spec.n);
  const std::uint64_t seed = spec.seed;
  std::vector<double> w(lat.num_edges());
  std::visit(
      [&](const auto& v) {
        using T = std::decay_t<decltype(v)>;
        if constexpr (std::is_same_v<T, law::Constant>) {
          std::fill(w.begin(), w.end(), v.c);
        }
        if constexpr (std::is_same_v<T, law::UniformElliptic>) {
          for (std::size_t e = 0; e < w.size(); ++e) {
            w[e] = v.c_low + (v.c_high - v.c_low) * counter_uniform(seed, e, 0);
          }
        }
        if constexpr (std::is_same_v<T, law::ParetoMix>) {
          for (std::size_t e = 0; e < w.size(); ++e) {
            const bool upper = counter_uniform(seed, e, 0) < 0.5;
            const double u = counter_uniform(seed, e, 1);
            w[e] = upper ? std::pow(u, -1.0 / v.a) : std::pow(u, 1.0 / v.b);
          }
        }
        if constexpr (std::is_same_v<T, law::Layered>) {
          const auto len = static_cast<std::int64_t>(v.profile.size());
          for (std::size_t e = 0; e < w.size(); ++e) {
            if (lat.edge_dir(e) != v.axis) {
              w[e] = 1.0;
            } else {
              w[e] = v.profile[static_cast<std::size_t>(lat.coord(lat.edge_tail(e), v.axis) % len)];
            }
          }
        }
        if constexpr (std::is_same_v<T, law::GffExp>) {
          const VertexField phi = sample_gff(lat, seed);
          for (std::size_t e = 0; e < w.size(); ++e) {
            w[e] = std::exp(v.scale * (phi[lat.edge_tail(e)] + phi[lat.edge_head(e)]));
          }
        }
      },
      spec.law);
  return Environment(EdgeField(lat, std::move(w)));
}

/// 1/p + 1/q < 2/d, evaluated in cross-multiplied form so that boundary
/// cases with representable exponents are decided exactly. Infinite
/// exponents are allowed.
inline bool check_moment_condition(double p, double q, int d) {
  require(p > 1.0 && q > 1.0, "moment exponents must lie in (1, inf]");
  const double dd = d;
  if (std::isinf(p) && std::isinf(q)) return true;
  if (std::isinf(p)) return dd < 2.0 * q;
  if (std::isinf(q)) return dd < 2.0 * p;
  return dd * (p + q) < 2.0 * p * q;
}

/// E[w^k] of one edge for the i.i.d. laws (k may be negative); empty when
/// the law is not i.i.d. or the moment is infinite.
inline std::optional<double> edge_moment(const EnvLaw& l, double k) {
  if (const auto* c = std::get_if<law::Constant>(&l)) return std::pow(c->c, k);
  if (const auto* u = std::get_if<law::UniformElliptic>(&l)) {
    const double a = u->c_low;
    const double b = u->c_high;
    if (a == b) return std::pow(a, k);
    if (k == -1.0) return std::log(b / a) / (b - a);
    return (std::pow(b, k + 1.0) - std::pow(a, k + 1.0)) / ((k + 1.0) * (b - a));
  }
  if (const auto* m = std::get_if<law::ParetoMix>(&l)) {
    // E[U^{-k/a}] = a/(a-k) for k < a; E[U^{k/b}] = b/(b+k) for k > -b.
    if (k >= m->a || k <= -m->b) return std::nullopt;
    return 0.5 * (m->a / (m->a - k) + m->b / (m->b + k));
  }
  return std::nullopt;
}

struct MomentReport {
  double p = 1.0;
  double q = 1.0;
  double mu_moment = 0.0;  ///< |torus|^{-1} sum_x mu(x)^p
  double nu_moment = 0.0;  ///< |torus|^{-1} sum_x nu(x)^q
  std::optional<double> mu_target;
  std::optional<double> nu_target;
};

namespace detail {

// E[(sum of m i.i.d. copies)^k] for k in {1, 2}.
inline std::optional<double> sum_moment(const EnvLaw& l, int m, double k, double sign) {
  if (std::holds_alternative<law::Constant>(l)) {
    return std::pow(m * std::pow(std::get<law::Constant>(l).c, sign), k);
  }
  const auto m1 = edge_moment(l, sign);
  if (!m1) return std::nullopt;
  if (k == 1.0) return m * *m1;
  if (k == 2.0) {
    const auto m2 = edge_moment(l, 2.0 * sign);
    if (!m2) return std::nullopt;
    return m * *m2 + m * (m - 1) * *m1 * *m1;
  }
  return std::nullopt;
}

}  // namespace detail

/// Full-torus averages of mu^p and nu^q; closed-form targets for i.i.d. laws
/// where available (any p for constant, p in {1, 2} otherwise).
inline MomentReport empirical_moments(const Environment& env, double p, double q,
                                      const std::optional<EnvLaw>& l = std::nullopt) {
  require(p >= 1.0 && q >= 1.0 && std::isfinite(p) && std::isfinite(q), "moment exponents must be finite and >= 1");
  MomentReport r;
  r.p = p;
  r.q = q;
  const auto& mu = env.mu();
  const auto& nu = env.nu();
  for (std::size_t x = 0; x < mu.size(); ++x) {
    r.mu_moment += std::pow(mu[x], p);
    r.nu_moment += std::pow(nu[x], q);
  }
  const double n = static_cast<double>(mu.size());
  r.mu_moment /= n;
  r.nu_moment /= n;
  if (l) {
    const int m = 2 * env.lattice().dim();
    r.mu_target = detail::sum_moment(*l, m, p, 1.0);
    r.nu_target = detail::sum_moment(*l, m, q, -1.0);
  }
  return r;
}

/// (tau_z w)_{xy} = w_{x+z, y+z}.
inline Environment shift_env(const Environment& env, std::size_t z) {
  const TorusLattice& lat = env.lattice();
  require(z < lat.num_vertices(), "shift vertex out of range");
  const int d = lat.dim();
  std::vector<double> w(lat.num_edges());
  for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
    const std::size_t xz = lat.translate(x, z);
    for (int i = 0; i < d; ++i) w[lat.edge(x, i)] = env.conductance(lat.edge(xz, i));
  }
  return Environment(EdgeField(lat, std::move(w)));
}

}  // namespace rcm

#endif  // RCM_ENVIRONMENT_HPP
