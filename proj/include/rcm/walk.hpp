#ifndef RCM_WALK_HPP
#define RCM_WALK_HPP

// Continuous-time random walks on Z^d over the periodized environment
// (conductances looked up modulo n). Event driven and exact in law.
//
// Both schemes share the jump chain: from x the walk moves to y ~ x with
// probability w_xy / mu(x). The variable speed walk holds Exp(mu(x)) at x,
// the constant speed walk Exp(1). Each step draws the holding-time variate
// first and the direction variate second, so the two schemes run from the
// same seed visit exactly the same sequence of sites.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "rcm/corrector.hpp"
#include "rcm/error.hpp"
#include "rcm/graph.hpp"
#include "rcm/io.hpp"
#include "rcm/rng.hpp"

namespace rcm {

enum class Scheme { vsrw, csrw };

inline const char* scheme_name(Scheme s) { return s == Scheme::vsrw ? "VSRW" : "CSRW"; }

struct WalkConfig {
  Scheme scheme = Scheme::vsrw;
  double t_max = 1.0;
  int count = 1;
  std::uint64_t seed = 0;
  std::size_t max_stored_jumps = 10'000'000;  ///< materialized paths are capped here
};

/// Unwrapped position in Z^d plus the torus vertex it sits over.
struct WalkState {
  std::array<std::int64_t, TorusLattice::kMaxDim> x{};
  std::size_t vertex = 0;
};

/// Runs one trajectory up to t_max, calling on_jump(time, state) after every
/// jump. Returns the number of jumps.
template <class OnJump>
std::size_t run_walk(const Environment& env, std::span<const std::int64_t> x0, double t_max, std::uint64_t seed,
                     Scheme scheme, OnJump&& on_jump) {
  const TorusLattice& lat = env.lattice();
  const int d = lat.dim();
  require(static_cast<int>(x0.size()) == d, "start point must have d coordinates");
  require(t_max > 0.0 && std::isfinite(t_max), "walk horizon must be positive and finite");
  WalkState s;
  for (int i = 0; i < d; ++i) s.x[i] = x0[i];
  s.vertex = lat.index(x0);
  const auto& w = env.conductance();
  const auto& mu = env.mu();
  Xoshiro256 rng(seed);
  double t = 0.0;
  std::size_t jumps = 0;
  while (true) {
    const double m = mu[s.vertex];
    const double hold = rng.exponential();
    t += scheme == Scheme::vsrw ? hold / m : hold;
    if (t > t_max) break;
    double target = rng.uniform() * m;
    int dir = d - 1;
    int sign = -1;
    for (int i = 0; i < d; ++i) {
      const double wf = w[lat.edge(s.vertex, i)];
      if (target < wf) {
        dir = i;
        sign = +1;
        break;
      }
      target -= wf;
      const double wb = w[lat.edge(lat.neighbor(s.vertex, i, -1), i)];
      if (target < wb || i == d - 1) {
        dir = i;
        sign = -1;
        break;
      }
      target -= wb;
    }
    s.x[dir] += sign;
    s.vertex = lat.neighbor(s.vertex, dir, sign);
    ++jumps;
    on_jump(t, s);
  }
  return jumps;
}

/// Positions at the given nondecreasing times (right-continuous), one run.
inline std::vector<Point> positions_at(const Environment& env, std::span<const std::int64_t> x0,
                                       std::span<const double> times, std::uint64_t seed, Scheme scheme) {
  require(!times.empty(), "need at least one sample time");
  require(std::is_sorted(times.begin(), times.end()) && times.front() >= 0.0, "sample times must be sorted and >= 0");
  const int d = env.lattice().dim();
  std::vector<Point> out(times.size(), Point(x0.begin(), x0.end()));
  std::size_t next = 0;
  while (next < times.size() && times[next] == 0.0) ++next;
  Point current(x0.begin(), x0.end());
  const double horizon = times.back();
  if (horizon > 0.0) {
    run_walk(env, x0, horizon, seed, scheme, [&](double t, const WalkState& s) {
      while (next < times.size() && times[next] < t) out[next++] = current;
      for (int i = 0; i < d; ++i) current[i] = s.x[i];
    });
  }
  while (next < times.size()) out[next++] = current;
  return out;
}

struct WalkPath {
  TorusLattice lattice;
  Scheme scheme = Scheme::vsrw;
  std::uint64_t seed = 0;
  double horizon = 0.0;
  Point start;
  std::vector<double> times;              ///< jump times, strictly increasing, > 0
  std::vector<std::int64_t> positions;    ///< d coordinates per jump, after the jump

  int dim() const { return lattice.dim(); }
  std::size_t num_jumps() const { return times.size(); }

  /// Position after k jumps (k = 0 is the start).
  Point point(std::size_t k) const {
    if (k == 0) return start;
    const auto d = static_cast<std::size_t>(dim());
    return Point(positions.begin() + static_cast<std::ptrdiff_t>((k - 1) * d),
                 positions.begin() + static_cast<std::ptrdiff_t>(k * d));
  }

  /// Number of jumps made by time t.
  std::size_t jumps_by(double t) const {
    return static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
  }

  /// X_t, right-continuous.
  Point at(double t) const {
    require(t >= 0.0 && t <= horizon, "query time outside the path horizon");
    return point(jumps_by(t));
  }
};

inline WalkPath simulate(const Environment& env, std::span<const std::int64_t> x0, double t_max, std::uint64_t seed,
                         Scheme scheme, std::size_t max_stored_jumps = 10'000'000) {
  WalkPath path;
  path.lattice = env.lattice();
  path.scheme = scheme;
  path.seed = seed;
  path.horizon = t_max;
  path.start.assign(x0.begin(), x0.end());
  const int d = env.lattice().dim();
  run_walk(env, x0, t_max, seed, scheme, [&](double t, const WalkState& s) {
    if (path.times.size() >= max_stored_jumps) {
      throw Error("path exceeds " + std::to_string(max_stored_jumps) +
                  " jumps; use the streaming samplers instead of materializing it");
    }
    path.times.push_back(t);
    path.positions.insert(path.positions.end(), s.x.begin(), s.x.begin() + d);
  });
  return path;
}

inline WalkPath simulate_vsrw(const Environment& env, std::span<const std::int64_t> x0, double t_max,
                              std::uint64_t seed) {
  return simulate(env, x0, t_max, seed, Scheme::vsrw);
}

inline WalkPath simulate_csrw(const Environment& env, std::span<const std::int64_t> x0, double t_max,
                              std::uint64_t seed) {
  return simulate(env, x0, t_max, seed, Scheme::csrw);
}

/// X^{(n)}_t = X_{n^2 t} / n.
class RescaledPath {
 public:
  RescaledPath(WalkPath path, std::int64_t n) : path_(std::move(path)), n_(n) {
    require(n >= 1, "rescaling factor must be >= 1");
  }

  double horizon() const { return path_.horizon / (static_cast<double>(n_) * static_cast<double>(n_)); }

  std::vector<double> at(double t) const {
    const double nn = static_cast<double>(n_);
    require(t >= 0.0 && t * nn * nn <= path_.horizon, "rescaled query time beyond the path horizon");
    const Point x = path_.at(t * nn * nn);
    std::vector<double> out(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) out[i] = static_cast<double>(x[i]) / nn;
    return out;
  }

 private:
  WalkPath path_;
  std::int64_t n_;
};

inline RescaledPath rescale_path(WalkPath path, std::int64_t n) { return RescaledPath(std::move(path), n); }

/// M_t = X_t - (chi(X_t) - chi(X_0)): the harmonic coordinate along the path,
/// anchored so that M_0 = X_0. chi is extended periodically.
struct MartingalePath {
  std::vector<double> times;   ///< 0 followed by the jump times
  std::vector<double> values;  ///< d values per entry of times
  int d = 0;

  std::vector<double> at(double t) const {
    const auto k = static_cast<std::size_t>(std::upper_bound(times.begin(), times.end(), t) - times.begin());
    require(k >= 1, "query time before the path start");
    return std::vector<double>(values.begin() + static_cast<std::ptrdiff_t>((k - 1) * d),
                               values.begin() + static_cast<std::ptrdiff_t>(k * d));
  }
};

inline MartingalePath martingale_path(const WalkPath& path, const CorrectorSolution& sol) {
  require(path.lattice == sol.lattice(), "path and corrector live on different lattices");
  const TorusLattice& lat = path.lattice;
  const int d = lat.dim();
  MartingalePath m;
  m.d = d;
  const std::size_t v0 = lat.index(path.start);
  m.times.reserve(path.num_jumps() + 1);
  m.times.push_back(0.0);
  m.times.insert(m.times.end(), path.times.begin(), path.times.end());
  m.values.reserve(m.times.size() * static_cast<std::size_t>(d));
  for (std::size_t k = 0; k <= path.num_jumps(); ++k) {
    const Point x = path.point(k);
    const std::size_t v = lat.index(x);
    for (int j = 0; j < d; ++j) {
      m.values.push_back(static_cast<double>(x[j]) - (sol.chi[j][v] - sol.chi[j][v0]));
    }
  }
  return m;
}

/// sup over jump times s <= n^2 T of max_j |chi_j(X_s)| / n.
inline double corrector_sup_along_path(const WalkPath& path, const CorrectorSolution& sol, std::int64_t n,
                                       double T) {
  require(path.lattice == sol.lattice(), "path and corrector live on different lattices");
  require(n >= 1 && T > 0.0, "need n >= 1 and T > 0");
  const double tn = static_cast<double>(n) * static_cast<double>(n) * T;
  require(tn <= path.horizon, "path horizon shorter than n^2 T");
  const TorusLattice& lat = path.lattice;
  const std::size_t last = path.jumps_by(tn);
  double best = 0.0;
  for (std::size_t k = 0; k <= last; ++k) {
    const std::size_t v = lat.index(path.point(k));
    for (int j = 0; j < sol.dim(); ++j) best = std::max(best, std::abs(sol.chi[j][v]));
  }
  return best / static_cast<double>(n);
}

/// CSV with columns time, x_1..x_d; the first row is the start at time 0.
inline std::string path_csv(const WalkPath& path) {
  std::vector<std::string> header{"time"};
  for (int i = 0; i < path.dim(); ++i) header.push_back("x_" + std::to_string(i + 1));
  Csv csv(header);
  for (std::size_t k = 0; k <= path.num_jumps(); ++k) {
    std::vector<std::string> row{format_double(k == 0 ? 0.0 : path.times[k - 1])};
    for (std::int64_t c : path.point(k)) row.push_back(std::to_string(c));
    csv.row(row);
  }
  return csv.str();
}

}  // namespace rcm

#endif  // RCM_WALK_HPP
