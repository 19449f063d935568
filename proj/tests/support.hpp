#ifndef RCM_TESTS_SUPPORT_HPP
#define RCM_TESTS_SUPPORT_HPP

#include <cmath>
#include <cstdint>

#include "rcm/environment.hpp"
#include "rcm/field.hpp"
#include "rcm/graph.hpp"
#include "rcm/rng.hpp"

namespace rcm::fixture {

inline VertexField random_vertex_field(const TorusLattice& lat, Xoshiro256& rng) {
  return make_vertex_field(lat, [&](std::size_t) { return rng.normal(); });
}

inline EdgeField random_edge_field(const TorusLattice& lat, Xoshiro256& rng) {
  return make_edge_field(lat, [&](std::size_t) { return rng.normal(); });
}

inline Environment random_env(int d, std::int64_t n, std::uint64_t seed, double lo = 0.5, double hi = 2.0) {
  return generate_env(EnvSpec{law::UniformElliptic{lo, hi}, d, n, seed});
}

// |a - b| relative to a reference magnitude (for sums, the sum of absolute terms).
inline double rel_err(double a, double b, double scale) {
  const double s = std::max({std::abs(a), std::abs(b), scale});
  return s == 0.0 ? 0.0 : std::abs(a - b) / s;
}

}  // namespace rcm::fixture

#endif  // RCM_TESTS_SUPPORT_HPP
