#ifndef RCM_LATTICE_HPP
#define RCM_LATTICE_HPP

// The d-dimensional discrete torus (Z/nZ)^d. Vertices are indexed
// lexicographically with the last coordinate fastest; the canonical edge
// (x, x+e_i) has index x*d + i, tail e^- = x and head e^+ = x+e_i.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/rng.hpp"

namespace rcm {

using Point = std::vector<std::int64_t>;

class TorusLattice {
 public:
  static constexpr int kMaxDim = 8;

  TorusLattice() = default;

  TorusLattice(int d, std::int64_t n) : d_(d), n_(n) {
    require(d >= 2 && d <= kMaxDim, "lattice dimension must be in [2, 8], got " + std::to_string(d));
    require(n >= 3, "torus side must be >= 3, got " + std::to_string(n));
    std::size_t s = 1;
    for (int i = d - 1; i >= 0; --i) {
      stride_[i] = s;
      s *= static_cast<std::size_t>(n);
    }
    size_ = s;
  }

  int dim() const { return d_; }
  std::int64_t side() const { return n_; }
  std::size_t num_vertices() const { return size_; }
  std::size_t num_edges() const { return size_ * static_cast<std::size_t>(d_); }
  std::size_t stride(int i) const { return stride_[i]; }

  std::int64_t coord(std::size_t v, int i) const {
    return static_cast<std::int64_t>((v / stride_[i]) % static_cast<std::size_t>(n_));
  }

  Point coords(std::size_t v) const {
    Point x(d_);
    for (int i = 0; i < d_; ++i) x[i] = coord(v, i);
    return x;
  }

  /// Index of an arbitrary point of Z^d, reduced modulo n.
  std::size_t index(std::span<const std::int64_t> x) const {
    std::size_t v = 0;
    for (int i = 0; i < d_; ++i) v += static_cast<std::size_t>(wrap(x[i])) * stride_[i];
    return v;
  }

  std::int64_t wrap(std::int64_t c) const {
    const std::int64_t r = c % n_;
    return r < 0 ? r + n_ : r;
  }

  /// Neighbor of v in direction i; sign > 0 for +e_i, otherwise -e_i.
  std::size_t neighbor(std::size_t v, int i, int sign) const {
    const std::int64_t c = coord(v, i);
    const std::size_t s = stride_[i];
    const std::size_t span = s * static_cast<std::size_t>(n_ - 1);
    if (sign > 0) return c == n_ - 1 ? v - span : v + s;
    return c == 0 ? v + span : v - s;
  }

  std::size_t edge(std::size_t v, int i) const { return v * static_cast<std::size_t>(d_) + i; }
  std::size_t edge_tail(std::size_t e) const { return e / static_cast<std::size_t>(d_); }
  int edge_dir(std::size_t e) const { return static_cast<int>(e % static_cast<std::size_t>(d_)); }
  std::size_t edge_head(std::size_t e) const { return neighbor(edge_tail(e), edge_dir(e), +1); }

  /// Graph distance on the torus.
  std::int64_t distance(std::size_t v, std::size_t w) const {
    std::int64_t dist = 0;
    for (int i = 0; i < d_; ++i) {
      const std::int64_t a = std::abs(coord(v, i) - coord(w, i));
      dist += std::min(a, n_ - a);
    }
    return dist;
  }

  /// v + z on the torus.
  std::size_t translate(std::size_t v, std::size_t z) const {
    std::size_t w = 0;
    for (int i = 0; i < d_; ++i) {
      w += static_cast<std::size_t>((coord(v, i) + coord(z, i)) % n_) * stride_[i];
    }
    return w;
  }

  /// -z on the torus.
  std::size_t negate(std::size_t z) const {
    std::size_t w = 0;
    for (int i = 0; i < d_; ++i) w += static_cast<std::size_t>((n_ - coord(z, i)) % n_) * stride_[i];
    return w;
  }

  friend bool operator==(const TorusLattice& a, const TorusLattice& b) {
    return a.d_ == b.d_ && a.n_ == b.n_;
  }

 private:
  int d_ = 0;
  std::int64_t n_ = 0;
  std::size_t size_ = 0;
  std::array<std::size_t, kMaxDim> stride_{};
};

/// Closed graph-distance ball {y : dist(center, y) <= radius}.
struct Ball {
  std::size_t center = 0;
  double radius = 0.0;

  std::int64_t int_radius() const { return static_cast<std::int64_t>(std::floor(radius + 1e-12)); }

  /// True when the ball is isometric to the corresponding ball of Z^d.
  bool embeds_in(const TorusLattice& lat) const { return 2 * int_radius() < lat.side(); }
};

/// Sorted vertex indices of the ball.
inline std::vector<std::size_t> ball_vertices(const TorusLattice& lat, const Ball& ball) {
  require(ball.radius >= 0.0, "ball radius must be nonnegative");
  const std::int64_t r = ball.int_radius();
  const int d = lat.dim();
  std::vector<std::size_t> out;
  if (2 * r + 1 >= lat.side()) {
    for (std::size_t v = 0; v < lat.num_vertices(); ++v) {
      if (lat.distance(ball.center, v) <= r) out.push_back(v);
    }
    return out;
  }
  const Point c = lat.coords(ball.center);
  Point off(d, -r);
  Point x(d);
  while (true) {
    std::int64_t l1 = 0;
    for (int i = 0; i < d; ++i) l1 += std::abs(off[i]);
    if (l1 <= r) {
      for (int i = 0; i < d; ++i) x[i] = c[i] + off[i];
      out.push_back(lat.index(x));
    }
    int i = d - 1;
    while (i >= 0 && off[i] == r) off[i--] = -r;
    if (i < 0) break;
    ++off[i];
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Indicator mask over all torus vertices.
inline std::vector<char> vertex_mask(const TorusLattice& lat, std::span<const std::size_t> set) {
  std::vector<char> mask(lat.num_vertices(), 0);
  for (std::size_t v : set) mask[v] = 1;
  return mask;
}

/// Relative internal boundary: points of A having a neighbor in B \ A.
/// With B = all vertices this is the ordinary internal boundary of A.
inline std::vector<std::size_t> relative_boundary(const TorusLattice& lat,
                                                  std::span<const std::size_t> b_set,
                                                  std::span<const std::size_t> a_set) {
  const auto in_b = vertex_mask(lat, b_set);
  const auto in_a = vertex_mask(lat, a_set);
  std::vector<std::size_t> out;
  for (std::size_t x : a_set) {
    bool hit = false;
    for (int i = 0; i < lat.dim() && !hit; ++i) {
      for (int s : {+1, -1}) {
        const std::size_t y = lat.neighbor(x, i, s);
        if (in_b[y] && !in_a[y]) {
          hit = true;
          break;
        }
      }
    }
    if (hit) out.push_back(x);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// Internal boundary of B relative to the whole torus.
inline std::vector<std::size_t> ball_boundary(const TorusLattice& lat, std::span<const std::size_t> b_set) {
  const auto in_b = vertex_mask(lat, b_set);
  std::vector<std::size_t> out;
  for (std::size_t x : b_set) {
    bool hit = false;
    for (int i = 0; i < lat.dim() && !hit; ++i) {
      hit = !in_b[lat.neighbor(x, i, +1)] || !in_b[lat.neighbor(x, i, -1)];
    }
    if (hit) out.push_back(x);
  }
  return out;
}

/// r * |boundary_B A| / |A| for a nonempty A inside the ball.
inline double isoperimetric_ratio(const TorusLattice& lat, const Ball& ball,
                                  std::span<const std::size_t> a_set) {
  require(!a_set.empty(), "isoperimetric ratio needs a nonempty set");
  const auto b_set = ball_vertices(lat, ball);
  const auto bd = relative_boundary(lat, b_set, a_set);
  return ball.radius * static_cast<double>(bd.size()) / static_cast<double>(a_set.size());
}

/// Empirical lower-bound evidence for the relative isoperimetric constant of
/// B(x0, r): the minimum of r |boundary_B A| / |A| over sub-boxes of the ball
/// and randomly grown connected sets with |A| < |B| / 2. Not a proof.
inline double isoperimetry_probe(const TorusLattice& lat, std::size_t x0, std::int64_t r,
                                 int trials, std::uint64_t seed) {
  require(r >= 1, "isoperimetry probe needs r >= 1");
  const Ball ball{x0, static_cast<double>(r)};
  require(ball.embeds_in(lat), "isoperimetry probe needs 2r < n");
  const auto b_set = ball_vertices(lat, ball);
  const auto in_b = vertex_mask(lat, b_set);
  const std::size_t half = b_set.size() / 2;
  const int d = lat.dim();
  const Point c = lat.coords(x0);
  double best = std::numeric_limits<double>::infinity();

  auto consider = [&](std::vector<std::size_t>& a) {
    if (a.empty() || 2 * a.size() >= b_set.size()) return;
    std::sort(a.begin(), a.end());
    best = std::min(best, isoperimetric_ratio(lat, ball, a));
  };

  // Sub-boxes [c - r, c - r + len_0) x ... intersected with the ball, every
  // length combination along the first axis and a full slab along the others.
  for (std::int64_t lo = -r; lo <= r; ++lo) {
    for (std::int64_t hi = lo; hi <= r; ++hi) {
      std::vector<std::size_t> a;
      for (std::size_t v : b_set) {
        std::int64_t off = lat.coord(v, 0) - c[0];
        if (off > lat.side() / 2) off -= lat.side();
        if (off < -lat.side() / 2) off += lat.side();
        if (off >= lo && off <= hi) a.push_back(v);
      }
      consider(a);
    }
  }

  Xoshiro256 rng(seed);
  for (int t = 0; t < trials; ++t) {
    const std::size_t target = 1 + static_cast<std::size_t>(rng.uniform() * static_cast<double>(half - 1));
    std::vector<std::size_t> a{b_set[static_cast<std::size_t>(rng.uniform() * static_cast<double>(b_set.size()))]};
    std::vector<char> in_a(lat.num_vertices(), 0);
    in_a[a[0]] = 1;
    std::vector<std::size_t> frontier;
    auto push_neighbors = [&](std::size_t x) {
      for (int i = 0; i < d; ++i) {
        for (int s : {+1, -1}) {
          const std::size_t y = lat.neighbor(x, i, s);
          if (in_b[y] && !in_a[y]) frontier.push_back(y);
        }
      }
    };
    push_neighbors(a[0]);
    while (a.size() < target && !frontier.empty()) {
      const std::size_t k = static_cast<std::size_t>(rng.uniform() * static_cast<double>(frontier.size()));
      const std::size_t y = frontier[k];
      frontier[k] = frontier.back();
      frontier.pop_back();
      if (in_a[y]) continue;
      in_a[y] = 1;
      a.push_back(y);
      push_neighbors(y);
    }
    consider(a);
  }
  return best;
}

}  // namespace rcm

#endif  // RCM_LATTICE_HPP
