#ifndef RCM_FIELD_HPP
#define RCM_FIELD_HPP

#include <cmath>
#include <cstddef>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/lattice.hpp"

namespace rcm {

namespace detail {

template <class Tag>
class LatticeField {
 public:
  LatticeField() = default;

  LatticeField(const TorusLattice& lat, double value)
      : lattice_(lat), values_(Tag::count(lat), value) {}

  LatticeField(const TorusLattice& lat, std::vector<double> values)
      : lattice_(lat), values_(std::move(values)) {
    require(values_.size() == Tag::count(lat),
            std::string(Tag::name) + " needs " + std::to_string(Tag::count(lat)) + " values, got " +
                std::to_string(values_.size()));
    for (double v : values_) require(std::isfinite(v), std::string(Tag::name) + " values must be finite");
  }

  const TorusLattice& lattice() const { return lattice_; }
  std::size_t size() const { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  double& operator[](std::size_t k) { return values_[k]; }
  const std::vector<double>& values() const { return values_; }
  std::vector<double>& values() { return values_; }

  template <class Fn>
  LatticeField map(Fn&& fn) const {
    LatticeField out = *this;
    for (double& v : out.values_) v = fn(v);
    return out;
  }

  friend bool operator==(const LatticeField&, const LatticeField&) = default;

 private:
  TorusLattice lattice_;
  std::vector<double> values_;
};

struct VertexTag {
  static constexpr const char* name = "VertexField";
  static std::size_t count(const TorusLattice& lat) { return lat.num_vertices(); }
};

struct EdgeTag {
  static constexpr const char* name = "EdgeField";
  static std::size_t count(const TorusLattice& lat) { return lat.num_edges(); }
};

}  // namespace detail

/// One real value per torus vertex.
using VertexField = detail::LatticeField<detail::VertexTag>;
/// One real value per canonical oriented edge, indexed x*d + i.
using EdgeField = detail::LatticeField<detail::EdgeTag>;

template <class Fn>
VertexField make_vertex_field(const TorusLattice& lat, Fn&& fn) {
  std::vector<double> v(lat.num_vertices());
  for (std::size_t x = 0; x < v.size(); ++x) v[x] = fn(x);
  return VertexField(lat, std::move(v));
}

template <class Fn>
EdgeField make_edge_field(const TorusLattice& lat, Fn&& fn) {
  std::vector<double> v(lat.num_edges());
  for (std::size_t e = 0; e < v.size(); ++e) v[e] = fn(e);
  return EdgeField(lat, std::move(v));
}

inline VertexField indicator(const TorusLattice& lat, std::size_t x) {
  VertexField f(lat, 0.0);
  f[x] = 1.0;
  return f;
}

inline void require_same_lattice(const TorusLattice& a, const TorusLattice& b) {
  require(a == b, "fields live on different lattices");
}

}  // namespace rcm

#endif  // RCM_FIELD_HPP
