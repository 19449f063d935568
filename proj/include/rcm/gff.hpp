#ifndef RCM_GFF_HPP
#define RCM_GFF_HPP

// Massless lattice Gaussian free field on the torus, sampled through its
// Fourier modes: mode k gets an independent complex Gaussian amplitude with
// variance 1/lambda_k, where lambda_k = sum_i 2(1 - cos(2 pi k_i / n)) is the
// eigenvalue of -L for unit conductances. The zero mode is pinned to 0.

#include <fftw3.h>

#include <cmath>
#include <complex>
#include <cstdint>
#include <mutex>
#include <numbers>
#include <vector>

#include "rcm/field.hpp"
#include "rcm/lattice.hpp"
#include "rcm/rng.hpp"

namespace rcm {

namespace detail {

inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

inline double torus_eigenvalue(const TorusLattice& lat, std::size_t k) {
  double lambda = 0.0;
  for (int i = 0; i < lat.dim(); ++i) {
    const double theta = 2.0 * std::numbers::pi * static_cast<double>(lat.coord(k, i)) /
                         static_cast<double>(lat.side());
    lambda += 2.0 * (1.0 - std::cos(theta));
  }
  return lambda;
}

}  // namespace detail

/// Variance (1/N) sum_{k != 0} 1/lambda_k of one site of the torus field.
inline double gff_site_variance(const TorusLattice& lat) {
  double s = 0.0;
  for (std::size_t k = 1; k < lat.num_vertices(); ++k) s += 1.0 / detail::torus_eigenvalue(lat, k);
  return s / static_cast<double>(lat.num_vertices());
}

/// Sample the field. White noise is drawn per vertex from the counter-based
/// generator, transformed, scaled by lambda_k^{-1/2} and transformed back;
/// the unitary normalization gives Cov(phi(x), phi(y)) = (1/N) sum_{k != 0}
/// exp(i k (x - y)) / lambda_k.
inline VertexField sample_gff(const TorusLattice& lat, std::uint64_t seed) {
  const std::size_t n_sites = lat.num_vertices();
  std::vector<std::complex<double>> buf(n_sites);
  for (std::size_t x = 0; x < n_sites; ++x) buf[x] = counter_normal(seed, x);

  std::vector<int> dims(lat.dim(), static_cast<int>(lat.side()));
  auto* data = reinterpret_cast<fftw_complex*>(buf.data());
  fftw_plan fwd;
  fftw_plan bwd;
  {
    std::lock_guard lock(detail::fftw_plan_mutex());
    fwd = fftw_plan_dft(lat.dim(), dims.data(), data, data, FFTW_FORWARD, FFTW_ESTIMATE);
    bwd = fftw_plan_dft(lat.dim(), dims.data(), data, data, FFTW_BACKWARD, FFTW_ESTIMATE);
  }
  fftw_execute(fwd);
  buf[0] = 0.0;
  for (std::size_t k = 1; k < n_sites; ++k) buf[k] /= std::sqrt(detail::torus_eigenvalue(lat, k));
  fftw_execute(bwd);
  {
    std::lock_guard lock(detail::fftw_plan_mutex());
    fftw_destroy_plan(fwd);
    fftw_destroy_plan(bwd);
  }

  std::vector<double> phi(n_sites);
  const double norm = 1.0 / static_cast<double>(n_sites);
  for (std::size_t x = 0; x < n_sites; ++x) phi[x] = buf[x].real() * norm;
  return VertexField(lat, std::move(phi));
}

}  // namespace rcm

#endif  // RCM_GFF_HPP
