#ifndef RCM_CG_HPP
#define RCM_CG_HPP

// Matrix-free preconditioned conjugate gradient for symmetric positive
// (semi)definite stencil operators. Reductions run in index order, so the
// result is bit-reproducible.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "rcm/error.hpp"

namespace rcm {

enum class Preconditioner { none, diagonal };

struct SolverConfig {
  double tol = 1e-10;  ///< relative residual ||b - A x||_2 / ||b||_2
  int max_iter = 200000;
  Preconditioner precond = Preconditioner::diagonal;
};

struct CgResult {
  int iterations = 0;
  double residual = 0.0;  ///< true relative residual at exit
  bool converged = false;
};

namespace detail {

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

}  // namespace detail

/// Solves A x = b starting from the contents of x. `apply(in, out)` writes
/// A*in into out. `diag` is the Jacobi preconditioner (ignored when
/// cfg.precond is none). Singular systems with a consistent right-hand side
/// are fine; the kernel component of x is left to the caller.
template <class Apply>
CgResult conjugate_gradient(Apply&& apply, std::span<const double> diag, std::span<const double> b,
                            std::vector<double>& x, const SolverConfig& cfg) {
  require(cfg.tol > 0.0, "solver tolerance must be positive");
  require(cfg.max_iter > 0, "solver max_iter must be positive");
  const std::size_t n = b.size();
  x.resize(n, 0.0);
  const double bnorm = std::sqrt(detail::dot(b, b));
  CgResult res;
  if (bnorm == 0.0) {
    std::fill(x.begin(), x.end(), 0.0);
    res.converged = true;
    return res;
  }
  const bool precondition = cfg.precond == Preconditioner::diagonal && !diag.empty();

  std::vector<double> r(n), z(n), p(n), ap(n);
  auto true_residual = [&] {
    apply(std::span<const double>(x), std::span<double>(ap));
    for (std::size_t k = 0; k < n; ++k) r[k] = b[k] - ap[k];
    return std::sqrt(detail::dot(r, r)) / bnorm;
  };

  res.residual = true_residual();
  // Restarts recover from drift between the recursive and true residuals.
  for (int restart = 0; restart < 8 && res.iterations < cfg.max_iter; ++restart) {
    if (res.residual <= cfg.tol) break;
    for (std::size_t k = 0; k < n; ++k) z[k] = precondition ? r[k] / diag[k] : r[k];
    p = z;
    double rz = detail::dot(r, z);
    while (res.iterations < cfg.max_iter) {
      apply(std::span<const double>(p), std::span<double>(ap));
      const double pap = detail::dot(p, ap);
      if (!(pap > 0.0)) break;
      const double step = rz / pap;
      for (std::size_t k = 0; k < n; ++k) {
        x[k] += step * p[k];
        r[k] -= step * ap[k];
      }
      ++res.iterations;
      if (std::sqrt(detail::dot(r, r)) / bnorm <= 0.5 * cfg.tol) break;
      for (std::size_t k = 0; k < n; ++k) z[k] = precondition ? r[k] / diag[k] : r[k];
      const double rz_next = detail::dot(r, z);
      const double beta = rz_next / rz;
      rz = rz_next;
      for (std::size_t k = 0; k < n; ++k) p[k] = z[k] + beta * p[k];
    }
    res.residual = true_residual();
  }
  res.converged = res.residual <= cfg.tol;
  return res;
}

}  // namespace rcm

#endif  // RCM_CG_HPP
