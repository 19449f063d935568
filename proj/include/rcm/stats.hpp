#ifndef RCM_STATS_HPP
#define RCM_STATS_HPP

// Monte Carlo side of the invariance principle: covariance estimates with
// standard errors, Kolmogorov-Smirnov tests, occupation-time diagnostics,
// and the per-size report comparing walk covariances with the corrector.
// Quenched protocol: one environment per report, randomness only in the
// trajectories.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numbers>
#include <span>
#include <string>
#include <vector>

#include "rcm/corrector.hpp"
#include "rcm/environment.hpp"
#include "rcm/error.hpp"
#include "rcm/io.hpp"
#include "rcm/parallel.hpp"
#include "rcm/walk.hpp"

namespace rcm {

/// Rows are observations, columns coordinates.
using SampleMatrix = Eigen::MatrixXd;

struct CovarianceEstimate {
  Eigen::MatrixXd cov;  ///< unbiased sample covariance
  Eigen::MatrixXd se;   ///< standard error of each entry
  Eigen::VectorXd mean;
  Eigen::VectorXd mean_se;
  std::size_t count = 0;
};

/// Sample covariance; the standard error of entry (i, j) is the sample
/// standard deviation of the centered products divided by sqrt(N).
inline CovarianceEstimate covariance(const SampleMatrix& x) {
  const auto n = static_cast<std::size_t>(x.rows());
  require(n >= 2, "covariance needs at least two observations");
  const Eigen::Index d = x.cols();
  CovarianceEstimate out;
  out.count = n;
  out.mean = x.colwise().mean().transpose();
  const Eigen::MatrixXd c = x.rowwise() - out.mean.transpose();
  const double nn = static_cast<double>(n);
  out.cov = (c.transpose() * c) / (nn - 1.0);
  out.se = Eigen::MatrixXd::Zero(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = i; j < d; ++j) {
      const Eigen::VectorXd prod = c.col(i).cwiseProduct(c.col(j));
      const double m = prod.mean();
      const double var = (prod.array() - m).square().sum() / (nn - 1.0);
      out.se(i, j) = out.se(j, i) = std::sqrt(var / nn);
    }
  }
  out.mean_se = (c.array().square().colwise().sum() / (nn - 1.0)).sqrt().transpose() / std::sqrt(nn);
  return out;
}

/// Kolmogorov distribution tail P(K > lambda).
inline double kolmogorov_q(double lambda) {
  if (!(lambda > 0.0)) return 1.0;
  if (lambda < 1.18) {
    // P(K <= l) = sqrt(2 pi)/l sum_j exp(-(2j-1)^2 pi^2 / (8 l^2))
    const double f = std::numbers::pi * std::numbers::pi / (8.0 * lambda * lambda);
    double s = 0.0;
    for (int j = 1; j <= 20; ++j) s += std::exp(-(2.0 * j - 1.0) * (2.0 * j - 1.0) * f);
    return std::clamp(1.0 - std::sqrt(2.0 * std::numbers::pi) / lambda * s, 0.0, 1.0);
  }
  double s = 0.0;
  for (int j = 1; j <= 100; ++j) {
    const double term = std::exp(-2.0 * j * j * lambda * lambda);
    s += (j % 2 == 1 ? term : -term);
    if (term < 1e-300) break;
  }
  return std::clamp(2.0 * s, 0.0, 1.0);
}

struct KsResult {
  double statistic = 0.0;
  double p_value = 1.0;
  std::size_t count = 0;
};

/// One-sample two-sided KS test against a continuous cdf. The p-value uses
/// the Stephens correction lambda = (sqrt(N) + 0.12 + 0.11/sqrt(N)) D.
inline KsResult ks_test(std::vector<double> samples, const std::function<double(double)>& cdf) {
  require(!samples.empty(), "KS test needs samples");
  std::sort(samples.begin(), samples.end());
  const double n = static_cast<double>(samples.size());
  double d = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const double f = cdf(samples[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  const double sn = std::sqrt(n);
  return {d, kolmogorov_q((sn + 0.12 + 0.11 / sn) * d), samples.size()};
}

/// Two-sample KS distance sup |F_a - F_b|.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  require(!a.empty() && !b.empty(), "KS distance needs nonempty samples");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] == x) ++i;
    while (j < b.size() && b[j] == x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

inline double normal_cdf(double x, double variance) {
  return 0.5 * std::erfc(-x / std::sqrt(2.0 * variance));
}

/// KS test of projected samples v.X against N(0, v' S v).
inline KsResult gaussianity_test(std::span<const double> projected, std::span<const double> v,
                                 const Eigen::MatrixXd& sigma2) {
  require(projected.size() >= 1000, "Gaussianity test needs at least 1000 samples");
  require(static_cast<Eigen::Index>(v.size()) == sigma2.rows() && sigma2.rows() == sigma2.cols(),
          "direction and covariance dimensions differ");
  const Eigen::Map<const Eigen::VectorXd> dir(v.data(), static_cast<Eigen::Index>(v.size()));
  require(dir.norm() > 0.0, "Gaussianity test needs a nonzero direction");
  const double var = dir.dot(sigma2 * dir);
  require(var > 0.0, "degenerate direction: v' S v = 0");
  return ks_test(std::vector<double>(projected.begin(), projected.end()),
                 [var](double x) { return normal_cdf(x, var); });
}

/// Projects each row of x onto v.
inline std::vector<double> project(const SampleMatrix& x, std::span<const double> v) {
  require(static_cast<Eigen::Index>(v.size()) == x.cols(), "projection direction has the wrong dimension");
  const Eigen::Map<const Eigen::VectorXd> dir(v.data(), static_cast<Eigen::Index>(v.size()));
  const Eigen::VectorXd p = x * dir;
  return std::vector<double>(p.data(), p.data() + p.size());
}

struct McConfig {
  std::int64_t n = 32;     ///< diffusive scale: X^(n)_t = X_{n^2 t} / n
  std::size_t count = 10000;
  std::uint64_t seed = 0;  ///< trajectory k uses derive_seed(seed, k)
  Scheme scheme = Scheme::vsrw;
  unsigned threads = 1;
};

/// Rescaled positions and martingale values at several times.
struct TimeSamples {
  double t = 0.0;
  SampleMatrix x;  ///< X^(n)_t, count x d
  SampleMatrix m;  ///< M^(n)_t = (X_{n^2 t} - chi(X_{n^2 t}) + chi(0)) / n
};

/// All trajectories start at the origin. times are in rescaled units.
inline std::vector<TimeSamples> sample_walks(const CorrectorSolution& sol, std::span<const double> times,
                                             const McConfig& cfg) {
  require(cfg.count >= 1, "need at least one trajectory");
  require(cfg.n >= 1, "diffusive scale must be >= 1");
  require(!times.empty() && std::is_sorted(times.begin(), times.end()) && times.front() > 0.0,
          "sample times must be positive and sorted");
  const Environment& env = sol.env;
  const TorusLattice& lat = env.lattice();
  const int d = lat.dim();
  const double nn = static_cast<double>(cfg.n);
  std::vector<double> raw(times.begin(), times.end());
  for (double& t : raw) t *= nn * nn;
  const Point origin(d, 0);
  const std::size_t v0 = lat.index(origin);

  std::vector<TimeSamples> out(times.size());
  for (std::size_t k = 0; k < times.size(); ++k) {
    out[k].t = times[k];
    out[k].x.resize(static_cast<Eigen::Index>(cfg.count), d);
    out[k].m.resize(static_cast<Eigen::Index>(cfg.count), d);
  }
  parallel_for(cfg.count, cfg.threads, [&](std::size_t traj) {
    const auto pos = positions_at(env, origin, raw, derive_seed(cfg.seed, traj), cfg.scheme);
    for (std::size_t k = 0; k < pos.size(); ++k) {
      const std::size_t v = lat.index(pos[k]);
      for (int j = 0; j < d; ++j) {
        const double xj = static_cast<double>(pos[k][j]);
        out[k].x(static_cast<Eigen::Index>(traj), j) = xj / nn;
        out[k].m(static_cast<Eigen::Index>(traj), j) = (xj - (sol.chi[j][v] - sol.chi[j][v0])) / nn;
      }
    }
  });
  return out;
}

struct SigmaEstimate {
  CovarianceEstimate x;  ///< of X^(n)_t / sqrt(t)
  CovarianceEstimate m;  ///< of M^(n)_t / sqrt(t)
  TimeSamples samples;
};

inline SigmaEstimate estimate_sigma_mc(const CorrectorSolution& sol, double t, const McConfig& cfg) {
  require(cfg.count >= 100, "covariance estimate needs at least 100 trajectories");
  require(t > 0.0 && std::isfinite(t), "time must be positive");
  const double times[] = {t};
  auto s = sample_walks(sol, times, cfg);
  SigmaEstimate out;
  const double scale = 1.0 / std::sqrt(t);
  out.x = covariance(s[0].x * scale);
  out.m = covariance(s[0].m * scale);
  out.samples = std::move(s[0]);
  return out;
}

inline SigmaEstimate estimate_sigma_mc(const Environment& env, double t, const McConfig& cfg,
                                       const SolverConfig& solver = {}) {
  return estimate_sigma_mc(solve_corrector(env, solver), t, cfg);
}

/// N sum_x (f_x - 1/N)^2 for the occupation-time fractions f of one VSRW
/// run of length t_max on the torus.
inline double occupation_uniformity(const Environment& env, double t_max, std::uint64_t seed) {
  const TorusLattice& lat = env.lattice();
  const double nv = static_cast<double>(lat.num_vertices());
  double mean_mu = 0.0;
  for (double m : env.mu().values()) mean_mu += m;
  mean_mu /= nv;
  require(t_max * mean_mu >= 100.0 * nv,
          "horizon too short: need about 100 jumps per vertex (t_max >= " + format_double(100.0 * nv / mean_mu) +
              ")");
  std::vector<double> occ(lat.num_vertices(), 0.0);
  const Point origin(lat.dim(), 0);
  std::size_t current = lat.index(origin);
  double last = 0.0;
  run_walk(env, origin, t_max, seed, Scheme::vsrw, [&](double t, const WalkState& s) {
    occ[current] += t - last;
    last = t;
    current = s.vertex;
  });
  occ[current] += t_max - last;
  double chi2 = 0.0;
  for (double o : occ) {
    const double f = o / t_max - 1.0 / nv;
    chi2 += f * f;
  }
  return nv * chi2;
}

struct CltReport {
  std::string env;
  std::int64_t n = 0;
  std::size_t count = 0;
  Scheme scheme = Scheme::vsrw;
  double mean_mu = 0.0;
  Eigen::MatrixXd sigma2;  ///< from the corrector
  Eigen::MatrixXd target;  ///< sigma2 for VSRW, sigma2 / mean_mu for CSRW
  CovarianceEstimate x;
  CovarianceEstimate m;
  std::vector<KsResult> ks;  ///< per coordinate direction, of X^(n)_1 against N(0, target_jj)
  double distance = 0.0;     ///< max_ij |cov_m - target|
};

struct QfcltConfig {
  std::vector<std::int64_t> sizes{16, 32, 64};
  std::size_t count = 10000;
  std::uint64_t seed = 0;  ///< trajectory master seed; the environment uses spec.seed
  Scheme scheme = Scheme::vsrw;
  unsigned threads = 1;
  SolverConfig solver;
};

inline double mean_of(const VertexField& f) {
  double s = 0.0;
  for (double v : f.values()) s += v;
  return s / static_cast<double>(f.size());
}

/// Report for one environment and scale n, at rescaled time 1.
inline CltReport clt_report(const CorrectorSolution& sol, const std::string& env_name, const McConfig& cfg) {
  require(cfg.count >= 100, "CLT report needs at least 100 trajectories");
  CltReport rep;
  rep.env = env_name;
  rep.n = cfg.n;
  rep.count = cfg.count;
  rep.scheme = cfg.scheme;
  rep.mean_mu = mean_of(sol.env.mu());
  rep.sigma2 = sigma_from_corrector(sol);
  rep.target = cfg.scheme == Scheme::vsrw ? rep.sigma2 : Eigen::MatrixXd(rep.sigma2 / rep.mean_mu);
  const auto est = estimate_sigma_mc(sol, 1.0, cfg);
  rep.x = est.x;
  rep.m = est.m;
  const int d = sol.dim();
  if (cfg.count >= 1000) {
    for (int j = 0; j < d; ++j) {
      std::vector<double> v(d, 0.0);
      v[j] = 1.0;
      rep.ks.push_back(gaussianity_test(project(est.samples.x, v), v, rep.target));
    }
  }
  rep.distance = (rep.m.cov - rep.target).cwiseAbs().maxCoeff();
  return rep;
}

struct QfcltSummary {
  std::vector<CltReport> reports;
  bool distance_non_increasing = true;
  double final_relative_distance = 0.0;  ///< max_ij |cov_m - target| / sqrt(target_ii target_jj) at the largest n
};

/// One report per n, each on a fresh torus of side n built from the spec.
inline QfcltSummary qfclt_suite(const EnvSpec& spec, const QfcltConfig& cfg) {
  require(!cfg.sizes.empty(), "qfclt suite needs at least one size");
  QfcltSummary out;
  for (std::int64_t n : cfg.sizes) {
    EnvSpec s = spec;
    s.n = n;
    const Environment env = generate_env(s);
    const auto sol = solve_corrector(env, cfg.solver);
    McConfig mc;
    mc.n = n;
    mc.count = cfg.count;
    mc.seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(n));
    mc.scheme = cfg.scheme;
    mc.threads = cfg.threads;
    out.reports.push_back(clt_report(sol, describe(s), mc));
  }
  for (std::size_t k = 1; k < out.reports.size(); ++k) {
    if (out.reports[k].distance > out.reports[k - 1].distance) out.distance_non_increasing = false;
  }
  const auto& last = out.reports.back();
  double rel = 0.0;
  for (Eigen::Index i = 0; i < last.target.rows(); ++i) {
    for (Eigen::Index j = 0; j < last.target.cols(); ++j) {
      const double scale = std::sqrt(last.target(i, i) * last.target(j, j));
      rel = std::max(rel, std::abs(last.m.cov(i, j) - last.target(i, j)) / scale);
    }
  }
  out.final_relative_distance = rel;
  return out;
}

/// One row per (n, direction).
inline std::string clt_reports_csv(const std::vector<CltReport>& reports) {
  Csv csv({"env", "scheme", "n", "count", "direction", "target", "cov_x", "se_x", "cov_m", "se_m", "ks_statistic",
           "ks_p_value"});
  for (const auto& r : reports) {
    for (Eigen::Index j = 0; j < r.target.rows(); ++j) {
      const bool has_ks = static_cast<std::size_t>(j) < r.ks.size();
      csv.row({r.env, scheme_name(r.scheme), std::to_string(r.n), std::to_string(r.count), std::to_string(j + 1),
               format_double(r.target(j, j)), format_double(r.x.cov(j, j)), format_double(r.x.se(j, j)),
               format_double(r.m.cov(j, j)), format_double(r.m.se(j, j)),
               has_ks ? format_double(r.ks[j].statistic) : std::string(),
               has_ks ? format_double(r.ks[j].p_value) : std::string()});
    }
  }
  return csv.str();
}

/// Covariance matrix block: one row per (n, i, j).
inline std::string clt_covariance_csv(const std::vector<CltReport>& reports) {
  Csv csv({"n", "i", "j", "sigma2", "target", "cov_x", "se_x", "cov_m", "se_m"});
  for (const auto& r : reports) {
    for (Eigen::Index i = 0; i < r.target.rows(); ++i) {
      for (Eigen::Index j = 0; j < r.target.cols(); ++j) {
        csv.row({std::to_string(r.n), std::to_string(i + 1), std::to_string(j + 1), format_double(r.sigma2(i, j)),
                 format_double(r.target(i, j)), format_double(r.x.cov(i, j)), format_double(r.x.se(i, j)),
                 format_double(r.m.cov(i, j)), format_double(r.m.se(i, j))});
      }
    }
  }
  return csv.str();
}

}  // namespace rcm

#endif  // RCM_STATS_HPP
