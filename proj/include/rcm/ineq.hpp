#ifndef RCM_INEQ_HPP
#define RCM_INEQ_HPP

// Scalar inequalities for signed powers a~^al = |a|^al sign(a), used as
// replacements for the chain rule in discrete calculus, and random sweeps
// over their domains. Evaluation is in long double: with |a| up to 1e6 and
// exponents up to 128 the intermediate powers reach 1e768.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <string>
#include <tuple>
#include <utility>
#include <vector>

#include "rcm/error.hpp"
#include "rcm/field.hpp"
#include "rcm/io.hpp"
#include "rcm/parallel.hpp"
#include "rcm/rng.hpp"

namespace rcm {

inline constexpr long double kIneqRelTol = 1e-12L;

/// |a|^alpha sign(a); 0 maps to 0. alpha = 0 gives sign(a).
inline long double signed_pow(long double a, long double alpha) {
  if (a == 0.0L) return 0.0L;
  const long double m = alpha == 0.0L ? 1.0L : std::pow(std::fabs(a), alpha);
  return a < 0.0L ? -m : m;
}

inline double signed_pow(double a, double alpha) {
  if (a == 0.0) return 0.0;
  const double m = alpha == 0.0 ? 1.0 : std::pow(std::abs(a), alpha);
  return a < 0.0 ? -m : m;
}

/// a~^alpha - b~^alpha. For same-sign arguments of comparable size the
/// difference is formed as |b|^alpha expm1(alpha log1p((|a|-|b|)/|b|)),
/// which avoids cancellation when a is close to b.
inline long double signed_pow_diff(long double a, long double b, long double alpha) {
  if (a == b) return 0.0L;
  const bool same_sign = (a > 0.0L && b > 0.0L) || (a < 0.0L && b < 0.0L);
  if (!same_sign || alpha == 0.0L) return signed_pow(a, alpha) - signed_pow(b, alpha);
  const long double ma = std::fabs(a);
  const long double mb = std::fabs(b);
  const long double ratio = ma / mb;
  long double diff;
  if (ratio > 0.5L && ratio < 2.0L) {
    diff = std::pow(mb, alpha) * std::expm1(alpha * std::log1p((ma - mb) / mb));
  } else {
    diff = std::pow(ma, alpha) - std::pow(mb, alpha);
  }
  return a < 0.0L ? -diff : diff;
}

/// Both sides of an inequality lhs <= rhs.
struct Sides {
  long double lhs = 0.0L;
  long double rhs = 0.0L;

  /// lhs <= rhs up to relative tolerance on the larger side.
  bool holds(long double rel_tol = kIneqRelTol) const {
    if (std::isnan(lhs) || std::isnan(rhs)) return false;
    return lhs - rhs <= rel_tol * std::max(std::fabs(lhs), std::fabs(rhs));
  }
};

/// |a~^al - b~^al| <= (1 v |al/be|) |a~^be - b~^be| (|a|^{al-be} + |b|^{al-be}).
inline Sides chain_ub1_sides(long double a, long double b, long double alpha, long double beta) {
  require(alpha != 0.0L && beta != 0.0L, "upper chain bound needs nonzero exponents");
  Sides s;
  s.lhs = std::fabs(signed_pow_diff(a, b, alpha));
  if (s.lhs == 0.0L) return s;
  const long double g = alpha - beta;
  const long double weight = std::pow(std::fabs(a), g) + std::pow(std::fabs(b), g);
  s.rhs = std::max(1.0L, std::fabs(alpha / beta)) * std::fabs(signed_pow_diff(a, b, beta)) * weight;
  return s;
}

/// (a~^al - b~^al)^2 <= |al^2 / (2al - 1) (a - b)(a~^{2al-1} - b~^{2al-1})|.
/// Valid for al > 1/2 and all signs, or a, b >= 0 and al not in {0, 1/2}.
/// For al > 1/2 the product inside is already nonnegative; below 1/2 it is
/// not, and only the absolute value makes the bound true.
inline Sides pol_ub_sides(long double a, long double b, long double alpha) {
  require(alpha != 0.0L && alpha != 0.5L, "polarization bound excludes alpha in {0, 1/2}");
  require(alpha > 0.5L || (a >= 0.0L && b >= 0.0L), "polarization bound with alpha < 1/2 needs a, b >= 0");
  Sides s;
  const long double d = signed_pow_diff(a, b, alpha);
  s.lhs = d * d;
  const long double e = 2.0L * alpha - 1.0L;
  s.rhs = std::fabs(alpha * alpha / e * (a - b) * signed_pow_diff(a, b, e));
  return s;
}

/// (|a|^al + |b|^al) |a~^be - b~^be| <= 2 |a~^{al+be} - b~^{al+be}|, al, be >= 0.
inline Sides chain_lo_sides(long double a, long double b, long double alpha, long double beta) {
  require(alpha >= 0.0L && beta >= 0.0L, "lower chain bound needs nonnegative exponents");
  Sides s;
  const long double pa = alpha == 0.0L ? 1.0L : std::pow(std::fabs(a), alpha);
  const long double pb = alpha == 0.0L ? 1.0L : std::pow(std::fabs(b), alpha);
  s.lhs = (pa + pb) * std::fabs(signed_pow_diff(a, b, beta));
  s.rhs = 2.0L * std::fabs(signed_pow_diff(a, b, alpha + beta));
  return s;
}

/// (|a|^{2al-1} + |b|^{2al-1}) |a - b| <= 4 |a~^al - b~^al| (|a|^al + |b|^al), al >= 1/2.
inline Sides chain_ub2_sides(long double a, long double b, long double alpha) {
  require(alpha >= 0.5L, "second upper chain bound needs alpha >= 1/2");
  Sides s;
  const long double e = 2.0L * alpha - 1.0L;
  const long double pa = e == 0.0L ? 1.0L : std::pow(std::fabs(a), e);
  const long double pb = e == 0.0L ? 1.0L : std::pow(std::fabs(b), e);
  s.lhs = (pa + pb) * std::fabs(a - b);
  s.rhs = 4.0L * std::fabs(signed_pow_diff(a, b, alpha)) * (std::pow(std::fabs(a), alpha) + std::pow(std::fabs(b), alpha));
  return s;
}

inline bool check_chain_ub1(double a, double b, double alpha, double beta) {
  return chain_ub1_sides(a, b, alpha, beta).holds();
}

inline bool check_pol_ub(double a, double b, double alpha) { return pol_ub_sides(a, b, alpha).holds(); }

inline bool check_chain_lo(double a, double b, double alpha, double beta) {
  return chain_lo_sides(a, b, alpha, beta).holds();
}

inline bool check_chain_ub2(double a, double b, double alpha) { return chain_ub2_sides(a, b, alpha).holds(); }

/// Edge-field forms for f >= 0, with (f.F)(e) = f(e^-) F(e), (F.f)(e) = f(e^+) F(e):
///   |grad f^al| / (1 v |al|) <= |f^{al-1} . grad f| + |grad f . f^{al-1}|   (all al)
///   2 |grad f^al| >= |f^{al-1} . grad f| + |grad f . f^{al-1}|              (al >= 1)
/// Returns true when both hold at every edge (the second only for al >= 1).
inline bool check_edge_chain_rules(const VertexField& u, double alpha) {
  require(alpha != 0.0, "edge chain rules need alpha != 0");
  for (std::size_t x = 0; x < u.size(); ++x) {
    require(u[x] >= 0.0, "edge chain rules need a nonnegative field");
    require(alpha >= 1.0 || u[x] > 0.0, "edge chain rules with alpha < 1 need a positive field");
  }
  const TorusLattice& lat = u.lattice();
  const long double al = alpha;
  for (std::size_t e = 0; e < lat.num_edges(); ++e) {
    const long double fm = u[lat.edge_tail(e)];
    const long double fp = u[lat.edge_head(e)];
    const long double grad_pow = std::fabs(signed_pow_diff(fp, fm, al));
    const long double grad = std::fabs(fp - fm);
    const long double wm = al == 1.0L ? 1.0L : std::pow(fm, al - 1.0L);
    const long double wp = al == 1.0L ? 1.0L : std::pow(fp, al - 1.0L);
    const long double sum = (wm + wp) * grad;
    if (!Sides{grad_pow / std::max(1.0L, std::fabs(al)), sum}.holds()) return false;
    if (alpha >= 1.0 && !Sides{sum, 2.0L * grad_pow}.holds()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// Sweeps

struct SweepSpec {
  std::size_t samples = 1'000'000;  ///< per inequality per regime
  std::uint64_t seed = 0;
  double magnitude_lo = 1e-6;
  double magnitude_hi = 1e6;
  double exponent_lo = 1e-3;  ///< log-uniform exponent magnitudes in [lo, hi]
  double exponent_hi = 64.0;
  std::size_t max_recorded = 10000;  ///< violations kept for the CSV
};

struct Violation {
  std::string inequality;
  std::string regime;
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  bool has_beta = false;
  long double lhs = 0.0L;
  long double rhs = 0.0L;
};

struct SweepResult {
  std::string inequality;
  std::string regime;
  std::size_t samples = 0;
  std::size_t violations = 0;
  std::vector<Violation> recorded;
};

enum class Regime {
  ub1_signed,
  pol_signed_alpha_above_half,
  pol_nonneg_alpha_below_half,
  pol_nonneg_alpha_negative,
  lo_nonneg_exponents,
  ub2_alpha_at_least_half,
};

inline const char* regime_inequality(Regime r) {
  switch (r) {
    case Regime::ub1_signed: return "chain_ub1";
    case Regime::pol_signed_alpha_above_half:
    case Regime::pol_nonneg_alpha_below_half:
    case Regime::pol_nonneg_alpha_negative: return "pol_ub";
    case Regime::lo_nonneg_exponents: return "chain_lo";
    case Regime::ub2_alpha_at_least_half: return "chain_ub2";
  }
  return "";
}

inline const char* regime_name(Regime r) {
  switch (r) {
    case Regime::ub1_signed: return "signed_ab_signed_exponents";
    case Regime::pol_signed_alpha_above_half: return "signed_ab_alpha_gt_half";
    case Regime::pol_nonneg_alpha_below_half: return "nonneg_ab_alpha_in_0_half";
    case Regime::pol_nonneg_alpha_negative: return "nonneg_ab_alpha_negative";
    case Regime::lo_nonneg_exponents: return "signed_ab_nonneg_exponents";
    case Regime::ub2_alpha_at_least_half: return "signed_ab_alpha_ge_half";
  }
  return "";
}

inline constexpr Regime kAllRegimes[] = {
    Regime::ub1_signed,          Regime::pol_signed_alpha_above_half, Regime::pol_nonneg_alpha_below_half,
    Regime::pol_nonneg_alpha_negative, Regime::lo_nonneg_exponents, Regime::ub2_alpha_at_least_half,
};

namespace detail {

struct IneqSample {
  double a, b, alpha, beta;
};

class SampleDraw {
 public:
  SampleDraw(const SweepSpec& spec, std::uint64_t seed) : spec_(spec), rng_(seed) {}

  double u() { return rng_.uniform(); }

  double log_uniform(double lo, double hi) { return std::exp(std::log(lo) + u() * (std::log(hi) - std::log(lo))); }

  double magnitude() {
    // Mostly log-uniform; a few exact extremes.
    const double c = u();
    if (c < 0.02) return spec_.magnitude_lo;
    if (c < 0.04) return spec_.magnitude_hi;
    return log_uniform(spec_.magnitude_lo, spec_.magnitude_hi);
  }

  double sign() { return u() < 0.5 ? -1.0 : 1.0; }

  /// (a, b) with the given sign freedom; includes a = b, b = -a and near-equal pairs.
  std::pair<double, double> pair(bool nonneg) {
    double a = magnitude();
    double b = magnitude();
    const double c = u();
    if (c < 0.03) {
      b = a;
    } else if (c < 0.06) {
      b = a * (1.0 + log_uniform(1e-9, 1e-2) * (u() < 0.5 ? -1.0 : 1.0));
    }
    if (!nonneg) {
      a *= sign();
      b *= sign();
    }
    return {a, b};
  }

  double exponent_magnitude() { return log_uniform(spec_.exponent_lo, spec_.exponent_hi); }

  /// alpha > 1/2, log-uniform on (1/2 + 1e-3, hi] with dense draws near 1/2 and 1.
  double alpha_above_half() {
    const double c = u();
    if (c < 0.15) return 0.5 + log_uniform(1e-9, 1e-3);
    if (c < 0.30) return 1.0 + sign() * log_uniform(1e-9, 1e-2);
    if (c < 0.32) return 1.0;
    return log_uniform(0.5 + 1e-3, spec_.exponent_hi);
  }

 private:
  const SweepSpec& spec_;
  Xoshiro256 rng_;
};

inline IneqSample draw(Regime r, const SweepSpec& spec, std::uint64_t seed) {
  SampleDraw g(spec, seed);
  IneqSample s{};
  switch (r) {
    case Regime::ub1_signed: {
      std::tie(s.a, s.b) = g.pair(false);
      s.alpha = g.sign() * g.exponent_magnitude();
      s.beta = g.sign() * g.exponent_magnitude();
      if (g.u() < 0.05) s.beta = s.alpha;
      if (g.u() < 0.05) s.alpha = g.sign() * (g.u() < 0.5 ? 0.5 : 1.0);
      break;
    }
    case Regime::pol_signed_alpha_above_half:
      std::tie(s.a, s.b) = g.pair(false);
      s.alpha = g.alpha_above_half();
      if (g.u() < 0.02) s.b = 0.0;
      break;
    case Regime::pol_nonneg_alpha_below_half: {
      std::tie(s.a, s.b) = g.pair(true);
      const double c = g.u();
      if (c < 0.2) {
        s.alpha = 0.5 - g.log_uniform(1e-9, 1e-3);
      } else if (c < 0.4) {
        s.alpha = g.log_uniform(spec.exponent_lo, 1e-1);
      } else {
        s.alpha = 0.5 * g.u();
        if (s.alpha == 0.0) s.alpha = 0.25;
      }
      break;
    }
    case Regime::pol_nonneg_alpha_negative:
      std::tie(s.a, s.b) = g.pair(true);
      s.alpha = -g.exponent_magnitude();
      break;
    case Regime::lo_nonneg_exponents:
      std::tie(s.a, s.b) = g.pair(false);
      s.alpha = g.u() < 0.1 ? 0.0 : g.exponent_magnitude();
      s.beta = g.u() < 0.1 ? 0.0 : g.exponent_magnitude();
      break;
    case Regime::ub2_alpha_at_least_half: {
      std::tie(s.a, s.b) = g.pair(false);
      const double c = g.u();
      if (c < 0.1) {
        s.alpha = 0.5;
      } else if (c < 0.25) {
        s.alpha = 0.5 + g.log_uniform(1e-9, 1e-3);
      } else if (c < 0.4) {
        s.alpha = 1.0 + g.sign() * g.log_uniform(1e-9, 1e-2);
      } else {
        s.alpha = g.log_uniform(0.5, spec.exponent_hi);
      }
      break;
    }
  }
  return s;
}

inline Sides evaluate(Regime r, const IneqSample& s) {
  switch (r) {
    case Regime::ub1_signed: return chain_ub1_sides(s.a, s.b, s.alpha, s.beta);
    case Regime::pol_signed_alpha_above_half:
    case Regime::pol_nonneg_alpha_below_half:
    case Regime::pol_nonneg_alpha_negative: return pol_ub_sides(s.a, s.b, s.alpha);
    case Regime::lo_nonneg_exponents: return chain_lo_sides(s.a, s.b, s.alpha, s.beta);
    case Regime::ub2_alpha_at_least_half: return chain_ub2_sides(s.a, s.b, s.alpha);
  }
  return {};
}

inline bool has_beta(Regime r) { return r == Regime::ub1_signed || r == Regime::lo_nonneg_exponents; }

}  // namespace detail

/// Sweeps one regime. Sample k depends only on (spec.seed, regime, k).
inline SweepResult sweep_regime(Regime r, const SweepSpec& spec, unsigned threads = 1) {
  require(spec.magnitude_lo > 0.0 && spec.magnitude_lo <= spec.magnitude_hi, "bad magnitude range");
  require(spec.exponent_lo > 0.0 && spec.exponent_lo <= spec.exponent_hi, "bad exponent range");
  SweepResult res;
  res.inequality = regime_inequality(r);
  res.regime = regime_name(r);
  res.samples = spec.samples;
  const std::uint64_t regime_seed = derive_seed(spec.seed, static_cast<std::uint64_t>(r));
  constexpr std::size_t kShard = 1 << 14;
  const std::size_t shards = (spec.samples + kShard - 1) / kShard;
  std::vector<std::vector<Violation>> found(shards);
  parallel_for(shards, threads, [&](std::size_t sh) {
    const std::size_t end = std::min(spec.samples, (sh + 1) * kShard);
    for (std::size_t k = sh * kShard; k < end; ++k) {
      const auto s = detail::draw(r, spec, counter_hash(regime_seed, k, 0));
      const Sides sides = detail::evaluate(r, s);
      if (!sides.holds()) {
        found[sh].push_back({res.inequality, res.regime, s.a, s.b, s.alpha, s.beta, detail::has_beta(r), sides.lhs,
                             sides.rhs});
      }
    }
  });
  for (auto& v : found) {
    res.violations += v.size();
    for (auto& x : v) {
      if (res.recorded.size() < spec.max_recorded) res.recorded.push_back(std::move(x));
    }
  }
  return res;
}

inline std::vector<SweepResult> sweep_all(const SweepSpec& spec, unsigned threads = 1) {
  std::vector<SweepResult> out;
  for (Regime r : kAllRegimes) out.push_back(sweep_regime(r, spec, threads));
  return out;
}

inline std::string format_long_double(long double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.21Lg", v);
  return buf;
}

/// Header-only CSV when there are no violations.
inline std::string violations_csv(const std::vector<SweepResult>& results) {
  Csv csv({"inequality", "regime", "a", "b", "alpha", "beta", "lhs", "rhs"});
  for (const auto& r : results) {
    for (const auto& v : r.recorded) {
      csv.row({v.inequality, v.regime, format_double(v.a), format_double(v.b), format_double(v.alpha),
               v.has_beta ? format_double(v.beta) : std::string(), format_long_double(v.lhs),
               format_long_double(v.rhs)});
    }
  }
  return csv.str();
}

/// One row per (inequality, regime) with sample and violation counts.
inline std::string sweep_summary_csv(const std::vector<SweepResult>& results) {
  Csv csv({"inequality", "regime", "samples", "violations"});
  for (const auto& r : results) {
    csv.row({r.inequality, r.regime, std::to_string(r.samples), std::to_string(r.violations)});
  }
  return csv.str();
}

}  // namespace rcm

#endif  // RCM_INEQ_HPP
