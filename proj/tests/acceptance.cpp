// Acceptance run: one PASS/FAIL line per criterion. Criteria 1-9 are run
// twice (the second time with more worker threads) and criterion 10 compares
// the canonical outputs of both passes byte for byte.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/corrector.hpp"
#include "rcm/environment.hpp"
#include "rcm/graph.hpp"
#include "rcm/ineq.hpp"
#include "rcm/io.hpp"
#include "rcm/moser_corpus.hpp"
#include "rcm/stats.hpp"

using namespace rcm;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;  ///< human-readable summary
  std::string output;  ///< canonical bytes for the determinism check
};

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::uint64_t fnv1a(const std::string& s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

std::string fmt(double v) { return format_double(v); }

std::string fixed(double v, int digits = 3) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

const law::UniformElliptic kElliptic{0.5, 2.0};

// Environments solved anywhere in the run; criterion 4 audits all of them.
std::vector<std::pair<std::string, double>>* g_audit = nullptr;

CorrectorSolution solve_audited(const Environment& env, const std::string& label) {
  auto sol = solve_corrector(env);
  if (g_audit) {
    const auto h = harmonic_coordinate(sol);
    double max_mu = 0.0;
    for (double m : env.mu().values()) max_mu = std::max(max_mu, m);
    double worst = 0.0;
    for (int j = 0; j < sol.dim(); ++j) worst = std::max(worst, harmonicity_residual(env, h, j) / max_mu);
    g_audit->push_back({label, worst});
  }
  return sol;
}

// 1. Inequality sweep.
Outcome inequality_sweep(unsigned threads) {
  const auto t0 = Clock::now();
  SweepSpec spec;
  spec.samples = 1'000'000;
  spec.seed = 7;
  const auto results = sweep_all(spec, threads);
  const double secs = seconds_since(t0);
  std::size_t bad = 0, total = 0;
  for (const auto& r : results) {
    bad += r.violations;
    total += r.samples;
  }
  Outcome o;
  o.pass = bad == 0 && secs < 60.0;
  o.detail = std::to_string(total) + " samples over " + std::to_string(results.size()) + " regimes, " +
             std::to_string(bad) + " violations, " + fixed(secs) + " s";
  o.output = sweep_summary_csv(results) + violations_csv(results);
  return o;
}

// 2. Operator identities on random tori.
Outcome operator_identities(unsigned) {
  const auto t0 = Clock::now();
  Xoshiro256 rng(derive_seed(2, 0));
  double worst_adj = 0.0, worst_prod = 0.0, worst_lap = 0.0;
  std::ostringstream out;
  for (int inst = 0; inst < 100; ++inst) {
    const int d = 2 + inst % 2;
    const auto n = static_cast<std::int64_t>(3 + rng() % (d == 2 ? 14 : 6));
    const EnvLaw law = inst % 3 == 0 ? EnvLaw{law::ParetoMix{2.0, 2.0}} : EnvLaw{kElliptic};
    const Environment env = generate_env(EnvSpec{law, d, n, derive_seed(20, inst)});
    const TorusLattice& lat = env.lattice();
    auto field = [&] {
      std::vector<double> v(lat.num_vertices());
      for (double& x : v) x = rng.normal() * std::exp(2.0 * rng.normal());
      return VertexField(lat, std::move(v));
    };
    const VertexField f = field(), g = field();
    std::vector<double> fv(lat.num_edges());
    for (double& x : fv) x = rng.normal();
    const EdgeField F(lat, std::move(fv));

    // <grad f, F> = <f, grad* F>
    const EdgeField gf = gradient(f);
    const VertexField dF = divergence(F);
    double scale = 0.0;
    for (std::size_t e = 0; e < lat.num_edges(); ++e) {
      scale += (std::abs(f[lat.edge_head(e)]) + std::abs(f[lat.edge_tail(e)])) * std::abs(F[e]);
    }
    worst_adj = std::max(worst_adj, std::abs(inner(gf, F) - inner(f, dF)) / scale);

    // grad(fg) = g(tail) grad f + f(head) grad g
    std::vector<double> prod(lat.num_vertices());
    for (std::size_t x = 0; x < prod.size(); ++x) prod[x] = f[x] * g[x];
    const EdgeField lhs = gradient(VertexField(lat, std::move(prod)));
    const EdgeField gg = gradient(g);
    const EdgeField a = edge_products(g, gf).tail;
    const EdgeField b = edge_products(f, gg).head;
    for (std::size_t e = 0; e < lat.num_edges(); ++e) {
      const std::size_t hd = lat.edge_head(e), tl = lat.edge_tail(e);
      const double s = std::abs(f[hd] * g[hd]) + std::abs(f[tl] * g[tl]) + std::abs(a[e]) + std::abs(b[e]);
      if (s > 0.0) worst_prod = std::max(worst_prod, std::abs(lhs[e] - (a[e] + b[e])) / s);
    }

    // sum_y w_xy (f(y) - f(x)) = -grad*(w grad f)
    const VertexField l1 = laplacian(env, f);
    const VertexField l2 = laplacian_divergence_form(env, f);
    for (std::size_t x = 0; x < lat.num_vertices(); ++x) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) {
        for (int sign : {-1, 1}) {
          s += env.conductance(x, i, sign) * (std::abs(f[lat.neighbor(x, i, sign)]) + std::abs(f[x]));
        }
      }
      worst_lap = std::max(worst_lap, std::abs(l1[x] - l2[x]) / s);
    }
    out << inst << ',' << fmt(inner(gf, F)) << ',' << fmt(l1[0]) << ',' << fmt(lhs[0]) << '\n';
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = worst_adj <= 1e-12 && worst_prod <= 1e-12 && worst_lap <= 1e-12;
  o.detail = "100 instances each; max relative error adjointness " + fixed(worst_adj) + ", product rule " +
             fixed(worst_prod) + ", Laplacian forms " + fixed(worst_lap) + ", " + fixed(secs) + " s";
  o.output = out.str();
  return o;
}

// 3. Corrector exactness for constant and layered laws.
Outcome corrector_exactness(unsigned) {
  const auto t0 = Clock::now();
  const double c = 1.7;
  const auto flat = solve_audited(generate_env(EnvSpec{law::Constant{c}, 2, 64, 0}), "constant n=64");
  double chi_max = 0.0;
  for (const auto& f : flat.chi) chi_max = std::max(chi_max, max_abs(f));
  const Eigen::MatrixXd s_flat = sigma_from_corrector(flat);
  const double flat_err = (s_flat - 2.0 * c * Eigen::MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff();

  // Columns of conductance along axis 0: the problem reduces to a 1D chain
  // whose effective conductance is the harmonic mean of the profile.
  Xoshiro256 rng(derive_seed(3, 0));
  std::vector<double> profile(8);
  for (double& w : profile) w = 0.2 + 4.8 * rng.uniform();
  double inv = 0.0;
  for (double w : profile) inv += 1.0 / w;
  const double harmonic = static_cast<double>(profile.size()) / inv;
  const auto lay = solve_audited(generate_env(EnvSpec{law::Layered{0, profile}, 2, 64, 0}), "layered n=64");
  const Eigen::MatrixXd s_lay = sigma_from_corrector(lay);
  const double lay_err = std::abs(s_lay(0, 0) - 2.0 * harmonic);
  const double secs = seconds_since(t0);

  Outcome o;
  o.pass = chi_max <= 1e-8 && flat_err <= 1e-8 && lay_err <= 1e-6 && secs < 60.0;
  o.detail = "constant: max|chi| " + fixed(chi_max) + ", |Sigma - 2cI| " + fixed(flat_err) +
             "; layered: Sigma_11 " + fixed(s_lay(0, 0), 10) + " vs 2H " + fixed(2.0 * harmonic, 10) + " (err " +
             fixed(lay_err) + "), " + fixed(secs) + " s";
  o.output = matrix_csv(s_flat) + matrix_csv(s_lay) + fmt(chi_max) + '\n';
  return o;
}

// 4. Harmonicity of the harmonic coordinates on every solved environment.
Outcome harmonicity(unsigned) {
  const std::vector<EnvSpec> extra{
      {kElliptic, 2, 48, 11},          {kElliptic, 3, 16, 12},          {law::ParetoMix{1.0, 1.0}, 2, 32, 13},
      {law::ParetoMix{4.0, 4.0}, 3, 12, 14}, {law::GffExp{0.5}, 3, 12, 15}, {law::Layered{1, {0.3, 2.0, 5.0}}, 2, 30, 16},
  };
  for (const auto& s : extra) solve_audited(generate_env(s), describe(s));
  double worst = 0.0;
  std::string where;
  std::ostringstream out;
  for (const auto& [label, r] : *g_audit) {
    if (r >= worst) {
      worst = r;
      where = label;
    }
    out << label << ',' << (r <= 1e-8 ? "ok" : "fail") << '\n';
  }
  Outcome o;
  o.pass = worst <= 1e-8;
  o.detail = std::to_string(g_audit->size()) + " solved environments; worst max|L Phi| / max mu = " + fixed(worst) +
             " (" + where + ")";
  o.output = out.str();
  return o;
}

struct ColumnStats {
  double mean = 0.0;
  double se = 0.0;
};

ColumnStats column_stats(const SampleMatrix& m, int j) {
  const double n = static_cast<double>(m.rows());
  const double mean = m.col(j).mean();
  const double var = (m.col(j).array() - mean).square().sum() / (n - 1.0);
  return {mean, std::sqrt(var / n)};
}

// 5. Martingale property of the harmonic coordinate.
Outcome martingale(unsigned threads) {
  const auto t0 = Clock::now();
  const Environment env = generate_env(EnvSpec{kElliptic, 2, 32, 1});
  const auto sol = solve_audited(env, "uniform_elliptic n=32 seed=1");
  McConfig cfg;
  cfg.n = 32;
  cfg.count = 10000;
  cfg.seed = 55;
  cfg.threads = threads;
  const double times[] = {1.0, 4.0};
  const auto samples = sample_walks(sol, times, cfg);
  bool ok = true;
  std::ostringstream det, out;
  for (const auto& s : samples) {
    for (int j = 0; j < 2; ++j) {
      const auto st = column_stats(s.m, j);
      const double z = st.mean / st.se;
      ok = ok && std::abs(z) <= 3.0;
      det << " t=" << s.t << " j=" << j + 1 << " z=" << fixed(z);
      out << s.t << ',' << j << ',' << fmt(st.mean) << ',' << fmt(st.se) << '\n';
    }
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok && secs < 300.0;
  o.detail = "mean(M)/SE:" + det.str() + ", " + fixed(secs) + " s";
  o.output = out.str();
  return o;
}

// 6. Covariance and Gaussianity at scale n = 32.
Outcome qfclt(unsigned threads) {
  const auto t0 = Clock::now();
  const Environment env = generate_env(EnvSpec{kElliptic, 2, 32, 1});
  const auto sol = solve_audited(env, "uniform_elliptic n=32 seed=1");
  McConfig cfg;
  cfg.n = 32;
  cfg.count = 10000;
  cfg.seed = 66;
  cfg.threads = threads;
  const CltReport rep = clt_report(sol, describe(EnvSpec{kElliptic, 2, 32, 1}), cfg);
  bool ok = true;
  double worst_rel = 0.0, worst_z = 0.0;
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 2; ++j) {
      const double diff = std::abs(rep.m.cov(i, j) - rep.target(i, j));
      const double rel = diff / std::sqrt(rep.target(i, i) * rep.target(j, j));
      const double z = diff / rep.m.se(i, j);
      worst_rel = std::max(worst_rel, rel);
      worst_z = std::max(worst_z, z);
      ok = ok && rel <= 0.10 && z <= 3.0;
    }
  }
  double min_p = 1.0;
  for (const auto& k : rep.ks) min_p = std::min(min_p, k.p_value);
  ok = ok && rep.ks.size() == 2 && min_p > 0.01;
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok && secs < 600.0;
  o.detail = "Sigma_11 " + fixed(rep.target(0, 0), 5) + " vs " + fixed(rep.m.cov(0, 0), 5) + ", Sigma_22 " +
             fixed(rep.target(1, 1), 5) + " vs " + fixed(rep.m.cov(1, 1), 5) + "; worst relative " +
             fixed(worst_rel) + ", worst |diff|/SE " + fixed(worst_z) + "; KS p e1 " + fixed(rep.ks.at(0).p_value) +
             ", e2 " + fixed(rep.ks.at(1).p_value) + ", " + fixed(secs) + " s";
  o.output = clt_reports_csv({rep}) + clt_covariance_csv({rep});
  return o;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size();
  return m % 2 == 1 ? v[m / 2] : 0.5 * (v[m / 2 - 1] + v[m / 2]);
}

// 7. Sublinearity of the corrector.
Outcome sublinearity(unsigned) {
  const auto t0 = Clock::now();
  const std::vector<std::int64_t> sizes{16, 32, 64, 128};
  int majority = 0;
  std::vector<std::vector<double>> l1(sizes.size());
  std::ostringstream det, out;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    std::vector<double> sup;
    for (std::int64_t n : sizes) {
      // B(0, n) inside a torus of side 4n.
      const Environment env = generate_env(EnvSpec{kElliptic, 2, 4 * n, seed});
      const auto sol = solve_audited(env, "uniform_elliptic n=" + std::to_string(4 * n) + " seed=" + std::to_string(seed));
      const auto ball = ball_vertices(env.lattice(), Ball{0, static_cast<double>(n)});
      double s = 0.0;
      for (const auto& f : sol.chi) s = std::max(s, norm_avg(f, kInf, ball));
      sup.push_back(s / static_cast<double>(n));
      if (n == sizes.back()) {
        const auto rows = l1_profile(sol, sizes);
        for (std::size_t k = 0; k < sizes.size(); ++k) {
          double v = 0.0;
          for (const auto& r : rows) {
            if (r.n == sizes[k]) v = std::max(v, r.value);
          }
          l1[k].push_back(v);
        }
      }
    }
    const double ratio = sup.back() / sup.front();
    if (ratio < 0.6) ++majority;
    det << ' ' << fixed(ratio);
    for (double s : sup) out << fmt(s) << ',';
    out << '\n';
  }
  std::vector<double> med;
  for (const auto& v : l1) med.push_back(median(v));
  bool monotone = true;
  for (std::size_t k = 1; k < med.size(); ++k) monotone = monotone && med[k] <= med[k - 1];
  for (double m : med) out << fmt(m) << ',';
  out << '\n';
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = majority >= 3 && monotone && secs < 600.0;
  std::ostringstream m;
  for (double v : med) m << ' ' << fixed(v);
  o.detail = "sup ratio n=128/n=16 per seed:" + det.str() + " (" + std::to_string(majority) +
             "/5 below 0.6); median l1 profile:" + m.str() + ", " + fixed(secs) + " s";
  o.output = out.str();
  return o;
}

// 8. Moser constants frozen on seed 0 and checked on fresh corpora.
Outcome moser(unsigned threads) {
  const auto t0 = Clock::now();
  const MoserCorpusConfig cfg;
  const std::string path = std::string(RCM_DATA_DIR) + "/moser_constants.txt";
  const MoserConstants frozen = load_moser_constants(path);
  const MoserConstants again = calibrate_moser(cfg, frozen.headroom, threads, 0);
  const bool reproducible = encode_moser_constants(again) == encode_moser_constants(frozen);
  std::size_t violations = 0;
  std::ostringstream out;
  std::vector<CorpusViolation> all;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto res = run_moser_corpus(cfg, seed, threads);
    const auto v = check_moser_corpus(res, frozen);
    violations += v.size();
    all.insert(all.end(), v.begin(), v.end());
    for (const auto& [name, s] : res.sup) out << seed << ',' << name << ',' << fmt(s) << '\n';
  }
  const std::int64_t sizes[] = {16, 32, 64};
  const auto med = moser_ratio_medians(cfg, sizes, 51, 8, threads);
  const bool monotone = med[1] <= med[0] && med[2] <= med[1];
  for (double m : med) out << fmt(m) << ',';
  out << '\n' << corpus_violations_csv(all);
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = reproducible && violations == 0 && monotone && secs < 900.0;
  o.detail = std::string("seed-0 recalibration ") + (reproducible ? "matches" : "differs from") +
             " the frozen file; " + std::to_string(violations) + " violations over 5 x " +
             std::to_string(cfg.instances) + " instances; median iterate ratio n=16,32,64: " + fixed(med[0]) + ' ' +
             fixed(med[1]) + ' ' + fixed(med[2]) + ", " + fixed(secs) + " s";
  o.output = out.str();
  return o;
}

// 9. CSRW covariance is the VSRW covariance divided by the mean of mu.
Outcome csrw_time_change(unsigned threads) {
  const auto t0 = Clock::now();
  bool ok = true;
  double worst = 0.0;
  std::ostringstream out;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const EnvSpec spec{kElliptic, 2, 32, seed};
    const auto sol = solve_audited(generate_env(spec), describe(spec));
    McConfig v;
    v.n = 32;
    v.count = 10000;
    v.seed = derive_seed(90, seed);
    v.threads = threads;
    McConfig c = v;
    c.seed = derive_seed(91, seed);
    c.scheme = Scheme::csrw;
    const auto rv = clt_report(sol, describe(spec), v);
    const auto rc = clt_report(sol, describe(spec), c);
    for (int i = 0; i < 2; ++i) {
      for (int j = 0; j < 2; ++j) {
        const double want = rv.m.cov(i, j) / rv.mean_mu;
        const double se = std::hypot(rc.m.se(i, j), rv.m.se(i, j) / rv.mean_mu);
        const double z = std::abs(rc.m.cov(i, j) - want) / se;
        worst = std::max(worst, z);
        ok = ok && z <= 3.0;
      }
    }
    out << clt_covariance_csv({rv, rc});
  }
  const double secs = seconds_since(t0);
  Outcome o;
  o.pass = ok && secs < 600.0;
  o.detail = "5 environments, worst |Sigma_Y - Sigma_X / mean mu| / combined SE = " + fixed(worst) + ", " +
             fixed(secs) + " s";
  o.output = out.str();
  return o;
}

}  // namespace

int main() {
  const std::vector<std::function<Outcome(unsigned)>> criteria{
      inequality_sweep, operator_identities, corrector_exactness, harmonicity, martingale,
      qfclt,            sublinearity,        moser,               csrw_time_change};
  // Criterion 4 audits everything solved before it, so it runs last.
  const std::vector<std::size_t> order{0, 1, 2, 4, 5, 6, 7, 8, 3};

  std::vector<std::vector<std::pair<std::string, double>>> audits(2);
  std::vector<std::vector<Outcome>> passes(2, std::vector<Outcome>(criteria.size()));
  for (int pass = 0; pass < 2; ++pass) {
    g_audit = &audits[pass];
    const unsigned threads = pass == 0 ? 1 : 3;
    for (std::size_t k : order) {
      try {
        passes[pass][k] = criteria[k](threads);
      } catch (const std::exception& e) {
        passes[pass][k] = Outcome{false, std::string("error: ") + e.what(), "error"};
      }
    }
    if (pass == 0) {
      for (std::size_t k = 0; k < criteria.size(); ++k) {
        const Outcome& o = passes[0][k];
        std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << k + 1 << ": " << o.detail << std::endl;
      }
    }
  }

  bool all = true;
  for (const auto& o : passes[0]) all = all && o.pass;
  bool same = true;
  std::ostringstream det;
  for (std::size_t k = 0; k < criteria.size(); ++k) {
    const bool eq = passes[0][k].output == passes[1][k].output;
    same = same && eq;
    char buf[32];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(passes[0][k].output)));
    det << ' ' << k + 1 << ':' << buf << (eq ? "" : "(differs)");
  }
  std::cout << (same ? "PASS" : "FAIL") << " criterion 10: outputs of criteria 1-9 identical across two runs"
            << " (threads 1 and 3); digests" << det.str() << std::endl;
  all = all && same;
  return all ? 0 : 1;
}
