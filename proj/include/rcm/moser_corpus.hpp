#ifndef RCM_MOSER_CORPUS_HPP
#define RCM_MOSER_CORPUS_HPP

// Calibration of the Moser-side constants. Each constant is the supremum of
// the corresponding ratio over a fixed corpus of random instances (seed 0),
// multiplied by a headroom factor and frozen in a key=value file; fresh
// corpora with other seeds are then checked against the frozen values.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/environment.hpp"
#include "rcm/error.hpp"
#include "rcm/io.hpp"
#include "rcm/moser.hpp"
#include "rcm/parallel.hpp"
#include "rcm/rng.hpp"

namespace rcm {

struct MoserCorpusConfig {
  EnvLaw law = law::UniformElliptic{0.5, 2.0};
  int d = 2;
  std::int64_t n = 16;     ///< ball radius
  std::int64_t side = 36;  ///< torus side, > 2n + 1
  double p = 4.0;
  double q = 4.0;
  double sigma = 1.0;
  double sigma_prime = 0.5;
  std::size_t instances = 500;
  std::vector<double> energy_alphas{1.0, 1.5, 2.0, 3.0};
  double small_alpha = 1.0;
  SolverConfig solver{1e-12, 200000, Preconditioner::diagonal};
};

/// Ratio families; the recursion entry is a log.
inline const std::vector<std::string>& moser_constant_names() {
  static const std::vector<std::string> names{"C_S", "C_S_weighted", "C_S1", "C_2", "C_1", "C_3", "log_c_recursion",
                                              "C_P"};
  return names;
}

struct InstanceRatios {
  std::map<std::string, double> value;  ///< keyed by moser_constant_names()
};

namespace detail {

inline constexpr std::uint64_t kCorpusSalt = 0x4D4F534552ULL;

/// Offset of coordinate i of v from x0, in (-side/2, side/2].
inline std::int64_t centered_offset(const TorusLattice& lat, std::size_t v, std::size_t x0, int i) {
  std::int64_t o = lat.coord(v, i) - lat.coord(x0, i);
  const std::int64_t s = lat.side();
  o = ((o % s) + s) % s;
  if (2 * o > s) o -= s;
  return o;
}

/// Test field: smooth sinusoids, white noise or a bump, with random amplitude.
inline VertexField random_test_field(const TorusLattice& lat, std::size_t x0, std::int64_t n, Xoshiro256& rng,
                                     int kind) {
  const int d = lat.dim();
  const double amp = std::exp(std::log(1e-3) + rng.uniform() * std::log(1e6));
  std::vector<double> out(lat.num_vertices());
  if (kind == 0) {
    std::vector<double> freq(d), phase(d);
    for (int i = 0; i < d; ++i) {
      freq[i] = 2.0 * std::numbers::pi * (0.5 + 3.0 * rng.uniform()) / static_cast<double>(n);
      phase[i] = 2.0 * std::numbers::pi * rng.uniform();
    }
    for (std::size_t v = 0; v < out.size(); ++v) {
      double s = 0.0;
      for (int i = 0; i < d; ++i) s += std::sin(freq[i] * static_cast<double>(centered_offset(lat, v, x0, i)) + phase[i]);
      out[v] = amp * s;
    }
  } else if (kind == 1) {
    for (double& v : out) v = amp * rng.normal();
  } else {
    const double width = static_cast<double>(n) * (0.1 + 0.5 * rng.uniform());
    for (std::size_t v = 0; v < out.size(); ++v) {
      const double r = static_cast<double>(lat.distance(x0, v)) / width;
      out[v] = amp * std::exp(-r * r);
    }
  }
  return VertexField(lat, std::move(out));
}

inline VertexField restrict_to(const VertexField& f, std::span<const std::size_t> set) {
  const auto mask = vertex_mask(f.lattice(), set);
  std::vector<double> out(f.size(), 0.0);
  for (std::size_t v = 0; v < f.size(); ++v) out[v] = mask[v] ? f[v] : 0.0;
  return VertexField(f.lattice(), std::move(out));
}

}  // namespace detail

/// All ratios for instance k of the corpus with the given seed.
inline InstanceRatios evaluate_moser_instance(const MoserCorpusConfig& cfg, std::uint64_t corpus_seed,
                                              std::size_t k) {
  const std::uint64_t iseed = derive_seed(derive_seed(detail::kCorpusSalt, corpus_seed), k);
  const Environment env = generate_env(EnvSpec{cfg.law, cfg.d, cfg.side, iseed});
  const TorusLattice& lat = env.lattice();
  Xoshiro256 rng(derive_seed(iseed, 1));
  const auto x0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(lat.num_vertices()));
  const Exponents exps = exponents(cfg.d, cfg.p, cfg.q);
  const double nn = static_cast<double>(cfg.n);

  // Linear f with |grad f| <= 1/n near the ball, and the Dirichlet solution.
  std::vector<double> slope(cfg.d);
  for (double& a : slope) a = 2.0 * rng.uniform() - 1.0;
  const VertexField f = make_vertex_field(lat, [&](std::size_t v) {
    double s = 0.0;
    for (int i = 0; i < cfg.d; ++i) s += slope[i] * static_cast<double>(detail::centered_offset(lat, v, x0, i));
    return s / nn;
  });
  const Ball outer{x0, nn};
  const VertexField u = poisson_solve_dirichlet(env, outer, weight(env, gradient(f)), cfg.solver);
  const VertexField w = detail::random_test_field(lat, x0, cfg.n, rng, static_cast<int>(k % 3));

  InstanceRatios out;
  auto& val = out.value;
  for (const auto& name : moser_constant_names()) val[name] = name == "log_c_recursion" ? -kInf : 0.0;
  auto raise = [&](const std::string& key, double r) { val[key] = std::max(val[key], r); };

  const CutoffFamily family(lat, x0, cfg.n, cfg.sigma, cfg.sigma_prime);
  for (int level = 0; level < std::min(2, family.num_levels()); ++level) {
    const VertexField eta = family.eta(level);
    const Ball b = family.ball(level);
    for (const VertexField* g : {&u, &w}) {
      raise("C_S", sobolev_check(env, b, eta, *g, cfg.q).ratio());
      raise("C_S_weighted", sobolev_check_weighted(env, b, eta, *g, exps).ratio());
    }
    for (double alpha : cfg.energy_alphas) raise("C_2", energy_estimate_check(env, b, eta, u, alpha, f).ratio());
  }

  const MoserReport rep = moser_iterate(env, x0, cfg.n, u, exps, cfg.sigma, cfg.sigma_prime);
  raise("C_1", rep.ratio);
  raise("log_c_recursion", rep.max_log_recursion_constant);
  if (rep.gamma > 0.0) raise("C_3", small_exponent_bound(rep, cfg.small_alpha, rep.gamma, exps.kappa).ratio);

  raise("C_P", poincare_l1_check(u, outer));
  raise("C_P", poincare_l1_check(w, outer));

  const auto support = ball_vertices(lat, Ball{x0, std::floor(rng.uniform() * nn)});
  const VertexField compact = detail::restrict_to(w, support);
  if (max_abs(compact) > 0.0) raise("C_S1", sobolev_s1_ratio(compact));
  return out;
}

struct CorpusResult {
  std::uint64_t seed = 0;
  std::vector<InstanceRatios> instances;
  std::map<std::string, double> sup;
};

inline CorpusResult run_moser_corpus(const MoserCorpusConfig& cfg, std::uint64_t corpus_seed, unsigned threads = 1) {
  require(cfg.side > 2 * cfg.n + 1, "corpus torus must contain the ball without wrap-around");
  CorpusResult res;
  res.seed = corpus_seed;
  res.instances = parallel_map<InstanceRatios>(cfg.instances, threads, [&](std::size_t k) {
    return evaluate_moser_instance(cfg, corpus_seed, k);
  });
  for (const auto& name : moser_constant_names()) {
    double s = name == "log_c_recursion" ? -kInf : 0.0;
    for (const auto& inst : res.instances) s = std::max(s, inst.value.at(name));
    res.sup[name] = s;
  }
  return res;
}

/// Frozen constants plus the raw corpus suprema they came from.
struct MoserConstants {
  int format_version = 1;
  std::uint64_t corpus_seed = 0;
  std::size_t instances = 0;
  double headroom = 2.0;
  std::map<std::string, double> sup;       ///< raw calibration suprema
  std::map<std::string, double> constant;  ///< frozen values used in checks

  bool admits(const std::string& name, double ratio) const { return ratio <= constant.at(name); }
};

/// Constants = headroom * sup; for the log recursion constant, sup + log(headroom).
inline MoserConstants calibrate_moser(const MoserCorpusConfig& cfg, double headroom = 2.0, unsigned threads = 1,
                                      std::uint64_t corpus_seed = 0) {
  require(headroom >= 1.0, "calibration headroom must be >= 1");
  const auto res = run_moser_corpus(cfg, corpus_seed, threads);
  MoserConstants c;
  c.corpus_seed = corpus_seed;
  c.instances = cfg.instances;
  c.headroom = headroom;
  c.sup = res.sup;
  for (const auto& [name, s] : res.sup) {
    c.constant[name] = name == "log_c_recursion" ? s + std::log(headroom) : s * headroom;
  }
  return c;
}

inline std::string encode_moser_constants(const MoserConstants& c) {
  std::ostringstream os;
  os << "# Moser inequality constants: corpus supremum times headroom\n";
  os << "format_version=" << c.format_version << "\n";
  os << "corpus_seed=" << c.corpus_seed << "\n";
  os << "instances=" << c.instances << "\n";
  os << "headroom=" << format_double(c.headroom) << "\n";
  for (const auto& [name, v] : c.sup) os << "sup." << name << "=" << format_double(v) << "\n";
  for (const auto& [name, v] : c.constant) os << name << "=" << format_double(v) << "\n";
  return os.str();
}

inline MoserConstants decode_moser_constants(const std::string& text) {
  MoserConstants c;
  std::istringstream is(text);
  std::string line;
  int lineno = 0;
  auto number = [&](const std::string& s, const std::string& key) {
    double v = 0.0;
    if (s == "inf") return kInf;
    if (s == "-inf") return -kInf;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) {
      throw FormatError("constants file: bad value for key '" + key + "' on line " + std::to_string(lineno));
    }
    return v;
  };
  bool have_version = false;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw FormatError("constants file: missing '=' on line " + std::to_string(lineno));
    const std::string key = line.substr(0, eq);
    const std::string value = line.substr(eq + 1);
    if (key == "format_version") {
      c.format_version = static_cast<int>(number(value, key));
      if (c.format_version != 1) throw FormatError("constants file: unsupported format_version " + value);
      have_version = true;
    } else if (key == "corpus_seed") {
      c.corpus_seed = static_cast<std::uint64_t>(number(value, key));
    } else if (key == "instances") {
      c.instances = static_cast<std::size_t>(number(value, key));
    } else if (key == "headroom") {
      c.headroom = number(value, key);
    } else if (key.rfind("sup.", 0) == 0) {
      c.sup[key.substr(4)] = number(value, key);
    } else {
      const auto& names = moser_constant_names();
      if (std::find(names.begin(), names.end(), key) == names.end()) {
        throw FormatError("constants file: unknown key '" + key + "'");
      }
      c.constant[key] = number(value, key);
    }
  }
  if (!have_version) throw FormatError("constants file: missing format_version");
  for (const auto& name : moser_constant_names()) {
    if (!c.constant.count(name)) throw FormatError("constants file: missing key '" + name + "'");
  }
  return c;
}

inline MoserConstants load_moser_constants(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw FormatError("cannot open constants file " + path.string());
  std::stringstream ss;
  ss << is.rdbuf();
  return decode_moser_constants(ss.str());
}

inline void save_moser_constants(const MoserConstants& c, const std::filesystem::path& path) {
  write_file_atomic(path, encode_moser_constants(c));
}

struct CorpusViolation {
  std::uint64_t corpus_seed = 0;
  std::size_t instance = 0;
  std::string constant;
  double ratio = 0.0;
  double limit = 0.0;
};

/// Instances whose ratio exceeds the frozen constant.
inline std::vector<CorpusViolation> check_moser_corpus(const CorpusResult& res, const MoserConstants& c) {
  std::vector<CorpusViolation> out;
  for (std::size_t k = 0; k < res.instances.size(); ++k) {
    for (const auto& [name, v] : res.instances[k].value) {
      if (!c.admits(name, v)) out.push_back({res.seed, k, name, v, c.constant.at(name)});
    }
  }
  return out;
}

inline std::string corpus_violations_csv(const std::vector<CorpusViolation>& v) {
  Csv csv({"corpus_seed", "instance", "constant", "ratio", "limit"});
  for (const auto& x : v) {
    csv.row({std::to_string(x.corpus_seed), std::to_string(x.instance), x.constant, format_double(x.ratio),
             format_double(x.limit)});
  }
  return csv.str();
}

/// Median moser_iterate ratio per ball radius, instances on tori of side 2n + 4.
inline std::vector<double> moser_ratio_medians(const MoserCorpusConfig& base, std::span<const std::int64_t> sizes,
                                               std::size_t instances, std::uint64_t corpus_seed,
                                               unsigned threads = 1) {
  std::vector<double> medians;
  for (std::int64_t n : sizes) {
    MoserCorpusConfig cfg = base;
    cfg.n = n;
    cfg.side = 2 * n + 4;
    const auto ratios = parallel_map<double>(instances, threads, [&](std::size_t k) {
      const std::uint64_t iseed =
          derive_seed(derive_seed(detail::kCorpusSalt ^ static_cast<std::uint64_t>(n), corpus_seed), k);
      const Environment env = generate_env(EnvSpec{cfg.law, cfg.d, cfg.side, iseed});
      const TorusLattice& lat = env.lattice();
      Xoshiro256 rng(derive_seed(iseed, 1));
      const auto x0 = static_cast<std::size_t>(rng.uniform() * static_cast<double>(lat.num_vertices()));
      std::vector<double> slope(cfg.d);
      for (double& a : slope) a = 2.0 * rng.uniform() - 1.0;
      const double nn = static_cast<double>(n);
      const VertexField f = make_vertex_field(lat, [&](std::size_t v) {
        double s = 0.0;
        for (int i = 0; i < cfg.d; ++i) s += slope[i] * static_cast<double>(detail::centered_offset(lat, v, x0, i));
        return s / nn;
      });
      const VertexField u = poisson_solve_dirichlet(env, Ball{x0, nn}, weight(env, gradient(f)), cfg.solver);
      return moser_iterate(env, x0, n, u, exponents(cfg.d, cfg.p, cfg.q), cfg.sigma, cfg.sigma_prime).ratio;
    });
    std::vector<double> sorted = ratios;
    std::sort(sorted.begin(), sorted.end());
    const std::size_t m = sorted.size();
    medians.push_back(m % 2 == 1 ? sorted[m / 2] : 0.5 * (sorted[m / 2 - 1] + sorted[m / 2]));
  }
  return medians;
}

}  // namespace rcm

#endif  // RCM_MOSER_CORPUS_HPP
