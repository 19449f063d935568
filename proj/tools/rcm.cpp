// rcm: command-line driver for environment generation, corrector solves,
// walk sampling, CLT reports, Moser corpus checks and the inequality sweep.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "rcm/corrector.hpp"
#include "rcm/env_io.hpp"
#include "rcm/environment.hpp"
#include "rcm/ineq.hpp"
#include "rcm/io.hpp"
#include "rcm/moser_corpus.hpp"
#include "rcm/stats.hpp"
#include "rcm/walk.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;
using namespace rcm;

namespace {

/// Bad flags, bad config files: exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

constexpr int kOk = 0;
constexpr int kAssertionFailed = 1;
constexpr int kUsage = 2;

// Defaults double as the schema: a config may only set keys present here,
// with a value of the same kind. null marks "resolved later".
json default_config() {
  return json::parse(R"({
    "seed": null,
    "threads": 1,
    "out_dir": ".",
    "env_file": "",
    "env": {"law": "uniform_elliptic", "d": 2, "n": 32, "seed": null,
            "c": 1.0, "c_low": 0.5, "c_high": 2.0, "a": 1.0, "b": 1.0,
            "axis": 0, "profile": [1.0, 4.0], "scale": 1.0},
    "solver": {"tol": 1e-10, "max_iter": 200000},
    "walk": {"scheme": "vsrw", "t_max": 100.0, "count": 1, "n": 32,
             "trajectories": 10000, "sizes": [16, 32, 64]},
    "moser": {"p": 4.0, "q": 4.0, "sigma": 1.0, "sigma_prime": 0.5, "n": 16, "side": 36,
              "instances": 500, "headroom": 2.0, "calibration_seed": 0,
              "corpus_seeds": [1, 2, 3, 4, 5], "sizes": [16, 32, 64], "median_instances": 101,
              "constants": ""},
    "ineq": {"samples": 1000000}
  })");
}

bool same_kind(const json& def, const json& v) {
  if (def.is_null()) return v.is_null() || v.is_number_unsigned();
  if (def.is_number_integer()) return v.is_number_integer();
  if (def.is_number()) return v.is_number();
  if (def.is_string()) return v.is_string();
  if (def.is_boolean()) return v.is_boolean();
  if (def.is_array()) {
    if (!v.is_array()) return false;
    for (const auto& e : v) {
      if (!e.is_number()) return false;
    }
    return true;
  }
  return false;
}

void overlay(json& dst, const json& src, const std::string& prefix) {
  if (!src.is_object()) throw UsageError("config key '" + prefix + "' must be an object");
  for (const auto& [key, value] : src.items()) {
    const std::string path = prefix.empty() ? key : prefix + "." + key;
    if (!dst.contains(key)) throw UsageError("unknown config key '" + path + "'");
    json& slot = dst[key];
    if (slot.is_object()) {
      overlay(slot, value, path);
    } else if (!same_kind(slot, value)) {
      throw UsageError("config key '" + path + "' has the wrong type");
    } else {
      slot = value;
    }
  }
}

json read_json_file(const std::string& path, const std::string& what) {
  std::ifstream is(path);
  if (!is) throw UsageError("cannot open " + what + " '" + path + "'");
  std::stringstream ss;
  ss << is.rdbuf();
  try {
    return json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw UsageError(what + " '" + path + "' is not valid JSON: " + e.what());
  }
}

std::uint64_t parse_seed_env(const char* text) {
  const std::string s(text);
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw UsageError("RCM_SEED must be a non-negative integer, got '" + s + "'");
  }
  return v;
}

EnvLaw law_from(const json& e) {
  const std::string name = e.at("law").get<std::string>();
  if (name == "constant") return law::Constant{e.at("c").get<double>()};
  if (name == "uniform_elliptic") return law::UniformElliptic{e.at("c_low").get<double>(), e.at("c_high").get<double>()};
  if (name == "iid_pareto_mix" || name == "pareto_mix") return law::ParetoMix{e.at("a").get<double>(), e.at("b").get<double>()};
  if (name == "layered") return law::Layered{e.at("axis").get<int>(), e.at("profile").get<std::vector<double>>()};
  if (name == "gff_exp") return law::GffExp{e.at("scale").get<double>()};
  throw UsageError("config key 'env.law' has unknown value '" + name + "'");
}

EnvSpec env_spec_from(const json& cfg) {
  const json& e = cfg.at("env");
  EnvSpec s;
  s.law = law_from(e);
  s.d = e.at("d").get<int>();
  s.n = e.at("n").get<std::int64_t>();
  s.seed = e.at("seed").get<std::uint64_t>();
  return s;
}

SolverConfig solver_from(const json& cfg) {
  SolverConfig s;
  s.tol = cfg.at("solver").at("tol").get<double>();
  s.max_iter = cfg.at("solver").at("max_iter").get<int>();
  return s;
}

Scheme scheme_from(const json& cfg) {
  const std::string s = cfg.at("walk").at("scheme").get<std::string>();
  if (s == "vsrw" || s == "VSRW") return Scheme::vsrw;
  if (s == "csrw" || s == "CSRW") return Scheme::csrw;
  throw UsageError("config key 'walk.scheme' must be vsrw or csrw, got '" + s + "'");
}

MoserCorpusConfig corpus_from(const json& cfg) {
  const json& m = cfg.at("moser");
  MoserCorpusConfig c;
  c.law = law_from(cfg.at("env"));
  c.d = cfg.at("env").at("d").get<int>();
  c.n = m.at("n").get<std::int64_t>();
  c.side = m.at("side").get<std::int64_t>();
  c.p = m.at("p").get<double>();
  c.q = m.at("q").get<double>();
  c.sigma = m.at("sigma").get<double>();
  c.sigma_prime = m.at("sigma_prime").get<double>();
  c.instances = m.at("instances").get<std::size_t>();
  return c;
}

std::string constants_path(const json& cfg) {
  const std::string p = cfg.at("moser").at("constants").get<std::string>();
  return p.empty() ? std::string(RCM_DATA_DIR) + "/moser_constants.txt" : p;
}

/// Collects output files and writes the manifest last.
class Outputs {
 public:
  explicit Outputs(fs::path dir) : dir_(std::move(dir)) {}

  void write(const std::string& name, std::string_view data) {
    write_file_atomic(dir_ / name, data);
    names_.push_back(name);
  }

  void external(const fs::path& p) { names_.push_back(p.string()); }

  void manifest(const std::string& subcommand, const std::string& action, const json& cfg) {
    json m;
    m["tool"] = "rcm";
    m["version"] = RCM_VERSION;
    m["subcommand"] = subcommand;
    if (!action.empty()) m["action"] = action;
    m["config"] = cfg;
    m["outputs"] = names_;
    write_file_atomic(dir_ / "manifest.json", m.dump(2) + "\n");
  }

 private:
  fs::path dir_;
  std::vector<std::string> names_;
};

Environment load_or_generate(const json& cfg) {
  const std::string file = cfg.at("env_file").get<std::string>();
  if (!file.empty()) return load_env(file);
  return generate_env(env_spec_from(cfg));
}

int run_env_gen(const json& cfg, const std::string& out, Outputs& o) {
  const Environment env = generate_env(env_spec_from(cfg));
  if (out.empty()) {
    o.write("env.rcme", encode_env(env));
  } else {
    save_env(env, out);
    o.external(out);
  }
  return kOk;
}

int run_corrector(const json& cfg, Outputs& o) {
  const Environment env = load_or_generate(cfg);
  const auto sol = solve_corrector(env, solver_from(cfg));
  const auto h = harmonic_coordinate(sol);
  double max_mu = 0.0;
  for (double m : env.mu().values()) max_mu = std::max(max_mu, m);
  const double limit = 1e-8 * max_mu;
  Csv res({"j", "residual", "limit"});
  Csv bad({"j", "residual", "limit"});
  for (int j = 0; j < sol.dim(); ++j) {
    const double r = harmonicity_residual(env, h, j);
    const std::vector<std::string> row{std::to_string(j + 1), format_double(r), format_double(limit)};
    res.row(row);
    if (!(r <= limit)) bad.row(row);
  }
  o.write("corrector.csv", corrector_csv(sol));
  o.write("sigma2.csv", matrix_csv(sigma_from_corrector(sol)));
  o.write("harmonicity.csv", res.str());
  o.write("violations.csv", bad.str());
  return bad.str().find('\n') + 1 == bad.str().size() ? kOk : kAssertionFailed;
}

int run_walk(const json& cfg, Outputs& o) {
  const Environment env = load_or_generate(cfg);
  const auto sol = solve_corrector(env, solver_from(cfg));
  const json& w = cfg.at("walk");
  const double t_max = w.at("t_max").get<double>();
  const int count = w.at("count").get<int>();
  if (count < 1) throw UsageError("config key 'walk.count' must be >= 1");
  const Scheme scheme = scheme_from(cfg);
  const std::uint64_t seed = cfg.at("seed").get<std::uint64_t>();
  const int d = env.lattice().dim();
  std::vector<std::string> header{"trajectory", "jumps"};
  for (int i = 1; i <= d; ++i) header.push_back("x_" + std::to_string(i));
  for (int i = 1; i <= d; ++i) header.push_back("m_" + std::to_string(i));
  Csv ends(header);
  const Point origin(d, 0);
  for (int k = 0; k < count; ++k) {
    const WalkPath path = simulate(env, origin, t_max, derive_seed(seed, static_cast<std::uint64_t>(k)), scheme);
    const MartingalePath mp = martingale_path(path, sol);
    o.write("path_" + std::to_string(k) + ".csv", path_csv(path));
    std::vector<std::string> row{std::to_string(k), std::to_string(path.num_jumps())};
    const Point last = path.point(path.num_jumps());
    const std::vector<double> m_end = mp.at(t_max);
    for (int i = 0; i < d; ++i) row.push_back(std::to_string(last[i]));
    for (int i = 0; i < d; ++i) row.push_back(format_double(m_end[i]));
    ends.row(row);
  }
  o.write("endpoints.csv", ends.str());
  return kOk;
}

int run_clt(const json& cfg, Outputs& o) {
  QfcltConfig q;
  q.sizes = cfg.at("walk").at("sizes").get<std::vector<std::int64_t>>();
  q.count = cfg.at("walk").at("trajectories").get<std::size_t>();
  q.seed = cfg.at("seed").get<std::uint64_t>();
  q.scheme = scheme_from(cfg);
  q.threads = cfg.at("threads").get<unsigned>();
  q.solver = solver_from(cfg);
  const auto sum = qfclt_suite(env_spec_from(cfg), q);
  o.write("clt_reports.csv", clt_reports_csv(sum.reports));
  o.write("clt_covariance.csv", clt_covariance_csv(sum.reports));
  Csv s({"distance_non_increasing", "final_relative_distance"});
  s.row({sum.distance_non_increasing ? "true" : "false", format_double(sum.final_relative_distance)});
  o.write("clt_summary.csv", s.str());
  return kOk;
}

/// Checks the listed constant families on every corpus seed.
int check_families(const json& cfg, const std::vector<std::string>& names, Outputs& o) {
  const MoserConstants c = load_moser_constants(constants_path(cfg));
  const MoserCorpusConfig mc = corpus_from(cfg);
  const unsigned threads = cfg.at("threads").get<unsigned>();
  std::vector<CorpusViolation> bad;
  Csv sup({"corpus_seed", "constant", "sup", "limit"});
  for (std::uint64_t s : cfg.at("moser").at("corpus_seeds").get<std::vector<std::uint64_t>>()) {
    const CorpusResult res = run_moser_corpus(mc, s, threads);
    for (const auto& v : check_moser_corpus(res, c)) {
      if (std::find(names.begin(), names.end(), v.constant) != names.end()) bad.push_back(v);
    }
    for (const auto& n : names) {
      sup.row({std::to_string(s), n, format_double(res.sup.at(n)), format_double(c.constant.at(n))});
    }
  }
  o.write("corpus_sup.csv", sup.str());
  o.write("violations.csv", corpus_violations_csv(bad));
  return bad.empty() ? kOk : kAssertionFailed;
}

int run_moser(const json& cfg, const std::string& action, const std::string& out, Outputs& o) {
  const MoserCorpusConfig mc = corpus_from(cfg);
  const unsigned threads = cfg.at("threads").get<unsigned>();
  const json& m = cfg.at("moser");
  if (action == "calibrate") {
    const MoserConstants c = calibrate_moser(mc, m.at("headroom").get<double>(), threads,
                                             m.at("calibration_seed").get<std::uint64_t>());
    if (out.empty()) {
      o.write("moser_constants.txt", encode_moser_constants(c));
    } else {
      save_moser_constants(c, out);
      o.external(out);
    }
    return kOk;
  }
  if (action == "check") return check_families(cfg, moser_constant_names(), o);
  if (action == "medians") {
    const auto sizes = m.at("sizes").get<std::vector<std::int64_t>>();
    const auto med = moser_ratio_medians(mc, sizes, m.at("median_instances").get<std::size_t>(),
                                         cfg.at("seed").get<std::uint64_t>(), threads);
    Csv csv({"n", "median_ratio"});
    Csv bad({"n", "median_ratio", "previous"});
    for (std::size_t k = 0; k < sizes.size(); ++k) {
      csv.row({std::to_string(sizes[k]), format_double(med[k])});
      if (k > 0 && med[k] > med[k - 1]) {
        bad.row({std::to_string(sizes[k]), format_double(med[k]), format_double(med[k - 1])});
      }
    }
    o.write("moser_medians.csv", csv.str());
    o.write("violations.csv", bad.str());
    return bad.str().find('\n') + 1 == bad.str().size() ? kOk : kAssertionFailed;
  }
  throw UsageError("moser action must be calibrate, check or medians, got '" + action + "'");
}

int run_ineq(const json& cfg, Outputs& o) {
  SweepSpec spec;
  spec.samples = cfg.at("ineq").at("samples").get<std::size_t>();
  spec.seed = cfg.at("seed").get<std::uint64_t>();
  const auto results = sweep_all(spec, cfg.at("threads").get<unsigned>());
  std::size_t total = 0;
  for (const auto& r : results) total += r.violations;
  o.write("summary.csv", sweep_summary_csv(results));
  o.write("violations.csv", violations_csv(results));
  return total == 0 ? kOk : kAssertionFailed;
}

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<unsigned> threads;
  std::optional<std::string> out_dir;
  std::string spec;
  std::string env_file;
  std::string out;
  std::string action;
  std::optional<std::size_t> samples;
  std::optional<std::string> scheme;
  std::optional<double> t_max;
  std::optional<int> count;
  std::optional<std::size_t> trajectories;
  std::vector<std::int64_t> sizes;
  std::optional<std::size_t> instances;
  std::optional<std::string> constants;
  std::vector<std::uint64_t> corpus_seeds;
};

json resolve(const Flags& f, const std::string& sub) {
  json cfg = default_config();
  if (!f.config.empty()) overlay(cfg, read_json_file(f.config, "config file"), "");
  if (!f.spec.empty()) overlay(cfg["env"], read_json_file(f.spec, "environment spec"), "env");
  if (f.seed) {
    cfg["seed"] = *f.seed;
  } else if (cfg["seed"].is_null()) {
    const char* env_seed = std::getenv("RCM_SEED");
    cfg["seed"] = env_seed ? parse_seed_env(env_seed) : 0;
  }
  if (cfg["env"]["seed"].is_null()) cfg["env"]["seed"] = cfg["seed"];
  if (f.threads) cfg["threads"] = *f.threads;
  if (f.out_dir) cfg["out_dir"] = *f.out_dir;
  if (!f.env_file.empty()) cfg["env_file"] = f.env_file;
  if (f.samples) cfg["ineq"]["samples"] = *f.samples;
  if (f.scheme) cfg["walk"]["scheme"] = *f.scheme;
  if (f.t_max) cfg["walk"]["t_max"] = *f.t_max;
  if (f.count) cfg["walk"]["count"] = *f.count;
  if (f.trajectories) cfg["walk"]["trajectories"] = *f.trajectories;
  if (!f.sizes.empty()) {
    if (sub == "moser") cfg["moser"]["sizes"] = f.sizes;
    else cfg["walk"]["sizes"] = f.sizes;
  }
  if (f.instances) cfg["moser"]["instances"] = *f.instances;
  if (f.constants) cfg["moser"]["constants"] = *f.constants;
  if (!f.corpus_seeds.empty()) cfg["moser"]["corpus_seeds"] = f.corpus_seeds;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Random conductance model toolkit", "rcm"};
  app.set_version_flag("--version", std::string(RCM_VERSION));
  app.require_subcommand(1, 1);
  app.fallthrough();
  Flags f;
  app.add_option("--config", f.config, "JSON run configuration; flags override it");
  app.add_option("--seed", f.seed, "master seed (fallback: RCM_SEED, then 0)");
  app.add_option("--threads", f.threads, "worker cap; results do not depend on it");
  app.add_option("--out-dir", f.out_dir, "directory for outputs and manifest.json");

  auto* env_gen = app.add_subcommand("env-gen", "sample an environment and write it in binary form");
  env_gen->add_option("--spec", f.spec, "JSON environment spec (keys of the 'env' config object)");
  env_gen->add_option("--out", f.out, "environment file (default <out-dir>/env.rcme)");

  auto* corrector = app.add_subcommand("corrector", "solve the corrector and write it with the diffusivity");
  auto* walk = app.add_subcommand("walk", "simulate walks and write paths and endpoints");
  auto* clt = app.add_subcommand("clt", "covariance and Gaussianity reports over a range of scales");
  auto* moser = app.add_subcommand("moser", "calibrate or check Moser constants on random corpora");
  auto* sobolev = app.add_subcommand("sobolev", "check Sobolev constants on random corpora");
  auto* poincare = app.add_subcommand("poincare", "check the l1 Poincare constant on random corpora");
  auto* ineq = app.add_subcommand("ineq", "random sweep of the scalar inequalities");

  for (auto* sub : {corrector, walk, clt}) {
    sub->add_option("--spec", f.spec, "JSON environment spec");
    sub->add_option("--scheme", f.scheme, "vsrw or csrw");
  }
  for (auto* sub : {corrector, walk}) sub->add_option("--env", f.env_file, "environment file from env-gen");
  walk->add_option("--t-max", f.t_max, "time horizon");
  walk->add_option("--count", f.count, "number of paths");
  clt->add_option("--trajectories", f.trajectories, "trajectories per scale");
  clt->add_option("--sizes", f.sizes, "scales n")->delimiter(',');
  moser->add_option("action", f.action, "calibrate, check or medians")->required();
  moser->add_option("--out", f.out, "constants file for calibrate");
  moser->add_option("--sizes", f.sizes, "ball radii for medians")->delimiter(',');
  for (auto* sub : {moser, sobolev, poincare}) {
    sub->add_option("--instances", f.instances, "instances per corpus");
    sub->add_option("--constants", f.constants, "frozen constants file");
    sub->add_option("--corpus-seeds", f.corpus_seeds, "corpus seeds to check")->delimiter(',');
  }
  ineq->add_option("--samples", f.samples, "samples per inequality per regime");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kUsage;
  }
  const std::string sub = app.get_subcommands().front()->get_name();

  try {
    const json cfg = resolve(f, sub);
    Outputs o(cfg.at("out_dir").get<std::string>());
    int rc = kOk;
    if (sub == "env-gen") rc = run_env_gen(cfg, f.out, o);
    else if (sub == "corrector") rc = run_corrector(cfg, o);
    else if (sub == "walk") rc = run_walk(cfg, o);
    else if (sub == "clt") rc = run_clt(cfg, o);
    else if (sub == "moser") rc = run_moser(cfg, f.action, f.out, o);
    else if (sub == "sobolev") rc = check_families(cfg, {"C_S", "C_S_weighted", "C_S1"}, o);
    else if (sub == "poincare") rc = check_families(cfg, {"C_P"}, o);
    else if (sub == "ineq") rc = run_ineq(cfg, o);
    o.manifest(sub, f.action, cfg);
    if (rc == kAssertionFailed) std::cerr << "rcm " << sub << ": assertion failed, see violations.csv\n";
    return rc;
  } catch (const UsageError& e) {
    std::cerr << "rcm " << sub << ": " << e.what() << "\n";
    return kUsage;
  } catch (const InvalidArgument& e) {
    std::cerr << "rcm " << sub << ": invalid argument: " << e.what() << "\n";
    return kUsage;
  } catch (const FormatError& e) {
    std::cerr << "rcm " << sub << ": bad input file: " << e.what() << "\n";
    return kUsage;
  } catch (const json::exception& e) {
    std::cerr << "rcm " << sub << ": config error: " << e.what() << "\n";
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "rcm " << sub << ": " << e.what() << "\n";
    return kAssertionFailed;
  }
}
