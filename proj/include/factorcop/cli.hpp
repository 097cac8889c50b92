#pragma once

// Command implementations behind the factorcop executable. Argument parsing
// lives in tools/; everything here takes a RunConfig so it can be tested
// without a process boundary.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <boost/version.hpp>

#include "factorcop/dataset.hpp"
#include "factorcop/errors.hpp"
#include "factorcop/factor_model.hpp"
#include "factorcop/mixed_baseline.hpp"
#include "factorcop/report.hpp"
#include "factorcop/simulator.hpp"

namespace factorcop {

inline constexpr const char* kVersion = "0.1.0";

enum class ExitCode : int { ok = 0, usage = 1, data = 2, convergence = 3 };

enum class OutputFormat { json, csv, text };

inline OutputFormat output_format_from_string(const std::string& s) {
  if (s == "json") return OutputFormat::json;
  if (s == "csv") return OutputFormat::csv;
  if (s == "text") return OutputFormat::text;
  throw DomainError("unknown output format '" + s + "'");
}

inline std::string to_string(OutputFormat f) {
  return f == OutputFormat::json ? "json" : f == OutputFormat::csv ? "csv" : "text";
}

struct RunConfig {
  std::string command;  // fit | simulate | mc-study | compare
  std::vector<std::string> argv;

  // data
  std::string data_path;
  std::string response = "normal";
  int K = 0;
  CsvSchema schema;

  // model
  std::string model = "factor";  // factor | ri | ris
  int factors = 1;
  std::string copula = "gaussian";
  std::string nu_grid;  // "a:b", "a:b:step" or "a,b,c"
  std::string quad = "hermite-probit";
  int quad_n = kDefaultQuadNodes;
  double slope_scale = 1.0;
  bool godambe = true;

  // simulation
  std::string preset;
  int m = 500;
  int d = 10;
  double prune_p = 0.8;
  int N = 0;  // 0: command default
  std::uint64_t seed = 1;
  int jobs = 1;

  // output
  std::string out;
  std::string format = "text";
};

// ---------------------------------------------------------------------------
// Logging (FACTORCOP_LOG = quiet | info | debug)

enum class LogLevel { quiet = 0, info = 1, debug = 2 };

inline LogLevel log_level() {
  const char* env = std::getenv("FACTORCOP_LOG");
  if (!env) return LogLevel::info;
  const std::string v(env);
  if (v == "quiet" || v == "0" || v == "off") return LogLevel::quiet;
  if (v == "debug" || v == "2") return LogLevel::debug;
  return LogLevel::info;
}

inline void log(LogLevel level, const std::string& msg) {
  if (static_cast<int>(level) <= static_cast<int>(log_level())) std::cerr << "[factorcop] " << msg << '\n';
}

// ---------------------------------------------------------------------------
// Config helpers

inline std::vector<int> parse_nu_grid(const std::string& s) {
  std::vector<int> out;
  if (s.empty()) return out;
  auto to_int = [&](const std::string& t) {
    try {
      std::size_t pos = 0;
      const int v = std::stoi(t, &pos);
      if (pos != t.size()) throw std::invalid_argument(t);
      return v;
    } catch (const std::exception&) {
      throw DomainError("invalid nu grid '" + s + "'");
    }
  };
  if (s.find(':') != std::string::npos) {
    std::vector<std::string> parts;
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ':');) parts.push_back(p);
    if (parts.size() < 2 || parts.size() > 3) throw DomainError("invalid nu grid '" + s + "'");
    const int a = to_int(parts[0]), b = to_int(parts[1]), step = parts.size() == 3 ? to_int(parts[2]) : 1;
    if (step < 1 || b < a) throw DomainError("invalid nu grid '" + s + "'");
    for (int v = a; v <= b; v += step) out.push_back(v);
  } else {
    std::stringstream ss(s);
    for (std::string p; std::getline(ss, p, ',');) out.push_back(to_int(p));
  }
  for (int v : out)
    if (v < 2) throw DomainError("nu grid values must be >= 2");
  return out;
}

inline ResponseKind response_kind(const RunConfig& c) {
  if (c.response == "ordinal") {
    if (c.K < 2) throw DomainError("--K >= 2 is required for ordinal responses");
    return ResponseKind::ordinal(c.K);
  }
  return response_kind_from_string(c.response);
}

inline FactorCopulaSpec copula_spec(const RunConfig& c) {
  FactorCopulaSpec s;
  s.n_factors = c.factors;
  s.family = copula_family_from_string(c.copula);
  s.validate();
  return s;
}

inline void validate_config(const RunConfig& c) {
  const CopulaFamily fam = copula_family_from_string(c.copula);
  if (!c.nu_grid.empty() && fam != CopulaFamily::student_t)
    throw DomainError("--nu-grid only applies to the Student-t copula");
  parse_nu_grid(c.nu_grid);
  if (c.factors != 1 && c.factors != 2) throw DomainError("--factors must be 1 or 2");
  if (c.quad_n < 2) throw DomainError("--quad-n must be >= 2");
  quad_mode_from_string(c.quad);
  output_format_from_string(c.format);
  if (c.jobs < 1) throw DomainError("--jobs must be >= 1");
  if (c.model != "factor" && c.model != "ri" && c.model != "ris") throw DomainError("--model must be factor, ri or ris");
}

inline TwoStageOptions two_stage_options(const RunConfig& c) {
  TwoStageOptions o;
  o.quad_mode = quad_mode_from_string(c.quad);
  o.quad_n = c.quad_n;
  o.nu_grid = parse_nu_grid(c.nu_grid);
  o.godambe = c.godambe;
  return o;
}

inline SimDesign sim_design(const RunConfig& c) {
  SimDesign d;
  d.m = c.m;
  d.d = c.d;
  d.prune_p = c.prune_p;
  d.seed = c.seed;
  d.validate();
  return d;
}

inline Json config_json(const RunConfig& c) {
  Json j;
  j["command"] = c.command;
  j["argv"] = c.argv;
  j["data"] = c.data_path;
  j["response"] = c.response;
  j["K"] = c.K;
  j["schema"] = {{"id", c.schema.id},
                 {"time", c.schema.time},
                 {"y", c.schema.y},
                 {"covariates", c.schema.covariates},
                 {"time_scale", c.schema.time_scale},
                 {"recode", c.schema.recode}};
  j["model"] = c.model;
  j["factors"] = c.factors;
  j["copula"] = c.copula;
  j["nu_grid"] = c.nu_grid;
  j["quad"] = {{"mode", c.quad}, {"n", c.quad_n}};
  j["slope_scale"] = c.slope_scale;
  j["godambe"] = c.godambe;
  j["preset"] = c.preset;
  j["design"] = {{"m", c.m}, {"d", c.d}, {"prune_p", c.prune_p}};
  j["N"] = c.N;
  j["seed"] = c.seed;
  j["jobs"] = c.jobs;
  j["out"] = c.out;
  j["format"] = c.format;
  return j;
}

inline Json versions_json() {
  std::ostringstream boost_v;
  boost_v << BOOST_VERSION / 100000 << '.' << BOOST_VERSION / 100 % 1000 << '.' << BOOST_VERSION % 100;
  Json j;
  j["factorcop"] = kVersion;
  j["boost"] = boost_v.str();
  j["eigen"] = std::to_string(EIGEN_WORLD_VERSION) + "." + std::to_string(EIGEN_MAJOR_VERSION) + "." +
               std::to_string(EIGEN_MINOR_VERSION);
  j["nlohmann_json"] = std::to_string(NLOHMANN_JSON_VERSION_MAJOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_MINOR) + "." +
                       std::to_string(NLOHMANN_JSON_VERSION_PATCH);
#if defined(__VERSION__)
  j["compiler"] = __VERSION__;
#endif
  j["cxx_standard"] = static_cast<long>(__cplusplus);
  return j;
}

/// Collects named artifacts; writes them under --out (a directory) or, when
/// no directory is given, prints the primary artifact to stdout.
class Artifacts {
 public:
  explicit Artifacts(const RunConfig& c) : config_(c) {}

  void add(const std::string& name, const std::string& content) { files_.emplace_back(name, content); }

  void finish(const std::string& primary, std::ostream& stdout_stream) {
    if (config_.out.empty()) {
      for (const auto& [name, content] : files_)
        if (name == primary) stdout_stream << content;
      return;
    }
    std::filesystem::create_directories(config_.out);
    Json manifest;
    manifest["config"] = config_json(config_);
    manifest["versions"] = versions_json();
    Json outputs = Json::array();
    for (const auto& [name, content] : files_) {
      write_file(name, content);
      outputs.push_back(name);
    }
    manifest["outputs"] = outputs;
    write_file("manifest.json", manifest.dump(2) + "\n");
    log(LogLevel::info, "wrote " + std::to_string(files_.size() + 1) + " files to " + config_.out);
  }

 private:
  void write_file(const std::string& name, const std::string& content) const {
    const auto path = std::filesystem::path(config_.out) / name;
    std::ofstream f(path, std::ios::binary);
    if (!f) throw Error("cannot write " + path.string());
    f << content;
  }

  const RunConfig& config_;
  std::vector<std::pair<std::string, std::string>> files_;
};

template <class T>
std::string render_text(const T& x) {
  std::ostringstream os;
  write_text(os, x);
  return os.str();
}

template <class T>
std::string render_csv(const T& x) {
  std::ostringstream os;
  write_csv(os, x);
  return os.str();
}

inline std::string primary_name(const RunConfig& c, const std::string& stem) {
  const OutputFormat f = output_format_from_string(c.format);
  return stem + (f == OutputFormat::json ? ".json" : f == OutputFormat::csv ? ".csv" : ".txt");
}

// ---------------------------------------------------------------------------
// Commands

inline int run_fit(const RunConfig& c, std::ostream& out = std::cout) {
  validate_config(c);
  if (c.data_path.empty()) throw DomainError("fit needs --data");
  LongitudinalDataset data;
  try {
    data = load_csv(c.data_path, response_kind(c), c.schema);
    data.validate();
  } catch (const Error& e) {
    std::cerr << "error: data: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  }
  const DatasetSummary sum = summarize(data);
  log(LogLevel::info, "loaded " + std::to_string(sum.m) + " subjects, " + std::to_string(data.n_observations()) +
                          " observations");
  const Panel panel = make_panel(data);
  Artifacts art(c);

  if (c.model != "factor") {
    MixedSpec ms;
    ms.kind = data.kind;
    ms.n_random = c.model == "ri" ? 1 : 2;
    ms.slope_scale = c.slope_scale;
    ms.quad_n = c.quad_n;
    MixedFit fit;
    try {
      fit = fit_mixed(panel, ms);
    } catch (const ConvergenceError& e) {
      std::cerr << "error: " << model_name(ms) << " fit: " << e.what() << '\n';
      return static_cast<int>(ExitCode::convergence);
    }
    art.add("fit.json", to_json(fit).dump(2) + "\n");
    art.add("summary.txt", render_text(fit));
    art.finish(output_format_from_string(c.format) == OutputFormat::json ? "fit.json" : "summary.txt", out);
    return 0;
  }

  const FactorCopulaSpec spec = copula_spec(c);
  const TwoStageOptions opt = two_stage_options(c);
  TwoStageFit fit;
  try {
    fit.marginal = fit_marginal(panel, std::nullopt, opt.marginal);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: stage 1 (marginal): " << e.what() << '\n';
    return static_cast<int>(ExitCode::convergence);
  }
  log(LogLevel::info, "stage 1 loglik " + detail::fixed(fit.marginal.loglik, 4));
  const QuadratureRule quad = make_quadrature(opt.quad_n, opt.quad_mode);
  try {
    const PitData pits = pit(panel, fit.marginal.params);
    fit.factor = fit_factor(pits, spec, quad, opt.nu_grid,
                            {fit.marginal.loglik, marginal::n_params(panel.kind, panel.n_cov())}, opt.factor);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: stage 2 (copula): " << e.what() << '\n';
    return static_cast<int>(ExitCode::convergence);
  }
  log(LogLevel::info, "stage 2 loglik " + detail::fixed(fit.factor.copula_loglik, 4));
  if (opt.godambe) {
    try {
      fit.godambe = godambe_se(panel, fit.marginal, fit.factor, quad);
      fit.factor.se.assign(fit.godambe->se.end() - spec.n_factors, fit.godambe->se.end());
      fit.factor.se_godambe = true;
    } catch (const SingularMatrixError& e) {
      log(LogLevel::info, std::string("Godambe SEs unavailable: ") + e.what());
      fit.factor.warnings.push_back(e.what());
    }
  }
  art.add("fit.json", to_json(fit).dump(2) + "\n");
  art.add("summary.txt", render_text(fit));
  art.finish(output_format_from_string(c.format) == OutputFormat::json ? "fit.json" : "summary.txt", out);
  return 0;
}

inline int run_simulate(const RunConfig& c, std::ostream& out = std::cout) {
  validate_config(c);
  const SimDesign design = sim_design(c);
  LongitudinalDataset data;
  if (c.model == "factor") {
    if (c.preset.empty()) throw DomainError("simulate needs --preset (e.g. gamma-1f-gauss)");
    const SimPreset p = make_preset(c.preset);
    data = generate_dataset(design, p.kind, p.marginal, p.copula);
  } else {
    MixedSpec ms;
    ms.kind = c.response == "ordinal" && c.K == 0 ? ResponseKind::ordinal(4) : response_kind(c);
    ms.n_random = c.model == "ri" ? 1 : 2;
    ms.slope_scale = c.slope_scale;
    const MixedParams truth{default_marginal_truth(ms.kind), std::vector<double>(ms.n_random, 1.0)};
    data = simulate_mixed(ms, truth, design);
  }
  Artifacts art(c);
  std::ostringstream os;
  write_csv(os, data);
  art.add("data.csv", os.str());
  art.finish("data.csv", out);
  return 0;
}

inline int run_mc_study(const RunConfig& c, std::ostream& out = std::cout) {
  validate_config(c);
  const int N = c.N == 0 ? 500 : c.N;
  if (N < 2) throw DomainError("N ≥ 2 required");
  if (c.preset.empty()) throw DomainError("mc-study needs --preset (e.g. gamma-1f-gauss)");
  const SimPreset p = make_preset(c.preset);
  TwoStageOptions opt = two_stage_options(c);
  McOptions mo;
  mo.N = N;
  mo.seed = c.seed;
  mo.jobs = c.jobs;
  log(LogLevel::info, "mc-study " + p.name + ": m = " + std::to_string(c.m) + ", N = " + std::to_string(N));
  const McReport rep = mc_study(p, sim_design(c), mo, opt);
  if (rep.n_failed > 0) log(LogLevel::info, std::to_string(rep.n_failed) + " replications failed and were dropped");
  Artifacts art(c);
  art.add("report.csv", render_csv(rep));
  art.add("report.txt", render_text(rep));
  art.add("report.json", to_json(rep).dump(2) + "\n");
  art.finish(primary_name(c, "report"), out);
  return 0;
}

inline int run_compare(const RunConfig& c, std::ostream& out = std::cout) {
  validate_config(c);
  const int N = c.N == 0 ? 100 : c.N;
  if (N < 2) throw DomainError("N ≥ 2 required");
  const ResponseKind kind = c.response == "ordinal" && c.K == 0 ? ResponseKind::ordinal(4) : response_kind(c);
  TwoStageOptions opt = two_stage_options(c);
  SimDesign design = sim_design(c);
  const ComparisonSetup setup = comparison_setup(kind, c.factors, design, opt);
  McOptions mo;
  mo.N = N;
  mo.seed = c.seed;
  mo.jobs = c.jobs;
  ComparisonReport rep = model_comparison_study(setup.generators, setup.candidates, mo);
  rep.label = to_string(kind) + " margins, " + std::to_string(c.factors) + " latent variable(s), m = " +
              std::to_string(c.m);
  Artifacts art(c);
  art.add("compare.csv", render_csv(rep));
  art.add("compare.txt", render_text(rep));
  art.add("compare.json", to_json(rep).dump(2) + "\n");
  art.finish(primary_name(c, "compare"), out);
  return 0;
}

/// Dispatches a command and maps library errors to exit codes.
inline int run(const RunConfig& c, std::ostream& out = std::cout) {
  try {
    if (c.command == "fit") return run_fit(c, out);
    if (c.command == "simulate") return run_simulate(c, out);
    if (c.command == "mc-study") return run_mc_study(c, out);
    if (c.command == "compare") return run_compare(c, out);
    std::cerr << "error: unknown command '" << c.command << "'\n";
    return static_cast<int>(ExitCode::usage);
  } catch (const DataError& e) {
    std::cerr << "error: data: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const ConvergenceError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::convergence);
  } catch (const SingularMatrixError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::convergence);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  }
}

}  // namespace factorcop
