#pragma once

// Factor-copula data generation, Monte Carlo estimation studies and
// model-comparison (PCI) studies.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "factorcop/bicopula.hpp"
#include "factorcop/dataset.hpp"
#include "factorcop/errors.hpp"
#include "factorcop/factor_model.hpp"
#include "factorcop/marginals.hpp"
#include "factorcop/mixed_baseline.hpp"
#include "factorcop/rng.hpp"
#include "factorcop/sim_design.hpp"

namespace factorcop {

struct FactorTruth {
  FactorCopulaSpec spec;
  double rho1 = 0.5;
  double rho2 = 0.0;  // ignored for 1-factor models
  std::optional<double> nu;

  BicopParam link1() const {
    return spec.family == CopulaFamily::gaussian ? BicopParam::gaussian(rho1) : BicopParam::student_t(rho1, *nu);
  }
  BicopParam link2() const {
    return spec.family == CopulaFamily::gaussian ? BicopParam::gaussian(rho2) : BicopParam::student_t(rho2, *nu);
  }
  void validate() const {
    spec.validate();
    link1().validate();
    if (spec.n_factors == 2) link2().validate();
  }
};

/// u_j = C_{j|1}^{-1}(w_j | v1) for one factor; for two factors the second
/// link is inverted first: u_j = C_{j|1}^{-1}(C_{j|2}^{-1}(w_j | v2) | v1).
inline std::vector<double> factor_uniforms(const FactorTruth& truth, double v1, double v2,
                                           const std::vector<double>& w) {
  const BicopParam l1 = truth.link1();
  const std::optional<BicopParam> l2 =
      truth.spec.n_factors == 2 ? std::optional<BicopParam>(truth.link2()) : std::nullopt;
  std::vector<double> u(w.size());
  for (std::size_t j = 0; j < w.size(); ++j) {
    const double inner = l2 ? hinv(w[j], v2, *l2) : w[j];
    u[j] = hinv(inner, v1, l1);
  }
  return u;
}

inline std::vector<double> sample_factor_uniforms(int n, const FactorTruth& truth, Stream& rng) {
  truth.validate();
  const double v1 = rng.uniform();
  const double v2 = rng.uniform();
  std::vector<double> w(static_cast<std::size_t>(std::max(n, 0)));
  for (double& x : w) x = rng.uniform();
  return factor_uniforms(truth, v1, v2, w);
}

inline LongitudinalDataset generate_dataset(const SimDesign& design, const ResponseKind& kind,
                                            const MarginalParams& marginal_truth, const FactorTruth& truth) {
  truth.validate();
  auto uniforms = [&](std::size_t, const SubjectDraw& d) {
    std::vector<double> u = factor_uniforms(truth, d.v1, d.v2, d.w);
    for (double& x : u) x = clamp_unit(x);
    return u;
  };
  auto no_shift = [](std::size_t, const SubjectDraw&, int) { return 0.0; };
  return simulate_design(design, kind, marginal_truth, uniforms, no_shift);
}

// ---------------------------------------------------------------------------
// Presets

struct SimPreset {
  std::string name;
  ResponseKind kind;
  MarginalParams marginal;
  FactorTruth copula;
};

inline MarginalParams default_marginal_truth(const ResponseKind& kind) {
  MarginalParams p;
  switch (kind.family) {
    case ResponseFamily::gamma_log:
      p.beta = Eigen::Vector4d(1.0, -0.5, 0.2, 0.2);
      p.dispersion = 3.0;
      break;
    case ResponseFamily::normal_identity:
      p.beta = Eigen::Vector4d(1.0, -0.5, 0.2, 0.2);
      p.dispersion = 1.0;
      break;
    case ResponseFamily::binary_probit:
      p.beta = Eigen::Vector4d(-0.5, -0.5, 0.2, 0.2);
      break;
    case ResponseFamily::ordinal_probit:
      p.beta = Eigen::Vector3d(-0.5, 0.2, 0.2);
      p.thresholds = {-1.0, 1.0, 3.0};
      break;
  }
  return p;
}

inline FactorTruth default_factor_truth(int n_factors, CopulaFamily family) {
  FactorTruth t;
  t.spec.n_factors = n_factors;
  t.spec.family = family;
  t.rho1 = 0.5;
  t.rho2 = n_factors == 2 ? 0.5 : 0.0;
  if (family == CopulaFamily::student_t) t.nu = 4.0;
  return t;
}

/// Preset names look like "gamma-1f-gauss", "ordinal-2f-t".
inline SimPreset make_preset(const std::string& name) {
  const auto a = name.find('-');
  const auto b = a == std::string::npos ? a : name.find('-', a + 1);
  if (b == std::string::npos) throw DomainError("unknown preset '" + name + "'");
  const std::string resp = name.substr(0, a), fac = name.substr(a + 1, b - a - 1), fam = name.substr(b + 1);
  SimPreset p;
  p.name = name;
  p.kind = resp == "ordinal" ? ResponseKind::ordinal(4) : response_kind_from_string(resp);
  if (fac != "1f" && fac != "2f") throw DomainError("unknown preset '" + name + "'");
  if (fam != "gauss" && fam != "t") throw DomainError("unknown preset '" + name + "'");
  p.marginal = default_marginal_truth(p.kind);
  p.copula = default_factor_truth(fac == "1f" ? 1 : 2, fam == "gauss" ? CopulaFamily::gaussian : CopulaFamily::student_t);
  return p;
}

inline std::vector<std::string> preset_names() {
  std::vector<std::string> out;
  for (const char* r : {"gamma", "normal", "binary", "ordinal"})
    for (const char* f : {"1f", "2f"})
      for (const char* c : {"gauss", "t"}) out.push_back(std::string(r) + "-" + f + "-" + c);
  return out;
}

// ---------------------------------------------------------------------------
// Parallel map with fixed output order

template <class Fn>
void parallel_for(int n, int jobs, Fn&& fn) {
  jobs = std::max(1, std::min(jobs, n));
  if (jobs == 1) {
    for (int i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<int> next{0};
  std::vector<std::thread> pool;
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(jobs));
  for (int t = 0; t < jobs; ++t)
    pool.emplace_back([&, t] {
      try {
        for (int i = next++; i < n; i = next++) fn(i);
      } catch (...) {
        errors[static_cast<std::size_t>(t)] = std::current_exception();
      }
    });
  for (auto& th : pool) th.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

// ---------------------------------------------------------------------------
// Monte Carlo estimation study

struct Replicate {
  std::vector<double> estimate;
  std::vector<double> se;
};

using DataGenerator = std::function<LongitudinalDataset(std::uint64_t seed)>;
using FitRecipe = std::function<Replicate(const LongitudinalDataset&)>;

struct McRow {
  std::string name;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double sd = 0.0;
  double mean_se = 0.0;
  double rmse = 0.0;
};

struct McReport {
  std::string label;
  int N = 0;
  int n_ok = 0;
  int n_failed = 0;
  std::uint64_t seed = 0;
  std::vector<McRow> rows;
  std::vector<std::optional<Replicate>> replicates;
  std::vector<std::string> failures;
};

struct McOptions {
  int N = 500;
  std::uint64_t seed = 1;
  int jobs = 1;
};

/// Summary rows from collected replicates; sd uses N-1, rmse uses N.
inline std::vector<McRow> summarize_replicates(const std::vector<std::string>& names, const std::vector<double>& truth,
                                               const std::vector<std::optional<Replicate>>& reps) {
  std::vector<McRow> rows;
  for (std::size_t k = 0; k < names.size(); ++k) {
    McRow row;
    row.name = names[k];
    row.truth = truth[k];
    std::vector<double> est, se;
    for (const auto& r : reps) {
      if (!r) continue;
      est.push_back(r->estimate[k]);
      if (k < r->se.size() && std::isfinite(r->se[k])) se.push_back(r->se[k]);
    }
    const double n = static_cast<double>(est.size());
    if (est.empty()) {
      row.mean = row.bias = row.sd = row.mean_se = row.rmse = std::nan("");
      rows.push_back(row);
      continue;
    }
    double s = 0.0;
    for (double e : est) s += e;
    row.mean = s / n;
    row.bias = row.mean - row.truth;
    double ss = 0.0, sq = 0.0;
    for (double e : est) {
      ss += (e - row.mean) * (e - row.mean);
      sq += (e - row.truth) * (e - row.truth);
    }
    row.sd = est.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0;
    row.rmse = std::sqrt(sq / n);
    if (se.empty()) {
      row.mean_se = std::nan("");
    } else {
      double t = 0.0;
      for (double e : se) t += e;
      row.mean_se = t / static_cast<double>(se.size());
    }
    rows.push_back(row);
  }
  return rows;
}

inline McReport mc_study(const std::vector<std::string>& names, const std::vector<double>& truth,
                         const DataGenerator& generate, const FitRecipe& fit, const McOptions& opt) {
  if (opt.N < 2) throw DomainError("N ≥ 2 required");
  if (names.size() != truth.size()) throw DomainError("parameter names and truth differ in length");
  McReport rep;
  rep.N = opt.N;
  rep.seed = opt.seed;
  rep.replicates.assign(static_cast<std::size_t>(opt.N), std::nullopt);
  std::vector<std::string> errors(static_cast<std::size_t>(opt.N));
  parallel_for(opt.N, opt.jobs, [&](int r) {
    try {
      const LongitudinalDataset data = generate(opt.seed + static_cast<std::uint64_t>(r));
      Replicate x = fit(data);
      if (x.estimate.size() != names.size()) throw DomainError("fit recipe returned the wrong number of estimates");
      rep.replicates[static_cast<std::size_t>(r)] = std::move(x);
    } catch (const std::exception& e) {
      errors[static_cast<std::size_t>(r)] = e.what();
    }
  });
  for (int r = 0; r < opt.N; ++r) {
    if (rep.replicates[static_cast<std::size_t>(r)]) {
      ++rep.n_ok;
    } else {
      ++rep.n_failed;
      rep.failures.push_back("replication " + std::to_string(r) + ": " + errors[static_cast<std::size_t>(r)]);
    }
  }
  rep.rows = summarize_replicates(names, truth, rep.replicates);
  return rep;
}

inline std::vector<std::string> two_stage_names(const ResponseKind& kind, const FactorCopulaSpec& spec) {
  auto names = marginal::param_names(kind, static_cast<Eigen::Index>(sim_covariate_names(kind).size()));
  names.push_back("rho1");
  if (spec.n_factors == 2) names.push_back("rho2");
  return names;
}

inline FitRecipe two_stage_recipe(const FactorCopulaSpec& spec, const TwoStageOptions& opt) {
  return [spec, opt](const LongitudinalDataset& data) {
    const TwoStageFit f = fit_two_stage(data, spec, opt);
    Replicate r;
    const Eigen::VectorXd m = marginal::pack(f.marginal.params, data.kind);
    r.estimate.assign(m.data(), m.data() + m.size());
    r.estimate.push_back(f.factor.rho1);
    if (spec.n_factors == 2) r.estimate.push_back(f.factor.rho2.value_or(0.0));
    if (f.godambe)
      r.se = f.godambe->se;
    else
      r.se.assign(r.estimate.size(), std::nan(""));
    return r;
  };
}

/// Estimation study for a preset: generate from the preset truth and fit the
/// same model class by two-stage IFM.
inline McReport mc_study(const SimPreset& preset, const SimDesign& design, const McOptions& opt,
                         TwoStageOptions fit_opt = {}) {
  if (preset.copula.spec.family == CopulaFamily::student_t && fit_opt.nu_grid.empty())
    fit_opt.nu_grid = {static_cast<int>(*preset.copula.nu)};
  std::vector<double> truth;
  const Eigen::VectorXd m = marginal::pack(preset.marginal, preset.kind);
  truth.assign(m.data(), m.data() + m.size());
  truth.push_back(preset.copula.rho1);
  if (preset.copula.spec.n_factors == 2) truth.push_back(preset.copula.rho2);
  DataGenerator gen = [preset, design](std::uint64_t seed) {
    SimDesign d = design;
    d.seed = seed;
    return generate_dataset(d, preset.kind, preset.marginal, preset.copula);
  };
  McReport rep = mc_study(two_stage_names(preset.kind, preset.copula.spec), truth, gen,
                          two_stage_recipe(preset.copula.spec, fit_opt), opt);
  rep.label = preset.name;
  return rep;
}

// ---------------------------------------------------------------------------
// Model comparison (PCI)

struct CandidateResult {
  double loglik = 0.0;
  int dim = 0;
  double aic = 0.0;
  double bic = 0.0;
};

struct Candidate {
  std::string name;
  std::function<CandidateResult(const LongitudinalDataset&)> fit;
};

struct GeneratorSpec {
  std::string name;
  std::string true_candidate;
  DataGenerator generate;
};

struct ComparisonRow {
  std::string generator;
  std::string true_candidate;
  int n_ok = 0;
  int n_failed = 0;
  std::vector<double> mean_aic;
  std::vector<double> mean_bic;
  std::vector<int> aic_wins;
  std::vector<int> bic_wins;
  double pci_aic = 0.0;
  double pci_bic = 0.0;
  std::vector<std::string> failures;
};

struct ComparisonReport {
  std::string label;
  int N = 0;
  std::uint64_t seed = 0;
  std::vector<std::string> candidates;
  std::vector<ComparisonRow> rows;
};

inline Candidate factor_candidate(const std::string& name, const FactorCopulaSpec& spec, std::vector<int> nu_grid,
                                  TwoStageOptions opt = {}) {
  opt.nu_grid = std::move(nu_grid);
  opt.godambe = false;
  return {name, [spec, opt](const LongitudinalDataset& data) {
            const TwoStageFit f = fit_two_stage(data, spec, opt);
            return CandidateResult{f.factor.loglik, f.factor.dim, f.factor.aic, f.factor.bic};
          }};
}

inline Candidate mixed_candidate(const std::string& name, const MixedSpec& spec) {
  return {name, [spec](const LongitudinalDataset& data) {
            MixedFitOptions opt;
            opt.compute_se = false;
            const MixedFit f = fit_mixed(data, spec, opt);
            return CandidateResult{f.loglik, f.dim, f.aic, f.bic};
          }};
}

inline ComparisonReport model_comparison_study(const std::vector<GeneratorSpec>& generators,
                                               const std::vector<Candidate>& candidates, const McOptions& opt) {
  if (opt.N < 2) throw DomainError("N ≥ 2 required");
  if (candidates.empty()) throw DomainError("empty candidate set");
  ComparisonReport rep;
  rep.N = opt.N;
  rep.seed = opt.seed;
  for (const auto& c : candidates) rep.candidates.push_back(c.name);
  const std::size_t nc = candidates.size();
  for (const auto& g : generators) {
    const auto truth_it = std::find(rep.candidates.begin(), rep.candidates.end(), g.true_candidate);
    if (truth_it == rep.candidates.end())
      throw DomainError("candidate set does not include the generating class '" + g.true_candidate + "'");
    const auto truth_idx = static_cast<std::size_t>(truth_it - rep.candidates.begin());
    std::vector<std::optional<std::vector<CandidateResult>>> results(static_cast<std::size_t>(opt.N));
    std::vector<std::string> errors(static_cast<std::size_t>(opt.N));
    parallel_for(opt.N, opt.jobs, [&](int r) {
      try {
        const LongitudinalDataset data = g.generate(opt.seed + static_cast<std::uint64_t>(r));
        std::vector<CandidateResult> res;
        for (const auto& c : candidates) res.push_back(c.fit(data));
        results[static_cast<std::size_t>(r)] = std::move(res);
      } catch (const std::exception& e) {
        errors[static_cast<std::size_t>(r)] = e.what();
      }
    });
    ComparisonRow row;
    row.generator = g.name;
    row.true_candidate = g.true_candidate;
    row.mean_aic.assign(nc, 0.0);
    row.mean_bic.assign(nc, 0.0);
    row.aic_wins.assign(nc, 0);
    row.bic_wins.assign(nc, 0);
    for (int r = 0; r < opt.N; ++r) {
      const auto& res = results[static_cast<std::size_t>(r)];
      if (!res) {
        ++row.n_failed;
        row.failures.push_back("replication " + std::to_string(r) + ": " + errors[static_cast<std::size_t>(r)]);
        continue;
      }
      ++row.n_ok;
      std::vector<CandidateScore> by_aic, by_bic;
      for (std::size_t c = 0; c < nc; ++c) {
        row.mean_aic[c] += (*res)[c].aic;
        row.mean_bic[c] += (*res)[c].bic;
        by_aic.push_back({candidates[c].name, (*res)[c].aic, (*res)[c].dim});
        by_bic.push_back({candidates[c].name, (*res)[c].bic, (*res)[c].dim});
      }
      ++row.aic_wins[select_model(by_aic)];
      ++row.bic_wins[select_model(by_bic)];
    }
    const double n = row.n_ok > 0 ? static_cast<double>(row.n_ok) : std::nan("");
    for (std::size_t c = 0; c < nc; ++c) {
      row.mean_aic[c] /= n;
      row.mean_bic[c] /= n;
    }
    row.pci_aic = row.aic_wins[truth_idx] / n;
    row.pci_bic = row.bic_wins[truth_idx] / n;
    rep.rows.push_back(std::move(row));
  }
  return rep;
}

struct ComparisonSetup {
  std::vector<GeneratorSpec> generators;
  std::vector<Candidate> candidates;
};

/// Random-effects model against Gaussian and Student-t (nu = 4) factor
/// copulas with the same number of latent variables, as generators and as
/// candidates. RIS uses d_ij = (1, 0.1 t_ij); random-effect variances are 1.
inline ComparisonSetup comparison_setup(const ResponseKind& kind, int n_factors, const SimDesign& design,
                                        TwoStageOptions fit_opt = {}) {
  MixedSpec ms;
  ms.kind = kind;
  ms.n_random = n_factors;
  ms.slope_scale = 0.1;
  ms.quad_n = fit_opt.quad_n;
  const std::string re_name = model_name(ms);
  const MarginalParams truth = default_marginal_truth(kind);
  const MixedParams re_truth{truth, std::vector<double>(static_cast<std::size_t>(n_factors), 1.0)};
  const FactorTruth gauss = default_factor_truth(n_factors, CopulaFamily::gaussian);
  const FactorTruth t = default_factor_truth(n_factors, CopulaFamily::student_t);
  const std::string gname = model_name(gauss.spec), tname = model_name(t.spec);

  ComparisonSetup s;
  s.generators.push_back({re_name, re_name, [ms, re_truth, design](std::uint64_t seed) {
                            SimDesign d = design;
                            d.seed = seed;
                            return simulate_mixed(ms, re_truth, d);
                          }});
  for (const FactorTruth& ft : {gauss, t}) {
    s.generators.push_back({model_name(ft.spec), model_name(ft.spec), [kind, truth, ft, design](std::uint64_t seed) {
                              SimDesign d = design;
                              d.seed = seed;
                              return generate_dataset(d, kind, truth, ft);
                            }});
  }
  s.candidates.push_back(mixed_candidate(re_name, ms));
  s.candidates.push_back(factor_candidate(gname, gauss.spec, {}, fit_opt));
  s.candidates.push_back(factor_candidate(tname, t.spec, {4}, fit_opt));
  return s;
}

}  // namespace factorcop
