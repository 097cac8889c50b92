#pragma once

// JSON records for fits and studies, CSV and fixed-width text tables.

#include <cmath>
#include <iomanip>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "factorcop/factor_model.hpp"
#include "factorcop/marginals.hpp"
#include "factorcop/mixed_baseline.hpp"
#include "factorcop/simulator.hpp"

namespace factorcop {

using Json = nlohmann::ordered_json;

namespace detail {

inline Json num(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }

inline Json nums(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(num(x));
  return a;
}

inline Json matrix(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    Json row = Json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(num(m(r, c)));
    a.push_back(row);
  }
  return a;
}

inline std::string fixed(double v, int digits = 4) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << v;
  return os.str();
}

/// CSV cell with full round-trip precision.
inline std::string exact(double v) {
  if (!std::isfinite(v)) return "NA";
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

inline std::string pad(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : std::string(w - s.size(), ' ') + s;
}

inline std::string pad_right(const std::string& s, std::size_t w) {
  return s.size() >= w ? s : s + std::string(w - s.size(), ' ');
}

}  // namespace detail

inline Json to_json(const MarginalFit& f) {
  Json j;
  j["family"] = to_string(f.kind);
  if (f.kind.family == ResponseFamily::ordinal_probit) j["K"] = f.kind.categories;
  j["names"] = f.names;
  j["beta"] = detail::nums(std::vector<double>(f.params.beta.data(), f.params.beta.data() + f.params.beta.size()));
  if (f.params.dispersion) j["dispersion"] = *f.params.dispersion;
  if (!f.params.thresholds.empty()) j["thresholds"] = detail::nums(f.params.thresholds);
  j["se"] = detail::nums(f.se);
  j["loglik"] = detail::num(f.loglik);
  j["converged"] = f.converged;
  j["separation"] = f.separation;
  j["warnings"] = f.warnings;
  return j;
}

inline Json to_json(const FactorFit& f) {
  Json j;
  j["spec"] = {{"n_factors", f.spec.n_factors},
               {"family", std::string(to_string(f.spec.family))},
               {"exchangeable", f.spec.exchangeable}};
  j["rho1"] = f.rho1;
  if (f.rho2) j["rho2"] = *f.rho2;
  if (f.nu) j["nu"] = *f.nu;
  j["se"] = detail::nums(f.se);
  j["se_type"] = f.se_godambe ? "godambe" : "stage2-hessian";
  j["copula_loglik"] = detail::num(f.copula_loglik);
  j["marginal_loglik"] = detail::num(f.marginal_loglik);
  j["loglik"] = detail::num(f.loglik);
  j["dim"] = f.dim;
  j["aic"] = detail::num(f.aic);
  j["bic"] = detail::num(f.bic);
  j["m"] = f.m;
  j["n_eval"] = f.n_eval;
  j["quad"] = {{"mode", std::string(to_string(f.quad_mode))}, {"n", f.quad_n}};
  if (!f.nu_profile.empty()) {
    Json prof = Json::array();
    for (const auto& p : f.nu_profile) prof.push_back({{"nu", p.nu}, {"loglik", detail::num(p.loglik)}});
    j["nu_profile"] = prof;
  }
  j["warnings"] = f.warnings;
  return j;
}

inline Json to_json(const GodambeResult& g) {
  Json j;
  j["names"] = g.names;
  j["se"] = detail::nums(g.se);
  j["D"] = detail::matrix(g.D);
  j["M"] = detail::matrix(g.M);
  j["J"] = detail::matrix(g.J);
  return j;
}

inline Json to_json(const TwoStageFit& f) {
  Json j;
  j["marginal"] = to_json(f.marginal);
  j["factor"] = to_json(f.factor);
  if (f.godambe) j["godambe"] = to_json(*f.godambe);
  return j;
}

inline Json to_json(const MixedFit& f) {
  Json j;
  j["spec"] = {{"model", model_name(f.spec)},
               {"family", to_string(f.spec.kind)},
               {"n_random", f.spec.n_random},
               {"slope_scale", f.spec.slope_scale}};
  j["names"] = f.names;
  const Eigen::VectorXd theta = mixed::pack(f.params, f.spec);
  j["estimates"] = detail::nums(std::vector<double>(theta.data(), theta.data() + theta.size()));
  j["se"] = detail::nums(f.se);
  j["loglik"] = detail::num(f.loglik);
  j["dim"] = f.dim;
  j["aic"] = detail::num(f.aic);
  j["bic"] = detail::num(f.bic);
  j["m"] = f.m;
  j["n_eval"] = f.n_eval;
  j["quad"] = {{"mode", "gauss-hermite"}, {"n", f.spec.quad_n}};
  j["warnings"] = f.warnings;
  return j;
}

inline Json to_json(const McReport& r) {
  Json j;
  j["label"] = r.label;
  j["N"] = r.N;
  j["seed"] = r.seed;
  j["n_ok"] = r.n_ok;
  j["n_failed"] = r.n_failed;
  Json rows = Json::array();
  for (const auto& row : r.rows)
    rows.push_back({{"parameter", row.name},
                    {"true", detail::num(row.truth)},
                    {"mean", detail::num(row.mean)},
                    {"bias", detail::num(row.bias)},
                    {"sd", detail::num(row.sd)},
                    {"se", detail::num(row.mean_se)},
                    {"rmse", detail::num(row.rmse)}});
  j["rows"] = rows;
  j["failures"] = r.failures;
  return j;
}

inline Json to_json(const ComparisonReport& r) {
  Json j;
  j["label"] = r.label;
  j["N"] = r.N;
  j["seed"] = r.seed;
  j["candidates"] = r.candidates;
  Json rows = Json::array();
  for (const auto& row : r.rows) {
    rows.push_back({{"generated", row.generator},
                    {"true_candidate", row.true_candidate},
                    {"n_ok", row.n_ok},
                    {"n_failed", row.n_failed},
                    {"mean_aic", detail::nums(row.mean_aic)},
                    {"mean_bic", detail::nums(row.mean_bic)},
                    {"aic_wins", row.aic_wins},
                    {"bic_wins", row.bic_wins},
                    {"pci_aic", detail::num(row.pci_aic)},
                    {"pci_bic", detail::num(row.pci_bic)},
                    {"failures", row.failures}});
  }
  j["rows"] = rows;
  return j;
}

// CSV -----------------------------------------------------------------------

inline void write_csv(std::ostream& out, const McReport& r) {
  out << "parameter,true,mean,bias,sd,se,rmse\n";
  for (const auto& row : r.rows)
    out << row.name << ',' << detail::exact(row.truth) << ',' << detail::exact(row.mean) << ','
        << detail::exact(row.bias) << ',' << detail::exact(row.sd) << ',' << detail::exact(row.mean_se) << ','
        << detail::exact(row.rmse) << '\n';
}

inline void write_csv(std::ostream& out, const ComparisonReport& r) {
  out << "generated,candidate,mean_aic,mean_bic,aic_wins,bic_wins,pci_aic,pci_bic,n_ok,n_failed\n";
  for (const auto& row : r.rows)
    for (std::size_t c = 0; c < r.candidates.size(); ++c)
      out << row.generator << ',' << r.candidates[c] << ',' << detail::exact(row.mean_aic[c]) << ','
          << detail::exact(row.mean_bic[c]) << ',' << row.aic_wins[c] << ',' << row.bic_wins[c] << ','
          << detail::exact(row.pci_aic) << ',' << detail::exact(row.pci_bic) << ',' << row.n_ok << ','
          << row.n_failed << '\n';
}

// Text tables ---------------------------------------------------------------

inline void write_text(std::ostream& out, const McReport& r) {
  using detail::fixed;
  using detail::pad;
  out << r.label << "  (N = " << r.N << ", converged " << r.n_ok << ", failed " << r.n_failed << ")\n";
  out << detail::pad_right("Parameter", 10);
  for (const char* h : {"True", "Mean", "Bias", "SD", "SE", "RMSE"}) out << pad(h, 10);
  out << '\n';
  for (const auto& row : r.rows) {
    out << detail::pad_right(row.name, 10);
    for (double v : {row.truth, row.mean, row.bias, row.sd, row.mean_se, row.rmse}) out << pad(fixed(v), 10);
    out << '\n';
  }
}

inline void write_text(std::ostream& out, const ComparisonReport& r) {
  using detail::fixed;
  using detail::pad;
  out << r.label << "  (N = " << r.N << ")\n";
  out << detail::pad_right("Generated", 14);
  for (const auto& c : r.candidates) out << pad(c + " AIC", 14) << pad(c + " BIC", 14);
  out << pad("PCI AIC", 10) << pad("PCI BIC", 10) << '\n';
  for (const auto& row : r.rows) {
    out << detail::pad_right(row.generator, 14);
    for (std::size_t c = 0; c < r.candidates.size(); ++c)
      out << pad(fixed(row.mean_aic[c], 2), 14) << pad(fixed(row.mean_bic[c], 2), 14);
    out << pad(fixed(row.pci_aic, 2), 10) << pad(fixed(row.pci_bic, 2), 10) << '\n';
  }
}

/// One-page summary: estimates and SEs for both stages, then fit statistics.
inline void write_text(std::ostream& out, const TwoStageFit& f) {
  using detail::fixed;
  using detail::pad;
  out << "Two-stage fit: " << to_string(f.marginal.kind) << " margins, " << model_name(f.factor.spec) << " copula";
  if (f.factor.nu) out << " (nu = " << *f.factor.nu << ")";
  out << "\n\n" << detail::pad_right("Parameter", 12) << pad("Estimate", 12) << pad("SE", 12) << '\n';
  const Eigen::VectorXd theta = marginal::pack(f.marginal.params, f.marginal.kind);
  std::vector<std::string> names = f.marginal.names;
  std::vector<double> est(theta.data(), theta.data() + theta.size());
  std::vector<double> se = f.godambe ? f.godambe->se : f.marginal.se;
  names.push_back("rho1");
  est.push_back(f.factor.rho1);
  if (f.factor.rho2) {
    names.push_back("rho2");
    est.push_back(*f.factor.rho2);
  }
  if (!f.godambe) se.insert(se.end(), f.factor.se.begin(), f.factor.se.end());
  for (std::size_t k = 0; k < names.size(); ++k)
    out << detail::pad_right(names[k], 12) << pad(fixed(est[k]), 12)
        << pad(fixed(k < se.size() ? se[k] : std::nan("")), 12) << '\n';
  out << '\n'
      << "SE type   " << (f.godambe ? "Godambe" : "naive (stage-wise)") << '\n'
      << "m         " << f.factor.m << '\n'
      << "dim       " << f.factor.dim << '\n'
      << "loglik    " << fixed(f.factor.loglik, 2) << '\n'
      << "AIC       " << fixed(f.factor.aic, 2) << '\n'
      << "BIC       " << fixed(f.factor.bic, 2) << '\n';
  for (const auto& w : f.marginal.warnings) out << "warning: " << w << '\n';
  for (const auto& w : f.factor.warnings) out << "warning: " << w << '\n';
}

inline void write_text(std::ostream& out, const MixedFit& f) {
  using detail::fixed;
  using detail::pad;
  out << model_name(f.spec) << " model, " << to_string(f.spec.kind) << " response\n\n"
      << detail::pad_right("Parameter", 12) << pad("Estimate", 12) << pad("SE", 12) << '\n';
  const Eigen::VectorXd theta = mixed::pack(f.params, f.spec);
  for (std::size_t k = 0; k < f.names.size(); ++k)
    out << detail::pad_right(f.names[k], 12) << pad(fixed(theta[static_cast<Eigen::Index>(k)]), 12)
        << pad(fixed(f.se[k]), 12) << '\n';
  out << '\n'
      << "m         " << f.m << '\n'
      << "dim       " << f.dim << '\n'
      << "loglik    " << fixed(f.loglik, 2) << '\n'
      << "AIC       " << fixed(f.aic, 2) << '\n'
      << "BIC       " << fixed(f.bic, 2) << '\n';
  for (const auto& w : f.warnings) out << "warning: " << w << '\n';
}

}  // namespace factorcop
