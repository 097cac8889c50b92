#pragma once

#include <string>
#include <vector>

#include "factorcop/dataset.hpp"
#include "factorcop/simulator.hpp"

namespace fixture {

/// Dataset with one row of covariates shared by all observations of a subject.
/// `ys[i]` lists subject i's responses at times 1, 2, ...
inline factorcop::LongitudinalDataset make_dataset(factorcop::ResponseKind kind,
                                                   const std::vector<std::vector<double>>& ys,
                                                   const std::vector<std::vector<double>>& xs = {},
                                                   std::vector<std::string> names = {}) {
  factorcop::LongitudinalDataset d;
  d.kind = kind;
  if (kind.has_intercept()) d.covariate_names.push_back("(Intercept)");
  for (auto& n : names) d.covariate_names.push_back(n);
  for (std::size_t i = 0; i < ys.size(); ++i) {
    factorcop::Subject s;
    s.id = std::to_string(i + 1);
    for (std::size_t j = 0; j < ys[i].size(); ++j) {
      factorcop::Observation o;
      o.time = static_cast<double>(j + 1);
      o.y = ys[i][j];
      if (kind.has_intercept()) o.covariates.push_back(1.0);
      if (!xs.empty()) o.covariates.insert(o.covariates.end(), xs[i].begin(), xs[i].end());
      s.observations.push_back(o);
    }
    d.subjects.push_back(s);
  }
  d.validate();
  return d;
}

inline factorcop::LongitudinalDataset preset_data(const std::string& preset, int m, std::uint64_t seed = 1) {
  const auto p = factorcop::make_preset(preset);
  factorcop::SimDesign design;
  design.m = m;
  design.seed = seed;
  return factorcop::generate_dataset(design, p.kind, p.marginal, p.copula);
}

}  // namespace fixture
