#include <iostream>
#include <string>
#include <vector>

#include "CLI11.hpp"

#include "factorcop/cli.hpp"

namespace {

void add_model_flags(CLI::App* app, factorcop::RunConfig& c) {
  app->add_option("--response", c.response, "response family")
      ->check(CLI::IsMember({"gamma", "normal", "binary", "ordinal"}));
  app->add_option("--K", c.K, "number of ordinal categories");
  app->add_option("--factors", c.factors, "number of latent factors")->check(CLI::IsMember({1, 2}));
  app->add_option("--copula", c.copula, "linking copula family")->check(CLI::IsMember({"gaussian", "t"}));
  app->add_option("--nu-grid", c.nu_grid, "Student-t degrees of freedom to profile, a:b[:step] or a,b,c");
  app->add_option("--quad", c.quad, "quadrature rule")->check(CLI::IsMember({"legendre", "hermite-probit"}));
  app->add_option("--quad-n", c.quad_n, "quadrature nodes per latent variable");
  app->add_option("--model", c.model, "factor copula or random-effects baseline")
      ->check(CLI::IsMember({"factor", "ri", "ris"}));
  app->add_option("--slope-scale", c.slope_scale, "RIS design d_ij = (1, scale * t_ij)");
}

void add_sim_flags(CLI::App* app, factorcop::RunConfig& c) {
  app->add_option("--preset", c.preset, "simulation preset, e.g. gamma-1f-gauss");
  app->add_option("--m", c.m, "subjects per dataset");
  app->add_option("--d", c.d, "maximum visits per subject");
  app->add_option("--prune-p", c.prune_p, "visit retention probability");
  app->add_option("--seed", c.seed, "base seed");
  app->add_option("--jobs", c.jobs, "worker threads");
}

void add_output_flags(CLI::App* app, factorcop::RunConfig& c) {
  app->add_option("--out", c.out, "output directory (stdout when omitted)");
  app->add_option("--format", c.format, "stdout format")->check(CLI::IsMember({"json", "csv", "text"}));
}

}  // namespace

int main(int argc, char** argv) {
  factorcop::RunConfig c;
  c.argv.assign(argv, argv + argc);

  CLI::App app{"Factor copula models for unbalanced longitudinal data"};
  app.set_version_flag("--version", factorcop::kVersion);
  app.require_subcommand(1);

  auto* fit = app.add_subcommand("fit", "two-stage fit of a factor copula (or random-effects) model");
  fit->add_option("--data", c.data_path, "long-format CSV")->required();
  fit->add_option("--col-id", c.schema.id, "subject id column");
  fit->add_option("--col-time", c.schema.time, "time column");
  fit->add_option("--col-y", c.schema.y, "response column");
  fit->add_option("--col-cov", c.schema.covariates, "covariate columns (default: all others)")->delimiter(',');
  fit->add_option("--recode", c.schema.recode, "added to discrete response codes");
  fit->add_option("--time-scale", c.schema.time_scale, "multiplies the time column");
  fit->add_flag("!--no-godambe", c.godambe, "skip Godambe standard errors");
  add_model_flags(fit, c);
  add_output_flags(fit, c);

  auto* sim = app.add_subcommand("simulate", "write one simulated dataset as CSV");
  add_sim_flags(sim, c);
  add_model_flags(sim, c);
  add_output_flags(sim, c);

  auto* mc = app.add_subcommand("mc-study", "Monte Carlo estimation study for a preset");
  add_sim_flags(mc, c);
  mc->add_option("--N", c.N, "replications (default 500)");
  add_model_flags(mc, c);
  add_output_flags(mc, c);

  auto* cmp = app.add_subcommand("compare", "AIC/BIC model-comparison study (PCI)");
  add_sim_flags(cmp, c);
  cmp->add_option("--N", c.N, "replications (default 100)");
  add_model_flags(cmp, c);
  add_output_flags(cmp, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  for (auto* sub : {fit, sim, mc, cmp})
    if (sub->parsed()) c.command = sub->get_name();
  return factorcop::run(c);
}
