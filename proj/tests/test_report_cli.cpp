#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "factorcop/cli.hpp"
#include "fixtures.hpp"

using namespace factorcop;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("factorcop_test_" + name);
  fs::remove_all(p);
  return p;
}

std::string slurp(const fs::path& p) {
  std::ifstream f(p);
  std::stringstream ss;
  ss << f.rdbuf();
  return ss.str();
}

}  // namespace

TEST(Report, FactorFitJson) {
  FactorFit f;
  f.spec.n_factors = 2;
  f.rho1 = 0.4;
  f.rho2 = 0.3;
  f.se = {0.05, std::nan("")};
  f.loglik = -10.0;
  f.dim = 3;
  f.aic = 26.0;
  f.bic = std::numeric_limits<double>::infinity();
  f.quad_n = 15;
  f.warnings = {"Godambe matrix singular"};
  const Json j = to_json(f);
  EXPECT_EQ(j["spec"]["n_factors"], 2);
  EXPECT_EQ(j["spec"]["family"], "gaussian");
  EXPECT_DOUBLE_EQ(j["rho1"].get<double>(), 0.4);
  EXPECT_DOUBLE_EQ(j["rho2"].get<double>(), 0.3);
  EXPECT_FALSE(j.contains("nu"));
  EXPECT_DOUBLE_EQ(j["se"][0].get<double>(), 0.05);
  EXPECT_TRUE(j["se"][1].is_null());
  EXPECT_TRUE(j["bic"].is_null());
  EXPECT_EQ(j["dim"], 3);
  EXPECT_EQ(j["quad"]["n"], 15);
  EXPECT_EQ(j["warnings"][0], "Godambe matrix singular");
  // Round trip through text stays valid JSON.
  EXPECT_EQ(Json::parse(j.dump()), j);
}

TEST(Report, McReportTables) {
  McReport r;
  r.label = "gamma-1f-gauss";
  r.N = 3;
  r.n_ok = 2;
  r.n_failed = 1;
  r.rows = {McRow{"rho1", 0.5, 0.49, -0.01, 0.02, std::nan(""), 0.0223606797749979}};
  std::ostringstream csv, txt;
  write_csv(csv, r);
  write_text(txt, r);
  EXPECT_EQ(csv.str(), "parameter,true,mean,bias,sd,se,rmse\nrho1,0.5,0.48999999999999999,-0.01,0.02,NA,"
                       "0.022360679774997901\n");
  EXPECT_NE(txt.str().find("(N = 3, converged 2, failed 1)"), std::string::npos);
  EXPECT_NE(txt.str().find("    0.4900"), std::string::npos);
  EXPECT_NE(txt.str().find("NA"), std::string::npos);
  const Json j = to_json(r);
  EXPECT_EQ(j["n_failed"], 1);
}

TEST(Report, ParseNuGrid) {
  EXPECT_EQ(parse_nu_grid(""), std::vector<int>{});
  EXPECT_EQ(parse_nu_grid("3:6"), (std::vector<int>{3, 4, 5, 6}));
  EXPECT_EQ(parse_nu_grid("3:9:3"), (std::vector<int>{3, 6, 9}));
  EXPECT_EQ(parse_nu_grid("4,8,20"), (std::vector<int>{4, 8, 20}));
  for (const char* bad : {"1:4", "4:3", "a", "3:5:0", "4,x", "1:2:3:4"}) EXPECT_THROW(parse_nu_grid(bad), DomainError);
}

TEST(Cli, ExitCodes) {
  RunConfig c;
  c.command = "fit";
  c.data_path = "/nonexistent/data.csv";
  EXPECT_EQ(run(c), 2);

  RunConfig mc;
  mc.command = "mc-study";
  mc.preset = "gamma-1f-gauss";
  mc.N = 1;
  EXPECT_EQ(run(mc), 1);

  RunConfig t;
  t.command = "fit";
  t.data_path = "/nonexistent/data.csv";
  t.nu_grid = "3:6";
  EXPECT_EQ(run(t), 1);

  RunConfig u;
  u.command = "bootstrap";
  EXPECT_EQ(run(u), 1);
}

TEST(Cli, ConvergenceFailureExitsThree) {
  // Category 2 of 3 never appears, so its threshold is not identified.
  const fs::path dir = scratch("conv");
  fs::create_directories(dir);
  std::ofstream(dir / "d.csv") << "id,time,y,x\n1,1,1,0.5\n1,2,3,0.1\n2,1,1,0.2\n2,2,3,0.9\n3,1,3,0.4\n";
  RunConfig c;
  c.command = "fit";
  c.response = "ordinal";
  c.K = 3;
  c.data_path = (dir / "d.csv").string();
  EXPECT_EQ(run(c), 3);
}

TEST(Cli, SimulateThenFitWritesManifest) {
  const fs::path dir = scratch("sim");
  RunConfig s;
  s.command = "simulate";
  s.preset = "normal-1f-gauss";
  s.m = 60;
  s.seed = 4;
  s.out = dir.string();
  ASSERT_EQ(run(s), 0);
  ASSERT_TRUE(fs::exists(dir / "data.csv"));
  const Json man = Json::parse(slurp(dir / "manifest.json"));
  EXPECT_EQ(man["config"]["preset"], "normal-1f-gauss");
  EXPECT_EQ(man["outputs"][0], "data.csv");

  RunConfig f;
  f.command = "fit";
  f.data_path = (dir / "data.csv").string();
  f.schema.covariates = {"x1", "x2", "t"};
  f.format = "json";
  std::ostringstream out;
  ASSERT_EQ(run(f, out), 0);
  const Json fit = Json::parse(out.str());
  EXPECT_EQ(fit["factor"]["dim"], 6);
  EXPECT_EQ(fit["factor"]["se_type"], "godambe");
  EXPECT_GT(fit["factor"]["rho1"].get<double>(), 0.2);
  EXPECT_EQ(fit["godambe"]["names"].size(), 6u);
}

TEST(Cli, SimulatedCsvRoundTrips) {
  const fs::path dir = scratch("rt");
  RunConfig s;
  s.command = "simulate";
  s.preset = "ordinal-1f-t";
  s.m = 30;
  s.out = dir.string();
  ASSERT_EQ(run(s), 0);
  CsvSchema schema;
  schema.covariates = {"x1", "x2", "t"};
  const auto back = load_csv((dir / "data.csv").string(), ResponseKind::ordinal(4), schema);
  const auto pre = make_preset("ordinal-1f-t");
  SimDesign d;
  d.m = 30;
  EXPECT_EQ(back, generate_dataset(d, pre.kind, pre.marginal, pre.copula));
}
