// End-to-end runs of the command-line tool.

#include <gtest/gtest.h>
#include <sys/wait.h>

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

namespace fs = std::filesystem;

namespace {

struct CliRun {
  int code = -1;
  std::string out;
};

CliRun run(const std::string& args, const std::string& env = "") {
  const std::string cmd = env + (env.empty() ? "" : " ") + "'" NICHOLSON_CLI_PATH "' " + args + " 2>&1";
  CliRun r;
  FILE* p = popen(cmd.c_str(), "r");
  if (p == nullptr) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, p)) > 0) r.out.append(buf, n);
  const int status = pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string model(const char* name) { return std::string("'" NICHOLSON_MODELS_DIR "/") + name + "'"; }

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("nicholson_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  std::string path(const std::string& name) const { return "'" + (dir_ / name).string() + "'"; }
  fs::path dir_;
};

}  // namespace

TEST_F(Cli, CheckReferenceModelPasses) {
  const CliRun r = run("check " + model("paper.model"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("all conditions hold"), std::string::npos);
}

TEST_F(Cli, CheckNamesFailedBirthRate) {
  const CliRun r = run("check " + model("beta1_zero.model"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAILED: a4"), std::string::npos) << r.out;
}

TEST_F(Cli, CheckNamesInvariantZone) {
  const CliRun r = run("check " + model("inflated_beta.model"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAILED: zona-inv patch 1"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("margin -"), std::string::npos) << r.out;
}

TEST_F(Cli, CheckSamplingMode) {
  const CliRun r = run("check " + model("paper.model") + " --mode sampling --t-check 200");
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_NE(r.out.find("non-rigorous"), std::string::npos);
}

TEST_F(Cli, UsageAndParseErrors) {
  EXPECT_EQ(run("check " + model("malformed.model")).code, 2);
  EXPECT_EQ(run("check " + model("missing.model")).code, 2);
  EXPECT_EQ(run("check " + model("paper.model") + " --bogus").code, 2);
  EXPECT_EQ(run("frobnicate").code, 2);
  EXPECT_EQ(run("").code, 2);
  EXPECT_EQ(run("simulate " + model("paper.model")).code, 2);  // --t-end missing
  EXPECT_EQ(run("simulate " + model("paper.model") + " --t-end 1 --h 5").code, 2);
  EXPECT_EQ(run("study " + model("paper.model") + " --axis gamma --values 1 --n 1").code, 2);
}

TEST_F(Cli, ConfigOverride) {
  std::ofstream(dir_ / "override.cfg") << "beta_scale = 0, 1\n";
  const CliRun r = run("check " + model("paper.model") + " --config " + path("override.cfg"));
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.out.find("FAILED: a4"), std::string::npos);
}

TEST_F(Cli, SimulateHeaderOnly) {
  const CliRun r = run("simulate " + model("paper.model") + " --t-end 0 --out " + path("t.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(slurp(dir_ / "t.csv"), "t,y1,y2\n");
}

TEST_F(Cli, SimulateLinearizedIsBounded) {
  const CliRun r = run("simulate " + model("paper.model") +
                    " --linearized --method gl2 --t-start -20 --t-end 6.2832 --out " + path("lin.csv"));
  EXPECT_EQ(r.code, 0) << r.out;
  EXPECT_EQ(r.out.find("WARNING"), std::string::npos) << r.out;
  std::ifstream in(dir_ / "lin.csv");
  std::string line;
  std::getline(in, line);
  EXPECT_EQ(line, "t,y1,y2");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  EXPECT_EQ(rows, 2629);
  EXPECT_TRUE(fs::exists(dir_ / "lin.csv.manifest.json"));
  EXPECT_NE(r.out.find("sign flips: 0\n"), std::string::npos) << r.out;
}

TEST_F(Cli, SimulateStiffExplicitIsFlagged) {
  const CliRun rk = run("simulate " + model("stiff_scalar.model") + " --method rk23 --t-end 0.1 --out " + path("rk.csv"));
  EXPECT_NE(rk.out.find("WARNING: growing amplitude"), std::string::npos) << rk.out;
  const CliRun gl = run("simulate " + model("stiff_scalar.model") + " --method gl2 --t-end 0.1 --out " + path("gl.csv"));
  EXPECT_EQ(gl.code, 0);
  EXPECT_EQ(gl.out.find("WARNING"), std::string::npos) << gl.out;
}

TEST_F(Cli, SimulateToStdout) {
  const CliRun r = run("simulate " + model("paper.model") + " --t-end 0.02");
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("t,y1,y2\n0,1,1\n"), std::string::npos) << r.out;
}

TEST_F(Cli, PersistenceVerdicts) {
  const CliRun none = run("persistence " + model("beta_zero.model") + " --horizon 6000");
  EXPECT_EQ(none.code, 1);
  EXPECT_NE(none.out.find("verdict: not persistent"), std::string::npos) << none.out;

  const CliRun scalar = run("persistence " + model("scalar_constant.model") + " --out " + path("p.csv"));
  EXPECT_EQ(scalar.code, 1);
  const std::string csv = slurp(dir_ / "p.csv");
  // block,indices,lambda,converged
  const std::string row = csv.substr(csv.find('\n') + 1);
  const auto c1 = row.find(',');
  const auto c2 = row.find(',', c1 + 1);
  const auto c3 = row.find(',', c2 + 1);
  EXPECT_NEAR(std::stod(row.substr(c2 + 1, c3 - c2 - 1)), -0.314923057845406, 1e-3) << csv;

  const CliRun eq = run("persistence " + model("equilibrium.model"));
  EXPECT_EQ(eq.code, 0) << eq.out;
  EXPECT_NE(eq.out.find("verdict: uniformly persistent at 0"), std::string::npos);
}

TEST_F(Cli, MeshSingleNode) {
  const CliRun r = run("mesh " + model("paper.model") + " --n 1 --jobs 1 --out-dir " + path("m"));
  EXPECT_EQ(r.code, 0) << r.out;
  const std::string csv = slurp(dir_ / "m" / "mesh.csv");
  EXPECT_EQ(std::count(csv.begin(), csv.end(), '\n'), 2);
  EXPECT_TRUE(fs::exists(dir_ / "m" / "mesh_y1.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "m" / "mesh_y2.svg"));
  EXPECT_TRUE(fs::exists(dir_ / "m" / "manifest.json"));
}

TEST_F(Cli, ManifestReproducesOutputs) {
  const CliRun first = run("mesh " + model("paper.model") + " --n 2 --out-dir " + path("a"), "NICHOLSON_JOBS=2");
  ASSERT_EQ(first.code, 0) << first.out;
  const std::string original = slurp(dir_ / "a" / "mesh.csv");
  const auto man = nlohmann::json::parse(slurp(dir_ / "a" / "manifest.json"));
  EXPECT_EQ(man["command"], "mesh");
  EXPECT_EQ(man["jobs"], 2);
  EXPECT_EQ(man["outputs"].size(), 3u);
  EXPECT_TRUE(man.contains("wall_clock_seconds"));
  EXPECT_NE(man["resolved_model"].get<std::string>().find("mu = 1"), std::string::npos);
  std::string args;
  for (const auto& a : man["argv"]) args += " '" + a.get<std::string>() + "'";
  fs::remove_all(dir_ / "a");
  ASSERT_EQ(run(args).code, 0);
  EXPECT_EQ(slurp(dir_ / "a" / "mesh.csv"), original);
}

TEST_F(Cli, StudyWritesMeshesAndReport) {
  const CliRun r = run("study " + model("paper.model") + " --axis mortality --values 0.7,0.85,1 --n 2 --no-svg --out-dir " +
                    path("s"));
  EXPECT_EQ(r.code, 0) << r.out;
  for (int k = 0; k < 3; ++k) EXPECT_TRUE(fs::exists(dir_ / "s" / ("study_" + std::to_string(k) + ".csv")));
  EXPECT_NE(slurp(dir_ / "s" / "monotonicity.txt").find("verdict: uniformly ordered"), std::string::npos);
}
