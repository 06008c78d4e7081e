#include <gtest/gtest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace {

namespace fs = std::filesystem;

const fs::path kRoot = fs::temp_directory_path() / "plvio_cli_test";

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

int count_lines(const fs::path& p) {
  std::ifstream in(p);
  std::string line;
  int n = 0;
  while (std::getline(in, line)) ++n;
  return n;
}

// Runs the CLI with stdout discarded and stderr captured; returns the exit code.
int run(const std::string& args, std::string* err = nullptr) {
  const fs::path err_file = kRoot / "stderr.txt";
  const std::string cmd = std::string(PLVIO_CLI_PATH) + " " + args + " > /dev/null 2> " + err_file.string();
  const int status = std::system(cmd.c_str());
  if (err) *err = slurp(err_file);
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

class Cli : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    fs::remove_all(kRoot);
    fs::create_directories(kRoot);
    std::ofstream(kRoot / "short.json") << R"({"sim": {"loops": 1, "loop_period": 6.0}, "seed": 3})";
  }
  const std::string config = "--config " + (kRoot / "short.json").string();
};

const char* kVariants[] = {"msckf", "iekf", "plv-msckf", "plv-iekf"};

TEST_F(Cli, SimulateWritesNonemptyFiles) {
  const fs::path out = kRoot / "sim_a";
  ASSERT_EQ(run("simulate " + config + " --out " + out.string()), 0);
  for (const char* v : kVariants) {
    for (const char* prefix : {"traj_", "nees_", "rmse_"}) {
      const fs::path f = out / (std::string(prefix) + v + ".csv");
      ASSERT_TRUE(fs::exists(f)) << f;
      EXPECT_GT(count_lines(f), 1) << f;
    }
  }
  EXPECT_EQ(count_lines(out / "summary.csv"), 5);
  EXPECT_TRUE(fs::exists(out / "plot.gp"));
}

TEST_F(Cli, SameSeedIsByteIdentical) {
  const fs::path a = kRoot / "seed_a", b = kRoot / "seed_b", c = kRoot / "seed_c";
  ASSERT_EQ(run("simulate " + config + " --seed 0 --variants plv-iekf --out " + a.string()), 0);
  ASSERT_EQ(run("simulate " + config + " --seed 0 --variants plv-iekf --out " + b.string()), 0);
  ASSERT_EQ(run("simulate " + config + " --seed 1 --variants plv-iekf --out " + c.string()), 0);
  for (const char* f : {"traj_plv-iekf.csv", "nees_plv-iekf.csv", "rmse_plv-iekf.csv", "summary.csv"}) {
    EXPECT_EQ(slurp(a / f), slurp(b / f)) << f;
  }
  EXPECT_NE(slurp(a / "traj_plv-iekf.csv"), slurp(c / "traj_plv-iekf.csv"));
}

TEST_F(Cli, MissingConfigExitsTwo) {
  std::string err;
  EXPECT_EQ(run("simulate --config " + (kRoot / "absent.json").string(), &err), 2);
  EXPECT_FALSE(err.empty());
  EXPECT_EQ(run("simulate " + config + " --variants ukf", &err), 2);
  EXPECT_EQ(run("frobnicate", &err), 2);
  std::ofstream(kRoot / "typo.json") << R"({"sim": {"loop": 1}})";
  EXPECT_EQ(run("simulate --config " + (kRoot / "typo.json").string(), &err), 2);
  EXPECT_NE(err.find("sim.loop"), std::string::npos) << err;
}

TEST_F(Cli, MonteCarloSingleRunMatchesSimulate) {
  const fs::path s = kRoot / "mc_sim", m = kRoot / "mc_one";
  ASSERT_EQ(run("simulate " + config + " --variants iekf,plv-iekf --out " + s.string()), 0);
  ASSERT_EQ(run("montecarlo " + config + " --runs 1 --variants iekf,plv-iekf --out " + m.string()), 0);
  for (const char* f : {"nees_iekf.csv", "rmse_iekf.csv", "nees_plv-iekf.csv", "rmse_plv-iekf.csv", "summary.csv"}) {
    EXPECT_EQ(slurp(s / f), slurp(m / f)) << f;
  }
  EXPECT_EQ(count_lines(m / "summary.csv"), 3);
}

TEST_F(Cli, ReplayOfDumpedBundle) {
  const fs::path s = kRoot / "dump", r = kRoot / "replay";
  ASSERT_EQ(run("simulate " + config + " --variants plv-iekf --dump-bundle --out " + s.string()), 0);
  const fs::path b = s / "bundle";
  const std::string files = " --imu " + (b / "imu.csv").string() + " --points " + (b / "points.csv").string() +
                            " --gt " + (b / "gt.csv").string() + " --init " + (b / "init.json").string();
  ASSERT_EQ(run("replay " + config + files + " --lines " + (b / "lines.csv").string() + " --out " + r.string()), 0);
  EXPECT_EQ(count_lines(r / "traj_plv-iekf.csv"), count_lines(s / "traj_plv-iekf.csv"));
  EXPECT_EQ(count_lines(r / "summary.csv"), 2);

  std::string err;
  ASSERT_EQ(run("replay " + config + files + " --out " + (kRoot / "replay_pts").string(), &err), 0);
  EXPECT_NE(err.find("points only"), std::string::npos) << err;
}

TEST_F(Cli, ObscheckReport) {
  const fs::path out = kRoot / "obs";
  ASSERT_EQ(run("obscheck " + config + " --out " + out.string()), 0);
  const std::string csv = slurp(out / "obscheck.csv");
  EXPECT_EQ(csv.rfind("direction,residual,relation,threshold,pass\n", 0), 0u);
  EXPECT_NE(csv.find("sigma_min"), std::string::npos) << csv;
}

}  // namespace
