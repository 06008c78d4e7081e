#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>

#include "plvio/error.hpp"
#include "plvio/replay.hpp"

namespace plvio {
namespace {

namespace fs = std::filesystem;

SimConfig short_config() {
  SimConfig cfg;
  cfg.loops = 1;
  cfg.loop_period = 6.0;
  return cfg;
}

fs::path scratch(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("plvio_replay_" + name);
  fs::remove_all(dir);
  return dir;
}

double max_state_gap(const RunResult& a, const RunResult& b) {
  double gap = 0.0;
  for (std::size_t k = 0; k < a.steps.size(); ++k) {
    const auto& x = a.steps[k].estimate;
    const auto& y = b.steps[k].estimate;
    gap = std::max({gap, (x.R - y.R).cwiseAbs().maxCoeff(), (x.v - y.v).cwiseAbs().maxCoeff(),
                    (x.p - y.p).cwiseAbs().maxCoeff(), (x.bg - y.bg).cwiseAbs().maxCoeff(),
                    (x.ba - y.ba).cwiseAbs().maxCoeff()});
  }
  return gap;
}

TEST(Replay, DumpedBundleReproducesSimulation) {
  const SimConfig cfg = short_config();
  const SimData data = generate_data(cfg, 11);
  const BundlePaths paths = write_bundle(data, cfg, scratch("roundtrip").string());
  const ReplayBundle bundle = read_bundle(paths);
  ASSERT_TRUE(bundle.init.has_value());
  EXPECT_TRUE(bundle.has_lines);
  EXPECT_EQ(bundle.frames.size(), data.frames.size());
  for (Variant v : {Variant::Msckf, Variant::PlvIekf}) {
    const RunResult sim = run_filter(cfg, data, v);
    const RunResult rep = run_replay(bundle, estimator_config(cfg, v), v, initial_covariance(cfg));
    ASSERT_FALSE(sim.aborted) << sim.diagnostic;
    ASSERT_FALSE(rep.aborted) << rep.diagnostic;
    ASSERT_EQ(sim.steps.size(), rep.steps.size());
    EXPECT_LT(max_state_gap(sim, rep), 1e-9) << to_string(v);
    for (std::size_t k = 0; k < sim.steps.size(); ++k) {
      EXPECT_LT((sim.steps[k].truth.p - rep.steps[k].truth.p).norm(), 1e-9);
    }
  }
}

TEST(Replay, PointsOnlyBundleRunsLineVariant) {
  const SimConfig cfg = short_config();
  const SimData data = generate_data(cfg, 12);
  BundlePaths paths = write_bundle(data, cfg, scratch("points_only").string());
  paths.lines.clear();
  const ReplayBundle bundle = read_bundle(paths);
  EXPECT_FALSE(bundle.has_lines);
  const RunResult rep =
      run_replay(bundle, estimator_config(cfg, Variant::PlvIekf), Variant::PlvIekf, initial_covariance(cfg));
  ASSERT_FALSE(rep.aborted) << rep.diagnostic;
  EXPECT_EQ(rep.counters.lines_used, 0);
  EXPECT_GT(rep.counters.points_used, 0);
  // Same as the point-only filter in the same chart.
  const RunResult iekf =
      run_replay(bundle, estimator_config(cfg, Variant::Iekf), Variant::Iekf, initial_covariance(cfg));
  EXPECT_LT(max_state_gap(rep, iekf), 1e-12);
}

void expect_error(const BundlePaths& paths, ErrorKind kind, const std::string& where) {
  try {
    read_bundle(paths);
    FAIL() << "no error";
  } catch (const Error& e) {
    EXPECT_EQ(e.kind(), kind) << e.what();
    EXPECT_NE(std::string(e.what()).find(where), std::string::npos) << e.what();
  }
}

TEST(Replay, UnsortedTimestampsNameFileAndLine) {
  const fs::path dir = scratch("unsorted");
  fs::create_directories(dir);
  const std::string imu = (dir / "imu.csv").string(), pts = (dir / "points.csv").string();
  std::ofstream(imu) << "t,wx,wy,wz,ax,ay,az\n0,0,0,0,0,0,9.81\n0.02,0,0,0,0,0,9.81\n0.01,0,0,0,0,0,9.81\n";
  std::ofstream(pts) << "t,frame_id,feature_id,u,v\n";
  expect_error({imu, pts, "", "", ""}, ErrorKind::TimeOrderError, imu + ":4");
}

TEST(Replay, MalformedRowNamesFileAndLine) {
  const fs::path dir = scratch("malformed");
  fs::create_directories(dir);
  const std::string imu = (dir / "imu.csv").string(), pts = (dir / "points.csv").string();
  std::ofstream(imu) << "t,wx,wy,wz,ax,ay,az\n0,0,0,0,0,0,9.81\n0.01,0,0,0,0,0,9.81\n";
  std::ofstream(pts) << "t,frame_id,feature_id,u,v\n0,0,1,0.1,0.2\n0,0,2,abc,0.2\n";
  expect_error({imu, pts, "", "", ""}, ErrorKind::ParseError, pts + ":3");
  std::ofstream(pts) << "t,frame_id,feature_id,u,v\n0,0,1,0.1\n";
  expect_error({imu, pts, "", "", ""}, ErrorKind::ParseError, pts + ":2");
}

}  // namespace
}  // namespace plvio
