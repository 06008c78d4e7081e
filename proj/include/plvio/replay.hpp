#pragma once

#include <optional>
#include <string>
#include <vector>

#include "plvio/simulator.hpp"

namespace plvio {

struct GroundTruthSample {
  double t = 0.0;
  Vec3 p = Vec3::Zero();
  Eigen::Quaterniond q = Eigen::Quaterniond::Identity();  // IMU to world
};

// Initial estimate description: the estimate is perturb_imu(state, error, model) so
// each error model starts from the same sampled error in its own chart.
struct ReplayInit {
  ImuState state;
  VecX error = VecX::Zero(kImuDim);
  VecX cov_diag = VecX::Zero(kImuDim);
};

struct ReplayBundle {
  std::vector<ImuSample> imu;
  std::vector<FrameMeasurements> frames;  // ordered by frame id
  std::vector<GroundTruthSample> ground_truth;
  std::optional<ReplayInit> init;
  bool has_lines = false;
};

struct BundlePaths {
  std::string imu;
  std::string points;
  std::string lines;         // optional
  std::string ground_truth;  // optional
  std::string init;          // optional JSON
};

// CSV files with a one-line header. Malformed rows throw ParseError and unsorted
// timestamps throw TimeOrderError, both naming "file:line".
ReplayBundle read_bundle(const BundlePaths& paths);

// Writes imu.csv, points.csv, lines.csv, gt.csv and init.json into `dir`.
BundlePaths write_bundle(const SimData& data, const SimConfig& cfg, const std::string& dir);

// Runs one filter over a bundle. Without `init` the filter starts at the first
// ground-truth pose (or at rest at the origin) with covariance `P0`.
RunResult run_replay(const ReplayBundle& bundle, const EstimatorConfig& config, Variant variant, const MatX& P0);

}  // namespace plvio
