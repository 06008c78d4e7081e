#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "plvio/estimator.hpp"

namespace plvio {

struct SimConfig {
  // Trajectory: constant-speed counter-clockwise circle about the origin at z = 0.
  double radius = 6.0;
  int loops = 10;
  double loop_period = 12.0;  // s
  int imu_rate = 100;         // Hz
  int cam_rate = 10;          // Hz; must divide imu_rate

  // World
  int n_points = 200;
  int n_lines = 140;
  double inner_radius = 5.0;
  double outer_radius = 7.0;
  double wall_side = 14.0;
  double wall_half_height = 2.0;
  double min_line_height = 0.5;  // horizontal lines keep |z| above this
  double visibility_range = 20.0;

  // Camera
  double pixel_sigma = 1.0;
  double vp_pixel_sigma = 1.0;
  double focal_length = 460.0;
  double half_width = 1.0;    // normalized image half extents (90 deg horizontal FOV)
  double half_height = 0.75;
  double near_clip = 0.1;
  double min_segment = 0.05;  // minimum clipped image segment length, normalized
  double vp_max_coord = 10.0;
  Pose extrinsics{(Mat3() << 1, 0, 0, 0, 0, 1, 0, -1, 0).finished(), Vec3(0.05, 0.02, 0.01)};

  NoiseParams noise;
  std::size_t window_size = kDefaultWindowSize;
  int min_track = 5;

  // Initial estimate error (1-sigma); the filter starts with the matching covariance.
  double init_sigma_theta = 0.005;
  double init_sigma_v = 0.05;
  double init_sigma_p = 0.02;
  double init_sigma_bg = 0.002;
  double init_sigma_ba = 0.02;

  // Scales applied to the generated data only; the filters keep nominal models.
  double noise_scale = 1.0;
  double init_error_scale = 1.0;

  // Filter tuning shared by all variants.
  double chi2_confidence = 0.95;
  int max_features = 0;
  GnSettings gn;

  int runs = 30;
  std::uint64_t seed = 1;

  double duration() const { return loops * loop_period; }
  void validate() const;  // throws ConfigError
};

struct TrajectorySample {
  ImuState state;  // biases zero
  Vec3 omega;      // body angular rate
  Vec3 accel;      // body specific force
};

TrajectorySample analytic_trajectory(const SimConfig& cfg, double t);

struct SimPoint {
  std::int64_t id = 0;
  Vec3 p = Vec3::Zero();
};

struct SimLine {
  std::int64_t id = 0;
  Vec3 a = Vec3::Zero();  // segment endpoints, world
  Vec3 b = Vec3::Zero();
  bool horizontal = false;

  PluckerLine plucker() const;
  Vec3 direction() const { return (b - a).normalized(); }
};

struct World {
  std::vector<SimPoint> points;
  std::vector<SimLine> lines;
};

World generate_landmarks(const SimConfig& cfg, std::mt19937_64& rng);

struct ImuStream {
  std::vector<ImuSample> samples;
  std::vector<ImuState> truth;  // true state (with biases) at each sample time
};

ImuStream simulate_imu(const SimConfig& cfg, std::mt19937_64& rng);

FrameMeasurements simulate_camera_frame(const SimConfig& cfg, const ImuState& truth, double t,
                                        std::int64_t frame_id, const World& world, std::mt19937_64& rng);

// Everything a run consumes: shared by all variants for a seed.
struct SimData {
  World world;
  ImuStream imu;
  std::vector<std::size_t> frame_samples;  // IMU index of each frame
  std::vector<FrameMeasurements> frames;
  VecX init_error;  // 15-vector, initial truth-minus-estimate in each filter's chart
  MatX init_cov;    // filter prior for init_error
};

SimData generate_data(const SimConfig& cfg, std::uint64_t seed);

// Initial estimate whose error_between(truth, estimate, model) equals `error`.
ImuState perturb_imu(const ImuState& truth, const VecX& error, ErrorModel model);
MatX initial_covariance(const SimConfig& cfg);

struct RunStep {
  double t = 0.0;
  ImuState truth;
  ImuState estimate;
  MatX cov;  // 15 x 15 IMU block
};

struct RunResult {
  Variant variant = Variant::PlvIekf;
  std::vector<RunStep> steps;  // one per frame
  EstimatorCounters counters;
  bool aborted = false;
  std::string diagnostic;
};

inline constexpr double kDivergenceLimit = 50.0;

RunResult run_filter(const SimConfig& cfg, const SimData& data, Variant variant);
RunResult run_filter(const EstimatorConfig& ec, const SimData& data, Variant variant);
RunResult run_simulation(const SimConfig& cfg, Variant variant, std::uint64_t seed);

EstimatorConfig estimator_config(const SimConfig& cfg, Variant variant);

}  // namespace plvio
