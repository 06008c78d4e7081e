#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <vector>

#include "plvio/propagation.hpp"
#include "plvio/triangulation.hpp"
#include "plvio/update.hpp"

namespace plvio {

// The four filters compared in simulation: error model x feature set.
enum class Variant { Msckf, Iekf, PlvMsckf, PlvIekf };

std::string to_string(Variant v);
// Accepts msckf, iekf, plv-msckf, plv-iekf (case-insensitive). Throws ConfigError.
Variant parse_variant(const std::string& name);
ErrorModel error_model(Variant v);
bool uses_lines(Variant v);

struct EstimatorConfig {
  ErrorModel model = ErrorModel::RightInvariant;
  bool use_lines = true;
  bool use_vp = true;
  NoiseParams noise;
  UpdateConfig update;
  GnSettings gn;
  std::size_t window_size = kDefaultWindowSize;
  Pose extrinsics;  // camera in IMU
  Vec3 gravity = kGravity;
  bool gate = true;
  bool compress = true;
  LineError line_mode = LineError::Global;
};

EstimatorConfig make_estimator_config(Variant v);

struct LineMeasurement {
  std::int64_t id = 0;
  Vec3 p_s = Vec3::UnitZ();
  Vec3 p_e = Vec3::UnitZ();
  std::optional<Vec2> vp;
};

struct PointMeasurement {
  std::int64_t id = 0;
  Vec2 z = Vec2::Zero();
};

struct FrameMeasurements {
  double t = 0.0;
  std::int64_t frame_id = 0;
  std::vector<PointMeasurement> points;
  std::vector<LineMeasurement> lines;
};

struct EstimatorCounters {
  long points_used = 0;
  long lines_used = 0;
  long vp_rows = 0;
  long points_rejected = 0;  // failed triangulation, degenerate, or gated out
  long lines_rejected = 0;
  long updates = 0;
  long skipped_updates = 0;  // innovation covariance not invertible
};

// Sliding-window filter: IMU propagation, stochastic cloning, and one joint
// point/line/VP update per frame.
class Estimator {
 public:
  // `first` is the IMU sample at the initial state's time.
  Estimator(EstimatorConfig config, Belief initial, const ImuSample& first);

  // Buffers a sample. Throws TimeOrderError unless strictly after the last one.
  void feed_imu(const ImuSample& sample);
  // Propagates to the frame time, then clones, tracks, and updates.
  void feed_frame(const FrameMeasurements& frame);

  const Belief& belief() const { return belief_; }
  const EstimatorCounters& counters() const { return counters_; }
  const EstimatorConfig& config() const { return config_; }

 private:
  void propagate_to(double t);
  void update(MatureFeatures& mature);
  std::optional<StackedSystem> point_system(PointTrack& track);
  std::optional<StackedSystem> line_system(LineTrack& track);

  EstimatorConfig config_;
  Belief belief_;
  ImuSample last_;
  std::deque<ImuSample> buffer_;
  FeatureDatabase db_;
  EstimatorCounters counters_;
  std::optional<std::int64_t> last_frame_;
};

}  // namespace plvio
