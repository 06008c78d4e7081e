#pragma once

#include <cstdint>
#include <vector>

#include "plvio/geometry.hpp"

namespace plvio {

enum class ErrorModel { StandardAdditive, RightInvariant };

// Error-state layout: [theta v p bg ba | per clone (theta p)].
inline constexpr int kImuDim = 15;
inline constexpr int kCloneDim = 6;
namespace idx {
inline constexpr int kTheta = 0;
inline constexpr int kVel = 3;
inline constexpr int kPos = 6;
inline constexpr int kBg = 9;
inline constexpr int kBa = 12;
}  // namespace idx

inline constexpr std::size_t kDefaultWindowSize = 20;

struct ImuState {
  Mat3 R = Mat3::Identity();  // IMU to world
  Vec3 v = Vec3::Zero();
  Vec3 p = Vec3::Zero();
  Vec3 bg = Vec3::Zero();
  Vec3 ba = Vec3::Zero();
};

struct CameraClone {
  Mat3 R = Mat3::Identity();  // camera to world
  Vec3 p = Vec3::Zero();
  std::int64_t frame_id = 0;

  Pose pose() const { return {R, p}; }
};

struct VioState {
  double time = 0.0;
  ImuState imu;
  std::vector<CameraClone> clones;  // oldest first
  Pose extrinsics;                  // camera pose in the IMU frame
  std::size_t window_size = kDefaultWindowSize;

  int dim() const { return kImuDim + kCloneDim * static_cast<int>(clones.size()); }
  // Index of the clone with this frame id, or -1.
  int clone_index(std::int64_t frame_id) const;
  Pose camera_pose() const;
};

// Mean and joint covariance; the covariance is always dim() x dim().
struct Belief {
  VioState state;
  MatX cov;
};

inline int clone_offset(int clone_index) { return kImuDim + kCloneDim * clone_index; }

void symmetrize(MatX& P);

// Appends the current camera pose as a clone and augments the covariance with the
// cloning Jacobian of the error model. Throws WindowOverflow when the window is full.
Belief clone_camera(const Belief& belief, ErrorModel model, std::int64_t frame_id);

// Drops the oldest clone and its rows/columns. Throws EmptyWindow.
Belief marginalize_oldest(const Belief& belief);

// Manifold retraction x = x_hat (+) delta.
VioState apply_correction(const VioState& state, const VecX& delta, ErrorModel model);

// Inverse retraction: apply_correction(est, error_between(truth, est)) == truth.
VecX error_between(const VioState& truth, const VioState& estimate, ErrorModel model);

// Pose-only helpers shared with evaluation and the measurement tests.
struct PoseError {
  Vec3 theta;
  Vec3 pos;
};
PoseError pose_error(const Mat3& R_true, const Vec3& p_true, const Mat3& R_est, const Vec3& p_est,
                     ErrorModel model);

}  // namespace plvio
