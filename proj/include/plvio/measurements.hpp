#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "plvio/geometry.hpp"
#include "plvio/state.hpp"

namespace plvio {

inline constexpr double kMinDepth = 0.01;

using Mat23 = Eigen::Matrix<double, 2, 3>;
using Mat26 = Eigen::Matrix<double, 2, 6>;
using Mat24 = Eigen::Matrix<double, 2, 4>;

// ---------------------------------------------------------------------------
// Tracks: multi-frame observations on the normalized image plane.

struct PointObservation {
  std::int64_t frame_id = 0;
  Vec2 z = Vec2::Zero();
};

struct PointTrack {
  std::int64_t id = 0;
  std::vector<PointObservation> observations;
  std::optional<Vec3> position;  // world frame, set by triangulation
};

struct LineObservation {
  std::int64_t frame_id = 0;
  Vec3 p_s = Vec3::UnitZ();  // (u, v, 1)
  Vec3 p_e = Vec3::UnitZ();
};

struct VpObservation {
  std::int64_t frame_id = 0;
  Vec2 p_v = Vec2::Zero();
};

struct LineTrack {
  std::int64_t id = 0;
  std::vector<LineObservation> observations;
  std::vector<VpObservation> vp_observations;
  std::optional<PluckerLine> line;  // world frame, set by triangulation

  bool structural() const { return !vp_observations.empty(); }
};

// Linearized system with a diagonal noise covariance.
struct StackedSystem {
  MatX H;
  VecX r;
  VecX noise_var;

  int rows() const { return static_cast<int>(r.size()); }
  int cols() const { return static_cast<int>(H.cols()); }
  static StackedSystem empty(int cols);
  void append(const StackedSystem& other);
};

// ---------------------------------------------------------------------------
// Points

// Throws BehindCamera when depth <= kMinDepth.
Vec2 project_point(const Vec3& p_c);
Mat23 projection_jacobian(const Vec3& p_c);

// Parameterization of the landmark error. Additive: p_f = p_hat + e. AnchoredInvariant:
// p_f = exp(theta_a) p_hat + Jl(theta_a) e with theta_a the orientation error of the
// earliest observing clone.
enum class LandmarkError { Additive, AnchoredInvariant };

struct PointLinearization {
  MatX H_x;  // 2m x state dim
  MatX H_f;  // 2m x 3
  VecX r;    // z - z_hat, stacked
};

// Requires track.position. Throws StaleTrack when an observation refers to a clone
// that is not in the window and BehindCamera when the point projects behind a view.
PointLinearization point_jacobians(const VioState& state, const PointTrack& track, ErrorModel model,
                                   LandmarkError landmark = LandmarkError::Additive);

// Projects onto the left null space A of H_f: returns (A^T H_x, A^T r, A^T R A).
// Throws DegenerateFeature when rows <= 3 or rank(H_f) < 3.
StackedSystem nullspace_project(const MatX& H_x, const MatX& H_f, const VecX& r, const VecX& noise_var);

// ---------------------------------------------------------------------------
// Lines and vanishing points

// Signed endpoint-to-line distances (p_s^T l, p_e^T l) / sqrt(l1^2 + l2^2).
// Throws DegenerateImageLine when (l1, l2) vanishes.
Vec2 line_residual(const Vec3& l, const Vec3& p_s, const Vec3& p_e);

// d(line_residual)/dl.
Mat23 line_residual_jacobian(const Vec3& l, const Vec3& p_s, const Vec3& p_e);

struct LineLinearization {
  Mat26 H_X;  // w.r.t. clone (theta, p) error
  Mat24 H_L;  // w.r.t. line error (dpsi, dphi)
  Vec2 r;     // 0 - line_residual at the estimate
};

LineLinearization line_jacobians(const CameraClone& clone, const PluckerLine& world_line, const Vec3& p_s,
                                 const Vec3& p_e, LineError mode,
                                 ErrorModel model = ErrorModel::RightInvariant);

// Throws VpAtInfinity when |d3| <= 1e-6 ||d||.
Vec2 vp_residual(const Vec2& p_v, const Vec3& d_c);

struct VpLinearization {
  Mat26 H_X;
  Mat24 H_v;
  Vec2 r;
};

VpLinearization vp_jacobians(const CameraClone& clone, const PluckerLine& world_line, const Vec2& p_v,
                             LineError mode = LineError::Global);

// Projects a stacked line system onto the left null space of H_line = [H_L; H_v].
// Throws DegenerateFeature when rows <= 4 or rank(H_line) < 4.
StackedSystem project_out_line(const MatX& H_x, const MatX& H_line, const VecX& r, const VecX& noise_var);

// Full per-line system for a window: all endpoint rows, then VP rows (views where the
// VP is at infinity are skipped). Requires track.line.
struct LineStack {
  MatX H_x;
  MatX H_line;
  VecX r;
  VecX noise_var;
  int vp_rows = 0;
};
LineStack line_stack(const VioState& state, const LineTrack& track, ErrorModel model, LineError mode,
                     double line_sigma, double vp_sigma);

}  // namespace plvio
