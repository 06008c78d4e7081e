#include "plvio/state.hpp"

#include <string>

#include "plvio/error.hpp"

namespace plvio {

int VioState::clone_index(std::int64_t frame_id) const {
  for (std::size_t i = 0; i < clones.size(); ++i) {
    if (clones[i].frame_id == frame_id) return static_cast<int>(i);
  }
  return -1;
}

Pose VioState::camera_pose() const { return Pose{imu.R, imu.p}.compose(extrinsics); }

void symmetrize(MatX& P) { P = 0.5 * (P + P.transpose()).eval(); }

Belief clone_camera(const Belief& belief, ErrorModel model, std::int64_t frame_id) {
  const VioState& s = belief.state;
  if (s.clones.size() >= s.window_size) {
    throw Error(ErrorKind::WindowOverflow, "window holds " + std::to_string(s.clones.size()) + " clones");
  }
  if (!s.clones.empty() && s.clones.back().frame_id >= frame_id) {
    throw Error(ErrorKind::TimeOrderError, "clone frame ids must increase");
  }
  const int n = s.dim();
  if (belief.cov.rows() != n || belief.cov.cols() != n) {
    throw Error(ErrorKind::DimensionError, "covariance does not match state");
  }

  // J maps the existing error onto the new clone's (theta, p) error.
  MatX J = MatX::Zero(kCloneDim, n);
  J.block<3, 3>(0, idx::kTheta).setIdentity();
  J.block<3, 3>(3, idx::kPos).setIdentity();
  if (model == ErrorModel::StandardAdditive) {
    J.block<3, 3>(3, idx::kTheta) = -skew(s.imu.R * s.extrinsics.p);
  }

  Belief out;
  out.state = s;
  const Pose cam = s.camera_pose();
  out.state.clones.push_back({cam.R, cam.p, frame_id});

  const MatX PJt = belief.cov * J.transpose();
  out.cov.resize(n + kCloneDim, n + kCloneDim);
  out.cov.topLeftCorner(n, n) = belief.cov;
  out.cov.topRightCorner(n, kCloneDim) = PJt;
  out.cov.bottomLeftCorner(kCloneDim, n) = PJt.transpose();
  out.cov.bottomRightCorner(kCloneDim, kCloneDim) = J * PJt;
  symmetrize(out.cov);
  return out;
}

Belief marginalize_oldest(const Belief& belief) {
  const VioState& s = belief.state;
  if (s.clones.empty()) {
    throw Error(ErrorKind::EmptyWindow, "no clone to marginalize");
  }
  const int n = s.dim();
  const int keep = n - kCloneDim - kImuDim;
  Belief out;
  out.state = s;
  out.state.clones.erase(out.state.clones.begin());
  out.cov.resize(n - kCloneDim, n - kCloneDim);
  out.cov.topLeftCorner(kImuDim, kImuDim) = belief.cov.topLeftCorner(kImuDim, kImuDim);
  out.cov.topRightCorner(kImuDim, keep) = belief.cov.topRightCorner(kImuDim, keep);
  out.cov.bottomLeftCorner(keep, kImuDim) = belief.cov.bottomLeftCorner(keep, kImuDim);
  out.cov.bottomRightCorner(keep, keep) = belief.cov.bottomRightCorner(keep, keep);
  return out;
}

namespace {

void check_dim(const VioState& s, const VecX& delta) {
  if (delta.size() != s.dim()) {
    throw Error(ErrorKind::DimensionError,
                "error vector has " + std::to_string(delta.size()) + " entries, state needs " +
                    std::to_string(s.dim()));
  }
}

// (R, x) <- (exp(th) R, exp(th) x + Jl(th) dx) for the invariant model, plain
// addition on x otherwise. Rotation always uses the global (left) perturbation.
void retract_pair(Mat3& R, Vec3& x, const Vec3& th, const Vec3& dx, ErrorModel model) {
  const Mat3 dR = so3_exp(th);
  R = dR * R;
  if (model == ErrorModel::RightInvariant) {
    x = dR * x + left_jacobian(th) * dx;
  } else {
    x += dx;
  }
}

Vec3 pair_error(const Mat3& R_true, const Vec3& x_true, const Mat3& R_est, const Vec3& x_est,
                const Vec3& th, ErrorModel model) {
  if (model == ErrorModel::RightInvariant) {
    return left_jacobian_inverse(th) * (x_true - R_true * R_est.transpose() * x_est);
  }
  return x_true - x_est;
}

}  // namespace

VioState apply_correction(const VioState& state, const VecX& delta, ErrorModel model) {
  check_dim(state, delta);
  VioState out = state;
  const Vec3 th = delta.segment<3>(idx::kTheta);
  Mat3 R = out.imu.R;
  retract_pair(R, out.imu.v, th, delta.segment<3>(idx::kVel), model);
  retract_pair(out.imu.R, out.imu.p, th, delta.segment<3>(idx::kPos), model);
  out.imu.bg += delta.segment<3>(idx::kBg);
  out.imu.ba += delta.segment<3>(idx::kBa);
  for (std::size_t i = 0; i < out.clones.size(); ++i) {
    const int o = clone_offset(static_cast<int>(i));
    retract_pair(out.clones[i].R, out.clones[i].p, delta.segment<3>(o), delta.segment<3>(o + 3), model);
  }
  return out;
}

PoseError pose_error(const Mat3& R_true, const Vec3& p_true, const Mat3& R_est, const Vec3& p_est,
                     ErrorModel model) {
  PoseError e;
  e.theta = so3_log(R_true * R_est.transpose());
  e.pos = pair_error(R_true, p_true, R_est, p_est, e.theta, model);
  return e;
}

VecX error_between(const VioState& truth, const VioState& estimate, ErrorModel model) {
  if (truth.clones.size() != estimate.clones.size()) {
    throw Error(ErrorKind::DimensionError, "window structures differ");
  }
  VecX e(estimate.dim());
  const PoseError imu = pose_error(truth.imu.R, truth.imu.p, estimate.imu.R, estimate.imu.p, model);
  e.segment<3>(idx::kTheta) = imu.theta;
  e.segment<3>(idx::kVel) = pair_error(truth.imu.R, truth.imu.v, estimate.imu.R, estimate.imu.v, imu.theta, model);
  e.segment<3>(idx::kPos) = imu.pos;
  e.segment<3>(idx::kBg) = truth.imu.bg - estimate.imu.bg;
  e.segment<3>(idx::kBa) = truth.imu.ba - estimate.imu.ba;
  for (std::size_t i = 0; i < estimate.clones.size(); ++i) {
    const auto& ct = truth.clones[i];
    const auto& ce = estimate.clones[i];
    const PoseError pe = pose_error(ct.R, ct.p, ce.R, ce.p, model);
    const int o = clone_offset(static_cast<int>(i));
    e.segment<3>(o) = pe.theta;
    e.segment<3>(o + 3) = pe.pos;
  }
  return e;
}

}  // namespace plvio
