#pragma once

#include "plvio/state.hpp"

namespace plvio {

inline const Vec3 kGravity{0.0, 0.0, -9.81};

struct ImuSample {
  double t = 0.0;
  Vec3 omega = Vec3::Zero();  // rad/s, body frame
  Vec3 accel = Vec3::Zero();  // specific force, m/s^2, body frame
};

// Continuous-time densities of the noise vector [n_g n_wg n_a n_wa].
struct NoiseParams {
  double sigma_g = 0.008;
  double sigma_wg = 0.0004;
  double sigma_a = 0.01;
  double sigma_wa = 0.003;
};

using Mat15 = Eigen::Matrix<double, 15, 15>;
using Mat15x12 = Eigen::Matrix<double, 15, 12>;

struct ContinuousModel {
  Mat15 F;
  Mat15x12 G;
};

// IMU block of the discrete transition. The clone blocks of the full transition
// are identity (Phi) and zero (Qd) and are never stored.
struct TransitionBundle {
  Mat15 Phi = Mat15::Identity();
  Mat15 Qd = Mat15::Zero();

  // Chains `next` after this bundle: Phi <- Phi_n Phi, Qd <- Phi_n Qd Phi_n^T + Qd_n.
  void append(const TransitionBundle& next);
  MatX dense_phi(int clone_count) const;
  MatX dense_qd(int clone_count) const;
};

// RK4 integration of R' = R[w - bg], v' = R(a - ba) + g, p' = v with inputs
// linearly interpolated between s0 and s1. Throws TimeOrderError if s1.t <= s0.t.
ImuState propagate_mean(const ImuState& imu, const ImuSample& s0, const ImuSample& s1,
                        const Vec3& gravity = kGravity);

ContinuousModel linearize(const ImuState& imu, const ImuSample& s, ErrorModel model,
                          const Vec3& gravity = kGravity);

// Phi = expm(F dt) by 4th-order series; Qd by the trapezoidal rule.
TransitionBundle discretize(const Mat15& F, const Mat15x12& G, const NoiseParams& noise, double dt);

// P <- Phi P Phi^T + Qd using the block structure (clone-clone blocks untouched).
MatX propagate_covariance(const MatX& cov, const TransitionBundle& bundle);

}  // namespace plvio
