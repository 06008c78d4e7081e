#include "plvio/propagation.hpp"

#include "plvio/error.hpp"

namespace plvio {

namespace {

struct Derivative {
  Mat3 dR;
  Vec3 dv;
  Vec3 dp;
};

Derivative kinematics(const Mat3& R, const Vec3& v, const Vec3& w, const Vec3& a, const Vec3& g) {
  return {R * skew(w), R * a + g, v};
}

Mat3 orthonormalize(const Mat3& R) {
  return Eigen::Quaterniond(R).normalized().toRotationMatrix();
}

}  // namespace

ImuState propagate_mean(const ImuState& imu, const ImuSample& s0, const ImuSample& s1, const Vec3& gravity) {
  const double dt = s1.t - s0.t;
  if (!(dt > 0.0)) {
    throw Error(ErrorKind::TimeOrderError, "IMU timestamps must strictly increase");
  }
  const Vec3 w0 = s0.omega - imu.bg, w1 = s1.omega - imu.bg;
  const Vec3 a0 = s0.accel - imu.ba, a1 = s1.accel - imu.ba;
  const Vec3 wm = 0.5 * (w0 + w1), am = 0.5 * (a0 + a1);

  const Derivative k1 = kinematics(imu.R, imu.v, w0, a0, gravity);
  const Mat3 R2 = imu.R + 0.5 * dt * k1.dR;
  const Vec3 v2 = imu.v + 0.5 * dt * k1.dv;
  const Derivative k2 = kinematics(R2, v2, wm, am, gravity);
  const Mat3 R3 = imu.R + 0.5 * dt * k2.dR;
  const Vec3 v3 = imu.v + 0.5 * dt * k2.dv;
  const Derivative k3 = kinematics(R3, v3, wm, am, gravity);
  const Mat3 R4 = imu.R + dt * k3.dR;
  const Vec3 v4 = imu.v + dt * k3.dv;
  const Derivative k4 = kinematics(R4, v4, w1, a1, gravity);

  ImuState out = imu;
  out.R = orthonormalize(imu.R + dt / 6.0 * (k1.dR + 2.0 * k2.dR + 2.0 * k3.dR + k4.dR));
  out.v = imu.v + dt / 6.0 * (k1.dv + 2.0 * k2.dv + 2.0 * k3.dv + k4.dv);
  out.p = imu.p + dt / 6.0 * (k1.dp + 2.0 * k2.dp + 2.0 * k3.dp + k4.dp);
  return out;
}

ContinuousModel linearize(const ImuState& imu, const ImuSample& s, ErrorModel model, const Vec3& gravity) {
  using namespace idx;
  ContinuousModel m;
  m.F.setZero();
  m.G.setZero();
  const Mat3& R = imu.R;
  const Mat3 I = Mat3::Identity();

  // Noise columns follow [n_g n_wg n_a n_wa].
  m.F.block<3, 3>(kTheta, kBg) = -R;
  m.F.block<3, 3>(kVel, kBa) = -R;
  m.F.block<3, 3>(kPos, kVel) = I;
  m.G.block<3, 3>(kTheta, 0) = -R;
  m.G.block<3, 3>(kVel, 6) = -R;
  m.G.block<3, 3>(kBg, 3) = I;
  m.G.block<3, 3>(kBa, 9) = I;

  if (model == ErrorModel::RightInvariant) {
    const Mat3 vR = skew(imu.v) * R;
    const Mat3 pR = skew(imu.p) * R;
    m.F.block<3, 3>(kVel, kTheta) = skew(gravity);
    m.F.block<3, 3>(kVel, kBg) = -vR;
    m.F.block<3, 3>(kPos, kBg) = -pR;
    m.G.block<3, 3>(kVel, 0) = -vR;
    m.G.block<3, 3>(kPos, 0) = -pR;
  } else {
    const Vec3 a = s.accel - imu.ba;
    m.F.block<3, 3>(kVel, kTheta) = -skew(R * a);
  }
  return m;
}

TransitionBundle discretize(const Mat15& F, const Mat15x12& G, const NoiseParams& noise, double dt) {
  TransitionBundle b;
  const Mat15 A = F * dt;
  const Mat15 A2 = A * A;
  const Mat15 A3 = A2 * A;
  b.Phi = Mat15::Identity() + A + A2 / 2.0 + A3 / 6.0 + A3 * A / 24.0;

  Eigen::Matrix<double, 12, 1> qc;
  qc << Vec3::Constant(noise.sigma_g * noise.sigma_g), Vec3::Constant(noise.sigma_wg * noise.sigma_wg),
      Vec3::Constant(noise.sigma_a * noise.sigma_a), Vec3::Constant(noise.sigma_wa * noise.sigma_wa);
  const Mat15 GQG = G * qc.asDiagonal() * G.transpose();
  b.Qd = 0.5 * dt * (b.Phi * GQG * b.Phi.transpose() + GQG);
  b.Qd = 0.5 * (b.Qd + b.Qd.transpose()).eval();
  return b;
}

void TransitionBundle::append(const TransitionBundle& next) {
  Phi = next.Phi * Phi;
  Qd = next.Phi * Qd * next.Phi.transpose() + next.Qd;
  Qd = 0.5 * (Qd + Qd.transpose()).eval();
}

MatX TransitionBundle::dense_phi(int clone_count) const {
  const int n = kImuDim + kCloneDim * clone_count;
  MatX out = MatX::Identity(n, n);
  out.topLeftCorner(kImuDim, kImuDim) = Phi;
  return out;
}

MatX TransitionBundle::dense_qd(int clone_count) const {
  const int n = kImuDim + kCloneDim * clone_count;
  MatX out = MatX::Zero(n, n);
  out.topLeftCorner(kImuDim, kImuDim) = Qd;
  return out;
}

MatX propagate_covariance(const MatX& cov, const TransitionBundle& bundle) {
  const int n = static_cast<int>(cov.rows());
  if (cov.cols() != n || n < kImuDim || (n - kImuDim) % kCloneDim != 0) {
    throw Error(ErrorKind::DimensionError, "covariance is not a window covariance");
  }
  const int rest = n - kImuDim;
  MatX out = cov;
  const Mat15 Pii = bundle.Phi * cov.topLeftCorner(kImuDim, kImuDim) * bundle.Phi.transpose() + bundle.Qd;
  out.topLeftCorner(kImuDim, kImuDim) = 0.5 * (Pii + Pii.transpose());
  if (rest > 0) {
    out.topRightCorner(kImuDim, rest) = bundle.Phi * cov.topRightCorner(kImuDim, rest);
    out.bottomLeftCorner(rest, kImuDim) = out.topRightCorner(kImuDim, rest).transpose();
  }
  return out;
}

}  // namespace plvio
