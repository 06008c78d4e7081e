#include <gtest/gtest.h>

#include "plvio/error.hpp"
#include "plvio/propagation.hpp"
#include "plvio/simulator.hpp"
#include "checks.hpp"

namespace plvio {
namespace {

using test::random_imu;
using test::random_vec3;

ImuSample sample_at(double t, const Vec3& w, const Vec3& a) { return {t, w, a}; }

TEST(PropagateMean, Hover) {
  std::mt19937_64 rng(1);
  ImuState s = random_imu(rng);
  s.v.setZero();
  const Vec3 a = s.ba - s.R.transpose() * kGravity;
  const ImuState out = propagate_mean(s, sample_at(0, s.bg, a), sample_at(0.01, s.bg, a));
  EXPECT_LT((out.R - s.R).norm(), 1e-12);
  EXPECT_LT((out.v - s.v).norm(), 1e-12);
  EXPECT_LT((out.p - s.p).norm(), 1e-12);
}

TEST(PropagateMean, ConstantAcceleration) {
  std::mt19937_64 rng(2);
  ImuState s = random_imu(rng, false);
  const ImuState s0 = s;
  const Vec3 a = -s.R.transpose() * kGravity + s.R.transpose() * Vec3(1, 0, 0);
  for (int i = 0; i < 100; ++i) s = propagate_mean(s, sample_at(i * 0.01, Vec3::Zero(), a), sample_at((i + 1) * 0.01, Vec3::Zero(), a));
  EXPECT_LT((s.p - (s0.p + s0.v + 0.5 * Vec3(1, 0, 0))).norm(), 1e-9);
}

TEST(PropagateMean, TimeOrder) {
  EXPECT_THROW(propagate_mean(ImuState{}, sample_at(1, Vec3::Zero(), Vec3::Zero()), sample_at(1, Vec3::Zero(), Vec3::Zero())),
               Error);
}

TEST(PropagateMean, TracksAnalyticCircle) {
  const SimConfig cfg;
  for (double t0 : {0.0, 3.3, 7.9}) {
    const TrajectorySample a = analytic_trajectory(cfg, t0), b = analytic_trajectory(cfg, t0 + 0.01);
    const ImuState out = propagate_mean(a.state, {t0, a.omega, a.accel}, {t0 + 0.01, b.omega, b.accel});
    EXPECT_LT((out.p - b.state.p).norm(), 1e-6);
    EXPECT_LT(so3_log(out.R * b.state.R.transpose()).norm(), 1e-6);
  }
}

TEST(Linearize, MatchesFiniteDifferenceFlow) {
  std::mt19937_64 rng(3);
  for (ErrorModel m : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
    for (int trial = 0; trial < 100; ++trial) {
      EXPECT_LT(test::transition_fd_check(rng, m), 1e-4) << "model " << static_cast<int>(m) << " trial " << trial;
    }
  }
}

TEST(Linearize, InvariantBlockIndependentOfRotation) {
  std::mt19937_64 rng(4);
  ImuState a = random_imu(rng, false), b = random_imu(rng, false);
  const ImuSample s{0.0, random_vec3(rng), random_vec3(rng)};
  const Mat15 Fa = linearize(a, s, ErrorModel::RightInvariant).F;
  const Mat15 Fb = linearize(b, s, ErrorModel::RightInvariant).F;
  EXPECT_EQ(MatX(Fa.topLeftCorner(9, 9)), MatX(Fb.topLeftCorner(9, 9)));
  EXPECT_NE(MatX(linearize(a, s, ErrorModel::StandardAdditive).F.topLeftCorner(9, 9)),
            MatX(linearize(b, s, ErrorModel::StandardAdditive).F.topLeftCorner(9, 9)));
}

TEST(Linearize, BiasNoiseColumns) {
  std::mt19937_64 rng(5);
  const Mat15x12 G = linearize(random_imu(rng), ImuSample{}, ErrorModel::StandardAdditive).G;
  EXPECT_EQ(Mat3(G.block<3, 3>(idx::kBg, 3)), Mat3::Identity());
  EXPECT_EQ(Mat3(G.block<3, 3>(idx::kBa, 9)), Mat3::Identity());
}

TEST(Discretize, ZeroF) {
  std::mt19937_64 rng(6);
  const Mat15x12 G = linearize(random_imu(rng), ImuSample{}, ErrorModel::RightInvariant).G;
  const NoiseParams n;
  const TransitionBundle b = discretize(Mat15::Zero(), G, n, 0.01);
  EXPECT_EQ(b.Phi, Mat15::Identity());
  Eigen::Matrix<double, 12, 1> q;
  q << Vec3::Constant(n.sigma_g * n.sigma_g), Vec3::Constant(n.sigma_wg * n.sigma_wg),
      Vec3::Constant(n.sigma_a * n.sigma_a), Vec3::Constant(n.sigma_wa * n.sigma_wa);
  EXPECT_LT((b.Qd - G * q.asDiagonal() * G.transpose() * 0.01).norm(), 1e-18);
}

TEST(Discretize, SmallStepAndExpmOracle) {
  std::mt19937_64 rng(7);
  for (ErrorModel m : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
    for (int trial = 0; trial < 20; ++trial) {
      const ImuState imu = random_imu(rng);
      const ContinuousModel c = linearize(imu, {0.0, random_vec3(rng), random_vec3(rng, 3.0)}, m);
      const double fnorm = c.F.cwiseAbs().rowwise().sum().maxCoeff();
      const double dt = 0.1 / fnorm * 0.99;
      const Mat15 Phi = discretize(c.F, c.G, NoiseParams{}, dt).Phi;
      EXPECT_LT(test::rel_err(Phi, test::expm_scaled(c.F * dt)), 1e-8);

      double prev = 0;
      for (double step : {1e-2, 1e-3}) {
        const Mat15 P = discretize(c.F, c.G, NoiseParams{}, step).Phi;
        const double e = (P - Mat15::Identity() - c.F * step).norm();
        if (prev > 0) {
          EXPECT_LT(e, prev * 0.02);  // O(dt^2): ratio 1/100
        }
        prev = e;
      }
    }
  }
}

TEST(Transition, Composition) {
  std::mt19937_64 rng(8);
  const ImuState imu = random_imu(rng);
  const ContinuousModel c = linearize(imu, {0.0, random_vec3(rng), random_vec3(rng)}, ErrorModel::RightInvariant);
  TransitionBundle ab = discretize(c.F, c.G, NoiseParams{}, 0.005);
  ab.append(discretize(c.F, c.G, NoiseParams{}, 0.005));
  const TransitionBundle whole = discretize(c.F, c.G, NoiseParams{}, 0.01);
  EXPECT_LT((ab.Phi - whole.Phi).norm(), 1e-9);
}

TEST(PropagateCovariance, MatchesDenseOracle) {
  std::mt19937_64 rng(9);
  const ImuState imu = random_imu(rng);
  const ContinuousModel c = linearize(imu, {0.0, random_vec3(rng), random_vec3(rng)}, ErrorModel::StandardAdditive);
  const TransitionBundle b = discretize(c.F, c.G, NoiseParams{}, 0.01);
  const MatX P = test::random_spd(rng, 15 + 6 * 4);
  const MatX dense = b.dense_phi(4) * P * b.dense_phi(4).transpose() + b.dense_qd(4);
  const MatX out = propagate_covariance(P, b);
  EXPECT_LT((out - dense).norm(), 1e-12);
  EXPECT_EQ(MatX(out.bottomRightCorner(24, 24)), MatX(P.bottomRightCorner(24, 24)));
  EXPECT_LT((out - out.transpose()).norm(), 1e-14);

  TransitionBundle id;
  EXPECT_EQ(propagate_covariance(P, id), P);
  id.Qd = test::random_spd(rng, 15, 0.01);
  EXPECT_GE(propagate_covariance(P, id).trace(), P.trace());
  EXPECT_THROW(propagate_covariance(MatX::Identity(16, 16), id), Error);
}

}  // namespace
}  // namespace plvio
