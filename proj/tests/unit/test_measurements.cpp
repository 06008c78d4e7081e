#include <gtest/gtest.h>

#include <Eigen/SVD>

#include "plvio/error.hpp"
#include "plvio/measurements.hpp"
#include "checks.hpp"

namespace plvio {
namespace {

using test::random_vec3;
using test::uniform;

using test::LineScene;
using test::observe_line;
using test::observed_point;
using test::random_line_scene;
using test::structural_track;
using test::viewing_window;

TEST(ProjectPoint, Examples) {
  EXPECT_EQ(project_point(Vec3(0, 0, 1)), Vec2(0, 0));
  EXPECT_EQ(project_point(Vec3(1, 2, 2)), Vec2(0.5, 1.0));
  EXPECT_THROW(project_point(Vec3(0, 0, -1)), Error);
}

TEST(PointJacobians, FiniteDifference) {
  std::mt19937_64 rng(1);
  for (ErrorModel model : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
    for (LandmarkError lm : {LandmarkError::Additive, LandmarkError::AnchoredInvariant}) {
      for (int trial = 0; trial < 100; ++trial) {
        const test::JacobianError e = test::point_fd_check(rng, model, lm);
        EXPECT_LT(e.state, 1e-4);
        EXPECT_LT(e.landmark, 1e-4);
      }
    }
  }
}

TEST(PointJacobians, ZeroResidualAndSharedLandmarkJacobian) {
  std::mt19937_64 rng(2);
  const Vec3 pf(0.5, -0.3, 1.0);
  const VioState s = viewing_window(rng, 5, pf);
  const PointTrack t = observed_point(s, pf, 0.0, rng);
  const PointLinearization a = point_jacobians(s, t, ErrorModel::RightInvariant, LandmarkError::Additive);
  const PointLinearization b = point_jacobians(s, t, ErrorModel::RightInvariant, LandmarkError::AnchoredInvariant);
  EXPECT_LT(a.r.norm(), 1e-15);
  EXPECT_EQ(a.H_f, b.H_f);

  PointTrack stale = t;
  stale.observations.push_back({999, Vec2::Zero()});
  EXPECT_THROW(point_jacobians(s, stale, ErrorModel::RightInvariant), Error);
}

TEST(NullspaceProject, DefinitionAndRows) {
  std::mt19937_64 rng(3);
  for (int m : {2, 3, 7}) {
    const Vec3 pf = random_vec3(rng);
    const VioState s = viewing_window(rng, m, pf);
    const PointLinearization lin = point_jacobians(s, observed_point(s, pf, 0.01, rng), ErrorModel::StandardAdditive);
    const StackedSystem out = nullspace_project(lin.H_x, lin.H_f, lin.r, VecX::Constant(2 * m, 1e-6));
    EXPECT_EQ(out.rows(), 2 * m - 3);
    // Recover A from the projected system: A^T H_f must vanish.
    const Eigen::HouseholderQR<MatX> qr(lin.H_f);
    const MatX A = MatX(qr.householderQ()).rightCols(2 * m - 3);
    EXPECT_LT((A.transpose() * lin.H_f).lpNorm<Eigen::Infinity>(), 1e-10);
    EXPECT_LT((out.H - A.transpose() * lin.H_x).lpNorm<Eigen::Infinity>(), 1e-12);
  }
  EXPECT_THROW(nullspace_project(MatX::Zero(2, 15), MatX::Identity(2, 3), VecX::Zero(2), VecX::Ones(2)), Error);
  EXPECT_THROW(nullspace_project(MatX::Zero(6, 15), MatX::Zero(6, 3), VecX::Zero(6), VecX::Ones(6)), Error);
}

TEST(PointEquivalence, AdditiveAndAnchoredInvariantLandmarkError) {
  std::mt19937_64 rng(4);
  for (int n = 2; n <= 20; ++n) {
    for (ErrorModel model : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
      const test::EquivalenceGap gap = test::point_error_equivalence(rng, n, model);
      EXPECT_LT(gap.projected, 1e-8) << "n = " << n;
      EXPECT_GT(gap.raw, 1e-3);
    }
  }
}

TEST(LineResidual, Examples) {
  EXPECT_EQ(line_residual(Vec3(0, 1, -1), Vec3(3, 1, 1), Vec3(-2, 1, 1)), Vec2(0, 0));
  EXPECT_DOUBLE_EQ(line_residual(Vec3(0, 1, -1), Vec3(0, 2, 1), Vec3(0, 1, 1))[0], 1.0);
  EXPECT_DOUBLE_EQ(line_residual(Vec3(3, 4, 0), Vec3(1, 1, 1), Vec3(1, 1, 1))[0], 1.4);
  EXPECT_THROW(line_residual(Vec3(0, 0, 1), Vec3(1, 1, 1), Vec3(1, 1, 1)), Error);
}

TEST(LineJacobians, FiniteDifference) {
  std::mt19937_64 rng(5);
  for (ErrorModel model : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
    for (LineError mode : {LineError::Global, LineError::Local}) {
      for (int trial = 0; trial < 100; ++trial) {
        const test::JacobianError e = test::line_fd_check(rng, model, mode);
        EXPECT_LT(e.state, 1e-4);
        EXPECT_LT(e.landmark, 1e-4);
      }
    }
  }
}

TEST(LineJacobians, NoiselessResidualIsZero) {
  std::mt19937_64 rng(6);
  const LineScene sc = random_line_scene(rng, 1);
  const LineObservation o = observe_line(sc.s.clones[0], sc.a, sc.b, 0.0, rng);
  EXPECT_LT(line_jacobians(sc.s.clones[0], sc.L, o.p_s, o.p_e, LineError::Global).r.norm(), 1e-14);
}

TEST(VpResidual, Examples) {
  EXPECT_EQ(vp_residual(Vec2(0, 0), Vec3(0, 0, 1)), Vec2(0, 0));
  EXPECT_EQ(vp_residual(Vec2(1, 2), Vec3(2, 4, 2)), Vec2(0, 0));
  EXPECT_THROW(vp_residual(Vec2(0, 0), Vec3(1, 1, 0)), Error);
}

TEST(VpJacobians, FiniteDifference) {
  std::mt19937_64 rng(7);
  for (ErrorModel model : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
    for (LineError mode : {LineError::Global, LineError::Local}) {
      for (int trial = 0; trial < 100; ++trial) {
        const test::JacobianError e = test::vp_fd_check(rng, model, mode);
        EXPECT_LT(e.state, 1e-4);
        EXPECT_LT(e.landmark, 1e-4);
      }
    }
  }
}

TEST(VpJacobians, TranslationBlockIsZero) {
  std::mt19937_64 rng(17);
  const LineScene sc = random_line_scene(rng, 1);
  const CameraClone& c = sc.s.clones[0];
  const Vec3 dc = c.R.transpose() * sc.L.d;
  const VpLinearization lin = vp_jacobians(c, sc.L, dc.head<2>() / dc.z(), LineError::Global);
  EXPECT_EQ(Mat23(lin.H_X.rightCols<3>()), Mat23::Zero());
}

TEST(LineStack, NoiselessResidualAndCounts) {
  std::mt19937_64 rng(8);
  const LineScene sc = random_line_scene(rng, 4);
  const LineTrack t = structural_track(sc, 0.0, rng);
  const LineStack st = line_stack(sc.s, t, ErrorModel::RightInvariant, LineError::Global, 1e-3, 2e-3);
  EXPECT_EQ(st.H_x.rows(), 16);
  EXPECT_EQ(st.vp_rows, 8);
  EXPECT_LT(st.r.norm(), 1e-12);
}

TEST(ProjectOutLine, NullSpaceAndRank) {
  std::mt19937_64 rng(9);
  for (int trial = 0; trial < 50; ++trial) {
    const LineScene sc = random_line_scene(rng, 3);
    const LineTrack t = structural_track(sc, 0.005, rng);
    const LineStack st = line_stack(sc.s, t, ErrorModel::RightInvariant, LineError::Global, 1e-3, 2e-3);
    const Eigen::JacobiSVD<MatX> svd(st.H_line);
    EXPECT_GT(svd.singularValues()[3], 1e-6 * svd.singularValues()[0]);
    const StackedSystem out = project_out_line(st.H_x, st.H_line, st.r, st.noise_var);
    EXPECT_EQ(out.rows(), st.H_x.rows() - 4);
    // Whitened null space: recompute it and check annihilation.
    const VecX w = st.noise_var.cwiseSqrt().cwiseInverse();
    const MatX He = w.asDiagonal() * st.H_line;
    const MatX A = MatX(Eigen::HouseholderQR<MatX>(He).householderQ()).rightCols(out.rows());
    EXPECT_LT((A.transpose() * He).lpNorm<Eigen::Infinity>(), 1e-10 * He.lpNorm<Eigen::Infinity>());
  }
  // One view without VP gives 2 rows: not enough.
  const LineScene sc = random_line_scene(rng, 1);
  const LineTrack t = structural_track(sc, 0.0, rng, false);
  const LineStack st = line_stack(sc.s, t, ErrorModel::RightInvariant, LineError::Global, 1e-3, 1e-3);
  EXPECT_THROW(project_out_line(st.H_x, st.H_line, st.r, st.noise_var), Error);
}

TEST(LineEquivalence, GlobalAndLocalLineError) {
  std::mt19937_64 rng(10);
  for (int n = 2; n <= 20; ++n) {
    for (bool vp : {false, true}) {
      const test::EquivalenceGap gap = test::line_error_equivalence(rng, n, vp);
      EXPECT_EQ(gap.raw, 0.0);
      EXPECT_LT(gap.projected, 1e-8) << "n = " << n;
    }
  }
}

}  // namespace
}  // namespace plvio
