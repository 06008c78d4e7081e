#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "plvio/error.hpp"
#include "plvio/evaluation.hpp"
#include "plvio/simulator.hpp"
#include "test_util.hpp"

namespace plvio {
namespace {

TEST(Trajectory, RadiusAndPeriodicity) {
  const SimConfig cfg;
  for (double t : {0.0, 1.7, 5.5, 11.9}) {
    const TrajectorySample s = analytic_trajectory(cfg, t);
    EXPECT_NEAR(s.state.p.head<2>().norm(), cfg.radius, 1e-12);
    EXPECT_TRUE(is_rotation(s.state.R));
  }
  const TrajectorySample a = analytic_trajectory(cfg, 0.0), b = analytic_trajectory(cfg, cfg.duration() / 10);
  EXPECT_LT((a.state.p - b.state.p).norm(), 1e-12);
  EXPECT_LT((a.state.R - b.state.R).norm(), 1e-12);
  EXPECT_LT((a.state.v - b.state.v).norm(), 1e-12);
}

TEST(Trajectory, NoiselessPropagationDrift) {
  SimConfig cfg;
  cfg.noise_scale = 0.0;
  std::mt19937_64 rng(1);
  const ImuStream imu = simulate_imu(cfg, rng);
  ImuState x = imu.truth.front();
  for (std::size_t i = 1; i < imu.samples.size(); ++i) x = propagate_mean(x, imu.samples[i - 1], imu.samples[i]);
  EXPECT_LT((x.p - imu.truth.back().p).norm(), 1e-4);
}

TEST(Landmarks, CountsAndCanonicalDirections) {
  const SimConfig cfg;
  std::mt19937_64 rng(2);
  const World w = generate_landmarks(cfg, rng);
  EXPECT_EQ(static_cast<int>(w.points.size()), cfg.n_points);
  EXPECT_EQ(static_cast<int>(w.lines.size()), cfg.n_lines);
  for (const SimLine& l : w.lines) {
    const Vec3 d = l.direction();
    if (l.horizontal) {
      EXPECT_NEAR(d.z(), 0.0, 1e-12);
      EXPECT_TRUE(std::abs(std::abs(d.x()) - 1) < 1e-12 || std::abs(std::abs(d.y()) - 1) < 1e-12);
      EXPECT_GE(std::abs(l.a.z()), cfg.min_line_height);
    } else {
      EXPECT_NEAR(std::abs(d.z()), 1.0, 1e-12);
    }
    // Lines lie on the walls.
    const double half = cfg.wall_side / 2;
    const bool on_wall = std::abs(std::abs(l.a.x()) - half) < 1e-12 && std::abs(l.a.x() - l.b.x()) < 1e-12;
    const bool on_wall_y = std::abs(std::abs(l.a.y()) - half) < 1e-12 && std::abs(l.a.y() - l.b.y()) < 1e-12;
    EXPECT_TRUE(on_wall || on_wall_y);
  }
  for (const SimPoint& p : w.points) {
    const double r = p.p.head<2>().norm();
    EXPECT_TRUE(r <= cfg.inner_radius + 1e-9 || r >= cfg.outer_radius - 1e-9) << r;
  }
}

TEST(SimulateImu, ZeroNoiseMatchesAnalytic) {
  SimConfig cfg;
  cfg.loops = 1;
  cfg.noise_scale = 0.0;
  std::mt19937_64 rng(3);
  const ImuStream imu = simulate_imu(cfg, rng);
  for (std::size_t i = 0; i < imu.samples.size(); i += 37) {
    const TrajectorySample s = analytic_trajectory(cfg, imu.samples[i].t);
    EXPECT_EQ(imu.samples[i].omega, s.omega);
    EXPECT_EQ(imu.samples[i].accel, s.accel);
  }
}

TEST(SimulateImu, WhiteNoiseVariance) {
  SimConfig cfg;
  cfg.loops = 84;  // about 1e5 samples
  std::mt19937_64 rng(4);
  const ImuStream imu = simulate_imu(cfg, rng);
  const double dt = 1.0 / cfg.imu_rate;
  double sg = 0, sa = 0;
  const std::size_t n = imu.samples.size();
  for (std::size_t i = 0; i < n; ++i) {
    const TrajectorySample s = analytic_trajectory(cfg, imu.samples[i].t);
    sg += (imu.samples[i].omega - s.omega - imu.truth[i].bg).squaredNorm();
    sa += (imu.samples[i].accel - s.accel - imu.truth[i].ba).squaredNorm();
  }
  ASSERT_GE(n, 100000u);
  const double vg = sg / (3.0 * n), va = sa / (3.0 * n);
  EXPECT_NEAR(vg / (cfg.noise.sigma_g * cfg.noise.sigma_g / dt), 1.0, 0.05);
  EXPECT_NEAR(va / (cfg.noise.sigma_a * cfg.noise.sigma_a / dt), 1.0, 0.05);
}

TEST(SimulateImu, BiasWalkVarianceLinear) {
  SimConfig cfg;
  cfg.loops = 5;  // 60 s
  const int streams = 1000;
  const std::vector<double> times{20.0, 40.0, 60.0};
  std::vector<double> vg(times.size(), 0.0), va(times.size(), 0.0);
  for (int k = 0; k < streams; ++k) {
    std::mt19937_64 rng(1000 + k);
    const ImuStream imu = simulate_imu(cfg, rng);
    for (std::size_t j = 0; j < times.size(); ++j) {
      const std::size_t i = static_cast<std::size_t>(std::lround(times[j] * cfg.imu_rate));
      vg[j] += imu.truth[i].bg.squaredNorm() / (3.0 * streams);
      va[j] += imu.truth[i].ba.squaredNorm() / (3.0 * streams);
    }
  }
  for (std::size_t j = 0; j < times.size(); ++j) {
    EXPECT_NEAR(vg[j] / (cfg.noise.sigma_wg * cfg.noise.sigma_wg * times[j]), 1.0, 0.1);
    EXPECT_NEAR(va[j] / (cfg.noise.sigma_wa * cfg.noise.sigma_wa * times[j]), 1.0, 0.1);
  }
}

TEST(SimulateCamera, ZeroNoiseResidualsAndSharedVp) {
  SimConfig cfg;
  cfg.noise_scale = 0.0;
  std::mt19937_64 rng(5);
  const World w = generate_landmarks(cfg, rng);
  std::map<std::int64_t, const SimLine*> by_id;
  for (const auto& l : w.lines) by_id[l.id] = &l;
  std::map<std::int64_t, Vec3> points;
  for (const auto& p : w.points) points[p.id] = p.p;

  int lines_seen = 0, vp_seen = 0;
  for (double t : {0.0, 2.5, 7.1}) {
    const ImuState truth = analytic_trajectory(cfg, t).state;
    const FrameMeasurements f = simulate_camera_frame(cfg, truth, t, 1, w, rng);
    const Pose cam = Pose{truth.R, truth.p}.compose(cfg.extrinsics);
    const CameraClone clone{cam.R, cam.p, 1};
    for (const auto& m : f.points) {
      EXPECT_LT((m.z - project_point(cam.R.transpose() * (points.at(m.id) - cam.p))).norm(), 1e-12);
    }
    std::map<long, Vec2> family_vp;
    for (const auto& m : f.lines) {
      const SimLine& l = *by_id.at(m.id);
      ++lines_seen;
      EXPECT_LT(line_jacobians(clone, l.plucker(), m.p_s, m.p_e, LineError::Global).r.norm(), 1e-10);
      if (m.vp) {
        ++vp_seen;
        EXPECT_LT(vp_residual(*m.vp, cam.R.transpose() * l.direction()).norm(), 1e-10);
        // Parallel lines share one VP; key the family by its direction.
        const Vec3 d = l.direction();
        const long key = std::lround(std::abs(d.x()) * 4 + std::abs(d.y()) * 2 + std::abs(d.z()));
        if (auto it = family_vp.find(key); it != family_vp.end()) {
          EXPECT_LT((it->second - *m.vp).norm(), 1e-10);
        } else {
          family_vp[key] = *m.vp;
        }
      }
    }
  }
  EXPECT_GT(lines_seen, 0);
  EXPECT_GT(vp_seen, 0);
}

TEST(RunSimulation, DeterministicAndCounters) {
  SimConfig cfg;
  cfg.loops = 1;
  for (Variant v : {Variant::Msckf, Variant::PlvIekf}) {
    const RunResult a = run_simulation(cfg, v, 7), b = run_simulation(cfg, v, 7);
    ASSERT_EQ(a.steps.size(), b.steps.size());
    for (std::size_t i = 0; i < a.steps.size(); ++i) {
      EXPECT_EQ(a.steps[i].estimate.p, b.steps[i].estimate.p);
      EXPECT_EQ(a.steps[i].cov, b.steps[i].cov);
    }
    if (uses_lines(v)) {
      EXPECT_GT(a.counters.lines_used, 0);
      EXPECT_GT(a.counters.vp_rows, 0);
    } else {
      EXPECT_EQ(a.counters.lines_used, 0);
      EXPECT_EQ(a.counters.vp_rows, 0);
    }
    EXPECT_GT(a.counters.points_used, 0);
  }
}

TEST(RunSimulation, NoiselessAccuracy) {
  SimConfig cfg;
  cfg.loops = 2;
  cfg.noise_scale = 0.0;
  cfg.init_error_scale = 0.0;
  const SimData data = generate_data(cfg, 11);
  for (Variant v : {Variant::Msckf, Variant::Iekf, Variant::PlvMsckf, Variant::PlvIekf}) {
    const RunResult r = run_filter(cfg, data, v);
    ASSERT_FALSE(r.aborted) << r.diagnostic;
    double sq = 0.0;
    for (const auto& s : r.steps) sq += (s.truth.p - s.estimate.p).squaredNorm();
    EXPECT_LT(std::sqrt(sq / r.steps.size()), 1e-3) << to_string(v);
  }
}

TEST(PerturbImu, InverseOfErrorBetween) {
  std::mt19937_64 rng(6);
  for (ErrorModel m : {ErrorModel::StandardAdditive, ErrorModel::RightInvariant}) {
    VioState truth = test::random_state(rng, 0);
    VecX e(15);
    for (int i = 0; i < 15; ++i) e[i] = test::uniform(rng, -0.2, 0.2);
    VioState est = truth;
    est.imu = perturb_imu(truth.imu, e, m);
    EXPECT_LT((error_between(truth, est, m) - e).norm(), 1e-12);
  }
}

TEST(SimConfig, Validation) {
  SimConfig cfg;
  cfg.cam_rate = 7;
  EXPECT_THROW(cfg.validate(), Error);
  cfg = SimConfig{};
  cfg.pixel_sigma = 0;
  EXPECT_THROW(cfg.validate(), Error);
}

}  // namespace
}  // namespace plvio
