#include "plvio/simulator.hpp"

#include <cmath>
#include <numbers>

#include "plvio/error.hpp"

namespace plvio {

void SimConfig::validate() const {
  auto require = [](bool ok, const char* what) {
    if (!ok) throw Error(ErrorKind::ConfigError, what);
  };
  require(radius > 0 && loops > 0 && loop_period > 0, "trajectory parameters must be positive");
  require(imu_rate > 0 && cam_rate > 0 && imu_rate % cam_rate == 0, "cam_rate must divide imu_rate");
  require(n_points >= 0 && n_lines >= 0, "landmark counts must be non-negative");
  require(inner_radius > 0 && outer_radius > 0 && wall_side > 0 && wall_half_height > 0, "world sizes must be positive");
  require(min_line_height >= 0 && min_line_height < wall_half_height, "min_line_height must be below the wall height");
  require(visibility_range > 0 && focal_length > 0 && half_width > 0 && half_height > 0 && near_clip > 0,
          "camera parameters must be positive");
  require(pixel_sigma > 0 && vp_pixel_sigma > 0, "pixel noise must be positive");
  require(noise.sigma_g > 0 && noise.sigma_wg > 0 && noise.sigma_a > 0 && noise.sigma_wa > 0,
          "IMU noise densities must be positive");
  require(window_size >= 2 && min_track >= 1, "window_size >= 2 and min_track >= 1");
  require(init_sigma_theta > 0 && init_sigma_v > 0 && init_sigma_p > 0 && init_sigma_bg > 0 && init_sigma_ba > 0,
          "initial sigmas must be positive");
  require(noise_scale >= 0 && init_error_scale >= 0, "scales must be non-negative");
  require(runs >= 1, "runs must be >= 1");
  require(chi2_confidence > 0 && chi2_confidence < 1, "chi2_confidence must be in (0, 1)");
  require(max_features >= 0, "max_features must be >= 0");
  require(gn.max_iters >= 1 && gn.lambda0 > 0 && gn.lambda_up > 1 && gn.lambda_down > 1, "invalid GN settings");
  require(is_rotation(extrinsics.R), "extrinsic rotation is not a rotation");
}

TrajectorySample analytic_trajectory(const SimConfig& cfg, double t) {
  const double w = 2.0 * std::numbers::pi / cfg.loop_period;
  const double th = w * t;
  const double c = std::cos(th), s = std::sin(th);
  TrajectorySample out;
  out.state.p = Vec3(cfg.radius * c, cfg.radius * s, 0.0);
  out.state.v = Vec3(-cfg.radius * w * s, cfg.radius * w * c, 0.0);
  // Body x along the velocity, y toward the center, z up.
  out.state.R << -s, -c, 0.0,
                  c, -s, 0.0,
                 0.0, 0.0, 1.0;
  out.omega = Vec3(0.0, 0.0, w);
  out.accel = Vec3(0.0, cfg.radius * w * w, -kGravity.z());
  return out;
}

PluckerLine SimLine::plucker() const {
  PluckerLine L;
  L.d = b - a;
  L.n = a.cross(b);
  return L.normalized();
}

World generate_landmarks(const SimConfig& cfg, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> angle(0.0, 2.0 * std::numbers::pi);
  std::uniform_real_distribution<double> height(-cfg.wall_half_height, cfg.wall_half_height);
  World world;
  for (int i = 0; i < cfg.n_points; ++i) {
    const double r = i < cfg.n_points / 2 ? cfg.inner_radius : cfg.outer_radius;
    const double a = angle(rng);
    world.points.push_back({i, Vec3(r * std::cos(a), r * std::sin(a), height(rng))});
  }

  const double half = 0.5 * cfg.wall_side;
  const double H = cfg.wall_half_height;
  std::uniform_real_distribution<double> along(-0.9 * half, 0.9 * half);
  std::uniform_real_distribution<double> vertical_length(0.5 * H, 2.0 * H);
  std::uniform_real_distribution<double> horizontal_length(0.15 * cfg.wall_side, 0.3 * cfg.wall_side);
  std::uniform_real_distribution<double> level(cfg.min_line_height, H);
  std::bernoulli_distribution coin(0.5);
  for (int i = 0; i < cfg.n_lines; ++i) {
    // Walls in turn: x = +half, y = +half, x = -half, y = -half.
    const int wall = i % 4;
    const double sign = wall < 2 ? 1.0 : -1.0;
    const Vec3 normal = wall % 2 == 0 ? Vec3(sign, 0, 0) : Vec3(0, sign, 0);
    const Vec3 tangent = wall % 2 == 0 ? Vec3(0, 1, 0) : Vec3(1, 0, 0);
    const Vec3 base = half * normal;
    SimLine line;
    line.id = i;
    line.horizontal = (i / 4) % 2 == 1;
    if (line.horizontal) {
      const double z = coin(rng) ? level(rng) : -level(rng);
      const double len = horizontal_length(rng);
      const double c = std::clamp(along(rng), -half + 0.5 * len, half - 0.5 * len);
      line.a = base + (c - 0.5 * len) * tangent + Vec3(0, 0, z);
      line.b = base + (c + 0.5 * len) * tangent + Vec3(0, 0, z);
    } else {
      const double len = vertical_length(rng);
      const double z0 = std::uniform_real_distribution<double>(-H, H - len)(rng);
      const double s = along(rng);
      line.a = base + s * tangent + Vec3(0, 0, z0);
      line.b = base + s * tangent + Vec3(0, 0, z0 + len);
    }
    world.lines.push_back(line);
  }
  return world;
}

ImuStream simulate_imu(const SimConfig& cfg, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  const double dt = 1.0 / cfg.imu_rate;
  const long n = static_cast<long>(cfg.loops) * std::lround(cfg.loop_period * cfg.imu_rate);
  const double k = cfg.noise_scale;
  const auto& nz = cfg.noise;
  auto draw = [&] { return Vec3(gauss(rng), gauss(rng), gauss(rng)); };

  ImuStream out;
  out.samples.reserve(n + 1);
  out.truth.reserve(n + 1);
  Vec3 bg = Vec3::Zero(), ba = Vec3::Zero();
  for (long i = 0; i <= n; ++i) {
    const double t = static_cast<double>(i) / cfg.imu_rate;
    if (i > 0) {
      bg += k * nz.sigma_wg * std::sqrt(dt) * draw();
      ba += k * nz.sigma_wa * std::sqrt(dt) * draw();
    }
    const TrajectorySample truth = analytic_trajectory(cfg, t);
    ImuSample s;
    s.t = t;
    s.omega = truth.omega + bg + k * nz.sigma_g / std::sqrt(dt) * draw();
    s.accel = truth.accel + ba + k * nz.sigma_a / std::sqrt(dt) * draw();
    ImuState state = truth.state;
    state.bg = bg;
    state.ba = ba;
    out.samples.push_back(s);
    out.truth.push_back(state);
  }
  return out;
}

namespace {

// Clips the image segment a + s (b - a), s in [0, 1], to the image rectangle.
bool clip_to_image(Vec2& a, Vec2& b, double hw, double hh) {
  double s0 = 0.0, s1 = 1.0;
  const Vec2 d = b - a;
  const double p[4] = {-d.x(), d.x(), -d.y(), d.y()};
  const double q[4] = {a.x() + hw, hw - a.x(), a.y() + hh, hh - a.y()};
  for (int i = 0; i < 4; ++i) {
    if (p[i] == 0.0) {
      if (q[i] < 0.0) return false;
      continue;
    }
    const double s = q[i] / p[i];
    if (p[i] < 0.0) {
      s0 = std::max(s0, s);
    } else {
      s1 = std::min(s1, s);
    }
    if (s0 > s1) return false;
  }
  const Vec2 a0 = a;
  a = a0 + s0 * d;
  b = a0 + s1 * d;
  return true;
}

}  // namespace

FrameMeasurements simulate_camera_frame(const SimConfig& cfg, const ImuState& truth, double t,
                                        std::int64_t frame_id, const World& world, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss;
  const double sigma = cfg.noise_scale * cfg.pixel_sigma / cfg.focal_length;
  const double vp_sigma = cfg.noise_scale * cfg.vp_pixel_sigma / cfg.focal_length;
  const Pose cam = Pose{truth.R, truth.p}.compose(cfg.extrinsics);
  const Mat3 Rt = cam.R.transpose();

  FrameMeasurements frame;
  frame.t = t;
  frame.frame_id = frame_id;
  for (const auto& pt : world.points) {
    const Vec3 pc = Rt * (pt.p - cam.p);
    if (pc.z() <= cfg.near_clip || pc.norm() > cfg.visibility_range) continue;
    const Vec2 z = pc.head<2>() / pc.z();
    if (std::abs(z.x()) > cfg.half_width || std::abs(z.y()) > cfg.half_height) continue;
    frame.points.push_back({pt.id, z + sigma * Vec2(gauss(rng), gauss(rng))});
  }

  for (const auto& line : world.lines) {
    Vec3 a = Rt * (line.a - cam.p), b = Rt * (line.b - cam.p);
    if (a.z() < cfg.near_clip && b.z() < cfg.near_clip) continue;
    if (a.z() < cfg.near_clip) a = b + (cfg.near_clip - b.z()) / (a.z() - b.z()) * (a - b);
    if (b.z() < cfg.near_clip) b = a + (cfg.near_clip - a.z()) / (b.z() - a.z()) * (b - a);
    if ((0.5 * (a + b)).norm() > cfg.visibility_range) continue;
    Vec2 ua = a.head<2>() / a.z(), ub = b.head<2>() / b.z();
    if (!clip_to_image(ua, ub, cfg.half_width, cfg.half_height)) continue;
    if ((ub - ua).norm() < cfg.min_segment) continue;

    LineMeasurement m;
    m.id = line.id;
    const Vec2 na = ua + sigma * Vec2(gauss(rng), gauss(rng));
    const Vec2 nb = ub + sigma * Vec2(gauss(rng), gauss(rng));
    m.p_s = Vec3(na.x(), na.y(), 1.0);
    m.p_e = Vec3(nb.x(), nb.y(), 1.0);
    const Vec3 dc = Rt * line.direction();
    if (std::abs(dc.z()) > 1e-6) {
      const Vec2 vp = dc.head<2>() / dc.z();
      if (vp.norm() <= cfg.vp_max_coord) m.vp = vp + vp_sigma * Vec2(gauss(rng), gauss(rng));
    }
    frame.lines.push_back(m);
  }
  return frame;
}

ImuState perturb_imu(const ImuState& truth, const VecX& error, ErrorModel model) {
  const Vec3 th = error.segment<3>(idx::kTheta);
  ImuState est = truth;
  est.R = so3_exp(-th) * truth.R;
  if (model == ErrorModel::RightInvariant) {
    const Mat3 J = left_jacobian(th);
    const Mat3 Rinv = so3_exp(-th);
    est.v = Rinv * (truth.v - J * error.segment<3>(idx::kVel));
    est.p = Rinv * (truth.p - J * error.segment<3>(idx::kPos));
  } else {
    est.v = truth.v - error.segment<3>(idx::kVel);
    est.p = truth.p - error.segment<3>(idx::kPos);
  }
  est.bg = truth.bg - error.segment<3>(idx::kBg);
  est.ba = truth.ba - error.segment<3>(idx::kBa);
  return est;
}

MatX initial_covariance(const SimConfig& cfg) {
  VecX sd(kImuDim);
  sd << Vec3::Constant(cfg.init_sigma_theta), Vec3::Constant(cfg.init_sigma_v), Vec3::Constant(cfg.init_sigma_p),
      Vec3::Constant(cfg.init_sigma_bg), Vec3::Constant(cfg.init_sigma_ba);
  return sd.cwiseAbs2().asDiagonal();
}

SimData generate_data(const SimConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  // Independent streams so that, e.g., changing the camera model does not shift IMU noise.
  auto stream = [seed](std::uint64_t k) {
    std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                      static_cast<std::uint32_t>(k)};
    return std::mt19937_64(seq);
  };
  auto world_rng = stream(1), imu_rng = stream(2), cam_rng = stream(3), init_rng = stream(4);

  SimData data;
  data.world = generate_landmarks(cfg, world_rng);
  data.imu = simulate_imu(cfg, imu_rng);
  const std::size_t stride = static_cast<std::size_t>(cfg.imu_rate / cfg.cam_rate);
  for (std::size_t i = 0, f = 0; i < data.imu.samples.size(); i += stride, ++f) {
    data.frame_samples.push_back(i);
    data.frames.push_back(simulate_camera_frame(cfg, data.imu.truth[i], data.imu.samples[i].t,
                                                static_cast<std::int64_t>(f), data.world, cam_rng));
  }

  std::normal_distribution<double> gauss;
  const MatX P0 = initial_covariance(cfg);
  data.init_error.resize(kImuDim);
  for (int i = 0; i < kImuDim; ++i) {
    data.init_error[i] = cfg.init_error_scale * std::sqrt(P0(i, i)) * gauss(init_rng);
  }
  data.init_cov = P0;
  return data;
}

EstimatorConfig estimator_config(const SimConfig& cfg, Variant variant) {
  EstimatorConfig ec = make_estimator_config(variant);
  ec.noise = cfg.noise;
  ec.window_size = cfg.window_size;
  ec.extrinsics = cfg.extrinsics;
  ec.update.pixel_sigma = cfg.pixel_sigma;
  ec.update.vp_pixel_sigma = cfg.vp_pixel_sigma;
  ec.update.focal_length = cfg.focal_length;
  ec.update.min_track = cfg.min_track;
  ec.update.chi2_confidence = cfg.chi2_confidence;
  ec.update.max_features = cfg.max_features;
  ec.gn = cfg.gn;
  return ec;
}

RunResult run_filter(const SimConfig& cfg, const SimData& data, Variant variant) {
  const EstimatorConfig ec = estimator_config(cfg, variant);
  return run_filter(ec, data, variant);
}

RunResult run_filter(const EstimatorConfig& ec, const SimData& data, Variant variant) {
  RunResult out;
  out.variant = variant;
  Belief initial;
  initial.state.time = data.imu.samples.front().t;
  initial.state.imu = perturb_imu(data.imu.truth.front(), data.init_error, ec.model);
  initial.cov = data.init_cov;

  auto record = [&](const Estimator& est, std::size_t i) {
    RunStep step;
    step.t = data.imu.samples[i].t;
    step.truth = data.imu.truth[i];
    step.estimate = est.belief().state.imu;
    step.cov = est.belief().cov.topLeftCorner(kImuDim, kImuDim);
    out.steps.push_back(std::move(step));
  };

  try {
    Estimator est(ec, initial, data.imu.samples.front());
    std::size_t next_frame = 0;
    for (std::size_t i = 0; i < data.imu.samples.size(); ++i) {
      if (i > 0) est.feed_imu(data.imu.samples[i]);
      if (next_frame < data.frames.size() && data.frame_samples[next_frame] == i) {
        est.feed_frame(data.frames[next_frame++]);
        record(est, i);
        const double err = (est.belief().state.imu.p - data.imu.truth[i].p).norm();
        if (!(err <= kDivergenceLimit)) {
          out.aborted = true;
          out.diagnostic = "position error " + std::to_string(err) + " m at t=" +
                           std::to_string(data.imu.samples[i].t);
          break;
        }
      }
    }
    out.counters = est.counters();
  } catch (const Error& e) {
    out.aborted = true;
    out.diagnostic = e.what();
  }
  return out;
}

RunResult run_simulation(const SimConfig& cfg, Variant variant, std::uint64_t seed) {
  return run_filter(cfg, generate_data(cfg, seed), variant);
}

}  // namespace plvio
