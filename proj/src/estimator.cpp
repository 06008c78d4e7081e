#include "plvio/estimator.hpp"

#include <algorithm>
#include <cctype>

#include "plvio/error.hpp"

namespace plvio {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::Msckf: return "msckf";
    case Variant::Iekf: return "iekf";
    case Variant::PlvMsckf: return "plv-msckf";
    case Variant::PlvIekf: return "plv-iekf";
  }
  return "unknown";
}

Variant parse_variant(const std::string& name) {
  std::string s = name;
  std::transform(s.begin(), s.end(), s.begin(), [](unsigned char c) { return std::tolower(c); });
  std::replace(s.begin(), s.end(), '_', '-');
  for (Variant v : {Variant::Msckf, Variant::Iekf, Variant::PlvMsckf, Variant::PlvIekf}) {
    if (to_string(v) == s) return v;
  }
  throw Error(ErrorKind::ConfigError, "unknown variant '" + name + "'");
}

ErrorModel error_model(Variant v) {
  return v == Variant::Msckf || v == Variant::PlvMsckf ? ErrorModel::StandardAdditive : ErrorModel::RightInvariant;
}

bool uses_lines(Variant v) { return v == Variant::PlvMsckf || v == Variant::PlvIekf; }

EstimatorConfig make_estimator_config(Variant v) {
  EstimatorConfig cfg;
  cfg.model = error_model(v);
  cfg.use_lines = uses_lines(v);
  cfg.use_vp = cfg.use_lines;
  return cfg;
}

Estimator::Estimator(EstimatorConfig config, Belief initial, const ImuSample& first)
    : config_(std::move(config)), belief_(std::move(initial)), last_(first) {
  belief_.state.window_size = config_.window_size;
  belief_.state.extrinsics = config_.extrinsics;
  if (belief_.cov.rows() != belief_.state.dim() || belief_.cov.cols() != belief_.state.dim()) {
    throw Error(ErrorKind::DimensionError, "initial covariance does not match the state");
  }
  last_.t = belief_.state.time;
}

void Estimator::feed_imu(const ImuSample& sample) {
  const double prev = buffer_.empty() ? last_.t : buffer_.back().t;
  if (!(sample.t > prev)) {
    throw Error(ErrorKind::TimeOrderError, "IMU sample at t=" + std::to_string(sample.t) + " not after " +
                                               std::to_string(prev));
  }
  buffer_.push_back(sample);
}

void Estimator::propagate_to(double t) {
  if (t < belief_.state.time) {
    throw Error(ErrorKind::TimeOrderError, "frame at t=" + std::to_string(t) + " precedes the filter time");
  }
  TransitionBundle bundle;
  ImuState& imu = belief_.state.imu;
  while (last_.t < t) {
    ImuSample next;
    if (!buffer_.empty() && buffer_.front().t <= t) {
      next = buffer_.front();
      buffer_.pop_front();
    } else if (!buffer_.empty()) {
      const ImuSample& b = buffer_.front();
      const double a = (t - last_.t) / (b.t - last_.t);
      next.t = t;
      next.omega = last_.omega + a * (b.omega - last_.omega);
      next.accel = last_.accel + a * (b.accel - last_.accel);
    } else {
      next = last_;
      next.t = t;
    }
    ImuSample mid;
    mid.t = last_.t;
    mid.omega = 0.5 * (last_.omega + next.omega);
    mid.accel = 0.5 * (last_.accel + next.accel);
    const ContinuousModel lin = linearize(imu, mid, config_.model, config_.gravity);
    bundle.append(discretize(lin.F, lin.G, config_.noise, next.t - last_.t));
    imu = propagate_mean(imu, last_, next, config_.gravity);
    last_ = next;
  }
  belief_.cov = propagate_covariance(belief_.cov, bundle);
  belief_.state.time = t;
}

void Estimator::feed_frame(const FrameMeasurements& frame) {
  if (last_frame_ && frame.frame_id <= *last_frame_) {
    throw Error(ErrorKind::TimeOrderError, "frame id " + std::to_string(frame.frame_id) + " not increasing");
  }
  propagate_to(frame.t);

  if (belief_.state.clones.size() >= belief_.state.window_size) {
    const std::int64_t oldest = belief_.state.clones.front().frame_id;
    belief_ = marginalize_oldest(belief_);
    db_.remove_frame(oldest);
  }
  belief_ = clone_camera(belief_, config_.model, frame.frame_id);
  last_frame_ = frame.frame_id;

  for (const auto& pm : frame.points) db_.add_point(pm.id, {frame.frame_id, pm.z});
  if (config_.use_lines) {
    for (const auto& lm : frame.lines) {
      std::optional<VpObservation> vp;
      if (config_.use_vp && lm.vp) vp = VpObservation{frame.frame_id, *lm.vp};
      db_.add_line(lm.id, {frame.frame_id, lm.p_s, lm.p_e}, vp);
    }
  }

  MatureFeatures mature = collect_mature_features(db_, belief_.state, frame.frame_id, config_.update.min_track);
  update(mature);
}

std::optional<StackedSystem> Estimator::point_system(PointTrack& track) {
  try {
    track.position = triangulate_point(track, belief_.state.clones);
    const PointLinearization lin = point_jacobians(belief_.state, track, config_.model);
    const double var = config_.update.line_sigma() * config_.update.line_sigma();
    return nullspace_project(lin.H_x, lin.H_f, lin.r, VecX::Constant(lin.r.size(), var));
  } catch (const Error&) {
    return std::nullopt;
  }
}

std::optional<StackedSystem> Estimator::line_system(LineTrack& track) {
  try {
    const PluckerLine initial = triangulate_line(track, belief_.state.clones);
    // An unconverged refinement leaves the line far from the measurements and the
    // first-order projection no longer describes the residual. The endpoints alone must
    // pin the line: VP rows fix only its direction and would otherwise hide a line whose
    // back-projection planes are nearly coplanar.
    RefineResult refined = refine_line(initial, track, belief_.state.clones, config_.gn);
    if (!refined.converged) return std::nullopt;
    if (track.structural()) {
      refined = refine_structural_line(refined.line, track, belief_.state.clones, config_.gn);
      if (!refined.converged) return std::nullopt;
    }
    track.line = refined.line;
    const LineStack stack = line_stack(belief_.state, track, config_.model, config_.line_mode,
                                       config_.update.line_sigma(), config_.update.vp_sigma());
    StackedSystem sys = project_out_line(stack.H_x, stack.H_line, stack.r, stack.noise_var);
    counters_.vp_rows += stack.vp_rows;
    return sys;
  } catch (const Error&) {
    return std::nullopt;
  }
}

void Estimator::update(MatureFeatures& mature) {
  const int budget = config_.update.max_features;
  if (budget > 0) {
    if (static_cast<int>(mature.points.size()) > budget) mature.points.resize(budget);
    const int left = budget - static_cast<int>(mature.points.size());
    if (static_cast<int>(mature.lines.size()) > left) mature.lines.resize(std::max(left, 0));
  }

  StackedSystem system = StackedSystem::empty(belief_.state.dim());
  const double confidence = config_.update.chi2_confidence;
  for (auto& track : mature.points) {
    auto sys = point_system(track);
    if (sys && (!config_.gate || chi2_gate(*sys, belief_.cov, confidence))) {
      system.append(*sys);
      ++counters_.points_used;
    } else {
      ++counters_.points_rejected;
    }
  }
  if (config_.use_lines) {
    for (auto& track : mature.lines) {
      auto sys = line_system(track);
      if (sys && (!config_.gate || chi2_gate(*sys, belief_.cov, confidence))) {
        system.append(*sys);
        ++counters_.lines_used;
      } else {
        ++counters_.lines_rejected;
      }
    }
  }
  if (system.rows() == 0) return;
  if (config_.compress) system = qr_compress(system);
  UpdateResult result = kalman_update(belief_, system, config_.model);
  if (result.applied) {
    belief_ = std::move(result.belief);
    ++counters_.updates;
  } else {
    ++counters_.skipped_updates;
  }
}

}  // namespace plvio
