#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <vector>

#include "plvio/measurements.hpp"
#include "plvio/state.hpp"

namespace plvio {

struct UpdateConfig {
  double chi2_confidence = 0.95;
  int max_features = 0;  // per update; 0 means all mature features
  double pixel_sigma = 1.0;
  double focal_length = 460.0;
  double vp_pixel_sigma = 1.0;
  int min_track = 5;  // tracks must be observed more than this many times

  double line_sigma() const { return pixel_sigma / focal_length; }
  double vp_sigma() const { return vp_pixel_sigma / focal_length; }
};

// Tracker state: live tracks keyed by feature id.
struct FeatureDatabase {
  std::map<std::int64_t, PointTrack> points;
  std::map<std::int64_t, LineTrack> lines;

  void add_point(std::int64_t id, const PointObservation& obs);
  void add_line(std::int64_t id, const LineObservation& obs, const std::optional<VpObservation>& vp);
  // Removes observations from a marginalized frame and drops emptied tracks.
  void remove_frame(std::int64_t frame_id);
  bool empty() const { return points.empty() && lines.empty(); }
};

struct MatureFeatures {
  std::vector<PointTrack> points;
  std::vector<LineTrack> lines;
};

// Takes out of the database every track that is no longer observed in
// `current_frame`, plus (when the window is full) every track observed by the oldest
// clone. Returned tracks pass the length gate; lost tracks failing it are discarded.
MatureFeatures collect_mature_features(FeatureDatabase& db, const VioState& window, std::int64_t current_frame,
                                       int min_track);

// 95%-style chi-square threshold for `dof`, cached.
double chi2_threshold(int dof, double confidence);

// Accepts iff r^T (H P H^T + R)^-1 r < chi2(rows). Empty systems pass; singular
// innovation covariance rejects.
bool chi2_gate(const StackedSystem& system, const MatX& cov, double confidence = 0.95);

// Orthogonal compression to at most rank(H) rows; preserves H^T R^-1 H and H^T R^-1 r.
StackedSystem qr_compress(const StackedSystem& system);

struct UpdateResult {
  Belief belief;
  bool applied = false;
};

// EKF update through the manifold retraction with Joseph-form covariance.
UpdateResult kalman_update(const Belief& belief, const StackedSystem& system, ErrorModel model);

}  // namespace plvio
