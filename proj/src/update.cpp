#include "plvio/update.hpp"

#include <Eigen/Cholesky>
#include <Eigen/QR>
#include <boost/math/distributions/chi_squared.hpp>
#include <mutex>

#include "plvio/error.hpp"

namespace plvio {

void FeatureDatabase::add_point(std::int64_t id, const PointObservation& obs) {
  auto& track = points[id];
  track.id = id;
  track.observations.push_back(obs);
}

void FeatureDatabase::add_line(std::int64_t id, const LineObservation& obs, const std::optional<VpObservation>& vp) {
  auto& track = lines[id];
  track.id = id;
  track.observations.push_back(obs);
  if (vp) track.vp_observations.push_back(*vp);
}

void FeatureDatabase::remove_frame(std::int64_t frame_id) {
  auto drop = [frame_id](auto& obs) {
    std::erase_if(obs, [frame_id](const auto& o) { return o.frame_id == frame_id; });
  };
  for (auto it = points.begin(); it != points.end();) {
    drop(it->second.observations);
    it = it->second.observations.empty() ? points.erase(it) : std::next(it);
  }
  for (auto it = lines.begin(); it != lines.end();) {
    drop(it->second.observations);
    drop(it->second.vp_observations);
    it = it->second.observations.empty() ? lines.erase(it) : std::next(it);
  }
}

namespace {

template <typename Track>
void harvest(std::map<std::int64_t, Track>& tracks, std::vector<Track>& out, std::int64_t current_frame,
             std::optional<std::int64_t> oldest, int min_track) {
  for (auto it = tracks.begin(); it != tracks.end();) {
    const auto& obs = it->second.observations;
    const bool lost = obs.back().frame_id != current_frame;
    bool touches_oldest = false;
    if (oldest) {
      for (const auto& o : obs) touches_oldest |= o.frame_id == *oldest;
    }
    const bool long_enough = static_cast<int>(obs.size()) > min_track;
    if ((lost || touches_oldest) && long_enough) {
      out.push_back(std::move(it->second));
      it = tracks.erase(it);
    } else if (lost) {
      it = tracks.erase(it);
    } else {
      ++it;
    }
  }
}

}  // namespace

MatureFeatures collect_mature_features(FeatureDatabase& db, const VioState& window, std::int64_t current_frame,
                                       int min_track) {
  std::optional<std::int64_t> oldest;
  if (!window.clones.empty() && window.clones.size() >= window.window_size) {
    oldest = window.clones.front().frame_id;
  }
  MatureFeatures out;
  harvest(db.points, out.points, current_frame, oldest, min_track);
  harvest(db.lines, out.lines, current_frame, oldest, min_track);
  return out;
}

double chi2_threshold(int dof, double confidence) {
  static std::mutex mutex;
  static std::map<std::pair<int, double>, double> cache;
  const std::lock_guard lock(mutex);
  const auto key = std::make_pair(dof, confidence);
  if (auto it = cache.find(key); it != cache.end()) return it->second;
  const double value = boost::math::quantile(boost::math::chi_squared(dof), confidence);
  cache.emplace(key, value);
  return value;
}

bool chi2_gate(const StackedSystem& system, const MatX& cov, double confidence) {
  if (system.rows() == 0) return true;
  if (system.cols() != cov.rows()) {
    throw Error(ErrorKind::DimensionError, "system width does not match covariance");
  }
  MatX S = system.H * cov * system.H.transpose();
  S.diagonal() += system.noise_var;
  const Eigen::LDLT<MatX> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    return false;
  }
  const double mahalanobis = system.r.dot(ldlt.solve(system.r));
  return mahalanobis < chi2_threshold(system.rows(), confidence);
}

StackedSystem qr_compress(const StackedSystem& system) {
  const int m = system.rows(), n = system.cols();
  if (m <= n) return system;

  MatX H = system.H;
  VecX r = system.r;
  double var = system.noise_var[0];
  if (system.noise_var.maxCoeff() - system.noise_var.minCoeff() > 1e-12 * system.noise_var.maxCoeff()) {
    const VecX w = system.noise_var.cwiseSqrt().cwiseInverse();
    H = w.asDiagonal() * H;
    r = r.cwiseProduct(w);
    var = 1.0;
  }

  const Eigen::ColPivHouseholderQR<MatX> qr(H);
  const int rank = static_cast<int>(qr.rank());
  const MatX R = qr.matrixQR().topRows(rank).triangularView<Eigen::Upper>();
  const MatX QtH = R * qr.colsPermutation().transpose();
  const VecX Qtr = qr.householderQ().transpose() * r;

  StackedSystem out;
  out.H = QtH;
  out.r = Qtr.head(rank);
  out.noise_var = VecX::Constant(rank, var);
  return out;
}

UpdateResult kalman_update(const Belief& belief, const StackedSystem& system, ErrorModel model) {
  UpdateResult out{belief, false};
  if (system.rows() == 0) return out;
  const MatX& P = belief.cov;
  if (system.cols() != P.rows()) {
    throw Error(ErrorKind::DimensionError, "system width does not match covariance");
  }
  const MatX PHt = P * system.H.transpose();
  MatX S = system.H * PHt;
  S.diagonal() += system.noise_var;
  const Eigen::LDLT<MatX> ldlt(S);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive() || ldlt.vectorD().minCoeff() <= 0.0) {
    return out;
  }
  const MatX K = ldlt.solve(PHt.transpose()).transpose();
  const VecX delta = K * system.r;

  MatX IKH = -K * system.H;
  IKH.diagonal().array() += 1.0;
  out.belief.cov = IKH * P * IKH.transpose() + K * system.noise_var.asDiagonal() * K.transpose();
  symmetrize(out.belief.cov);
  out.belief.state = apply_correction(belief.state, delta, model);
  out.applied = true;
  return out;
}

}  // namespace plvio
