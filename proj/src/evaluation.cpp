#include "plvio/evaluation.hpp"

#include <Eigen/Cholesky>
#include <atomic>
#include <boost/math/distributions/chi_squared.hpp>
#include <cmath>
#include <limits>
#include <random>
#include <thread>

#include "plvio/error.hpp"

namespace plvio {

std::optional<double> pose_nees(const ImuState& truth, const ImuState& estimate, const MatX& imu_cov,
                                ErrorModel model, bool full_state) {
  if (imu_cov.rows() < kImuDim || imu_cov.cols() < kImuDim) {
    throw Error(ErrorKind::DimensionError, "NEES needs the 15x15 IMU covariance block");
  }
  VecX e;
  MatX P;
  if (full_state) {
    VioState a, b;
    a.imu = truth;
    b.imu = estimate;
    e = error_between(a, b, model);
    P = imu_cov.topLeftCorner(kImuDim, kImuDim);
  } else {
    const PoseError pe = pose_error(truth.R, truth.p, estimate.R, estimate.p, model);
    e.resize(6);
    e << pe.theta, pe.pos;
    const int ix[6] = {0, 1, 2, 6, 7, 8};
    P.resize(6, 6);
    for (int i = 0; i < 6; ++i) {
      for (int j = 0; j < 6; ++j) P(i, j) = imu_cov(ix[i], ix[j]);
    }
  }
  const Eigen::LLT<MatX> llt(P);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return e.dot(llt.solve(e)) / static_cast<double>(e.size());
}

RunMetrics run_metrics(const RunResult& run, bool full_state) {
  const ErrorModel model = error_model(run.variant);
  RunMetrics m;
  double sum = 0.0;
  int valid = 0;
  for (const auto& step : run.steps) {
    m.t.push_back(step.t);
    m.pos_err2.push_back((step.truth.p - step.estimate.p).squaredNorm());
    m.rot_err2.push_back(so3_log(step.truth.R * step.estimate.R.transpose()).squaredNorm());
    const auto nees = pose_nees(step.truth, step.estimate, step.cov, model, full_state);
    if (nees) {
      m.nees.push_back(*nees);
      sum += *nees;
      ++valid;
    } else {
      m.nees.push_back(std::numeric_limits<double>::quiet_NaN());
      ++m.excluded;
    }
  }
  m.anees = valid ? sum / valid : std::numeric_limits<double>::quiet_NaN();
  return m;
}

ErrorSeries rmse_series(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw Error(ErrorKind::ConfigError, "rmse_series needs at least one run");
  const std::size_t n = runs.front().t.size();
  for (const auto& r : runs) {
    if (r.t.size() != n) throw Error(ErrorKind::DimensionError, "runs differ in length");
  }
  ErrorSeries out;
  out.t = runs.front().t;
  out.pos_rmse.assign(n, 0.0);
  out.rot_rmse.assign(n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    double p = 0.0, q = 0.0;
    for (const auto& r : runs) {
      p += r.pos_err2[k];
      q += r.rot_err2[k];
    }
    out.pos_rmse[k] = std::sqrt(p / runs.size());
    out.rot_rmse[k] = std::sqrt(q / runs.size());
  }
  return out;
}

ErrorSeries rmse_series(const std::vector<RunResult>& runs) {
  std::vector<RunMetrics> m;
  for (const auto& r : runs) m.push_back(run_metrics(r));
  return rmse_series(m);
}

VariantAggregate aggregate(Variant variant, const std::vector<RunMetrics>& runs) {
  VariantAggregate agg;
  agg.variant = variant;
  agg.runs_used = static_cast<int>(runs.size());
  if (runs.empty()) return agg;
  agg.rmse = rmse_series(runs);
  const std::size_t n = agg.rmse.t.size();
  agg.mean_nees.assign(n, 0.0);
  double total = 0.0;
  long count = 0;
  for (std::size_t k = 0; k < n; ++k) {
    double s = 0.0;
    int c = 0;
    for (const auto& r : runs) {
      if (std::isfinite(r.nees[k])) {
        s += r.nees[k];
        ++c;
      }
    }
    agg.mean_nees[k] = c ? s / c : std::numeric_limits<double>::quiet_NaN();
    total += s;
    count += c;
  }
  agg.anees = count ? total / count : std::numeric_limits<double>::quiet_NaN();
  for (std::size_t k = 0; k < n; ++k) {
    agg.mean_pos_rmse += agg.rmse.pos_rmse[k] / n;
    agg.mean_rot_rmse += agg.rmse.rot_rmse[k] / n;
  }
  agg.final_pos_rmse = n ? agg.rmse.pos_rmse.back() : 0.0;
  return agg;
}

std::vector<VariantAggregate> monte_carlo(const SimConfig& cfg, const std::vector<Variant>& variants,
                                          const MonteCarloOptions& options) {
  if (options.runs < 1) throw Error(ErrorKind::ConfigError, "runs must be >= 1");
  const std::size_t nv = variants.size();
  const std::size_t nr = static_cast<std::size_t>(options.runs);
  std::vector<RunMetrics> metrics(nv * nr);
  std::vector<RunResult> heads(nv * nr);  // steps dropped after metrics are taken

  // One job per seed: data are generated once and shared by all variants.
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < nr; i = next++) {
      const SimData data = generate_data(cfg, options.base_seed + i);
      for (std::size_t v = 0; v < nv; ++v) {
        RunResult run = run_filter(cfg, data, variants[v]);
        metrics[v * nr + i] = run_metrics(run, options.full_state_nees);
        run.steps.clear();
        heads[v * nr + i] = std::move(run);
      }
    }
  };
  unsigned threads = options.threads > 0 ? static_cast<unsigned>(options.threads) : std::thread::hardware_concurrency();
  threads = std::max(1u, std::min<unsigned>(threads, static_cast<unsigned>(nr)));
  if (threads == 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (unsigned k = 0; k < threads; ++k) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }

  std::vector<VariantAggregate> out;
  for (std::size_t v = 0; v < nv; ++v) {
    std::vector<RunMetrics> used;
    std::vector<std::string> aborted;
    EstimatorCounters sum;
    for (std::size_t i = 0; i < nr; ++i) {
      const RunResult& run = heads[v * nr + i];
      if (run.aborted) {
        aborted.push_back("seed " + std::to_string(options.base_seed + i) + ": " + run.diagnostic);
        continue;
      }
      used.push_back(metrics[v * nr + i]);
      sum.points_used += run.counters.points_used;
      sum.lines_used += run.counters.lines_used;
      sum.vp_rows += run.counters.vp_rows;
      sum.points_rejected += run.counters.points_rejected;
      sum.lines_rejected += run.counters.lines_rejected;
      sum.updates += run.counters.updates;
      sum.skipped_updates += run.counters.skipped_updates;
    }
    VariantAggregate agg = aggregate(variants[v], used);
    agg.aborted = std::move(aborted);
    agg.counters = sum;
    out.push_back(std::move(agg));
  }
  return out;
}

FixtureResult linear_kf_fixture(int samples, std::uint64_t seed, int steps, double band) {
  if (samples < 1 || steps < 1) throw Error(ErrorKind::ConfigError, "fixture needs samples and steps");
  // Constant-velocity model with position measurements.
  const double dt = 0.1, q = 0.5, r = 0.2;
  Mat2 F;
  F << 1.0, dt, 0.0, 1.0;
  Mat2 Q;
  Q << q * dt * dt * dt / 3.0, q * dt * dt / 2.0, q * dt * dt / 2.0, q * dt;
  const Eigen::RowVector2d H(1.0, 0.0);
  const Mat2 P0 = Vec2(1.0, 0.25).asDiagonal();
  const Mat2 LQ = Q.llt().matrixL();
  const Mat2 LP = P0.llt().matrixL();

  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss;
  double sum = 0.0;
  for (int s = 0; s < samples; ++s) {
    Vec2 x = LP * Vec2(gauss(rng), gauss(rng));
    Vec2 xh = Vec2::Zero();
    Mat2 P = P0;
    for (int k = 0; k < steps; ++k) {
      x = F * x + LQ * Vec2(gauss(rng), gauss(rng));
      xh = F * xh;
      P = F * P * F.transpose() + Q;
      const double z = H * x + std::sqrt(r) * gauss(rng);
      const double S = H * P * H.transpose() + r;
      const Vec2 K = P * H.transpose() / S;
      xh += K * (z - H * xh);
      P = (Mat2::Identity() - K * H) * P;
    }
    const Vec2 e = x - xh;
    sum += e.dot(P.ldlt().solve(e)) / 2.0;
  }
  FixtureResult out;
  out.samples = samples;
  out.anees = sum / samples;
  const double dof = 2.0 * samples;
  const boost::math::chi_squared chi(dof);
  out.lower = boost::math::quantile(chi, 0.5 * (1.0 - band)) / dof;
  out.upper = boost::math::quantile(chi, 0.5 * (1.0 + band)) / dof;
  return out;
}

}  // namespace plvio
