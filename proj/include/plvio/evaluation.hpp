#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "plvio/simulator.hpp"

namespace plvio {

// Dof-normalized NEES of the IMU pose (theta, p) in the filter's own chart, or of
// the full 15-dof IMU error when `full_state`. Empty when the block is singular.
std::optional<double> pose_nees(const ImuState& truth, const ImuState& estimate, const MatX& imu_cov,
                                ErrorModel model, bool full_state = false);

struct RunMetrics {
  std::vector<double> t;
  std::vector<double> pos_err2;  // squared position error (m^2)
  std::vector<double> rot_err2;  // squared rotation angle (rad^2)
  std::vector<double> nees;      // NaN where excluded
  double anees = 0.0;            // mean over valid steps
  int excluded = 0;
};

RunMetrics run_metrics(const RunResult& run, bool full_state = false);

struct ErrorSeries {
  std::vector<double> t;
  std::vector<double> pos_rmse;
  std::vector<double> rot_rmse;
};

// Root mean square over runs at each step. Throws DimensionError when the runs
// differ in length and ConfigError when `runs` is empty.
ErrorSeries rmse_series(const std::vector<RunMetrics>& runs);
ErrorSeries rmse_series(const std::vector<RunResult>& runs);

struct VariantAggregate {
  Variant variant = Variant::PlvIekf;
  ErrorSeries rmse;
  std::vector<double> mean_nees;  // per step, averaged over runs
  double anees = 0.0;             // over all runs and steps
  double mean_pos_rmse = 0.0;     // time average of rmse.pos_rmse
  double final_pos_rmse = 0.0;
  double mean_rot_rmse = 0.0;
  int runs_used = 0;
  std::vector<std::string> aborted;  // diagnostics of excluded runs
  EstimatorCounters counters;        // summed over used runs
};

VariantAggregate aggregate(Variant variant, const std::vector<RunMetrics>& runs);

struct MonteCarloOptions {
  int runs = 30;
  std::uint64_t base_seed = 1;
  bool full_state_nees = false;
  int threads = 0;  // 0: hardware concurrency
};

// Runs every variant on the same generated data for each seed base_seed + i.
std::vector<VariantAggregate> monte_carlo(const SimConfig& cfg, const std::vector<Variant>& variants,
                                          const MonteCarloOptions& options);

// Reference fixture: a correctly specified linear-Gaussian Kalman filter
// (constant-velocity model) run over independent trials.
struct FixtureResult {
  double anees = 0.0;
  double lower = 0.0;  // two-sided chi-square band on the dof-normalized mean
  double upper = 0.0;
  int samples = 0;
};

FixtureResult linear_kf_fixture(int samples, std::uint64_t seed, int steps = 20, double band = 0.99);

}  // namespace plvio
