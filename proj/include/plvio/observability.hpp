#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "plvio/measurements.hpp"
#include "plvio/propagation.hpp"

namespace plvio {

// Diagnostic state: the IMU error followed by one line error (dpsi, dphi), 19 columns.
inline constexpr int kObsDim = kImuDim + 4;
inline constexpr int kObsLine = kImuDim;

struct ObservabilityRecord {
  MatX H;    // measurement Jacobian at step k
  MatX Phi;  // accumulated transition Phi_{k-1} ... Phi_m; empty means identity
};

// Stacks H_k (Phi_{k-1} ... Phi_m). Throws DimensionError on inconsistent widths and
// ConfigError on an empty record list.
MatX build_observability_matrix(const std::vector<ObservabilityRecord>& records);

// Eleven directions annihilated by the VP rows: joint rotation of body and line,
// velocity, position, rotation of the line about its direction, and line scale.
MatX build_null_basis_vp(const PluckerLine& line);

// Global translations (x, y, z) and rotation about gravity, expressed in the error
// chart of `model` at `imu`, with the induced line change (global line error).
MatX global_null_basis(const ImuState& imu, const PluckerLine& line, ErrorModel model);

// ||O N||_inf / max(1, ||O||_inf).
double nullspace_residual(const MatX& O, const MatX& N);

// Basis [0; N_o] of the kernel of O_l restricted to the line columns.
MatX line_kernel_basis(const MatX& O_l, double rel_tol = 1e-8);

struct VpObservability {
  double sigma_min = 0.0;
  double sigma_max = 0.0;
  int line_kernel_dim = 0;  // columns of N_l
  bool degenerate = false;  // VP rows see none of the line kernel
};

// Singular values of O_v N_l.
VpObservability vp_full_observability_check(const MatX& O_l, const MatX& O_v, const MatX& N_l);

// Jacobians of one line view (endpoint rows) and its VP rows w.r.t. the 19-column
// diagnostic state, through the camera extrinsics.
struct DiagnosticRows {
  MatX line;  // 2 x 19
  MatX vp;    // 2 x 19, empty when the VP is at infinity
};
DiagnosticRows diagnostic_rows(const ImuState& imu, const Pose& extrinsics, const PluckerLine& line,
                               const Vec3& p_s, const Vec3& p_e, ErrorModel model);

struct ObsCheckRow {
  std::string label;
  double value = 0.0;
  std::string relation;  // "<", ">", ">=" or "info"
  double threshold = 0.0;
  bool pass = true;
};

struct ObsCheckOptions {
  int frames = 10;
  double frame_dt = 0.1;
  int imu_steps_per_frame = 10;
  double radius = 6.0;
  double loop_period = 12.0;
  Pose extrinsics{(Mat3() << 1, 0, 0, 0, 0, 1, 0, -1, 0).finished(), Vec3(0.05, 0.02, 0.01)};
  std::uint64_t seed = 1;
  // Noise of the estimates used for the estimate-linearized standard model.
  double est_sigma_theta = 0.01;
  double est_sigma_v = 0.1;
  double est_sigma_p = 0.1;
  double est_sigma_line = 0.01;  // per-frame orthonormal line error
};

// Runs the full set of diagnostics on a circular trajectory observing one generic
// structural line.
std::vector<ObsCheckRow> run_observability_checks(const ObsCheckOptions& options);

}  // namespace plvio
