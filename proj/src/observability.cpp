#include "plvio/observability.hpp"

#include <Eigen/SVD>
#include <numbers>
#include <random>

#include "plvio/error.hpp"

namespace plvio {

MatX build_observability_matrix(const std::vector<ObservabilityRecord>& records) {
  if (records.empty()) throw Error(ErrorKind::ConfigError, "observability matrix needs a record");
  const Eigen::Index cols = records.front().H.cols();
  Eigen::Index rows = 0;
  for (const auto& r : records) {
    if (r.H.cols() != cols) throw Error(ErrorKind::DimensionError, "records differ in width");
    if (r.Phi.size() != 0 && (r.Phi.rows() != cols || r.Phi.cols() != cols)) {
      throw Error(ErrorKind::DimensionError, "transition product does not match the state");
    }
    rows += r.H.rows();
  }
  MatX O(rows, cols);
  Eigen::Index row = 0;
  for (const auto& r : records) {
    if (r.Phi.size() == 0) {
      O.middleRows(row, r.H.rows()) = r.H;
    } else {
      O.middleRows(row, r.H.rows()) = r.H * r.Phi;
    }
    row += r.H.rows();
  }
  return O;
}

MatX build_null_basis_vp(const PluckerLine& line) {
  MatX N = MatX::Zero(kObsDim, 11);
  N.block<3, 3>(idx::kTheta, 0).setIdentity();
  N.block<3, 3>(kObsLine, 0).setIdentity();
  N.block<3, 3>(idx::kVel, 3).setIdentity();
  N.block<3, 3>(idx::kPos, 6).setIdentity();
  N.block<3, 1>(kObsLine, 9) = line.d;
  N(kObsLine + 3, 10) = line.d.norm();
  return N;
}

MatX global_null_basis(const ImuState& imu, const PluckerLine& line, ErrorModel model) {
  MatX N = MatX::Zero(kObsDim, 4);
  const double nn = line.n.norm(), dn = line.d.norm();
  const Vec3 e1 = line.n / nn, d_hat = line.d / dn;
  const Vec3 e3 = e1.cross(d_hat);
  for (int i = 0; i < 3; ++i) {
    const Vec3 t = Vec3::Unit(i);
    // Translating the world by t adds t x d to the moment; d is unchanged.
    const Vec3 dn_moment = t.cross(line.d);
    N.block<3, 1>(idx::kPos, i) = t;
    N.block<3, 1>(kObsLine, i) = -(dn_moment.dot(e3) / nn) * d_hat;
    N(kObsLine + 3, i) = -dn * dn_moment.dot(e1) / (nn * nn + dn * dn);
  }
  const Vec3 ez = Vec3::UnitZ();
  N.block<3, 1>(idx::kTheta, 3) = ez;
  N.block<3, 1>(kObsLine, 3) = ez;
  if (model == ErrorModel::StandardAdditive) {
    N.block<3, 1>(idx::kVel, 3) = ez.cross(imu.v);
    N.block<3, 1>(idx::kPos, 3) = ez.cross(imu.p);
  }
  return N;
}

double nullspace_residual(const MatX& O, const MatX& N) {
  if (O.cols() != N.rows()) throw Error(ErrorKind::DimensionError, "O and N are incompatible");
  auto inf_norm = [](const MatX& A) { return A.size() ? A.cwiseAbs().rowwise().sum().maxCoeff() : 0.0; };
  return inf_norm(O * N) / std::max(1.0, inf_norm(O));
}

MatX line_kernel_basis(const MatX& O_l, double rel_tol) {
  if (O_l.cols() != kObsDim) throw Error(ErrorKind::DimensionError, "expected the 19-column diagnostic state");
  const MatX A = O_l.rightCols(4);
  const Eigen::JacobiSVD<MatX> svd(A, Eigen::ComputeFullV);
  const VecX& s = svd.singularValues();
  const double smax = s.size() ? s[0] : 0.0;
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) rank += s[i] > rel_tol * smax;
  MatX N = MatX::Zero(kObsDim, 4 - rank);
  N.bottomRows(4) = svd.matrixV().rightCols(4 - rank);
  return N;
}

VpObservability vp_full_observability_check(const MatX& O_l, const MatX& O_v, const MatX& N_l) {
  if (O_v.cols() != N_l.rows() || O_l.cols() != N_l.rows()) {
    throw Error(ErrorKind::DimensionError, "O and N_l are incompatible");
  }
  VpObservability out;
  out.line_kernel_dim = static_cast<int>(N_l.cols());
  if (N_l.cols() == 0) return out;
  const MatX M = O_v * N_l;
  const Eigen::JacobiSVD<MatX> svd(M);
  const VecX& s = svd.singularValues();
  out.sigma_max = s.size() ? s[0] : 0.0;
  out.sigma_min = M.rows() >= M.cols() ? s[s.size() - 1] : 0.0;
  const double scale = std::max(1.0, O_v.size() ? O_v.cwiseAbs().maxCoeff() : 0.0);
  out.degenerate = out.sigma_max <= 1e-8 * scale;
  return out;
}

namespace {

Eigen::Matrix<double, 6, 15> clone_jacobian(const ImuState& imu, const Pose& extrinsics, ErrorModel model) {
  Eigen::Matrix<double, 6, 15> J = Eigen::Matrix<double, 6, 15>::Zero();
  J.block<3, 3>(0, idx::kTheta).setIdentity();
  J.block<3, 3>(3, idx::kPos).setIdentity();
  if (model == ErrorModel::StandardAdditive) J.block<3, 3>(3, idx::kTheta) = -skew(imu.R * extrinsics.p);
  return J;
}

}  // namespace

DiagnosticRows diagnostic_rows(const ImuState& imu, const Pose& extrinsics, const PluckerLine& line,
                               const Vec3& p_s, const Vec3& p_e, ErrorModel model) {
  const Pose cam = Pose{imu.R, imu.p}.compose(extrinsics);
  const CameraClone clone{cam.R, cam.p, 0};
  const auto Jc = clone_jacobian(imu, extrinsics, model);

  DiagnosticRows out;
  const LineLinearization lin = line_jacobians(clone, line, p_s, p_e, LineError::Global, model);
  out.line = MatX::Zero(2, kObsDim);
  out.line.leftCols(kImuDim) = lin.H_X * Jc;
  out.line.rightCols(4) = lin.H_L;

  const Vec3 dc = cam.R.transpose() * line.d;
  if (std::abs(dc.z()) > 1e-6 * dc.norm()) {
    const VpLinearization vp = vp_jacobians(clone, line, dc.head<2>() / dc.z(), LineError::Global);
    out.vp = MatX::Zero(2, kObsDim);
    out.vp.leftCols(kImuDim) = vp.H_X * Jc;
    out.vp.rightCols(4) = vp.H_v;
  } else {
    out.vp = MatX::Zero(0, kObsDim);
  }
  return out;
}

namespace {

struct Trajectory {
  double radius, period;
  // Same circle and attitude convention as the simulator.
  ImuState state(double t) const {
    const double w = 2.0 * std::numbers::pi / period, th = w * t;
    const double c = std::cos(th), s = std::sin(th);
    ImuState x;
    x.p = Vec3(radius * c, radius * s, 0.0);
    x.v = Vec3(-radius * w * s, radius * w * c, 0.0);
    x.R << -s, -c, 0.0, c, -s, 0.0, 0.0, 0.0, 1.0;
    return x;
  }
  ImuSample input(double t) const {
    const double w = 2.0 * std::numbers::pi / period;
    return {t, Vec3(0.0, 0.0, w), Vec3(0.0, radius * w * w, -kGravity.z())};
  }
};

struct Scenario {
  MatX O_l, O_v, O;
  MatX first_line, first_vp;  // single-view rows at the first frame
  ImuState first_state;
};

// `est` gives the linearization state for frame k (truth or a perturbed estimate).
// `line_at` gives the line linearization point for frame k.
template <typename StateAt, typename LineAt>
Scenario build_scenario(const ObsCheckOptions& opt, const Trajectory& traj, LineAt line_at, const Vec3& a,
                        const Vec3& b, ErrorModel model, StateAt est) {
  std::vector<ObservabilityRecord> rl, rv;
  MatX acc = MatX::Identity(kObsDim, kObsDim);
  Scenario sc;
  NoiseParams noise;
  const double h = opt.frame_dt / opt.imu_steps_per_frame;
  for (int k = 0; k < opt.frames; ++k) {
    const double t = k * opt.frame_dt;
    const ImuState truth = traj.state(t);
    const Pose cam = Pose{truth.R, truth.p}.compose(opt.extrinsics);
    const Vec3 ca = cam.R.transpose() * (a - cam.p), cb = cam.R.transpose() * (b - cam.p);
    if (ca.z() <= kMinDepth || cb.z() <= kMinDepth) {
      throw Error(ErrorKind::BehindCamera, "diagnostic line leaves the view");
    }
    const ImuState x = est(k, truth);
    const DiagnosticRows rows = diagnostic_rows(x, opt.extrinsics, line_at(k), ca / ca.z(), cb / cb.z(), model);
    if (k == 0) {
      sc.first_line = rows.line;
      sc.first_vp = rows.vp;
      sc.first_state = x;
    }
    rl.push_back({rows.line, acc});
    if (rows.vp.rows()) rv.push_back({rows.vp, acc});

    // Transition to the next frame, linearized at the frame's state.
    Mat15 Phi = Mat15::Identity();
    for (int j = 0; j < opt.imu_steps_per_frame; ++j) {
      const double tj = t + j * h;
      ImuState xj = est(k, traj.state(tj));
      const ContinuousModel lin = linearize(xj, traj.input(tj + 0.5 * h), model);
      Phi = discretize(lin.F, lin.G, noise, h).Phi * Phi;
    }
    MatX step = MatX::Identity(kObsDim, kObsDim);
    step.topLeftCorner(kImuDim, kImuDim) = Phi;
    acc = step * acc;
  }
  sc.O_l = build_observability_matrix(rl);
  sc.O_v = build_observability_matrix(rv);
  sc.O.resize(sc.O_l.rows() + sc.O_v.rows(), kObsDim);
  sc.O << sc.O_l, sc.O_v;
  return sc;
}

int kernel_dim(const MatX& O, double rel_tol = 1e-8) {
  const Eigen::JacobiSVD<MatX> svd(O);
  const VecX& s = svd.singularValues();
  int rank = 0;
  for (int i = 0; i < s.size(); ++i) rank += s[i] > rel_tol * s[0];
  return static_cast<int>(O.cols()) - rank;
}

}  // namespace

std::vector<ObsCheckRow> run_observability_checks(const ObsCheckOptions& opt) {
  const Trajectory traj{opt.radius, opt.loop_period};
  // A generic oblique line in front of the camera for the first second of motion.
  const Vec3 a(-4.0, -2.0, 0.8), b(-2.0, -5.0, 1.4);
  PluckerLine line;
  line.d = b - a;
  line.n = a.cross(b);
  line = line.normalized();

  std::vector<ObsCheckRow> rows;
  auto below = [&](const std::string& label, double v, double thr) { rows.push_back({label, v, "<", thr, v < thr}); };
  auto above = [&](const std::string& label, double v, double thr) { rows.push_back({label, v, ">", thr, v > thr}); };
  auto info = [&](const std::string& label, double v) { rows.push_back({label, v, "info", 0.0, true}); };

  const auto truth_at = [](int, const ImuState& x) { return x; };
  const auto true_line = [&line](int) { return line; };
  const Scenario ri = build_scenario(opt, traj, true_line, a, b, ErrorModel::RightInvariant, truth_at);
  const MatX Nv = build_null_basis_vp(line);
  below("ri_truth_vp_rows_Nv", nullspace_residual(ri.O_v, Nv), 1e-8);
  const MatX G = global_null_basis(ri.first_state, line, ErrorModel::RightInvariant);
  const char* names[4] = {"translation_x", "translation_y", "translation_z", "yaw"};
  for (int i = 0; i < 4; ++i) {
    below(std::string("ri_truth_full_") + names[i], nullspace_residual(ri.O, G.col(i)), 1e-8);
  }
  info("ri_truth_full_kernel_dim", kernel_dim(ri.O));
  info("ri_truth_full_Nv", nullspace_residual(ri.O, Nv));

  // Single view: line rows leave two line directions free; VP rows act on them.
  const MatX N_l = line_kernel_basis(ri.first_line);
  rows.push_back({"line_kernel_dim_without_vp", static_cast<double>(N_l.cols()), ">=", 2.0, N_l.cols() >= 2});
  const VpObservability vp = vp_full_observability_check(ri.first_line, ri.first_vp, N_l);
  above("vp_sigma_min_OvNl", vp.sigma_min, 1e-6);
  above("vp_sigma_max_OvNl", vp.sigma_max, 1e-6);
  info("window_line_kernel_dim_without_vp", static_cast<double>(line_kernel_basis(ri.O_l).cols()));

  const Scenario std_truth = build_scenario(opt, traj, true_line, a, b, ErrorModel::StandardAdditive, truth_at);
  const MatX Gs = global_null_basis(std_truth.first_state, line, ErrorModel::StandardAdditive);
  info("std_truth_full_yaw", nullspace_residual(std_truth.O, Gs.col(3)));

  // Standard model linearized at noisy, frame-varying estimates.
  std::mt19937_64 rng(opt.seed);
  std::normal_distribution<double> gauss;
  std::vector<VecX> errors(opt.frames);
  std::vector<PluckerLine> lines(opt.frames);
  const OrthonormalLine line_o = plucker_to_orthonormal(line);
  for (int k = 0; k < opt.frames; ++k) {
    VecX& e = errors[k];
    e = VecX::Zero(kImuDim);
    for (int i = 0; i < 3; ++i) {
      e[idx::kTheta + i] = opt.est_sigma_theta * gauss(rng);
      e[idx::kVel + i] = opt.est_sigma_v * gauss(rng);
      e[idx::kPos + i] = opt.est_sigma_p * gauss(rng);
    }
    Vec4 dl;
    for (int i = 0; i < 4; ++i) dl[i] = opt.est_sigma_line * gauss(rng);
    lines[k] = orthonormal_to_plucker(orthonormal_retract(line_o, dl, LineError::Global));
  }
  const auto noisy_at = [&](int k, const ImuState& x) {
    ImuState y = x;
    y.R = so3_exp(-errors[k].segment<3>(idx::kTheta)) * x.R;
    y.v -= errors[k].segment<3>(idx::kVel);
    y.p -= errors[k].segment<3>(idx::kPos);
    return y;
  };
  const auto noisy_line = [&lines](int k) { return lines[k]; };
  const Scenario noisy = build_scenario(opt, traj, noisy_line, a, b, ErrorModel::StandardAdditive, noisy_at);
  const MatX Gn = global_null_basis(noisy.first_state, lines[0], ErrorModel::StandardAdditive);
  double worst = 0.0;
  for (int i = 0; i < 4; ++i) {
    const double r = nullspace_residual(noisy.O, Gn.col(i));
    info(std::string("std_estimate_full_") + names[i], r);
    worst = std::max(worst, r);
  }
  above("std_estimate_worst_global_direction", worst, 1e-4);
  return rows;
}

}  // namespace plvio
