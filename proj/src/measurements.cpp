#include "plvio/measurements.hpp"

#include <Eigen/QR>
#include <Eigen/SVD>
#include <algorithm>
#include <cmath>
#include <string>

#include "plvio/error.hpp"

namespace plvio {

StackedSystem StackedSystem::empty(int cols) { return {MatX(0, cols), VecX(0), VecX(0)}; }

void StackedSystem::append(const StackedSystem& other) {
  if (other.rows() == 0) return;
  if (other.cols() != cols()) {
    throw Error(ErrorKind::DimensionError, "stacked systems differ in width");
  }
  const int r0 = rows();
  H.conservativeResize(r0 + other.rows(), Eigen::NoChange);
  H.bottomRows(other.rows()) = other.H;
  r.conservativeResize(r0 + other.rows());
  r.tail(other.rows()) = other.r;
  noise_var.conservativeResize(r0 + other.rows());
  noise_var.tail(other.rows()) = other.noise_var;
}

// ---------------------------------------------------------------------------

Vec2 project_point(const Vec3& p_c) {
  if (p_c.z() <= kMinDepth) {
    throw Error(ErrorKind::BehindCamera, "depth " + std::to_string(p_c.z()));
  }
  return p_c.head<2>() / p_c.z();
}

Mat23 projection_jacobian(const Vec3& p_c) {
  const double iz = 1.0 / p_c.z();
  Mat23 J;
  J << iz, 0.0, -p_c.x() * iz * iz,
       0.0, iz, -p_c.y() * iz * iz;
  return J;
}

PointLinearization point_jacobians(const VioState& state, const PointTrack& track, ErrorModel model,
                                   LandmarkError landmark) {
  if (!track.position) {
    throw Error(ErrorKind::DegenerateFeature, "point track is not triangulated");
  }
  const Vec3& pf = *track.position;
  const int m = static_cast<int>(track.observations.size());
  PointLinearization out;
  out.H_x = MatX::Zero(2 * m, state.dim());
  out.H_f = MatX::Zero(2 * m, 3);
  out.r = VecX::Zero(2 * m);

  int anchor = -1;
  std::int64_t anchor_frame = 0;
  for (const auto& obs : track.observations) {
    const int ci = state.clone_index(obs.frame_id);
    if (ci < 0) {
      throw Error(ErrorKind::StaleTrack, "point " + std::to_string(track.id) + " refers to frame " +
                                             std::to_string(obs.frame_id));
    }
    if (anchor < 0 || obs.frame_id < anchor_frame) {
      anchor = ci;
      anchor_frame = obs.frame_id;
    }
  }
  const Mat3 pf_x = skew(pf);

  for (int k = 0; k < m; ++k) {
    const auto& obs = track.observations[k];
    const int ci = state.clone_index(obs.frame_id);
    const CameraClone& c = state.clones[ci];
    const Mat3 Rt = c.R.transpose();
    const Vec3 p_c = Rt * (pf - c.p);
    const Vec2 z_hat = project_point(p_c);
    const Mat23 Jp = projection_jacobian(p_c);

    out.r.segment<2>(2 * k) = obs.z - z_hat;
    out.H_f.block<2, 3>(2 * k, 0) = Jp * Rt;

    const int o = clone_offset(ci);
    const Mat3 d_theta = model == ErrorModel::RightInvariant ? Mat3(Rt * pf_x) : Mat3(Rt * skew(pf - c.p));
    out.H_x.block<2, 3>(2 * k, o) += Jp * d_theta;
    out.H_x.block<2, 3>(2 * k, o + 3) += -Jp * Rt;
    if (landmark == LandmarkError::AnchoredInvariant) {
      out.H_x.block<2, 3>(2 * k, clone_offset(anchor)) += -Jp * Rt * pf_x;
    }
  }
  return out;
}

namespace {

// Returns true when all variances are equal (to relative 1e-12).
bool isotropic(const VecX& noise_var) {
  if (noise_var.size() == 0) return true;
  const double lo = noise_var.minCoeff(), hi = noise_var.maxCoeff();
  return hi - lo <= 1e-12 * hi;
}

StackedSystem project_left_null(const MatX& H_x, const MatX& H_e, const VecX& r, const VecX& noise_var,
                                const char* what) {
  const int rows = static_cast<int>(H_e.rows());
  const int k = static_cast<int>(H_e.cols());
  if (H_x.rows() != rows || r.size() != rows || noise_var.size() != rows) {
    throw Error(ErrorKind::DimensionError, std::string(what) + ": row counts differ");
  }
  if (rows <= k) {
    throw Error(ErrorKind::DegenerateFeature, std::string(what) + ": " + std::to_string(rows) + " rows");
  }

  MatX Hx = H_x, He = H_e;
  VecX res = r;
  double out_var = noise_var.size() ? noise_var[0] : 1.0;
  if (!isotropic(noise_var)) {
    const VecX w = noise_var.cwiseSqrt().cwiseInverse();
    Hx = w.asDiagonal() * Hx;
    He = w.asDiagonal() * He;
    res = res.cwiseProduct(w);
    out_var = 1.0;
  }

  const Eigen::JacobiSVD<MatX> svd(He);
  const VecX& s = svd.singularValues();
  if (s[0] <= 0.0 || s[k - 1] < 1e-8 * s[0]) {
    throw Error(ErrorKind::DegenerateFeature, std::string(what) + ": rank deficient");
  }

  const Eigen::HouseholderQR<MatX> qr(He);
  const MatX Q = qr.householderQ();
  const auto A = Q.rightCols(rows - k);
  StackedSystem out;
  out.H = A.transpose() * Hx;
  out.r = A.transpose() * res;
  out.noise_var = VecX::Constant(rows - k, out_var);
  return out;
}

}  // namespace

StackedSystem nullspace_project(const MatX& H_x, const MatX& H_f, const VecX& r, const VecX& noise_var) {
  return project_left_null(H_x, H_f, r, noise_var, "point");
}

// ---------------------------------------------------------------------------

Vec2 line_residual(const Vec3& l, const Vec3& p_s, const Vec3& p_e) {
  const double n2 = l[0] * l[0] + l[1] * l[1];
  if (n2 <= 1e-16) {
    throw Error(ErrorKind::DegenerateImageLine, "image line has no direction");
  }
  const double inv = 1.0 / std::sqrt(n2);
  return {p_s.dot(l) * inv, p_e.dot(l) * inv};
}

Mat23 line_residual_jacobian(const Vec3& l, const Vec3& p_s, const Vec3& p_e) {
  const Vec2 z = line_residual(l, p_s, p_e);
  const double s = std::hypot(l[0], l[1]);
  const double s2 = s * s;
  Mat23 J;
  J << p_s[0] / s - l[0] * z[0] / s2, p_s[1] / s - l[1] * z[0] / s2, 1.0 / s,
       p_e[0] / s - l[0] * z[1] / s2, p_e[1] / s - l[1] * z[1] / s2, 1.0 / s;
  return J;
}

LineLinearization line_jacobians(const CameraClone& clone, const PluckerLine& world_line, const Vec3& p_s,
                                 const Vec3& p_e, LineError mode, ErrorModel model) {
  const Vec3& n = world_line.n;
  const Vec3& d = world_line.d;
  const Mat3 Rt = clone.R.transpose();
  const Vec3 l = project_line(transform_line(clone.pose(), world_line));
  const Mat23 J = line_residual_jacobian(l, p_s, p_e);

  LineLinearization out;
  out.r = -line_residual(l, p_s, p_e);

  const Mat3 px = skew(clone.p);
  const Mat3 dx = skew(d);
  const Mat3 coupling = skew(n) - px * dx;
  const Mat3 d_theta = model == ErrorModel::RightInvariant ? coupling : Mat3(skew(n - clone.p.cross(d)));
  out.H_X.leftCols<3>() = J * Rt * d_theta;
  out.H_X.rightCols<3>() = J * Rt * dx;

  const double nn = n.norm(), dn = d.norm();
  const Vec3 h_phi = (dn / nn) * n + (nn / dn) * (px * d);
  Mat3 d_psi = -coupling;
  if (mode == LineError::Local) {
    d_psi = d_psi * plucker_to_orthonormal(world_line).U;
  }
  out.H_L.leftCols<3>() = J * Rt * d_psi;
  out.H_L.col(3) = -J * Rt * h_phi;
  return out;
}

Vec2 vp_residual(const Vec2& p_v, const Vec3& d_c) {
  if (std::abs(d_c[2]) <= 1e-6 * d_c.norm()) {
    throw Error(ErrorKind::VpAtInfinity, "line direction is parallel to the image plane");
  }
  return p_v - d_c.head<2>() / d_c[2];
}

VpLinearization vp_jacobians(const CameraClone& clone, const PluckerLine& world_line, const Vec2& p_v,
                             LineError mode) {
  const Vec3& n = world_line.n;
  const Vec3& d = world_line.d;
  const Mat3 Rt = clone.R.transpose();
  const Vec3 d_c = Rt * d;

  VpLinearization out;
  out.r = vp_residual(p_v, d_c);
  const Mat23 J = projection_jacobian(d_c);
  const Mat3 dx = skew(d);
  out.H_X.leftCols<3>() = J * Rt * dx;
  out.H_X.rightCols<3>().setZero();

  Mat3 d_psi = -dx;
  if (mode == LineError::Local) {
    d_psi = d_psi * plucker_to_orthonormal(world_line).U;
  }
  out.H_v.leftCols<3>() = J * Rt * d_psi;
  out.H_v.col(3) = J * Rt * ((n.norm() / d.norm()) * d);
  return out;
}

StackedSystem project_out_line(const MatX& H_x, const MatX& H_line, const VecX& r, const VecX& noise_var) {
  return project_left_null(H_x, H_line, r, noise_var, "line");
}

LineStack line_stack(const VioState& state, const LineTrack& track, ErrorModel model, LineError mode,
                     double line_sigma, double vp_sigma) {
  if (!track.line) {
    throw Error(ErrorKind::DegenerateFeature, "line track is not triangulated");
  }
  const PluckerLine& L = *track.line;
  const int m = static_cast<int>(track.observations.size());
  const int max_rows = 2 * m + 2 * static_cast<int>(track.vp_observations.size());
  LineStack out;
  out.H_x = MatX::Zero(max_rows, state.dim());
  out.H_line = MatX::Zero(max_rows, 4);
  out.r = VecX::Zero(max_rows);
  out.noise_var = VecX::Zero(max_rows);

  int row = 0;
  for (const auto& obs : track.observations) {
    const int ci = state.clone_index(obs.frame_id);
    if (ci < 0) {
      throw Error(ErrorKind::StaleTrack, "line " + std::to_string(track.id) + " refers to frame " +
                                             std::to_string(obs.frame_id));
    }
    const LineLinearization lin = line_jacobians(state.clones[ci], L, obs.p_s, obs.p_e, mode, model);
    out.H_x.block<2, 6>(row, clone_offset(ci)) = lin.H_X;
    out.H_line.block<2, 4>(row, 0) = lin.H_L;
    out.r.segment<2>(row) = lin.r;
    out.noise_var.segment<2>(row).setConstant(line_sigma * line_sigma);
    row += 2;
  }
  for (const auto& obs : track.vp_observations) {
    const int ci = state.clone_index(obs.frame_id);
    if (ci < 0) {
      throw Error(ErrorKind::StaleTrack, "line " + std::to_string(track.id) + " VP refers to frame " +
                                             std::to_string(obs.frame_id));
    }
    try {
      const VpLinearization lin = vp_jacobians(state.clones[ci], L, obs.p_v, mode);
      out.H_x.block<2, 6>(row, clone_offset(ci)) = lin.H_X;
      out.H_line.block<2, 4>(row, 0) = lin.H_v;
      out.r.segment<2>(row) = lin.r;
      out.noise_var.segment<2>(row).setConstant(vp_sigma * vp_sigma);
      row += 2;
      ++out.vp_rows;
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::VpAtInfinity) throw;
    }
  }
  out.vp_rows *= 2;
  out.H_x.conservativeResize(row, Eigen::NoChange);
  out.H_line.conservativeResize(row, Eigen::NoChange);
  out.r.conservativeResize(row);
  out.noise_var.conservativeResize(row);
  return out;
}

}  // namespace plvio
