#include "plvio/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "plvio/error.hpp"

namespace plvio {

Mat3 skew(const Vec3& v) {
  Mat3 m;
  m << 0.0, -v.z(), v.y(),
       v.z(), 0.0, -v.x(),
       -v.y(), v.x(), 0.0;
  return m;
}

Vec3 vee(const Mat3& m) { return {m(2, 1), m(0, 2), m(1, 0)}; }

Mat3 so3_exp(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + K + 0.5 * K * K;
  }
  const double half = 0.5 * theta;
  const double s = std::sin(theta) / theta;
  // 1 - cos(t) written as 2 sin^2(t/2) to avoid cancellation for small t.
  const double c = 2.0 * std::sin(half) * std::sin(half) / (theta * theta);
  return Mat3::Identity() + s * K + c * K * K;
}

Vec3 so3_log(const Mat3& R) {
  const Vec3 w = 0.5 * vee(R - R.transpose());  // sin(theta) * axis
  const double c = std::clamp(0.5 * (R.trace() - 1.0), -1.0, 1.0);
  const double s = w.norm();
  const double theta = std::atan2(s, c);

  if (theta < kSmallAngle) {
    return w * (1.0 + theta * theta / 6.0);
  }
  if (c > -0.99) {
    return w * (theta / s);
  }

  // Near pi the antisymmetric part vanishes; recover the axis from a a^T.
  const Mat3 sym = 0.5 * (R + R.transpose());
  const Mat3 aat = (sym - c * Mat3::Identity()) / (1.0 - c);
  Eigen::Index k = 0;
  aat.diagonal().maxCoeff(&k);
  Vec3 axis = aat.col(k) / std::sqrt(std::max(aat(k, k), 1e-300));
  axis.normalize();
  if (s > 1e-12) {
    if (axis.dot(w) < 0.0) axis = -axis;
  } else {
    for (int i = 0; i < 3; ++i) {
      if (std::abs(axis[i]) > 1e-12) {
        if (axis[i] < 0.0) axis = -axis;
        break;
      }
    }
  }
  return theta * axis;
}

Mat3 left_jacobian(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() + 0.5 * K + K * K / 6.0;
  }
  const double t2 = theta * theta;
  const double half = 0.5 * theta;
  const double a = 2.0 * std::sin(half) * std::sin(half) / t2;
  const double b = (theta - std::sin(theta)) / (t2 * theta);
  return Mat3::Identity() + a * K + b * K * K;
}

Mat3 left_jacobian_inverse(const Vec3& phi) {
  const double theta = phi.norm();
  const Mat3 K = skew(phi);
  if (theta < kSmallAngle) {
    return Mat3::Identity() - 0.5 * K + K * K / 12.0;
  }
  const double half = 0.5 * theta;
  const double coeff = (1.0 - half * std::cos(half) / std::sin(half)) / (theta * theta);
  return Mat3::Identity() - 0.5 * K + coeff * K * K;
}

bool is_rotation(const Mat3& R, double tol) {
  return (R * R.transpose() - Mat3::Identity()).cwiseAbs().maxCoeff() < tol &&
         std::abs(R.determinant() - 1.0) < tol;
}

PluckerLine PluckerLine::normalized() const {
  const double scale = std::sqrt(n.squaredNorm() + d.squaredNorm());
  return {n / scale, d / scale};
}

Mat2 OrthonormalLine::W() const {
  Mat2 w;
  w << std::cos(phi), -std::sin(phi),
       std::sin(phi), std::cos(phi);
  return w;
}

OrthonormalLine plucker_to_orthonormal(const PluckerLine& line) {
  const double nn = line.n.norm();
  const double dn = line.d.norm();
  if (nn < 1e-12 || dn < 1e-12) {
    throw Error(ErrorKind::DegenerateLine, "zero moment or direction");
  }
  const Vec3 u1 = line.n / nn;
  Vec3 u2 = line.d / dn;
  if (line.n.cross(line.d).norm() < 1e-9 * nn * dn) {
    throw Error(ErrorKind::DegenerateLine, "moment parallel to direction");
  }
  // Gram-Schmidt keeps U exactly orthonormal when n^T d is only approximately zero.
  u2 = (u2 - u2.dot(u1) * u1).normalized();
  OrthonormalLine out;
  out.U.col(0) = u1;
  out.U.col(1) = u2;
  out.U.col(2) = u1.cross(u2);
  out.phi = std::atan2(dn, nn);
  return out;
}

PluckerLine orthonormal_to_plucker(const OrthonormalLine& line) {
  return {std::cos(line.phi) * line.U.col(0), std::sin(line.phi) * line.U.col(1)};
}

OrthonormalLine orthonormal_retract(const OrthonormalLine& line, const Vec4& delta, LineError mode) {
  const Mat3 dU = so3_exp(delta.head<3>());
  OrthonormalLine out;
  out.U = mode == LineError::Global ? Mat3(dU * line.U) : Mat3(line.U * dU);
  // SO(2) is commutative, so both error forms reduce to an angle increment.
  out.phi = line.phi + delta[3];
  return out;
}

PluckerLine transform_line(const Pose& pose, const PluckerLine& world_line) {
  const Mat3 Rt = pose.R.transpose();
  return {Rt * (world_line.n - pose.p.cross(world_line.d)), Rt * world_line.d};
}

Vec3 project_line(const PluckerLine& camera_line) {
  if (camera_line.n.norm() < 1e-12 * std::max(1.0, camera_line.d.norm())) {
    throw Error(ErrorKind::DegenerateProjection, "line passes through the camera center");
  }
  return camera_line.n;
}

double direction_angle(const Vec3& a, const Vec3& b) {
  const double c = std::abs(a.normalized().dot(b.normalized()));
  const double s = a.normalized().cross(b.normalized()).norm();
  return std::atan2(s, c);
}

}  // namespace plvio
