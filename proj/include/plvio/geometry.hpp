#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

namespace plvio {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

// Below this rotation angle the exp/log/Jacobian maps switch to Taylor expansions.
inline constexpr double kSmallAngle = 1e-8;

Mat3 skew(const Vec3& v);
Vec3 vee(const Mat3& m);

Mat3 so3_exp(const Vec3& phi);

// Principal logarithm, norm in [0, pi]. At exactly pi the axis sign is chosen so
// that its first nonzero component is positive.
Vec3 so3_log(const Mat3& R);

Mat3 left_jacobian(const Vec3& phi);
Mat3 left_jacobian_inverse(const Vec3& phi);

bool is_rotation(const Mat3& R, double tol = 1e-10);

// Rigid transform; as a camera pose it maps camera coordinates into the world.
struct Pose {
  Mat3 R = Mat3::Identity();
  Vec3 p = Vec3::Zero();

  Pose compose(const Pose& other) const { return {R * other.R, p + R * other.p}; }
  Pose inverse() const { return {R.transpose(), -R.transpose() * p}; }
  Vec3 transform(const Vec3& x) const { return R * x + p; }
};

// Homogeneous Plücker coordinates: n is the moment (normal of the plane through
// the origin scaled by the origin distance), d the direction.
struct PluckerLine {
  Vec3 n = Vec3::Zero();
  Vec3 d = Vec3::UnitZ();

  PluckerLine normalized() const;
  double incidence_residual() const { return n.dot(d); }
};

// Minimal line parameterization: U in SO(3), W in SO(2) stored as its angle.
struct OrthonormalLine {
  Mat3 U = Mat3::Identity();
  double phi = 0.0;

  Mat2 W() const;
};

enum class LineError { Global, Local };

// Throws Error(DegenerateLine) for zero-norm or non-orthogonal (n, d).
OrthonormalLine plucker_to_orthonormal(const PluckerLine& line);

// Returns the unit-scale line, ||n||^2 + ||d||^2 = 1.
PluckerLine orthonormal_to_plucker(const OrthonormalLine& line);

// delta = (dpsi, dphi). Global: U <- exp(dpsi) U, Local: U <- U exp(dpsi); W likewise.
OrthonormalLine orthonormal_retract(const OrthonormalLine& line, const Vec4& delta, LineError mode);

// Expresses a world line in the frame of `pose` (camera-to-world).
PluckerLine transform_line(const Pose& pose, const PluckerLine& world_line);

// Image line coefficients on the normalized plane, unnormalized. Throws
// Error(DegenerateProjection) when the line passes through the camera center.
Vec3 project_line(const PluckerLine& camera_line);

// Distance between two line directions in radians, sign-agnostic.
double direction_angle(const Vec3& a, const Vec3& b);

}  // namespace plvio
