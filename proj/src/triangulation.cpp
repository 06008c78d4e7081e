#include "plvio/triangulation.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <numbers>
#include <string>

#include "plvio/error.hpp"

namespace plvio {

namespace {

const CameraClone& find_clone(const std::vector<CameraClone>& clones, std::int64_t frame_id, std::int64_t feature) {
  for (const auto& c : clones) {
    if (c.frame_id == frame_id) return c;
  }
  throw Error(ErrorKind::StaleTrack,
              "feature " + std::to_string(feature) + " refers to missing frame " + std::to_string(frame_id));
}

constexpr double kMaxCondition = 1e8;
constexpr double kMinPlaneAngle = std::numbers::pi / 180.0;

}  // namespace

Vec3 triangulate_point(const PointTrack& track, const std::vector<CameraClone>& clones) {
  if (track.observations.size() < 2) {
    throw Error(ErrorKind::TriangulationFailed, "need two views");
  }
  Mat3 A = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  for (const auto& obs : track.observations) {
    const CameraClone& c = find_clone(clones, obs.frame_id, track.id);
    const Vec3 bearing = (c.R * Vec3(obs.z.x(), obs.z.y(), 1.0)).normalized();
    const Mat3 P = Mat3::Identity() - bearing * bearing.transpose();
    A += P;
    b += P * c.p;
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(A);
  const double lo = eig.eigenvalues()[0], hi = eig.eigenvalues()[2];
  if (!(lo > 0.0) || hi / lo > kMaxCondition) {
    throw Error(ErrorKind::TriangulationFailed, "point depth is unobservable");
  }
  Vec3 p = A.ldlt().solve(b);

  for (int iter = 0; iter < 3; ++iter) {
    Mat3 JtJ = Mat3::Zero();
    Vec3 Jtr = Vec3::Zero();
    for (const auto& obs : track.observations) {
      const CameraClone& c = find_clone(clones, obs.frame_id, track.id);
      const Vec3 p_c = c.R.transpose() * (p - c.p);
      if (p_c.z() <= kMinDepth) {
        throw Error(ErrorKind::TriangulationFailed, "point behind a view");
      }
      const Eigen::Matrix<double, 2, 3> J = projection_jacobian(p_c) * c.R.transpose();
      const Vec2 r = obs.z - p_c.head<2>() / p_c.z();
      JtJ += J.transpose() * J;
      Jtr += J.transpose() * r;
    }
    const Eigen::SelfAdjointEigenSolver<Mat3> ne(JtJ);
    if (!(ne.eigenvalues()[0] > 0.0) || ne.eigenvalues()[2] / ne.eigenvalues()[0] > kMaxCondition) {
      throw Error(ErrorKind::TriangulationFailed, "ill-conditioned normal equations");
    }
    p += JtJ.ldlt().solve(Jtr);
  }
  for (const auto& obs : track.observations) {
    const CameraClone& c = find_clone(clones, obs.frame_id, track.id);
    if ((c.R.transpose() * (p - c.p)).z() <= kMinDepth) {
      throw Error(ErrorKind::TriangulationFailed, "point behind a view");
    }
  }
  return p;
}

PluckerLine triangulate_line(const LineTrack& track, const std::vector<CameraClone>& clones) {
  const std::size_t m = track.observations.size();
  if (m < 2) {
    throw Error(ErrorKind::TriangulationFailed, "need two views");
  }
  std::vector<Vec4> planes;
  planes.reserve(m);
  for (const auto& obs : track.observations) {
    const CameraClone& c = find_clone(clones, obs.frame_id, track.id);
    const Vec3 normal = (c.R * obs.p_s.cross(obs.p_e)).normalized();
    planes.emplace_back(normal.x(), normal.y(), normal.z(), -normal.dot(c.p));
  }

  double best = -1.0;
  std::size_t bi = 0, bj = 1;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      const double angle = direction_angle(planes[i].head<3>(), planes[j].head<3>());
      if (angle > best) {
        best = angle;
        bi = i;
        bj = j;
      }
    }
  }
  if (best < kMinPlaneAngle) {
    throw Error(ErrorKind::TriangulationFailed, "back-projected planes are nearly parallel");
  }

  // Dual Plücker matrix [[d]x n; -n^T 0].
  const Eigen::Matrix4d dual = planes[bi] * planes[bj].transpose() - planes[bj] * planes[bi].transpose();
  PluckerLine line;
  line.d = vee(dual.topLeftCorner<3, 3>());
  line.n = dual.topRightCorner<3, 1>();
  return line.normalized();
}

namespace {

struct LineCost {
  VecX r;
  Eigen::Matrix<double, Eigen::Dynamic, 4> H;
  double cost = 0.0;
};

LineCost evaluate(const PluckerLine& line, const LineTrack& track, const std::vector<CameraClone>& clones,
                  bool with_vp, double huber) {
  std::vector<Vec2> res;
  std::vector<Mat24> jac;
  for (const auto& obs : track.observations) {
    const CameraClone& c = find_clone(clones, obs.frame_id, track.id);
    const LineLinearization lin = line_jacobians(c, line, obs.p_s, obs.p_e, LineError::Global);
    res.push_back(lin.r);
    jac.push_back(lin.H_L);
  }
  if (with_vp) {
    for (const auto& obs : track.vp_observations) {
      const CameraClone& c = find_clone(clones, obs.frame_id, track.id);
      try {
        const VpLinearization lin = vp_jacobians(c, line, obs.p_v, LineError::Global);
        res.push_back(lin.r);
        jac.push_back(lin.H_v);
      } catch (const Error& e) {
        if (e.kind() != ErrorKind::VpAtInfinity) throw;
      }
    }
  }

  LineCost out;
  out.r.resize(2 * static_cast<int>(res.size()));
  out.H.resize(out.r.size(), 4);
  for (std::size_t k = 0; k < res.size(); ++k) {
    double w = 1.0;
    const double e = res[k].norm();
    if (huber > 0.0 && e > huber) {
      w = std::sqrt(huber / e);
      out.cost += 2.0 * huber * e - huber * huber;
    } else {
      out.cost += e * e;
    }
    out.r.segment<2>(2 * static_cast<int>(k)) = w * res[k];
    out.H.middleRows<2>(2 * static_cast<int>(k)) = w * jac[k];
  }
  return out;
}

RefineResult refine(const PluckerLine& line, const LineTrack& track, const std::vector<CameraClone>& clones,
                    const GnSettings& settings, bool with_vp) {
  RefineResult out;
  out.line = line;
  OrthonormalLine current = plucker_to_orthonormal(line);
  LineCost cost = evaluate(orthonormal_to_plucker(current), track, clones, with_vp, settings.huber);
  out.cost_history.push_back(cost.cost);

  double lambda = settings.lambda0;
  int accepted = 0;
  for (int iter = 0; iter < settings.max_iters; ++iter) {
    out.iterations = iter + 1;
    Eigen::Matrix4d A = cost.H.transpose() * cost.H;
    A.diagonal().array() += lambda;
    const Vec4 step = A.ldlt().solve(cost.H.transpose() * cost.r);
    if (!step.allFinite()) break;

    const OrthonormalLine candidate = orthonormal_retract(current, step, LineError::Global);
    const LineCost next = evaluate(orthonormal_to_plucker(candidate), track, clones, with_vp, settings.huber);
    if (next.cost <= cost.cost) {
      current = candidate;
      cost = next;
      out.cost_history.push_back(cost.cost);
      ++accepted;
      lambda = std::max(lambda / settings.lambda_down, 1e-12);
      if (step.norm() < settings.step_tolerance) {
        out.converged = true;
        break;
      }
    } else {
      if (step.norm() < settings.step_tolerance) {
        out.converged = true;
        break;
      }
      lambda *= settings.lambda_up;
      if (lambda > settings.lambda_max) {
        if (accepted == 0) {
          out.diverged = true;
          return out;
        }
        out.converged = true;
        break;
      }
    }
  }
  out.line = orthonormal_to_plucker(current);
  return out;
}

}  // namespace

RefineResult refine_line(const PluckerLine& line, const LineTrack& track, const std::vector<CameraClone>& clones,
                         const GnSettings& settings) {
  return refine(line, track, clones, settings, false);
}

RefineResult refine_structural_line(const PluckerLine& line, const LineTrack& track,
                                    const std::vector<CameraClone>& clones, const GnSettings& settings) {
  return refine(line, track, clones, settings, true);
}

}  // namespace plvio
