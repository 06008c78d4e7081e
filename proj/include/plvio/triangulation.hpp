#pragma once

#include <vector>

#include "plvio/measurements.hpp"

namespace plvio {

struct GnSettings {
  int max_iters = 10;
  double step_tolerance = 1e-8;
  double lambda0 = 1e-3;
  double lambda_up = 10.0;
  double lambda_down = 10.0;
  double lambda_max = 1e6;
  double huber = 0.0;  // <= 0 disables robust weighting
};

// Linear multiview triangulation followed by three Gauss-Newton iterations on the
// reprojection error. Throws TriangulationFailed (ill-conditioned, < 2 views, or a
// view behind the camera) and StaleTrack.
Vec3 triangulate_point(const PointTrack& track, const std::vector<CameraClone>& clones);

// Dual Plücker intersection of the back-projected planes of the pair of views with
// the widest angle between planes. Returns a unit-scale line. Throws
// TriangulationFailed when fewer than two views exist or the best pair is within 1 deg.
PluckerLine triangulate_line(const LineTrack& track, const std::vector<CameraClone>& clones);

struct RefineResult {
  PluckerLine line;
  std::vector<double> cost_history;  // initial cost, then one entry per accepted step
  int iterations = 0;
  bool converged = false;
  bool diverged = false;  // true: `line` is the input line
};

// Levenberg-damped Gauss-Newton over the orthonormal parameters (global retraction)
// of the endpoint-distance cost.
RefineResult refine_line(const PluckerLine& line, const LineTrack& track, const std::vector<CameraClone>& clones,
                         const GnSettings& settings = {});

// As refine_line with one VP residual per view that carries a VP observation.
RefineResult refine_structural_line(const PluckerLine& line, const LineTrack& track,
                                    const std::vector<CameraClone>& clones, const GnSettings& settings = {});

}  // namespace plvio
