#pragma once

// Levenberg-Marquardt bundle adjustment over camera poses and 3D points.
//
// Observations are undistorted pixels, so the residual is a plain pinhole
// reprojection error. Rotations are updated multiplicatively,
// R <- exp([w]x) R, translations and points additively. The normal equations
// are reduced onto the camera block with a Schur complement over the 3x3
// point blocks.

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <string>
#include <vector>

#include <Eigen/Cholesky>
#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>

#include "pme/core.hpp"

namespace pme {

struct BAObservation {
  int camera = 0;  // index into BAProblem::poses
  int point = 0;   // index into BAProblem::points
  Eigen::Vector2d pixel = Eigen::Vector2d::Zero();
  double weight = 1.0;
};

struct BAProblem {
  std::vector<CameraPose> poses;
  std::vector<Intrinsics> intrinsics;  // parallel to poses; distortion ignored
  std::vector<Eigen::Vector3d> points;
  std::vector<BAObservation> observations;
};

struct BAOptions {
  int max_iterations = 100;
  double gradient_tolerance = 1e-8;
  double step_tolerance = 1e-10;
  bool huber = false;
  double huber_delta = 2.0;  // pixels
  std::set<int> fixed_cameras;
  bool fix_all_cameras = false;
};

struct BAReport {
  int iterations = 0;
  double initial_rmse = 0.0;
  double final_rmse = 0.0;
  std::vector<double> rmse_trace;  // after each accepted step, starting with the initial value
  bool converged = false;
  std::string termination;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(const std::string& what, BAProblem best, BAReport report)
      : Error(what), best_(std::move(best)), report_(std::move(report)) {}
  const BAProblem& best() const { return best_; }
  const BAReport& report() const { return report_; }

 private:
  BAProblem best_;
  BAReport report_;
};

/// Parameter ordering: free cameras (6 each: rotation increment, translation)
/// followed by points (3 each).
struct BALayout {
  std::vector<int> camera_offset;  // -1 when held fixed
  int num_camera_params = 0;
  int num_params = 0;

  int point_offset(int p) const { return num_camera_params + 3 * p; }
};

inline BALayout make_layout(const BAProblem& problem, const BAOptions& options) {
  BALayout layout;
  layout.camera_offset.assign(problem.poses.size(), -1);
  for (std::size_t c = 0; c < problem.poses.size(); ++c) {
    if (options.fix_all_cameras || options.fixed_cameras.contains(static_cast<int>(c))) continue;
    layout.camera_offset[c] = layout.num_camera_params;
    layout.num_camera_params += 6;
  }
  layout.num_params = layout.num_camera_params + 3 * static_cast<int>(problem.points.size());
  return layout;
}

inline Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& w) {
  const double angle = w.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, w / angle).toRotationMatrix();
}

/// Weighted residual sqrt(w) * (projection - observation). Points at or
/// behind the camera give an infinite residual.
inline Eigen::Vector2d ba_residual(const BAProblem& problem, const BAObservation& obs) {
  const CameraPose& pose = problem.poses[obs.camera];
  const Intrinsics& k = problem.intrinsics[obs.camera];
  const Eigen::Vector3d x = pose.to_camera(problem.points[obs.point]);
  if (!(x.z() > 0.0)) return Eigen::Vector2d::Constant(std::numeric_limits<double>::infinity());
  const Eigen::Vector2d proj(k.fx * x.x() / x.z() + k.cx, k.fy * x.y() / x.z() + k.cy);
  return std::sqrt(obs.weight) * (proj - obs.pixel);
}

/// d(residual)/d(camera increment) (2x6) and d(residual)/d(point) (2x3).
inline void ba_jacobian_blocks(const BAProblem& problem, const BAObservation& obs, Eigen::Matrix<double, 2, 6>& jc,
                               Eigen::Matrix<double, 2, 3>& jp) {
  const CameraPose& pose = problem.poses[obs.camera];
  const Intrinsics& k = problem.intrinsics[obs.camera];
  const Eigen::Vector3d rx = pose.rotation * problem.points[obs.point];
  const Eigen::Vector3d x = rx + pose.translation;
  const double iz = 1.0 / x.z();
  Eigen::Matrix<double, 2, 3> dproj;
  dproj << k.fx * iz, 0.0, -k.fx * x.x() * iz * iz, 0.0, k.fy * iz, -k.fy * x.y() * iz * iz;
  dproj *= std::sqrt(obs.weight);
  Eigen::Matrix3d skew_rx;
  skew_rx << 0.0, -rx.z(), rx.y(), rx.z(), 0.0, -rx.x(), -rx.y(), rx.x(), 0.0;
  jc.leftCols<3>() = -dproj * skew_rx;
  jc.rightCols<3>() = dproj;
  jp = dproj * pose.rotation;
}

/// Dense Jacobian of all residuals, for verification.
inline Eigen::MatrixXd ba_dense_jacobian(const BAProblem& problem, const BALayout& layout) {
  Eigen::MatrixXd j = Eigen::MatrixXd::Zero(2 * static_cast<Eigen::Index>(problem.observations.size()), layout.num_params);
  Eigen::Matrix<double, 2, 6> jc;
  Eigen::Matrix<double, 2, 3> jp;
  for (std::size_t i = 0; i < problem.observations.size(); ++i) {
    const auto& obs = problem.observations[i];
    ba_jacobian_blocks(problem, obs, jc, jp);
    const auto row = 2 * static_cast<Eigen::Index>(i);
    if (layout.camera_offset[obs.camera] >= 0) j.block<2, 6>(row, layout.camera_offset[obs.camera]) = jc;
    j.block<2, 3>(row, layout.point_offset(obs.point)) = jp;
  }
  return j;
}

inline Eigen::VectorXd ba_residuals(const BAProblem& problem) {
  Eigen::VectorXd r(2 * static_cast<Eigen::Index>(problem.observations.size()));
  for (std::size_t i = 0; i < problem.observations.size(); ++i)
    r.segment<2>(2 * static_cast<Eigen::Index>(i)) = ba_residual(problem, problem.observations[i]);
  return r;
}

inline BAProblem apply_increment(const BAProblem& problem, const BALayout& layout, const Eigen::VectorXd& delta) {
  BAProblem out = problem;
  for (std::size_t c = 0; c < out.poses.size(); ++c) {
    const int off = layout.camera_offset[c];
    if (off < 0) continue;
    out.poses[c].rotation = rotation_exp(delta.segment<3>(off)) * out.poses[c].rotation;
    out.poses[c].translation += delta.segment<3>(off + 3);
  }
  for (std::size_t p = 0; p < out.points.size(); ++p) out.points[p] += delta.segment<3>(layout.point_offset(static_cast<int>(p)));
  return out;
}

namespace detail {

// Robust weight and cost contribution of one squared residual norm.
inline double huber_cost(double s, const BAOptions& o) {
  if (!o.huber || s <= o.huber_delta * o.huber_delta) return s;
  return 2.0 * o.huber_delta * std::sqrt(s) - o.huber_delta * o.huber_delta;
}

inline double huber_weight(double s, const BAOptions& o) {
  if (!o.huber || s <= o.huber_delta * o.huber_delta) return 1.0;
  return o.huber_delta / std::sqrt(s);
}

}  // namespace detail

/// Objective: sum of (robustified) squared weighted residual norms.
inline double ba_cost(const BAProblem& problem, const BAOptions& options = {}) {
  double total = 0.0;
  for (const auto& obs : problem.observations) total += detail::huber_cost(ba_residual(problem, obs).squaredNorm(), options);
  return total;
}

inline double ba_rmse(double cost, std::size_t num_observations) {
  return num_observations == 0 ? 0.0 : std::sqrt(cost / static_cast<double>(num_observations));
}

namespace detail {

struct NormalEquations {
  Eigen::MatrixXd hcc;                                  // camera block
  std::vector<Eigen::Matrix3d> hpp;                     // per point
  std::vector<Eigen::Matrix<double, 6, 3>> hcp;         // per observation (zero when camera fixed)
  Eigen::VectorXd g;                                    // J^T r
};

inline NormalEquations build_normal_equations(const BAProblem& problem, const BALayout& layout, const BAOptions& options) {
  NormalEquations ne;
  ne.hcc = Eigen::MatrixXd::Zero(layout.num_camera_params, layout.num_camera_params);
  ne.hpp.assign(problem.points.size(), Eigen::Matrix3d::Zero());
  ne.hcp.assign(problem.observations.size(), Eigen::Matrix<double, 6, 3>::Zero());
  ne.g = Eigen::VectorXd::Zero(layout.num_params);
  Eigen::Matrix<double, 2, 6> jc;
  Eigen::Matrix<double, 2, 3> jp;
  for (std::size_t i = 0; i < problem.observations.size(); ++i) {
    const auto& obs = problem.observations[i];
    const Eigen::Vector2d r = ba_residual(problem, obs);
    const double w = huber_weight(r.squaredNorm(), options);
    ba_jacobian_blocks(problem, obs, jc, jp);
    const int co = layout.camera_offset[obs.camera];
    const int po = layout.point_offset(obs.point);
    ne.hpp[obs.point] += w * jp.transpose() * jp;
    ne.g.segment<3>(po) += w * jp.transpose() * r;
    if (co >= 0) {
      ne.hcc.block<6, 6>(co, co) += w * jc.transpose() * jc;
      ne.hcp[i] = w * jc.transpose() * jp;
      ne.g.segment<6>(co) += w * jc.transpose() * r;
    }
  }
  return ne;
}

// Solve (H + lambda * diag(H)) delta = -g by eliminating the point blocks.
inline Eigen::VectorXd solve_damped(const BAProblem& problem, const BALayout& layout, const NormalEquations& ne,
                                    double lambda, const std::vector<std::vector<int>>& obs_of_point) {
  const int nc = layout.num_camera_params;
  auto damp = [lambda](auto m) {
    for (Eigen::Index d = 0; d < m.rows(); ++d) m(d, d) += lambda * std::max(m(d, d), 1e-12);
    return m;
  };
  std::vector<Eigen::Matrix3d> hpp_inv(problem.points.size());
  for (std::size_t p = 0; p < problem.points.size(); ++p) {
    const Eigen::Matrix3d d = damp(ne.hpp[p]);
    hpp_inv[p] = d.ldlt().solve(Eigen::Matrix3d::Identity());
  }
  Eigen::VectorXd delta = Eigen::VectorXd::Zero(layout.num_params);
  Eigen::VectorXd dc;
  if (nc > 0) {
    Eigen::MatrixXd s = damp(Eigen::MatrixXd(ne.hcc));
    Eigen::VectorXd rhs = -ne.g.head(nc);
    for (std::size_t p = 0; p < problem.points.size(); ++p) {
      const Eigen::Vector3d gp = ne.g.segment<3>(layout.point_offset(static_cast<int>(p)));
      for (int a : obs_of_point[p]) {
        const int ca = layout.camera_offset[problem.observations[a].camera];
        if (ca < 0) continue;
        const Eigen::Matrix<double, 6, 3> wa = ne.hcp[a] * hpp_inv[p];
        rhs.segment<6>(ca) += wa * gp;
        for (int b : obs_of_point[p]) {
          const int cb = layout.camera_offset[problem.observations[b].camera];
          if (cb < 0) continue;
          s.block<6, 6>(ca, cb) -= wa * ne.hcp[b].transpose();
        }
      }
    }
    dc = s.ldlt().solve(rhs);
    delta.head(nc) = dc;
  }
  for (std::size_t p = 0; p < problem.points.size(); ++p) {
    const int po = layout.point_offset(static_cast<int>(p));
    Eigen::Vector3d rhs = -ne.g.segment<3>(po);
    if (nc > 0) {
      for (int a : obs_of_point[p]) {
        const int ca = layout.camera_offset[problem.observations[a].camera];
        if (ca >= 0) rhs -= ne.hcp[a].transpose() * dc.segment<6>(ca);
      }
    }
    delta.segment<3>(po) = hpp_inv[p] * rhs;
  }
  return delta;
}

}  // namespace detail

/// Minimize the reprojection objective in place. Throws NonConvergenceError
/// (holding the best iterate) when the iteration cap is reached first.
inline BAReport bundle_adjust(BAProblem& problem, const BAOptions& options = {}) {
  const BALayout layout = make_layout(problem, options);
  std::vector<std::vector<int>> obs_of_point(problem.points.size());
  for (std::size_t i = 0; i < problem.observations.size(); ++i)
    obs_of_point[problem.observations[i].point].push_back(static_cast<int>(i));

  BAReport report;
  const std::size_t m = problem.observations.size();
  double cost = ba_cost(problem, options);
  report.initial_rmse = ba_rmse(cost, m);
  report.rmse_trace.push_back(report.initial_rmse);
  if (!std::isfinite(cost)) throw DegenerateError("bundle adjustment started with a point behind a camera");

  double lambda = 1e-4;
  int iteration = 0;
  while (true) {
    if (iteration >= options.max_iterations) {
      report.iterations = iteration;
      report.final_rmse = ba_rmse(cost, m);
      report.termination = "iteration cap";
      throw NonConvergenceError("bundle adjustment hit the iteration cap of " + std::to_string(options.max_iterations),
                                problem, report);
    }
    const auto ne = detail::build_normal_equations(problem, layout, options);
    if (layout.num_params == 0 || ne.g.lpNorm<Eigen::Infinity>() < options.gradient_tolerance) {
      report.converged = true;
      report.termination = "gradient";
      break;
    }
    ++iteration;
    bool accepted = false;
    bool tiny_step = false;
    // Raise the damping until a step lowers the objective.
    for (int attempt = 0; attempt < 60; ++attempt) {
      const Eigen::VectorXd delta = detail::solve_damped(problem, layout, ne, lambda, obs_of_point);
      if (!delta.allFinite()) {
        lambda *= 10.0;
        continue;
      }
      if (delta.norm() < options.step_tolerance) {
        tiny_step = true;
        break;
      }
      BAProblem trial = apply_increment(problem, layout, delta);
      for (std::size_t c = 0; c < trial.poses.size(); ++c)
        if (layout.camera_offset[c] >= 0) trial.poses[c].rotation = orthonormalize(trial.poses[c].rotation);
      const double trial_cost = ba_cost(trial, options);
      if (std::isfinite(trial_cost) && trial_cost < cost) {
        problem = std::move(trial);
        cost = trial_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = true;
        break;
      }
      lambda *= 10.0;
    }
    if (accepted) report.rmse_trace.push_back(ba_rmse(cost, m));
    if (tiny_step || !accepted) {
      report.converged = true;
      report.termination = "step";
      break;
    }
  }
  report.iterations = iteration;
  report.final_rmse = ba_rmse(cost, m);
  return report;
}

}  // namespace pme
