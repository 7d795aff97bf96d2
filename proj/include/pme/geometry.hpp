#pragma once

// Multi-view geometry from matched 2D joints: camera model, cross-view
// correspondences, essential-matrix relative pose (eight-point + RANSAC),
// spanning-tree camera alignment, DLT triangulation and the lower-leg scale
// prior.
//
// Relative pose convention: x_b = R * x_a + t maps camera-a coordinates to
// camera-b coordinates, and E = [t]x R satisfies x_b^T E x_a = 0 for
// normalized image points.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>
#include <Eigen/LU>
#include <Eigen/SVD>

#include "pme/core.hpp"

namespace pme {

// ---------------------------------------------------------------------------
// Camera model
// ---------------------------------------------------------------------------

/// Radial-tangential distortion (k1, k2, p1, p2, k3) of a normalized point.
inline Eigen::Vector2d distort(const Eigen::Vector2d& p, const std::array<double, 5>& d) {
  const double x = p.x(), y = p.y();
  const double r2 = x * x + y * y;
  const double radial = 1.0 + d[0] * r2 + d[1] * r2 * r2 + d[4] * r2 * r2 * r2;
  return {x * radial + 2.0 * d[2] * x * y + d[3] * (r2 + 2.0 * x * x),
          y * radial + d[2] * (r2 + 2.0 * y * y) + 2.0 * d[3] * x * y};
}

/// Inverse of distort() by fixed-point iteration.
inline Eigen::Vector2d undistort(const Eigen::Vector2d& distorted, const std::array<double, 5>& d) {
  Eigen::Vector2d p = distorted;
  for (int it = 0; it < 200; ++it) {
    const Eigen::Vector2d next = p - (distort(p, d) - distorted);
    const double change = (next - p).norm();
    p = next;
    if (change < 1e-16) break;
  }
  return p;
}

/// Pixel to undistorted normalized image coordinates.
inline Eigen::Vector2d pixel_to_normalized(const Eigen::Vector2d& uv, const Intrinsics& k) {
  const Eigen::Vector2d distorted((uv.x() - k.cx) / k.fx, (uv.y() - k.cy) / k.fy);
  return k.has_distortion() ? undistort(distorted, k.distortion) : distorted;
}

inline Eigen::Vector2d normalized_to_pixel(const Eigen::Vector2d& p, const Intrinsics& k) {
  const Eigen::Vector2d q = k.has_distortion() ? distort(p, k.distortion) : p;
  return {k.fx * q.x() + k.cx, k.fy * q.y() + k.cy};
}

/// Pinhole projection with lens distortion.
inline Eigen::Vector2d project(const Eigen::Vector3d& world, const CameraPose& pose, const Intrinsics& k) {
  const Eigen::Vector3d c = pose.to_camera(world);
  if (!(c.z() > 0.0)) throw BehindCameraError("point projects from behind the camera (z = " + std::to_string(c.z()) + ")");
  return normalized_to_pixel({c.x() / c.z(), c.y() / c.z()}, k);
}

// ---------------------------------------------------------------------------
// Correspondences
// ---------------------------------------------------------------------------

/// Detections of one frame with their cluster labels.
struct MatchedFrame {
  int frame_id = 0;
  std::vector<Detection> detections;
  std::vector<int> clusters;  // parallel to detections
};

struct CorrespondenceTag {
  int frame_id = 0;
  int cluster = 0;
  int joint = 0;
};

/// Same-joint, same-person, same-frame point pairs between two cameras, in
/// undistorted normalized coordinates.
struct Correspondence {
  int camera_a = 0;
  int camera_b = 0;
  std::vector<Eigen::Vector2d> points_a;
  std::vector<Eigen::Vector2d> points_b;
  std::vector<double> weights;
  std::vector<CorrespondenceTag> tags;

  int size() const { return static_cast<int>(points_a.size()); }
  bool usable() const { return size() >= 8; }
};

/// For each camera pair and each cluster holding exactly one detection from
/// both cameras, pair up every joint usable in both. Pairs are returned for
/// camera_a < camera_b, ordered by (camera_a, camera_b).
inline std::vector<Correspondence> build_correspondences(std::span<const MatchedFrame> frames,
                                                         const std::map<int, Intrinsics>& intrinsics,
                                                         double confidence_threshold = kDefaultConfidenceThreshold) {
  std::map<std::pair<int, int>, Correspondence> pairs;
  for (const auto& frame : frames) {
    // cluster -> camera -> detection indices
    std::map<int, std::map<int, std::vector<int>>> members;
    for (std::size_t i = 0; i < frame.detections.size(); ++i)
      members[frame.clusters[i]][frame.detections[i].camera_id].push_back(static_cast<int>(i));
    for (const auto& [cluster, by_camera] : members) {
      for (auto ia = by_camera.begin(); ia != by_camera.end(); ++ia) {
        if (ia->second.size() != 1) continue;
        for (auto ib = std::next(ia); ib != by_camera.end(); ++ib) {
          if (ib->second.size() != 1) continue;
          const Detection& da = frame.detections[ia->second[0]];
          const Detection& db = frame.detections[ib->second[0]];
          auto& corr = pairs[{ia->first, ib->first}];
          corr.camera_a = ia->first;
          corr.camera_b = ib->first;
          const Intrinsics& ka = intrinsics.at(ia->first);
          const Intrinsics& kb = intrinsics.at(ib->first);
          for (int j = 0; j < kNumJoints; ++j) {
            if (!da.joint_usable(j, confidence_threshold) || !db.joint_usable(j, confidence_threshold)) continue;
            corr.points_a.push_back(pixel_to_normalized({da.joints[j].u, da.joints[j].v}, ka));
            corr.points_b.push_back(pixel_to_normalized({db.joints[j].u, db.joints[j].v}, kb));
            corr.weights.push_back(std::min(da.joints[j].confidence, db.joints[j].confidence));
            corr.tags.push_back({frame.frame_id, cluster, j});
          }
        }
      }
    }
  }
  std::vector<Correspondence> out;
  for (auto& [key, c] : pairs) out.push_back(std::move(c));
  return out;
}

// ---------------------------------------------------------------------------
// Essential matrix
// ---------------------------------------------------------------------------

struct RelativePose {
  int camera_a = 0;
  int camera_b = 0;
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation_dir = Eigen::Vector3d::UnitX();
  int inlier_count = 0;
  double mean_epipolar_error = 0.0;
  double baseline = 1.0;  // metric length of the translation once scaled
  std::vector<bool> inliers;

  Eigen::Vector3d translation() const { return baseline * translation_dir; }
};

struct RansacOptions {
  double threshold = 1e-3;  // Sampson distance, normalized units
  int iterations = 500;
  std::uint64_t seed = 0;
};

inline Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

inline Eigen::Matrix3d essential_from_pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) { return skew(t) * r; }

/// First-order geometric (Sampson) distance of a pair to the epipolar constraint.
inline double sampson_distance(const Eigen::Matrix3d& e, const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const Eigen::Vector3d xa(a.x(), a.y(), 1.0);
  const Eigen::Vector3d xb(b.x(), b.y(), 1.0);
  const Eigen::Vector3d ea = e * xa;
  const Eigen::Vector3d eb = e.transpose() * xb;
  const double num = xb.dot(ea);
  const double den = ea.x() * ea.x() + ea.y() * ea.y() + eb.x() * eb.x() + eb.y() * eb.y();
  if (den <= 0.0) return std::abs(num) > 0.0 ? std::numeric_limits<double>::infinity() : 0.0;
  return std::abs(num) / std::sqrt(den);
}

/// Nearest essential matrix: equal leading singular values, third zero.
inline Eigen::Matrix3d project_to_essential(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Eigen::Vector3d s = svd.singularValues();
  const double mean = 0.5 * (s(0) + s(1));
  return svd.matrixU() * Eigen::Vector3d(mean, mean, 0.0).asDiagonal() * svd.matrixV().transpose();
}

namespace detail {

// Similarity taking points to zero centroid and mean distance sqrt(2).
inline Eigen::Matrix3d hartley_transform(const std::vector<Eigen::Vector2d>& pts, std::span<const int> idx) {
  Eigen::Vector2d centroid = Eigen::Vector2d::Zero();
  for (int i : idx) centroid += pts[i];
  centroid /= static_cast<double>(idx.size());
  double mean_dist = 0.0;
  for (int i : idx) mean_dist += (pts[i] - centroid).norm();
  mean_dist /= static_cast<double>(idx.size());
  const double s = mean_dist > 0.0 ? std::sqrt(2.0) / mean_dist : 1.0;
  Eigen::Matrix3d t;
  t << s, 0.0, -s * centroid.x(), 0.0, s, -s * centroid.y(), 0.0, 0.0, 1.0;
  return t;
}

}  // namespace detail

/// Linear eight-point estimate over the given pair indices (>= 8), projected
/// onto the essential manifold. nullopt when the system is rank deficient.
inline std::optional<Eigen::Matrix3d> eight_point(const Correspondence& corr, std::span<const int> idx) {
  if (idx.size() < 8) return std::nullopt;
  const Eigen::Matrix3d ta = detail::hartley_transform(corr.points_a, idx);
  const Eigen::Matrix3d tb = detail::hartley_transform(corr.points_b, idx);
  Eigen::MatrixXd a(static_cast<Eigen::Index>(std::max<std::size_t>(idx.size(), 9)), 9);
  a.setZero();
  for (std::size_t r = 0; r < idx.size(); ++r) {
    const Eigen::Vector3d pa = ta * corr.points_a[idx[r]].homogeneous();
    const Eigen::Vector3d pb = tb * corr.points_b[idx[r]].homogeneous();
    // row-major vec(E): pb^T E pa
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) a(static_cast<Eigen::Index>(r), 3 * i + j) = pb(i) * pa(j);
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  if (!(s(0) > 0.0) || s(7) < 1e-12 * s(0)) return std::nullopt;
  const Eigen::VectorXd v = svd.matrixV().col(8);
  Eigen::Matrix3d en;
  en << v(0), v(1), v(2), v(3), v(4), v(5), v(6), v(7), v(8);
  // Rank 2 in normalized coordinates (the similarity transforms do not keep
  // the singular values equal); the essential structure is imposed after
  // denormalizing.
  Eigen::JacobiSVD<Eigen::Matrix3d> rank2(en, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Vector3d sv = rank2.singularValues();
  sv(2) = 0.0;
  en = rank2.matrixU() * sv.asDiagonal() * rank2.matrixV().transpose();
  Eigen::Matrix3d e = project_to_essential(tb.transpose() * en * ta);
  return e / e.norm();
}

/// Two-view decompositions of E: (R1, t), (R1, -t), (R2, t), (R2, -t).
inline std::array<std::pair<Eigen::Matrix3d, Eigen::Vector3d>, 4> decompose_essential(const Eigen::Matrix3d& e) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(e, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d u = svd.matrixU();
  Eigen::Matrix3d v = svd.matrixV();
  if (u.determinant() < 0.0) u.col(2) *= -1.0;
  if (v.determinant() < 0.0) v.col(2) *= -1.0;
  Eigen::Matrix3d w;
  w << 0.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 0.0, 1.0;
  const Eigen::Matrix3d r1 = u * w * v.transpose();
  const Eigen::Matrix3d r2 = u * w.transpose() * v.transpose();
  const Eigen::Vector3d t = u.col(2).normalized();
  return {{{r1, t}, {r1, -t}, {r2, t}, {r2, -t}}};
}

/// Linear DLT from camera-frame projection matrices [R | t] and normalized points.
inline std::optional<Eigen::Vector3d> triangulate_dlt(std::span<const Eigen::Matrix<double, 3, 4>> projections,
                                                      std::span<const Eigen::Vector2d> points) {
  const auto n = static_cast<Eigen::Index>(points.size());
  if (n < 2) return std::nullopt;
  Eigen::MatrixXd a(2 * n, 4);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& p = projections[i];
    const Eigen::Vector2d& x = points[i];
    a.row(2 * i) = x.x() * p.row(2) - p.row(0);
    a.row(2 * i + 1) = x.y() * p.row(2) - p.row(1);
  }
  // Row scaling does not move the null vector but improves conditioning.
  for (Eigen::Index r = 0; r < a.rows(); ++r) {
    const double norm = a.row(r).norm();
    if (norm > 0.0) a.row(r) /= norm;
  }
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(a, Eigen::ComputeFullV);
  const Eigen::Vector4d h = svd.matrixV().col(3);
  if (std::abs(h(3)) < 1e-14 * h.head<3>().norm() || h(3) == 0.0) return std::nullopt;
  return Eigen::Vector3d(h.head<3>() / h(3));
}

inline Eigen::Matrix<double, 3, 4> projection_matrix(const Eigen::Matrix3d& r, const Eigen::Vector3d& t) {
  Eigen::Matrix<double, 3, 4> p;
  p.leftCols<3>() = r;
  p.col(3) = t;
  return p;
}

/// Two-view triangulation in camera-a coordinates.
inline std::optional<Eigen::Vector3d> triangulate_two_view(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                                                           const Eigen::Vector2d& a, const Eigen::Vector2d& b) {
  const std::array<Eigen::Matrix<double, 3, 4>, 2> proj = {
      projection_matrix(Eigen::Matrix3d::Identity(), Eigen::Vector3d::Zero()), projection_matrix(r, t)};
  const std::array<Eigen::Vector2d, 2> pts = {a, b};
  return triangulate_dlt(proj, pts);
}

namespace detail {

inline Eigen::VectorXd sampson_residuals(const Correspondence& corr, std::span<const int> idx, const Eigen::Matrix3d& r,
                                         const Eigen::Vector3d& t) {
  const Eigen::Matrix3d e = skew(t) * r;
  Eigen::VectorXd out(static_cast<Eigen::Index>(idx.size()));
  for (std::size_t k = 0; k < idx.size(); ++k) {
    const Eigen::Vector3d xa = corr.points_a[idx[k]].homogeneous();
    const Eigen::Vector3d xb = corr.points_b[idx[k]].homogeneous();
    const Eigen::Vector3d ea = e * xa;
    const Eigen::Vector3d eb = e.transpose() * xb;
    const double den = ea.head<2>().squaredNorm() + eb.head<2>().squaredNorm();
    out[static_cast<Eigen::Index>(k)] = den > 0.0 ? xb.dot(ea) / std::sqrt(den) : 0.0;
  }
  return out;
}

// Pose after a 5-vector step: rotation increment, then a tangent step of t.
inline std::pair<Eigen::Matrix3d, Eigen::Vector3d> perturb_pose(const Eigen::Matrix3d& r, const Eigen::Vector3d& t,
                                                                 const Eigen::Matrix<double, 5, 1>& d) {
  const Eigen::Vector3d w = d.head<3>();
  const double angle = w.norm();
  const Eigen::Matrix3d dr =
      angle > 0.0 ? Eigen::AngleAxisd(angle, w / angle).toRotationMatrix() : Eigen::Matrix3d::Identity();
  const Eigen::Vector3d b1 = t.unitOrthogonal();
  const Eigen::Vector3d b2 = t.cross(b1).normalized();
  return {dr * r, (t + d[3] * b1 + d[4] * b2).normalized()};
}

/// Levenberg-Marquardt on the signed Sampson residuals of the listed pairs.
inline void refine_pose(const Correspondence& corr, std::span<const int> idx, Eigen::Matrix3d& r, Eigen::Vector3d& t,
                        int max_iterations = 50) {
  Eigen::VectorXd res = sampson_residuals(corr, idx, r, t);
  double cost = res.squaredNorm();
  double lambda = 1e-3;
  constexpr double h = 1e-7;
  for (int it = 0; it < max_iterations && cost > 0.0; ++it) {
    Eigen::MatrixXd j(res.size(), 5);
    for (int p = 0; p < 5; ++p) {
      Eigen::Matrix<double, 5, 1> d = Eigen::Matrix<double, 5, 1>::Zero();
      d[p] = h;
      const auto [rp, tp] = perturb_pose(r, t, d);
      const auto [rm, tm] = perturb_pose(r, t, -d);
      j.col(p) = (sampson_residuals(corr, idx, rp, tp) - sampson_residuals(corr, idx, rm, tm)) / (2.0 * h);
    }
    const Eigen::Matrix<double, 5, 5> hess = j.transpose() * j;
    const Eigen::Matrix<double, 5, 1> g = j.transpose() * res;
    bool accepted = false;
    while (lambda < 1e12) {
      Eigen::Matrix<double, 5, 5> damped = hess;
      damped.diagonal() += lambda * hess.diagonal().cwiseMax(1e-12);
      const Eigen::Matrix<double, 5, 1> step = damped.fullPivLu().solve(-g);
      const auto [rn, tn] = perturb_pose(r, t, step);
      const Eigen::VectorXd next = sampson_residuals(corr, idx, rn, tn);
      const double next_cost = next.squaredNorm();
      if (next_cost < cost) {
        const bool small = cost - next_cost < 1e-12 * cost;
        r = orthonormalize(rn);
        t = tn;
        res = next;
        cost = next_cost;
        lambda = std::max(lambda / 10.0, 1e-12);
        accepted = !small;
        break;
      }
      lambda *= 10.0;
    }
    if (!accepted) break;
  }
}

}  // namespace detail

/// Relative pose from normalized correspondences: eight-point inside RANSAC,
/// refit on the consensus set, cheirality vote over the four decompositions,
/// then Sampson-error refinement of (R, t) on the inliers.
inline RelativePose estimate_relative_pose(const Correspondence& corr, const RansacOptions& options = {}) {
  const int n = corr.size();
  if (n < 8)
    throw InsufficientInliersError("cameras " + std::to_string(corr.camera_a) + "-" + std::to_string(corr.camera_b) +
                                   ": " + std::to_string(n) + " correspondences, need 8");
  std::mt19937_64 rng(options.seed);
  std::vector<int> all(n);
  std::iota(all.begin(), all.end(), 0);

  auto score = [&](const Eigen::Matrix3d& e, std::vector<int>* inliers) {
    int count = 0;
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      const double d = sampson_distance(e, corr.points_a[i], corr.points_b[i]);
      if (d < options.threshold) {
        ++count;
        total += d;
        if (inliers) inliers->push_back(i);
      }
    }
    return std::pair<int, double>(count, total);
  };

  std::optional<Eigen::Matrix3d> best;
  std::pair<int, double> best_score{-1, 0.0};
  std::vector<int> sample(8);
  for (int it = 0; it < options.iterations; ++it) {
    // partial Fisher-Yates
    for (int s = 0; s < 8; ++s) {
      std::uniform_int_distribution<int> pick(s, n - 1);
      std::swap(all[s], all[pick(rng)]);
      sample[s] = all[s];
    }
    const auto e = eight_point(corr, sample);
    if (!e) continue;
    const auto sc = score(*e, nullptr);
    if (sc.first > best_score.first || (sc.first == best_score.first && sc.second < best_score.second)) {
      best_score = sc;
      best = e;
    }
  }
  if (!best) throw DegenerateError("cameras " + std::to_string(corr.camera_a) + "-" + std::to_string(corr.camera_b) +
                                   ": every minimal sample was degenerate");

  // Refit on the consensus set until it stops growing.
  std::vector<int> inliers;
  score(*best, &inliers);
  Eigen::Matrix3d e = *best;
  for (int round = 0; round < 5; ++round) {
    if (inliers.size() < 8) break;
    const auto refit = eight_point(corr, inliers);
    if (!refit) break;
    std::vector<int> next;
    score(*refit, &next);
    if (next.size() < inliers.size()) break;
    const bool same = next == inliers;
    e = *refit;
    inliers = std::move(next);
    if (same) break;
  }
  if (inliers.size() < 8)
    throw InsufficientInliersError("cameras " + std::to_string(corr.camera_a) + "-" + std::to_string(corr.camera_b) +
                                   ": " + std::to_string(inliers.size()) + " inliers, need 8");

  // Cheirality: pick the decomposition with most points in front of both cameras.
  const auto candidates = decompose_essential(e);
  int best_candidate = -1;
  int best_front = -1;
  for (int c = 0; c < 4; ++c) {
    int front = 0;
    for (int i : inliers) {
      const auto x = triangulate_two_view(candidates[c].first, candidates[c].second, corr.points_a[i], corr.points_b[i]);
      if (!x) continue;
      const double za = x->z();
      const double zb = (candidates[c].first * *x + candidates[c].second).z();
      if (za > 0.0 && zb > 0.0) ++front;
    }
    if (front > best_front) {
      best_front = front;
      best_candidate = c;
    }
  }
  if (2 * best_front < static_cast<int>(inliers.size()))
    throw DegenerateError("cameras " + std::to_string(corr.camera_a) + "-" + std::to_string(corr.camera_b) +
                          ": no decomposition puts half the inliers in front of both cameras");

  // Nonlinear polish of (R, t) on the consensus set, then re-score once.
  Eigen::Matrix3d r = orthonormalize(candidates[best_candidate].first);
  Eigen::Vector3d t = candidates[best_candidate].second.normalized();
  detail::refine_pose(corr, inliers, r, t);
  e = skew(t) * r;
  std::vector<int> rescored;
  score(e, &rescored);
  if (rescored.size() >= 8 && rescored != inliers) {
    inliers = std::move(rescored);
    detail::refine_pose(corr, inliers, r, t);
    e = skew(t) * r;
  }

  RelativePose pose;
  pose.camera_a = corr.camera_a;
  pose.camera_b = corr.camera_b;
  pose.rotation = r;
  pose.translation_dir = t;
  pose.inlier_count = static_cast<int>(inliers.size());
  pose.inliers.assign(n, false);
  double total = 0.0;
  for (int i : inliers) {
    pose.inliers[i] = true;
    total += sampson_distance(e, corr.points_a[i], corr.points_b[i]);
  }
  pose.mean_epipolar_error = total / static_cast<double>(inliers.size());
  return pose;
}

// ---------------------------------------------------------------------------
// Scale
// ---------------------------------------------------------------------------

inline double median(std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("median of empty set");
  std::sort(values.begin(), values.end());
  const std::size_t m = values.size() / 2;
  return values.size() % 2 == 1 ? values[m] : 0.5 * (values[m - 1] + values[m]);
}

/// Metric length of a pairwise baseline from the lower-leg prior: legs are
/// triangulated with a unit baseline and the median knee-ankle length is
/// mapped to `lower_leg_length_m`. nullopt when no leg is seen by both cameras.
inline std::optional<double> pairwise_baseline_from_legs(const Correspondence& corr, const RelativePose& pose,
                                                         double lower_leg_length_m) {
  // (frame, cluster) -> joint -> pair index
  std::map<std::pair<int, int>, std::map<int, int>> people;
  for (int i = 0; i < corr.size(); ++i) {
    if (!pose.inliers.empty() && !pose.inliers[i]) continue;
    people[{corr.tags[i].frame_id, corr.tags[i].cluster}][corr.tags[i].joint] = i;
  }
  std::vector<double> lengths;
  for (const auto& [person, joints] : people) {
    for (const auto& leg : kLowerLegs) {
      const auto ka = joints.find(index(leg.a));
      const auto kb = joints.find(index(leg.b));
      if (ka == joints.end() || kb == joints.end()) continue;
      const auto p = triangulate_two_view(pose.rotation, pose.translation_dir, corr.points_a[ka->second],
                                          corr.points_b[ka->second]);
      const auto q = triangulate_two_view(pose.rotation, pose.translation_dir, corr.points_a[kb->second],
                                          corr.points_b[kb->second]);
      if (!p || !q || p->z() <= 0.0 || q->z() <= 0.0) continue;
      lengths.push_back((*p - *q).norm());
    }
  }
  if (lengths.empty()) return std::nullopt;
  const double m = median(lengths);
  if (!(m > 0.0)) return std::nullopt;
  return lower_leg_length_m / m;
}

// ---------------------------------------------------------------------------
// Alignment
// ---------------------------------------------------------------------------

struct CameraAlignment {
  std::map<int, CameraPose> poses;
  std::vector<int> tree_edges;  // indices into the pairwise list, in the order added
};

/// Place every camera in the reference camera's frame by composing pairwise
/// poses along a maximum-inlier spanning tree (Prim's algorithm).
inline CameraAlignment align_cameras(std::span<const RelativePose> pairwise, int reference,
                                     std::span<const int> camera_ids) {
  CameraAlignment out;
  out.poses[reference] = CameraPose{};
  std::set<int> wanted(camera_ids.begin(), camera_ids.end());
  wanted.insert(reference);
  std::vector<bool> used(pairwise.size(), false);
  while (out.poses.size() < wanted.size()) {
    int best = -1;
    for (int e = 0; e < static_cast<int>(pairwise.size()); ++e) {
      if (used[e]) continue;
      const bool has_a = out.poses.contains(pairwise[e].camera_a);
      const bool has_b = out.poses.contains(pairwise[e].camera_b);
      if (has_a == has_b) continue;
      if (best < 0 || pairwise[e].inlier_count > pairwise[best].inlier_count) best = e;
    }
    if (best < 0) {
      std::string missing;
      for (int c : wanted)
        if (!out.poses.contains(c)) missing += (missing.empty() ? "" : ", ") + std::to_string(c);
      throw DisconnectedGraphError("cameras " + missing + " are not connected to reference camera " +
                                   std::to_string(reference));
    }
    used[best] = true;
    const RelativePose& edge = pairwise[best];
    const Eigen::Vector3d t = edge.translation();
    CameraPose pose;
    if (out.poses.contains(edge.camera_a)) {
      const CameraPose& a = out.poses.at(edge.camera_a);
      pose.rotation = orthonormalize(edge.rotation * a.rotation);
      pose.translation = edge.rotation * a.translation + t;
      out.poses[edge.camera_b] = pose;
    } else {
      const CameraPose& b = out.poses.at(edge.camera_b);
      pose.rotation = orthonormalize(edge.rotation.transpose() * b.rotation);
      pose.translation = edge.rotation.transpose() * (b.translation - t);
      out.poses[edge.camera_a] = pose;
    }
    out.tree_edges.push_back(best);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Triangulation
// ---------------------------------------------------------------------------

/// One camera's undistorted normalized observation of a point.
struct ViewObservation {
  int camera_id = 0;
  Eigen::Vector2d point = Eigen::Vector2d::Zero();
};

/// DLT over every observing camera. nullopt with fewer than two views, a
/// point at infinity, or a point behind any observing camera.
inline std::optional<Eigen::Vector3d> triangulate_point(std::span<const ViewObservation> views,
                                                        const std::map<int, CameraPose>& poses) {
  std::vector<Eigen::Matrix<double, 3, 4>> proj;
  std::vector<Eigen::Vector2d> pts;
  for (const auto& v : views) {
    const auto it = poses.find(v.camera_id);
    if (it == poses.end()) continue;
    proj.push_back(projection_matrix(it->second.rotation, it->second.translation));
    pts.push_back(v.point);
  }
  if (pts.size() < 2) return std::nullopt;
  const auto x = triangulate_dlt(proj, pts);
  if (!x) return std::nullopt;
  for (const auto& v : views) {
    const auto it = poses.find(v.camera_id);
    if (it != poses.end() && !(it->second.to_camera(*x).z() > 0.0)) return std::nullopt;
  }
  return x;
}

using SkeletonViews = std::array<std::vector<ViewObservation>, kNumJoints>;

inline Skeleton3D triangulate(const SkeletonViews& views, const std::map<int, CameraPose>& poses, int person_id = 0) {
  Skeleton3D s;
  s.person_id = person_id;
  for (int j = 0; j < kNumJoints; ++j) {
    const auto x = triangulate_point(views[j], poses);
    if (!x) continue;
    s.joints[j] = *x;
    s.joint_valid[j] = true;
  }
  return s;
}

/// Valid knee-ankle lengths across skeletons.
inline std::vector<double> lower_leg_lengths(std::span<const Skeleton3D> skeletons) {
  std::vector<double> out;
  for (const auto& s : skeletons)
    for (const auto& leg : kLowerLegs)
      if (s.joint_valid[index(leg.a)] && s.joint_valid[index(leg.b)])
        out.push_back((s.joints[index(leg.a)] - s.joints[index(leg.b)]).norm());
  return out;
}

/// Rescale points and camera translations so the median lower leg measures
/// `lower_leg_length_m`. Returns the applied factor.
inline double set_scale(std::span<Skeleton3D> skeletons, std::map<int, CameraPose>& poses, double lower_leg_length_m) {
  const auto lengths = lower_leg_lengths(skeletons);
  if (lengths.empty()) throw NoLegObservedError("no valid knee-ankle segment to fix the metric scale");
  const double m = median(lengths);
  if (!(m > 0.0)) throw NoLegObservedError("median lower-leg length is zero");
  const double s = lower_leg_length_m / m;
  for (auto& sk : skeletons)
    for (auto& j : sk.joints) j *= s;
  for (auto& [id, pose] : poses) pose.translation *= s;
  return s;
}

}  // namespace pme
