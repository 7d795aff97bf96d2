#pragma once

// Brute-force references and fixtures shared by the unit tests and the
// acceptance binary. Everything here is deliberately naive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <vector>

#include <Eigen/Core>

#include "pme/pme.hpp"

namespace oracle {

using pme::FeatureVector;

inline FeatureVector random_unit(std::mt19937_64& rng, int dim) {
  std::normal_distribution<double> g;
  FeatureVector v(dim);
  for (int d = 0; d < dim; ++d) v[d] = g(rng);
  return v / v.norm();
}

// ---------------------------------------------------------------------------
// Assignment
// ---------------------------------------------------------------------------

/// Minimum of sum 0.5*|x - c|^2 over all K^n labelings whose cluster sizes lie
/// in [2, max_size]. +inf when no labeling qualifies.
inline double brute_assignment(const std::vector<pme::Sample>& samples, const std::vector<FeatureVector>& centers,
                               int max_size, std::vector<int>* best_labels = nullptr) {
  const int n = static_cast<int>(samples.size());
  const int k = static_cast<int>(centers.size());
  std::vector<int> labels(n, 0);
  double best = std::numeric_limits<double>::infinity();
  while (true) {
    std::vector<int> sizes(k, 0);
    for (int l : labels) ++sizes[l];
    bool ok = true;
    for (int s : sizes) ok = ok && s >= 2 && s <= max_size;
    if (ok) {
      double cost = 0.0;
      for (int i = 0; i < n; ++i) cost += 0.5 * (samples[i].feature - centers[labels[i]]).squaredNorm();
      if (cost < best) {
        best = cost;
        if (best_labels) *best_labels = labels;
      }
    }
    int pos = 0;
    while (pos < n && ++labels[pos] == k) labels[pos++] = 0;
    if (pos == n) break;
  }
  return best;
}

// ---------------------------------------------------------------------------
// Hungarian
// ---------------------------------------------------------------------------

/// Minimum-cost matching of size min(rows, cols) by enumerating permutations.
inline double brute_matching(const Eigen::MatrixXd& cost) {
  const bool transpose = cost.rows() > cost.cols();
  const Eigen::MatrixXd c = transpose ? Eigen::MatrixXd(cost.transpose()) : cost;
  const int rows = static_cast<int>(c.rows());
  std::vector<int> cols(c.cols());
  std::iota(cols.begin(), cols.end(), 0);
  double best = rows == 0 ? 0.0 : std::numeric_limits<double>::infinity();
  do {
    double total = 0.0;
    for (int r = 0; r < rows; ++r) total += c(r, cols[r]);
    best = std::min(best, total);
  } while (std::next_permutation(cols.begin(), cols.end()));
  return best;
}

// ---------------------------------------------------------------------------
// Sign voting
// ---------------------------------------------------------------------------

inline int sign_of(double x) { return x >= 0.0 ? 1 : -1; }

/// Per dimension: count both signs, keep the majority (ties to the last
/// element), then the largest magnitude among elements of that sign.
inline FeatureVector sign_vote_reference(const std::vector<FeatureVector>& track) {
  const int dim = static_cast<int>(track.front().size());
  FeatureVector out(dim);
  for (int d = 0; d < dim; ++d) {
    std::map<int, int> votes{{1, 0}, {-1, 0}};
    for (const auto& f : track) ++votes[sign_of(f[d])];
    int winner = votes[1] > votes[-1] ? 1 : -1;
    if (votes[1] == votes[-1]) winner = sign_of(track.back()[d]);
    std::vector<double> magnitudes;
    for (const auto& f : track)
      if (sign_of(f[d]) == winner) magnitudes.push_back(std::abs(f[d]));
    out[d] = winner * *std::max_element(magnitudes.begin(), magnitudes.end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Clustering fixtures
// ---------------------------------------------------------------------------

inline std::vector<pme::Sample> random_samples(std::mt19937_64& rng, int n, int cameras, int dim) {
  std::vector<pme::Sample> out;
  std::uniform_int_distribution<int> cam(0, cameras - 1);
  for (int i = 0; i < n; ++i) out.push_back({random_unit(rng, dim), cam(rng), i});
  return out;
}

// Random clustering state with guaranteed source conflicts.
struct ConflictInstance {
  std::vector<pme::Sample> samples;
  pme::ClusterResult result;
};

inline ConflictInstance random_conflict_instance(std::mt19937_64& rng, int trial) {
  std::uniform_int_distribution<int> kdist(2, 4), cdist(2, 4), ndist(5, 12);
  ConflictInstance in;
  const int k = kdist(rng), cams = cdist(rng), n = std::max(ndist(rng), 2 * k);
  in.samples = random_samples(rng, n, cams, 3);
  // Coarse features make exact SDS and distance ties appear now and then.
  if (trial % 4 == 0)
    for (auto& s : in.samples) s.feature = (s.feature * 2.0).array().round() / 2.0;
  in.result.num_clusters = k;
  std::uniform_int_distribution<int> label(0, k - 1);
  for (int i = 0; i < n; ++i) in.result.assignments.push_back(label(rng));
  // Force at least one conflict.
  in.samples[1].camera_id = in.samples[0].camera_id;
  in.result.assignments[1] = in.result.assignments[0];
  for (int c = 0; c < k; ++c) in.result.centers.push_back(random_unit(rng, 3));
  in.result.conflict_flags.assign(n, false);
  in.result.fallback_flags.assign(n, false);
  return in;
}

/// Gaussian entries with occasional exact zeros.
inline std::vector<FeatureVector> random_track(std::mt19937_64& rng, int length, int dim) {
  std::normal_distribution<double> g;
  std::bernoulli_distribution zero(0.05);
  std::vector<FeatureVector> t;
  for (int i = 0; i < length; ++i) {
    FeatureVector f(dim);
    for (int d = 0; d < dim; ++d) f[d] = zero(rng) ? 0.0 : g(rng);
    t.push_back(f);
  }
  return t;
}

// ---------------------------------------------------------------------------
// Step 3
// ---------------------------------------------------------------------------

/// Literal loop: each round rebuilds the camera occupancy from scratch, places
/// samples without any eligible cluster at their overall-nearest center, then
/// sorts the rest by (SDS desc, nearest eligible distance asc, index asc) and
/// assigns the head to its nearest eligible cluster.
inline std::vector<int> literal_step3(std::vector<int> assignments, const std::vector<FeatureVector>& centers,
                                      const std::vector<pme::Sample>& samples, const std::vector<int>& flagged,
                                      std::vector<int>* fallbacks = nullptr) {
  const int k = static_cast<int>(centers.size());
  std::set<int> pending(flagged.begin(), flagged.end());
  while (!pending.empty()) {
    std::vector<std::set<int>> occupied(k);
    for (std::size_t i = 0; i < samples.size(); ++i)
      if (!pending.contains(static_cast<int>(i))) occupied[assignments[i]].insert(samples[i].camera_id);

    struct Row {
      int index;
      double sds;
      double nearest;
      int cluster;
    };
    std::vector<Row> rows;
    std::vector<int> stuck;
    for (int i : pending) {
      std::vector<std::pair<double, int>> eligible;
      for (int c = 0; c < k; ++c)
        if (!occupied[c].contains(samples[i].camera_id))
          eligible.push_back({(samples[i].feature - centers[c]).norm(), c});
      if (eligible.empty()) {
        stuck.push_back(i);
        continue;
      }
      std::sort(eligible.begin(), eligible.end());
      double score = std::numeric_limits<double>::infinity();
      if (eligible.size() >= 2) {
        if (eligible[0].first > 0.0) score = eligible[1].first / eligible[0].first;
        else if (eligible[1].first == 0.0) score = 1.0;
      }
      rows.push_back({i, score, eligible[0].first, eligible[0].second});
    }
    if (!stuck.empty()) {
      for (int i : stuck) {
        int nearest = 0;
        for (int c = 1; c < k; ++c)
          if ((samples[i].feature - centers[c]).norm() < (samples[i].feature - centers[nearest]).norm()) nearest = c;
        assignments[i] = nearest;
        pending.erase(i);
        if (fallbacks) fallbacks->push_back(i);
      }
      continue;
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
      if (a.sds != b.sds) return a.sds > b.sds;
      if (a.nearest != b.nearest) return a.nearest < b.nearest;
      return a.index < b.index;
    });
    assignments[rows.front().index] = rows.front().cluster;
    pending.erase(rows.front().index);
  }
  return assignments;
}

// ---------------------------------------------------------------------------
// Metrics
// ---------------------------------------------------------------------------

struct PairScores {
  double purity, ri, ari, f_score;
};

/// Every unordered pair visited once.
inline PairScores pair_scores(const std::vector<int>& pred, const std::vector<int>& truth) {
  const int n = static_cast<int>(pred.size());
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) {
      const bool sp = pred[i] == pred[j];
      const bool st = truth[i] == truth[j];
      if (sp && st) ++tp;
      else if (sp) ++fp;
      else if (st) ++fn;
      else ++tn;
    }
  std::set<int> clusters(pred.begin(), pred.end());
  double majority = 0;
  for (int c : clusters) {
    std::map<int, int> votes;
    for (int i = 0; i < n; ++i)
      if (pred[i] == c) ++votes[truth[i]];
    int top = 0;
    for (const auto& [label, v] : votes) top = std::max(top, v);
    majority += top;
  }
  PairScores s{};
  s.purity = majority / n;
  s.ri = (tp + tn) / (tp + fp + fn + tn);
  const double den = (tp + fp) * (fp + tn) + (tp + fn) * (fn + tn);
  s.ari = den == 0.0 ? 1.0 : 2.0 * (tp * tn - fn * fp) / den;
  const double precision = tp + fp > 0 ? tp / (tp + fp) : 1.0;
  const double recall = tp + fn > 0 ? tp / (tp + fn) : 1.0;
  s.f_score = precision + recall > 0 ? 2 * precision * recall / (precision + recall) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// Geometry fixtures
// ---------------------------------------------------------------------------

/// Inward-looking ring of cameras, as in the synthetic generator.
inline std::vector<pme::CameraPose> ring(int n, double radius = 6.0, double height = 2.5) {
  std::vector<pme::CameraPose> out;
  for (int c = 0; c < n; ++c) {
    const double a = 2.0 * std::acos(-1.0) * c / n + 0.3;
    out.push_back(pme::look_at({radius * std::cos(a), radius * std::sin(a), height}, {0.0, 0.0, 1.0}));
  }
  return out;
}

inline Eigen::Vector3d random_point(std::mt19937_64& rng, double half_extent = 1.5) {
  std::uniform_real_distribution<double> u(-half_extent, half_extent);
  std::uniform_real_distribution<double> z(0.0, 2.0);
  return {u(rng), u(rng), z(rng)};
}

inline Eigen::Vector2d normalized_projection(const pme::CameraPose& pose, const Eigen::Vector3d& x) {
  const Eigen::Vector3d c = pose.to_camera(x);
  return c.head<2>() / c.z();
}

/// Scale-free noiseless BA instance with `num_points` random points seen by
/// every camera of a ring.
inline pme::BAProblem ba_instance(std::mt19937_64& rng, int num_cameras, int num_points) {
  pme::BAProblem p;
  p.poses = ring(num_cameras);
  p.intrinsics.assign(num_cameras, pme::Intrinsics{1000.0, 1000.0, 960.0, 540.0, {}});
  for (int i = 0; i < num_points; ++i) p.points.push_back(random_point(rng));
  for (int c = 0; c < num_cameras; ++c)
    for (int i = 0; i < num_points; ++i) {
      pme::BAObservation o;
      o.camera = c;
      o.point = i;
      o.pixel = pme::project(p.points[i], p.poses[c], p.intrinsics[c]);
      p.observations.push_back(o);
    }
  return p;
}

/// Central differences of the stacked residual vector.
inline Eigen::MatrixXd numeric_jacobian(const pme::BAProblem& p, const pme::BALayout& layout, double h = 1e-6) {
  const Eigen::VectorXd r0 = pme::ba_residuals(p);
  Eigen::MatrixXd j(r0.size(), layout.num_params);
  for (int k = 0; k < layout.num_params; ++k) {
    Eigen::VectorXd d = Eigen::VectorXd::Zero(layout.num_params);
    d[k] = h;
    const Eigen::VectorXd plus = pme::ba_residuals(pme::apply_increment(p, layout, d));
    const Eigen::VectorXd minus = pme::ba_residuals(pme::apply_increment(p, layout, -d));
    j.col(k) = (plus - minus) / (2.0 * h);
  }
  return j;
}

/// Gaussian jitter on points and on every camera but the first.
inline pme::BAProblem perturbed(std::mt19937_64& rng, const pme::BAProblem& p, double point_sigma, double cam_sigma) {
  std::normal_distribution<double> g;
  pme::BAProblem out = p;
  for (auto& x : out.points) x += point_sigma * Eigen::Vector3d(g(rng), g(rng), g(rng));
  for (std::size_t c = 1; c < out.poses.size(); ++c) {
    out.poses[c].rotation = pme::rotation_exp(cam_sigma * Eigen::Vector3d(g(rng), g(rng), g(rng))) * out.poses[c].rotation;
    out.poses[c].translation += cam_sigma * Eigen::Vector3d(g(rng), g(rng), g(rng));
  }
  return out;
}

}  // namespace oracle
