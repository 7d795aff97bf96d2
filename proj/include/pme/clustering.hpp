#pragma once

// Cross-view person matching as constrained clustering.
//
//   Step 1  size-constrained k-means: every cluster holds between 2 and N
//           samples (N = camera count); the assignment step is an exact
//           min-cost flow solved by network simplex.
//   Step 2  source-conflict detection: samples sharing a camera inside one
//           cluster are flagged.
//   Step 3  flagged samples are re-assigned one at a time, most
//           distinguishable first (Sample Distinguishability Score), only
//           into clusters that hold no sample from their camera.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <random>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "pme/core.hpp"
#include "pme/min_cost_flow.hpp"

namespace pme {

struct Sample {
  FeatureVector feature;
  int camera_id = 0;
  int local_index = 0;
};

/// Squared distances are scaled by this factor and rounded before entering the flow network.
inline constexpr double kAssignmentCostScale = 1e7;

struct ClusteringOptions {
  std::uint64_t seed = 0;
  int max_iterations = 100;
};

// ---------------------------------------------------------------------------
// Flow network for the size-constrained assignment
// ---------------------------------------------------------------------------

struct FlowNetwork {
  struct Arc {
    int from = 0;
    int to = 0;
    std::int64_t lower = 0;
    std::int64_t upper = 0;
    std::int64_t cost = 0;
  };

  int num_samples = 0;
  int num_clusters = 0;
  std::vector<Arc> arcs;

  int source() const { return 0; }
  int sample_node(int i) const { return 1 + i; }
  int cluster_node(int k) const { return 1 + num_samples + k; }
  int sink() const { return 1 + num_samples + num_clusters; }
  int num_nodes() const { return num_samples + num_clusters + 2; }
  // Sample->cluster arcs are laid out row-major after the source arcs.
  int assignment_arc(int i, int k) const { return num_samples + i * num_clusters + k; }
};

inline double half_squared_distance(const FeatureVector& x, const FeatureVector& c) {
  return 0.5 * (x - c).squaredNorm();
}

inline FlowNetwork build_assignment_network(std::span<const Sample> samples, std::span<const FeatureVector> centers,
                                            int max_cluster_size) {
  FlowNetwork net;
  net.num_samples = static_cast<int>(samples.size());
  net.num_clusters = static_cast<int>(centers.size());
  for (int i = 0; i < net.num_samples; ++i) net.arcs.push_back({net.source(), net.sample_node(i), 0, 1, 0});
  for (int i = 0; i < net.num_samples; ++i) {
    for (int k = 0; k < net.num_clusters; ++k) {
      const long long scaled = std::llround(kAssignmentCostScale * half_squared_distance(samples[i].feature, centers[k]));
      net.arcs.push_back({net.sample_node(i), net.cluster_node(k), 0, 1, static_cast<std::int64_t>(scaled)});
    }
  }
  for (int k = 0; k < net.num_clusters; ++k)
    net.arcs.push_back({net.cluster_node(k), net.sink(), 2, max_cluster_size, 0});
  return net;
}

inline void check_assignment_feasible(int num_samples, int num_clusters, int max_cluster_size) {
  if (num_clusters < 1) throw InfeasibleError("need at least one cluster");
  if (2 * num_clusters > num_samples)
    throw InfeasibleError("cannot give " + std::to_string(num_clusters) + " clusters two members each from " +
                          std::to_string(num_samples) + " samples");
  if (static_cast<long long>(num_clusters) * max_cluster_size < num_samples)
    throw InfeasibleError(std::to_string(num_samples) + " samples exceed " + std::to_string(num_clusters) +
                          " clusters of at most " + std::to_string(max_cluster_size));
}

/// Clustering objective: sum of half squared distances to assigned centers.
inline double clustering_objective(std::span<const Sample> samples, std::span<const FeatureVector> centers,
                                   std::span<const int> labels) {
  double total = 0.0;
  for (std::size_t i = 0; i < samples.size(); ++i) total += half_squared_distance(samples[i].feature, centers[labels[i]]);
  return total;
}

/// Optimal assignment for fixed centers subject to: one cluster per sample,
/// and every cluster size in [2, max_cluster_size].
inline std::vector<int> solve_assignment(std::span<const Sample> samples, std::span<const FeatureVector> centers,
                                         int max_cluster_size) {
  const int n = static_cast<int>(samples.size());
  const int k = static_cast<int>(centers.size());
  check_assignment_feasible(n, k, max_cluster_size);

  const FlowNetwork net = build_assignment_network(samples, centers, max_cluster_size);
  NetworkSimplex solver(net.num_nodes());
  for (const auto& a : net.arcs) solver.add_arc(a.from, a.to, a.lower, a.upper, a.cost);
  solver.set_supply(net.source(), n);
  solver.set_supply(net.sink(), -n);
  if (solver.run() != NetworkSimplex::Status::kOptimal)
    throw InfeasibleError("size-constrained assignment has no feasible flow");

  std::vector<int> labels(n, -1);
  for (int i = 0; i < n; ++i)
    for (int c = 0; c < k; ++c)
      if (solver.flow(net.assignment_arc(i, c)) > 0) labels[i] = c;
  return labels;
}

// ---------------------------------------------------------------------------
// Step 1: size-constrained k-means
// ---------------------------------------------------------------------------

/// k-means++ seeding: first center uniform, then proportional to squared distance.
inline std::vector<FeatureVector> seed_centers(std::span<const Sample> samples, int k, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const int n = static_cast<int>(samples.size());
  std::vector<FeatureVector> centers;
  std::vector<bool> chosen(n, false);
  std::uniform_int_distribution<int> pick(0, n - 1);
  const int first = pick(rng);
  centers.push_back(samples[first].feature);
  chosen[first] = true;
  std::vector<double> d2(n, std::numeric_limits<double>::infinity());
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (int i = 0; i < n; ++i) {
      d2[i] = std::min(d2[i], (samples[i].feature - centers.back()).squaredNorm());
      if (!chosen[i]) total += d2[i];
    }
    int next = -1;
    if (total > 0.0) {
      std::uniform_real_distribution<double> u(0.0, total);
      double r = u(rng);
      for (int i = 0; i < n; ++i) {
        if (chosen[i]) continue;
        next = i;
        r -= d2[i];
        if (r <= 0.0) break;
      }
    } else {
      // every remaining sample coincides with a center
      std::vector<int> rest;
      for (int i = 0; i < n; ++i)
        if (!chosen[i]) rest.push_back(i);
      next = rest[std::uniform_int_distribution<int>(0, static_cast<int>(rest.size()) - 1)(rng)];
    }
    chosen[next] = true;
    centers.push_back(samples[next].feature);
  }
  return centers;
}

inline std::vector<FeatureVector> cluster_means(std::span<const Sample> samples, std::span<const int> labels,
                                                std::vector<FeatureVector> previous) {
  const int k = static_cast<int>(previous.size());
  std::vector<FeatureVector> sums(k, FeatureVector::Zero(samples.empty() ? 0 : samples[0].feature.size()));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    sums[labels[i]] += samples[i].feature;
    ++counts[labels[i]];
  }
  for (int c = 0; c < k; ++c)
    if (counts[c] > 0) previous[c] = sums[c] / counts[c];
  return previous;
}

/// Alternate optimal size-constrained assignment and mean updates until the
/// assignment stops changing (or stops improving) or the iteration cap.
inline ClusterResult constrained_kmeans(std::span<const Sample> samples, int k, int num_cameras,
                                        const ClusteringOptions& options = {}) {
  const int n = static_cast<int>(samples.size());
  check_assignment_feasible(n, k, num_cameras);

  ClusterResult result;
  result.num_clusters = k;
  std::vector<FeatureVector> centers = seed_centers(samples, k, options.seed);
  std::vector<int> labels = solve_assignment(samples, centers, num_cameras);
  result.objective_trace.push_back(clustering_objective(samples, centers, labels));
  result.iterations = 1;

  while (result.iterations < options.max_iterations) {
    centers = cluster_means(samples, labels, centers);
    const double current = clustering_objective(samples, centers, labels);
    std::vector<int> next = solve_assignment(samples, centers, num_cameras);
    if (next == labels) break;
    const double proposed = clustering_objective(samples, centers, next);
    // Integer rounding of flow costs can return a different labeling that is
    // no better in real arithmetic; treat that as convergence.
    if (!(proposed < current)) break;
    labels = std::move(next);
    result.objective_trace.push_back(proposed);
    ++result.iterations;
  }

  result.centers = cluster_means(samples, labels, centers);
  result.assignments = std::move(labels);
  result.conflict_flags.assign(n, false);
  result.fallback_flags.assign(n, false);
  return result;
}

/// Plain Lloyd k-means with the same seeding; the ablation baseline.
inline ClusterResult unconstrained_kmeans(std::span<const Sample> samples, int k, const ClusteringOptions& options = {}) {
  const int n = static_cast<int>(samples.size());
  if (k < 1 || k > n) throw InfeasibleError("k-means needs 1 <= k <= sample count");
  ClusterResult result;
  result.num_clusters = k;
  std::vector<FeatureVector> centers = seed_centers(samples, k, options.seed);
  std::vector<int> labels(n, -1);
  for (result.iterations = 0; result.iterations < options.max_iterations; ++result.iterations) {
    std::vector<int> next(n, 0);
    for (int i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (samples[i].feature - centers[c]).squaredNorm();
        if (d < best) {
          best = d;
          next[i] = c;
        }
      }
    }
    if (next == labels) break;
    labels = std::move(next);
    centers = cluster_means(samples, labels, centers);
    result.objective_trace.push_back(clustering_objective(samples, centers, labels));
  }
  result.centers = std::move(centers);
  result.assignments = std::move(labels);
  result.conflict_flags.assign(n, false);
  result.fallback_flags.assign(n, false);
  return result;
}

// ---------------------------------------------------------------------------
// Step 2: source conflicts
// ---------------------------------------------------------------------------

/// Samples of one camera that landed in the same cluster.
struct ConflictGroup {
  int cluster = 0;
  int camera_id = 0;
  std::vector<int> members;  // ascending sample indices

  bool operator==(const ConflictGroup&) const = default;
};

inline std::vector<ConflictGroup> detect_conflicts(const ClusterResult& result, std::span<const Sample> samples) {
  std::map<std::pair<int, int>, std::vector<int>> by_cluster_camera;
  for (std::size_t i = 0; i < samples.size(); ++i)
    by_cluster_camera[{result.assignments[i], samples[i].camera_id}].push_back(static_cast<int>(i));
  std::vector<ConflictGroup> groups;
  for (auto& [key, members] : by_cluster_camera)
    if (members.size() >= 2) groups.push_back({key.first, key.second, std::move(members)});
  return groups;
}

// ---------------------------------------------------------------------------
// Step 3: SDS-ordered source-constrained re-assignment
// ---------------------------------------------------------------------------

/// Camera ids already present in each cluster.
using Occupancy = std::vector<std::set<int>>;

struct EligibleDistances {
  std::vector<std::pair<double, int>> sorted;  // (distance, cluster), ascending
};

inline EligibleDistances eligible_distances(const Sample& sample, std::span<const FeatureVector> centers,
                                            const Occupancy& occupancy) {
  EligibleDistances out;
  for (int c = 0; c < static_cast<int>(centers.size()); ++c)
    if (!occupancy[c].contains(sample.camera_id)) out.sorted.emplace_back((sample.feature - centers[c]).norm(), c);
  std::sort(out.sorted.begin(), out.sorted.end());
  return out;
}

/// Sample Distinguishability Score: second-nearest over nearest eligible
/// center distance; +inf with a single eligible cluster.
inline double sds(const Sample& sample, std::span<const FeatureVector> centers, const Occupancy& occupancy) {
  const auto eligible = eligible_distances(sample, centers, occupancy);
  const auto& d = eligible.sorted;
  if (d.empty()) throw NoEligibleClusterError("every cluster already holds camera " + std::to_string(sample.camera_id));
  if (d.size() == 1) return std::numeric_limits<double>::infinity();
  if (d[0].first == 0.0) return d[1].first == 0.0 ? 1.0 : std::numeric_limits<double>::infinity();
  return d[1].first / d[0].first;
}

/// One Step-3 decision, in the order taken.
struct ReassignmentStep {
  int sample = 0;
  int cluster = 0;
  double score = 0.0;  // SDS at the time of assignment; NaN for fallbacks
  bool fallback = false;
};

inline ClusterResult reassign_conflicts(ClusterResult result, std::span<const ConflictGroup> groups,
                                        std::span<const Sample> samples,
                                        std::vector<ReassignmentStep>* log = nullptr) {
  const int n = static_cast<int>(samples.size());
  const int k = result.num_clusters;
  result.conflict_flags.assign(n, false);
  result.fallback_flags.assign(n, false);
  for (const auto& g : groups)
    for (int i : g.members) result.conflict_flags[i] = true;

  Occupancy occupancy(k);
  for (int i = 0; i < n; ++i)
    if (!result.conflict_flags[i]) occupancy[result.assignments[i]].insert(samples[i].camera_id);

  std::vector<int> remaining;
  for (int i = 0; i < n; ++i)
    if (result.conflict_flags[i]) remaining.push_back(i);

  const std::span<const FeatureVector> centers(result.centers);
  while (!remaining.empty()) {
    // A sample with no eligible cluster never regains one; place it now.
    for (auto it = remaining.begin(); it != remaining.end();) {
      if (!eligible_distances(samples[*it], centers, occupancy).sorted.empty()) {
        ++it;
        continue;
      }
      int nearest = 0;
      double best = std::numeric_limits<double>::infinity();
      for (int c = 0; c < k; ++c) {
        const double d = (samples[*it].feature - centers[c]).norm();
        if (d < best) {
          best = d;
          nearest = c;
        }
      }
      result.assignments[*it] = nearest;
      result.fallback_flags[*it] = true;
      occupancy[nearest].insert(samples[*it].camera_id);
      if (log) log->push_back({*it, nearest, std::numeric_limits<double>::quiet_NaN(), true});
      it = remaining.erase(it);
    }
    if (remaining.empty()) break;

    // Highest SDS first; ties to the smaller nearest distance, then lower index.
    std::size_t pick = 0;
    double pick_score = -1.0;
    double pick_nearest = 0.0;
    int pick_cluster = -1;
    for (std::size_t r = 0; r < remaining.size(); ++r) {
      const Sample& s = samples[remaining[r]];
      const auto eligible = eligible_distances(s, centers, occupancy);
      const double score = sds(s, centers, occupancy);
      const double nearest = eligible.sorted.front().first;
      const bool better = pick_cluster < 0 || score > pick_score ||
                          (score == pick_score && nearest < pick_nearest);
      if (better) {
        pick = r;
        pick_score = score;
        pick_nearest = nearest;
        pick_cluster = eligible.sorted.front().second;
      }
    }
    const int i = remaining[pick];
    result.assignments[i] = pick_cluster;
    occupancy[pick_cluster].insert(samples[i].camera_id);
    if (log) log->push_back({i, pick_cluster, pick_score, false});
    remaining.erase(remaining.begin() + static_cast<std::ptrdiff_t>(pick));
  }
  return result;
}

// ---------------------------------------------------------------------------
// Full matching
// ---------------------------------------------------------------------------

/// Largest number of samples any one camera contributes.
inline int max_per_camera(std::span<const Sample> samples) {
  std::map<int, int> counts;
  int best = 0;
  for (const auto& s : samples) best = std::max(best, ++counts[s.camera_id]);
  return best;
}

/// Steps 1-3. Step 3 runs against centers recomputed from unflagged members.
inline ClusterResult match_people(std::span<const Sample> samples, int k, int num_cameras,
                                  const ClusteringOptions& options = {},
                                  std::vector<ReassignmentStep>* log = nullptr) {
  if (max_per_camera(samples) > k)
    throw InfeasibleError("a camera contributes " + std::to_string(max_per_camera(samples)) +
                          " samples but only " + std::to_string(k) + " clusters exist");
  ClusterResult result = constrained_kmeans(samples, k, num_cameras, options);
  const auto groups = detect_conflicts(result, samples);
  if (groups.empty()) return result;

  std::vector<bool> flagged(samples.size(), false);
  for (const auto& g : groups)
    for (int i : g.members) flagged[i] = true;
  std::vector<FeatureVector> sums(k, FeatureVector::Zero(samples[0].feature.size()));
  std::vector<int> counts(k, 0);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    if (flagged[i]) continue;
    sums[result.assignments[i]] += samples[i].feature;
    ++counts[result.assignments[i]];
  }
  for (int c = 0; c < k; ++c)
    if (counts[c] > 0) result.centers[c] = sums[c] / counts[c];

  result = reassign_conflicts(std::move(result), groups, samples, log);
  std::vector<int> labels = result.assignments;
  result.centers = cluster_means(samples, labels, result.centers);
  return result;
}

}  // namespace pme
