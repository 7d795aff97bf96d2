#pragma once

// External clustering scores (Purity, Rand index, adjusted Rand index,
// pairwise F-score) and Percentage of Correct Parts for 3D skeletons.

#include <algorithm>
#include <array>
#include <map>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "pme/core.hpp"

namespace pme {

struct ContingencyTable {
  std::vector<int> pred_labels;   // row label values
  std::vector<int> truth_labels;  // column label values
  Eigen::MatrixXi counts;         // pred x truth
  int total = 0;
};

inline ContingencyTable contingency_table(std::span<const int> pred, std::span<const int> truth) {
  if (pred.size() != truth.size()) throw LengthMismatchError("prediction and truth label counts differ");
  ContingencyTable t;
  std::map<int, int> prow, tcol;
  for (int p : pred) prow.emplace(p, 0);
  for (int g : truth) tcol.emplace(g, 0);
  for (auto& [label, idx] : prow) {
    idx = static_cast<int>(t.pred_labels.size());
    t.pred_labels.push_back(label);
  }
  for (auto& [label, idx] : tcol) {
    idx = static_cast<int>(t.truth_labels.size());
    t.truth_labels.push_back(label);
  }
  t.counts = Eigen::MatrixXi::Zero(static_cast<Eigen::Index>(prow.size()), static_cast<Eigen::Index>(tcol.size()));
  for (std::size_t i = 0; i < pred.size(); ++i) ++t.counts(prow[pred[i]], tcol[truth[i]]);
  t.total = static_cast<int>(pred.size());
  return t;
}

struct ClusteringScores {
  double purity = 0.0;
  double ri = 0.0;
  double ari = 0.0;
  double f_score = 0.0;
};

/// Pair counts: TP = same cluster and same class, FP = same cluster only,
/// FN = same class only, TN = neither.
struct PairCounts {
  double tp = 0.0, fp = 0.0, fn = 0.0, tn = 0.0;
};

inline PairCounts pair_counts(const ContingencyTable& t) {
  auto choose2 = [](double x) { return x * (x - 1.0) / 2.0; };
  double same_both = 0.0, same_pred = 0.0, same_truth = 0.0;
  for (Eigen::Index r = 0; r < t.counts.rows(); ++r) {
    same_pred += choose2(t.counts.row(r).sum());
    for (Eigen::Index c = 0; c < t.counts.cols(); ++c) same_both += choose2(t.counts(r, c));
  }
  for (Eigen::Index c = 0; c < t.counts.cols(); ++c) same_truth += choose2(t.counts.col(c).sum());
  PairCounts p;
  p.tp = same_both;
  p.fp = same_pred - same_both;
  p.fn = same_truth - same_both;
  p.tn = choose2(t.total) - p.tp - p.fp - p.fn;
  return p;
}

inline ClusteringScores clustering_scores(std::span<const int> pred, std::span<const int> truth) {
  const ContingencyTable t = contingency_table(pred, truth);
  if (t.total < 2) throw LengthMismatchError("clustering scores need at least two samples");

  ClusteringScores s;
  double majority = 0.0;
  for (Eigen::Index r = 0; r < t.counts.rows(); ++r) majority += t.counts.row(r).maxCoeff();
  s.purity = majority / t.total;

  const PairCounts p = pair_counts(t);
  const double pairs = p.tp + p.fp + p.fn + p.tn;
  s.ri = (p.tp + p.tn) / pairs;

  const double sum_pred = p.tp + p.fp;
  const double sum_truth = p.tp + p.fn;
  const double expected = sum_pred * sum_truth / pairs;
  const double max_index = 0.5 * (sum_pred + sum_truth);
  // Both partitions trivial (all singletons or one block each): identical by construction.
  s.ari = max_index == expected ? 1.0 : (p.tp - expected) / (max_index - expected);

  const double precision = sum_pred > 0.0 ? p.tp / sum_pred : 1.0;
  const double recall = sum_truth > 0.0 ? p.tp / sum_truth : 1.0;
  s.f_score = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
  return s;
}

// ---------------------------------------------------------------------------
// PCP
// ---------------------------------------------------------------------------

inline constexpr double kDefaultPcpAlpha = 0.5;

struct PcpResult {
  std::array<std::optional<bool>, kLimbs.size()> limbs{};  // nullopt = not evaluated
  int correct = 0;
  int evaluated = 0;

  double percentage() const { return evaluated > 0 ? 100.0 * correct / evaluated : 0.0; }
};

/// A limb is correct when both predicted endpoints lie strictly within
/// alpha * (true limb length) of their true positions. Limbs with an invalid
/// endpoint on either side are not evaluated.
inline PcpResult pcp(const Skeleton3D& pred, const Skeleton3D& truth, double alpha = kDefaultPcpAlpha) {
  PcpResult r;
  for (std::size_t l = 0; l < kLimbs.size(); ++l) {
    const int a = index(kLimbs[l].a);
    const int b = index(kLimbs[l].b);
    if (!pred.joint_valid[a] || !pred.joint_valid[b] || !truth.joint_valid[a] || !truth.joint_valid[b]) continue;
    const double limit = alpha * (truth.joints[a] - truth.joints[b]).norm();
    const bool ok = (pred.joints[a] - truth.joints[a]).norm() < limit &&
                    (pred.joints[b] - truth.joints[b]).norm() < limit;
    r.limbs[l] = ok;
    ++r.evaluated;
    r.correct += ok ? 1 : 0;
  }
  return r;
}

inline std::optional<Eigen::Vector3d> hip_center(const Skeleton3D& s) {
  const int l = index(JointId::kLeftHip);
  const int r = index(JointId::kRightHip);
  if (!s.joint_valid[l] || !s.joint_valid[r]) return std::nullopt;
  return 0.5 * (s.joints[l] + s.joints[r]);
}

/// Greedy pairing by ascending hip-center distance. Returns (pred, truth) index pairs.
inline std::vector<std::pair<int, int>> match_by_hips(std::span<const Skeleton3D> pred,
                                                      std::span<const Skeleton3D> truth) {
  struct Candidate {
    double distance;
    int p;
    int t;
  };
  std::vector<Candidate> candidates;
  for (int p = 0; p < static_cast<int>(pred.size()); ++p) {
    const auto hp = hip_center(pred[p]);
    if (!hp) continue;
    for (int t = 0; t < static_cast<int>(truth.size()); ++t) {
      const auto ht = hip_center(truth[t]);
      if (ht) candidates.push_back({(*hp - *ht).norm(), p, t});
    }
  }
  std::sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
    if (a.distance != b.distance) return a.distance < b.distance;
    if (a.p != b.p) return a.p < b.p;
    return a.t < b.t;
  });
  std::vector<bool> used_p(pred.size(), false), used_t(truth.size(), false);
  std::vector<std::pair<int, int>> out;
  for (const auto& c : candidates) {
    if (used_p[c.p] || used_t[c.t]) continue;
    used_p[c.p] = used_t[c.t] = true;
    out.emplace_back(c.p, c.t);
  }
  std::sort(out.begin(), out.end());
  return out;
}

/// PCP over a set of people: hip-matched pairs are scored with pcp(); every
/// evaluable limb of an unmatched true skeleton counts as incorrect.
inline PcpResult scene_pcp(std::span<const Skeleton3D> pred, std::span<const Skeleton3D> truth,
                           double alpha = kDefaultPcpAlpha) {
  PcpResult total;
  std::vector<bool> matched(truth.size(), false);
  for (const auto& [p, t] : match_by_hips(pred, truth)) {
    matched[t] = true;
    const PcpResult r = pcp(pred[p], truth[t], alpha);
    total.correct += r.correct;
    total.evaluated += r.evaluated;
  }
  for (std::size_t t = 0; t < truth.size(); ++t) {
    if (matched[t]) continue;
    for (const auto& limb : kLimbs)
      if (truth[t].joint_valid[index(limb.a)] && truth[t].joint_valid[index(limb.b)]) ++total.evaluated;
  }
  return total;
}

}  // namespace pme
