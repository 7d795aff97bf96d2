#pragma once

// Feature normalization and track-feature aggregation ("max of sign voting"
// plus the mean / max / mean-of-sign-voting ablation variants).

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "pme/config.hpp"
#include "pme/core.hpp"

namespace pme {

/// Scale a raw descriptor to unit Euclidean norm.
inline FeatureVector normalize_feature(const Eigen::Ref<const Eigen::VectorXd>& raw) {
  const double n = raw.norm();
  if (!(n > 0.0) || !std::isfinite(n)) throw ZeroVectorError("cannot normalize a zero or non-finite feature");
  return raw / n;
}

namespace detail {

inline void check_track(std::span<const FeatureVector> features) {
  if (features.empty()) throw EmptyTrackError("track has no features");
  const auto dim = features.front().size();
  for (const auto& f : features)
    if (f.size() != dim)
      throw DimensionMismatchError("track features have dimensions " + std::to_string(dim) +
                                   " and " + std::to_string(f.size()));
}

// +1 or -1. Zeros vote positive; a tied vote goes to the latest element's sign.
inline int dominant_sign(std::span<const FeatureVector> features, Eigen::Index d) {
  int positive = 0;
  for (const auto& f : features) positive += f[d] >= 0.0 ? 1 : 0;
  const int negative = static_cast<int>(features.size()) - positive;
  if (positive != negative) return positive > negative ? 1 : -1;
  return features.back()[d] >= 0.0 ? 1 : -1;
}

inline bool has_sign(double value, int sign) { return sign > 0 ? value >= 0.0 : value < 0.0; }

}  // namespace detail

/// Per dimension: majority sign times the largest magnitude among majority-sign
/// elements. Not normalized. Input is time ordered, oldest first.
inline FeatureVector sign_vote_raw(std::span<const FeatureVector> features) {
  detail::check_track(features);
  const Eigen::Index dim = features.front().size();
  FeatureVector out(dim);
  for (Eigen::Index d = 0; d < dim; ++d) {
    const int s = detail::dominant_sign(features, d);
    double best = 0.0;
    for (const auto& f : features)
      if (detail::has_sign(f[d], s)) best = std::max(best, std::abs(f[d]));
    out[d] = s * best;
  }
  return out;
}

/// Max of sign voting, re-normalized to the unit sphere.
inline FeatureVector sign_vote(std::span<const FeatureVector> features) {
  return normalize_feature(sign_vote_raw(features));
}

/// Unnormalized aggregate for any variant.
inline FeatureVector aggregate_raw(std::span<const FeatureVector> features, EmbedVariant variant) {
  detail::check_track(features);
  const Eigen::Index dim = features.front().size();
  switch (variant) {
    case EmbedVariant::kSignVote:
      return sign_vote_raw(features);
    case EmbedVariant::kMean: {
      FeatureVector sum = FeatureVector::Zero(dim);
      for (const auto& f : features) sum += f;
      return sum / static_cast<double>(features.size());
    }
    case EmbedVariant::kMax: {
      FeatureVector out = features.front();
      for (const auto& f : features) out = out.cwiseMax(f);
      return out;
    }
    case EmbedVariant::kMeanSignVote: {
      FeatureVector out(dim);
      for (Eigen::Index d = 0; d < dim; ++d) {
        const int s = detail::dominant_sign(features, d);
        double sum = 0.0;
        int count = 0;
        for (const auto& f : features) {
          if (detail::has_sign(f[d], s)) {
            sum += f[d];
            ++count;
          }
        }
        out[d] = sum / count;
      }
      return out;
    }
  }
  return sign_vote_raw(features);
}

/// Track feature for the chosen variant; always unit norm.
inline FeatureVector aggregate(std::span<const FeatureVector> features, EmbedVariant variant) {
  return normalize_feature(aggregate_raw(features, variant));
}

}  // namespace pme
