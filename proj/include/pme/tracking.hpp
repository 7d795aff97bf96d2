#pragma once

// Short-term single-view tracking by frame-to-frame Hungarian matching of
// appearance features.

#include <span>
#include <string>
#include <vector>

#include "pme/config.hpp"
#include "pme/core.hpp"
#include "pme/embedding.hpp"
#include "pme/hungarian.hpp"

namespace pme {

inline double feature_distance(const FeatureVector& a, const FeatureVector& b, TrackingMetric metric) {
  const FeatureVector na = normalize_feature(a);
  const FeatureVector nb = normalize_feature(b);
  if (metric == TrackingMetric::kEuclidean) return (na - nb).norm();
  return 1.0 - na.dot(nb);
}

struct TrackStep {
  std::vector<Track> tracks;           // still open after this frame
  std::vector<Track> closed;           // closed at this frame
  std::vector<int> detection_track;    // track id per current detection
};

/// Advance one camera's tracks by one frame. `current` holds that camera's
/// detections at `frame_id`, in file order (position = local index).
/// New tracks draw ids from `next_track_id`.
inline TrackStep step_tracks(std::vector<Track> prev, std::span<const Detection> current, int frame_id,
                             const PipelineConfig& cfg, int& next_track_id) {
  std::optional<int> camera;
  for (const auto& d : current) {
    if (camera && d.camera_id != *camera)
      throw MixedCameraError("detections from cameras " + std::to_string(*camera) + " and " +
                             std::to_string(d.camera_id) + " passed to one tracker step");
    camera = d.camera_id;
    if (d.frame_id != frame_id)
      throw MixedCameraError("detection at frame " + std::to_string(d.frame_id) +
                             " passed to tracker step for frame " + std::to_string(frame_id));
  }
  for (const auto& t : prev)
    if (camera && t.camera_id != *camera)
      throw MixedCameraError("track of camera " + std::to_string(t.camera_id) +
                             " stepped with detections of camera " + std::to_string(*camera));

  TrackStep out;
  // A track may skip one frame; two missing frames close it.
  std::vector<Track> live;
  for (auto& t : prev) {
    if (t.last_frame() >= frame_id - 2) live.push_back(std::move(t));
    else out.closed.push_back(std::move(t));
  }

  const int rows = static_cast<int>(current.size());
  const int cols = static_cast<int>(live.size());
  Eigen::MatrixXd cost(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c)
      cost(r, c) = feature_distance(current[r].feature, live[c].detections.back().feature, cfg.tracking_metric);

  std::vector<int> det_to_track(rows, -1);
  std::vector<bool> track_matched(cols, false);
  for (const auto& [r, c] : hungarian(cost)) {
    if (cost(r, c) > cfg.gating_threshold) continue;
    det_to_track[r] = c;
    track_matched[c] = true;
  }

  out.detection_track.assign(rows, -1);
  for (int c = 0; c < cols; ++c) {
    Track& t = live[c];
    if (!track_matched[c]) continue;
    int r = 0;
    while (det_to_track[r] != c) ++r;
    t.detections.push_back(current[r]);
    t.local_indices.push_back(r);
    if (t.length() > cfg.track_length) {
      t.detections.erase(t.detections.begin());
      t.local_indices.erase(t.local_indices.begin());
    }
    out.detection_track[r] = t.id;
  }
  for (int c = 0; c < cols; ++c) {
    if (track_matched[c] || live[c].last_frame() >= frame_id - 1) out.tracks.push_back(std::move(live[c]));
    else out.closed.push_back(std::move(live[c]));
  }
  for (int r = 0; r < rows; ++r) {
    if (det_to_track[r] >= 0) continue;
    Track t;
    t.id = next_track_id++;
    t.camera_id = current[r].camera_id;
    t.detections.push_back(current[r]);
    t.local_indices.push_back(r);
    out.detection_track[r] = t.id;
    out.tracks.push_back(std::move(t));
  }
  return out;
}

}  // namespace pme
