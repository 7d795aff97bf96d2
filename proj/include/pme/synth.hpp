#pragma once

// Seeded synthetic multi-camera scenes with full ground truth, and the joint
// jitter sweep built on them.
//
// People walk between random waypoints on the ground plane as rigid-limbed
// skeletons with swinging arms and legs; cameras stand on a circle looking
// inward. Features are normalize(base + view offset + frame noise) with
// random per-dimension sign flips. Every random quantity comes from its own
// stream, so changing one knob (for example the jitter window) leaves the
// other draws untouched.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "pme/config.hpp"
#include "pme/core.hpp"
#include "pme/geometry.hpp"
#include "pme/io.hpp"
#include "pme/parallel.hpp"
#include "pme/pipeline.hpp"

namespace pme {

struct SynthSpec {
  std::uint64_t seed = 0;

  // rig
  int num_cameras = 4;
  double camera_radius = 6.0;  // m
  double camera_height = 2.5;  // m
  double look_at_height = 1.0;
  Intrinsics intrinsics{1000.0, 1000.0, 960.0, 540.0, {}};

  // people and motion
  int num_people = 3;
  int num_frames = 20;
  double fps = 30.0;
  double area_radius = 2.5;  // waypoints drawn inside this disc
  double walk_speed = 1.2;   // m/s
  double swing_amplitude = 0.35;  // rad, arms and legs

  // appearance
  int dim = kDefaultFeatureDim;
  double base_mean = 0.0;      // per-dimension mean of person base vectors
  double sigma_view = 0.1;     // per-dimension std of the (person, camera) offset
  double sigma_frame = 0.05;   // per-dimension std of per-detection noise
  double p_flip = 0.0;         // per-dimension sign flip probability
  std::vector<std::pair<int, int>> confusion_pairs;  // second shares the first's base
  double confusion_offset = 0.1;  // per-dimension std separating a confused pair

  // detections
  double dropout = 0.0;   // per (person, camera, frame) miss probability
  int noise_window = 0;   // joint jitter: uniform over a W x W pixel square

  void validate() const {
    auto bad = [](const std::string& m) { throw SpecError(m); };
    if (num_cameras < 2) bad("need at least 2 cameras");
    if (num_people < 1) bad("need at least 1 person");
    if (num_frames < 1) bad("need at least 1 frame");
    if (dim < 1) bad("feature dimension must be positive");
    if (!(camera_radius > area_radius + 1.0)) bad("cameras must stand outside the walking area");
    if (!(fps > 0.0) || !(walk_speed >= 0.0) || !(area_radius > 0.0)) bad("fps, speed and area must be positive");
    if (!intrinsics.valid()) bad("focal lengths must be positive");
    if (sigma_view < 0.0 || sigma_frame < 0.0 || confusion_offset < 0.0) bad("noise levels must be non-negative");
    if (p_flip < 0.0 || p_flip >= 0.5) bad("p_flip must lie in [0, 0.5)");
    if (dropout < 0.0 || dropout >= 1.0) bad("dropout must lie in [0, 1)");
    if (noise_window < 0 || noise_window % 2 != 0) bad("noise window must be a non-negative even integer");
    for (const auto& [a, b] : confusion_pairs)
      if (a < 0 || b < 0 || a >= num_people || b >= num_people || a == b) bad("confusion pair out of range");
  }
};

/// Body-frame joint positions (x forward, y left, z up) before limb swing.
/// Knee and ankle sit directly above one another, 0.5 m apart.
inline std::array<Eigen::Vector3d, kNumJoints> rest_pose() {
  return {{
      {0.0, 0.20, 1.45},   // L shoulder
      {0.0, -0.20, 1.45},  // R shoulder
      {0.02, 0.23, 1.15},  // L elbow
      {0.02, -0.23, 1.15}, // R elbow
      {0.08, 0.25, 0.88},  // L wrist
      {0.08, -0.25, 0.88}, // R wrist
      {0.0, 0.11, 0.95},   // L hip
      {0.0, -0.11, 0.95},  // R hip
      {0.03, 0.11, 0.55},  // L knee
      {0.03, -0.11, 0.55}, // R knee
      {0.03, 0.11, 0.05},  // L ankle
      {0.03, -0.11, 0.05}, // R ankle
  }};
}

namespace detail {

struct Walker {
  std::vector<Eigen::Vector2d> waypoints;
  double phase = 0.0;
};

// Position and heading after `distance` meters along the waypoint polyline.
inline std::pair<Eigen::Vector2d, double> walk_state(const Walker& w, double distance) {
  for (std::size_t i = 0; i + 1 < w.waypoints.size(); ++i) {
    const Eigen::Vector2d seg = w.waypoints[i + 1] - w.waypoints[i];
    const double len = seg.norm();
    if (distance <= len || i + 2 == w.waypoints.size()) {
      const double s = len > 0.0 ? std::min(distance, len) / len : 0.0;
      return {w.waypoints[i] + s * seg, std::atan2(seg.y(), seg.x())};
    }
    distance -= len;
  }
  return {w.waypoints.front(), 0.0};
}

inline Eigen::Vector3d rotate_about(const Eigen::Vector3d& p, const Eigen::Vector3d& pivot, double angle) {
  // swing in the forward-up plane, about the body's lateral axis
  return pivot + Eigen::AngleAxisd(angle, Eigen::Vector3d::UnitY()).toRotationMatrix() * (p - pivot);
}

}  // namespace detail

/// Body pose of one walker at time t, in world coordinates.
inline std::array<Eigen::Vector3d, kNumJoints> posed_joints(const Eigen::Vector2d& position, double heading,
                                                            double swing) {
  auto joints = rest_pose();
  using J = JointId;
  const auto pivot_l_leg = joints[index(J::kLeftHip)];
  const auto pivot_r_leg = joints[index(J::kRightHip)];
  const auto pivot_l_arm = joints[index(J::kLeftShoulder)];
  const auto pivot_r_arm = joints[index(J::kRightShoulder)];
  for (J j : {J::kLeftKnee, J::kLeftAnkle}) joints[index(j)] = detail::rotate_about(joints[index(j)], pivot_l_leg, swing);
  for (J j : {J::kRightKnee, J::kRightAnkle}) joints[index(j)] = detail::rotate_about(joints[index(j)], pivot_r_leg, -swing);
  for (J j : {J::kLeftElbow, J::kLeftWrist}) joints[index(j)] = detail::rotate_about(joints[index(j)], pivot_l_arm, -swing);
  for (J j : {J::kRightElbow, J::kRightWrist}) joints[index(j)] = detail::rotate_about(joints[index(j)], pivot_r_arm, swing);
  const Eigen::Matrix3d yaw = Eigen::AngleAxisd(heading, Eigen::Vector3d::UnitZ()).toRotationMatrix();
  const Eigen::Vector3d offset(position.x(), position.y(), 0.0);
  for (auto& j : joints) j = yaw * j + offset;
  return joints;
}

/// World-to-camera pose of a camera at `center` looking at `target`, image y down.
inline CameraPose look_at(const Eigen::Vector3d& center, const Eigen::Vector3d& target) {
  const Eigen::Vector3d forward = (target - center).normalized();
  const Eigen::Vector3d right = forward.cross(Eigen::Vector3d::UnitZ()).normalized();
  const Eigen::Vector3d down = forward.cross(right);
  CameraPose pose;
  pose.rotation.row(0) = right;
  pose.rotation.row(1) = down;
  pose.rotation.row(2) = forward;
  pose.translation = -pose.rotation * center;
  return pose;
}

inline CameraPose canonical(const CameraPose& p) {
  CameraPose out;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out.rotation(i, j) = canonical(p.rotation(i, j));
    out.translation(i) = canonical(p.translation(i));
  }
  return out;
}

/// Deterministic scene for a spec. All reals are rounded to their file form,
/// so write_scene/read_scene reproduces the returned value exactly.
inline SceneFile generate(const SynthSpec& spec) {
  spec.validate();
  enum Stream : std::uint64_t { kWalk = 1, kAppearance, kFrameNoise, kFlip, kDropout, kShuffle, kJitter, kConfidence };
  auto stream = [&](Stream s) { return std::mt19937_64(mix_seed(spec.seed, s)); };
  std::mt19937_64 walk_rng = stream(kWalk), app_rng = stream(kAppearance), noise_rng = stream(kFrameNoise),
                  flip_rng = stream(kFlip), drop_rng = stream(kDropout), shuffle_rng = stream(kShuffle),
                  jitter_rng = stream(kJitter), conf_rng = stream(kConfidence);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  SceneFile scene;
  scene.header.dim = spec.dim;
  scene.header.fps = canonical(spec.fps);
  scene.header.people = spec.num_people;

  // Cameras.
  std::vector<CameraPose> exact_poses;
  for (int c = 0; c < spec.num_cameras; ++c) {
    const double a = 2.0 * std::numbers::pi * c / spec.num_cameras + 0.3;
    const Eigen::Vector3d center(spec.camera_radius * std::cos(a), spec.camera_radius * std::sin(a), spec.camera_height);
    exact_poses.push_back(look_at(center, {0.0, 0.0, spec.look_at_height}));
    Intrinsics k = spec.intrinsics;
    k.fx = canonical(k.fx);
    k.fy = canonical(k.fy);
    k.cx = canonical(k.cx);
    k.cy = canonical(k.cy);
    for (double& d : k.distortion) d = canonical(d);
    scene.header.intrinsics[c] = k;
    scene.truth_cameras[c] = canonical(exact_poses.back());
  }

  // Walkers.
  const double path_length = spec.walk_speed * spec.num_frames / spec.fps + 1.0;
  std::vector<detail::Walker> walkers(spec.num_people);
  auto random_point = [&] {
    const double r = spec.area_radius * std::sqrt(unit(walk_rng));
    const double t = 2.0 * std::numbers::pi * unit(walk_rng);
    return Eigen::Vector2d(r * std::cos(t), r * std::sin(t));
  };
  for (auto& w : walkers) {
    w.waypoints.push_back(random_point());
    double total = 0.0;
    while (total < path_length) {
      const Eigen::Vector2d next = random_point();
      total += (next - w.waypoints.back()).norm();
      w.waypoints.push_back(next);
    }
    w.phase = 2.0 * std::numbers::pi * unit(walk_rng);
  }

  // Appearance: base per person, offset per (person, camera).
  std::vector<Eigen::VectorXd> base(spec.num_people, Eigen::VectorXd(spec.dim));
  for (auto& b : base)
    for (int d = 0; d < spec.dim; ++d) b[d] = spec.base_mean + gauss(app_rng);
  for (const auto& [a, b] : spec.confusion_pairs)
    for (int d = 0; d < spec.dim; ++d) base[b][d] = base[a][d] + spec.confusion_offset * gauss(app_rng);
  std::vector<std::vector<Eigen::VectorXd>> view_offset(spec.num_people);
  for (auto& per_camera : view_offset)
    for (int c = 0; c < spec.num_cameras; ++c) {
      Eigen::VectorXd o(spec.dim);
      for (int d = 0; d < spec.dim; ++d) o[d] = spec.sigma_view * gauss(app_rng);
      per_camera.push_back(o);
    }

  bool feasible = true;
  for (int f = 0; f < spec.num_frames; ++f) {
    const double t = f / spec.fps;
    SceneFrame frame;
    frame.frame_id = f;
    std::vector<std::array<Eigen::Vector3d, kNumJoints>> world(spec.num_people);
    for (int p = 0; p < spec.num_people; ++p) {
      const auto [pos, heading] = detail::walk_state(walkers[p], spec.walk_speed * t);
      const double swing = spec.swing_amplitude * std::sin(2.0 * std::numbers::pi * 0.9 * t + walkers[p].phase);
      world[p] = posed_joints(pos, heading, swing);
      TruthSkeleton ts;
      ts.frame_id = f;
      ts.skeleton.person_id = p;
      for (int j = 0; j < kNumJoints; ++j) {
        for (int i = 0; i < 3; ++i) ts.skeleton.joints[j](i) = canonical(world[p][j](i));
        ts.skeleton.joint_valid[j] = true;
      }
      scene.truth_skeletons.push_back(ts);
    }

    std::vector<int> seen_by(spec.num_people, 0);
    for (int c = 0; c < spec.num_cameras; ++c) {
      std::vector<Detection> dets;
      for (int p = 0; p < spec.num_people; ++p) {
        // Every stream advances identically whatever the knobs, keeping runs paired.
        const bool dropped = unit(drop_rng) < spec.dropout;
        Detection d;
        d.camera_id = c;
        d.frame_id = f;
        d.person_hint = p;
        double umin = 1e300, vmin = 1e300, umax = -1e300, vmax = -1e300;
        for (int j = 0; j < kNumJoints; ++j) {
          const Eigen::Vector2d uv = project(world[p][j], exact_poses[c], scene.header.intrinsics.at(c));
          const double ju = spec.noise_window * (unit(jitter_rng) - 0.5);
          const double jv = spec.noise_window * (unit(jitter_rng) - 0.5);
          d.joints[j].u = canonical(uv.x() + ju);
          d.joints[j].v = canonical(uv.y() + jv);
          d.joints[j].confidence = canonical(0.6 + 0.4 * unit(conf_rng));
          umin = std::min(umin, d.joints[j].u);
          umax = std::max(umax, d.joints[j].u);
          vmin = std::min(vmin, d.joints[j].v);
          vmax = std::max(vmax, d.joints[j].v);
        }
        const double mu = 0.1 * (umax - umin) + 1.0, mv = 0.1 * (vmax - vmin) + 1.0;
        d.bbox = {canonical(umin - mu), canonical(vmin - mv), canonical(umax + mu), canonical(vmax + mv)};
        Eigen::VectorXd raw = base[p] + view_offset[p][c];
        for (int k = 0; k < spec.dim; ++k) raw[k] += spec.sigma_frame * gauss(noise_rng);
        for (int k = 0; k < spec.dim; ++k)
          if (unit(flip_rng) < spec.p_flip) raw[k] = -raw[k];
        if (!(raw.norm() > 0.0)) raw[0] = 1.0;
        d.feature = canonical(FeatureVector(raw / raw.norm()));
        if (dropped) continue;
        ++seen_by[p];
        dets.push_back(std::move(d));
      }
      std::shuffle(dets.begin(), dets.end(), shuffle_rng);
      for (auto& d : dets) frame.detections.push_back(std::move(d));
    }
    for (int p = 0; p < spec.num_people; ++p) feasible = feasible && seen_by[p] >= 2;
    scene.frames.push_back(std::move(frame));
  }
  scene.header.feasible = feasible;
  return scene;
}

// ---------------------------------------------------------------------------
// Jitter sweep
// ---------------------------------------------------------------------------

struct SweepRow {
  int window = 0;
  int runs = 0;
  ClusteringScores scores;  // means over runs
  double pcp = 0.0;         // mean over runs, percent
  int failed = 0;           // runs whose reconstruction threw; they score PCP 0
};

/// Full pipeline per (window, seed); scene seed and pipeline seed both equal
/// the run seed. Rows come back in window order with means over seeds. A run
/// whose reconstruction fails keeps its matching scores and scores PCP 0.
inline std::vector<SweepRow> sweep_noise(const SynthSpec& base, std::span<const int> windows,
                                         std::span<const std::uint64_t> seeds, const PipelineConfig& cfg) {
  for (std::size_t i = 1; i < windows.size(); ++i)
    if (windows[i] < windows[i - 1]) throw SpecError("noise windows must be sorted ascending");
  const int runs = static_cast<int>(windows.size() * seeds.size());
  std::vector<Evaluation> evals(runs);
  std::vector<char> failed(runs, 0);
  PipelineConfig inner = cfg;
  inner.threads = 1;
  parallel_for(runs, cfg.threads, [&](int r) {
    SynthSpec spec = base;
    spec.noise_window = windows[r / seeds.size()];
    spec.seed = seeds[r % seeds.size()];
    const SceneFile scene = generate(spec);
    PipelineConfig run_cfg = inner;
    run_cfg.seed = spec.seed;
    resolve_k(run_cfg, scene.header.people);
    const TracksFile tracks = canonical_tracks(run_tracking(scene, run_cfg));
    const EmbeddingsFile emb = canonical_embeddings(run_embedding(scene, tracks, run_cfg));
    const ResultsFile matches = canonical_results(run_matching(emb, run_cfg));
    try {
      evals[r] = evaluate(scene, canonical_results(run_reconstruction(scene, matches, run_cfg)));
    } catch (const DegenerateError&) {
      failed[r] = 1;
    } catch (const InsufficientInliersError&) {
      failed[r] = 1;
    } catch (const DisconnectedGraphError&) {
      failed[r] = 1;
    } catch (const NoLegObservedError&) {
      failed[r] = 1;
    }
    if (failed[r]) {
      evals[r] = evaluate(scene, matches);
      evals[r].pcp = 0.0;
    }
  });
  std::vector<SweepRow> rows;
  for (std::size_t w = 0; w < windows.size(); ++w) {
    SweepRow row;
    row.window = windows[w];
    for (std::size_t s = 0; s < seeds.size(); ++s) {
      const Evaluation& e = evals[w * seeds.size() + s];
      row.scores.purity += e.mean_scores.purity;
      row.scores.ri += e.mean_scores.ri;
      row.scores.ari += e.mean_scores.ari;
      row.scores.f_score += e.mean_scores.f_score;
      row.pcp += e.pcp.value_or(0.0);
      row.failed += failed[w * seeds.size() + s];
      ++row.runs;
    }
    const double n = std::max(row.runs, 1);
    row.scores = {row.scores.purity / n, row.scores.ri / n, row.scores.ari / n, row.scores.f_score / n};
    row.pcp /= n;
    rows.push_back(row);
  }
  return rows;
}

inline void write_sweep(std::ostream& out, std::span<const SweepRow> rows) {
  out << "window\tpurity\tri\tari\tf_score\tpcp\truns\tfailed\n";
  for (const auto& r : rows)
    out << r.window << '\t' << format_real(r.scores.purity) << '\t' << format_real(r.scores.ri) << '\t'
        << format_real(r.scores.ari) << '\t' << format_real(r.scores.f_score) << '\t' << format_real(r.pcp) << '\t' << r.runs << '\t' << r.failed << '\n';
}

}  // namespace pme
