#pragma once

// Stage drivers: tracking -> embedding -> matching -> reconstruction, plus
// evaluation against the ground truth carried in a scene file. Each stage
// consumes and produces the interchange records of io.hpp, so running the
// stages one by one through files gives the same bytes as run_pipeline().

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "pme/bundle_adjustment.hpp"
#include "pme/clustering.hpp"
#include "pme/config.hpp"
#include "pme/core.hpp"
#include "pme/embedding.hpp"
#include "pme/geometry.hpp"
#include "pme/io.hpp"
#include "pme/metrics.hpp"
#include "pme/parallel.hpp"
#include "pme/tracking.hpp"

namespace pme {

// ---------------------------------------------------------------------------
// Helpers
// ---------------------------------------------------------------------------

/// Detections of a scene indexed by (frame, camera, local index).
inline std::map<SampleKey, const Detection*> index_detections(const SceneFile& scene) {
  std::map<SampleKey, const Detection*> out;
  for (const auto& f : scene.frames) {
    std::map<int, int> next_local;
    for (const auto& d : f.detections) out[{f.frame_id, d.camera_id, next_local[d.camera_id]++}] = &d;
  }
  return out;
}

/// Fill cfg.k from the scene's people count when neither --k nor auto is set.
/// Throws ConfigError naming --k when nothing determines K.
inline void resolve_k(PipelineConfig& cfg, std::optional<int> people) {
  if (cfg.k || cfg.k_auto) return;
  if (people) {
    cfg.k = *people;
    return;
  }
  throw ConfigError("--k is required: the input does not state the number of people (pass --k N or --k auto)");
}

template <class T, class W, class R>
T canonicalize(const T& value, W writer, R reader) {
  std::istringstream in(to_text(value, writer));
  return reader(in, "canonical");
}

// ---------------------------------------------------------------------------
// Tracking
// ---------------------------------------------------------------------------

inline TracksFile run_tracking(const SceneFile& scene, const PipelineConfig& cfg) {
  std::vector<int> cameras;
  for (const auto& [id, k] : scene.header.intrinsics) cameras.push_back(id);
  std::vector<std::vector<TrackRecord>> per_camera(cameras.size());

  parallel_for(static_cast<int>(cameras.size()), cfg.threads, [&](int ci) {
    const int cam = cameras[ci];
    std::vector<Track> open;
    int next_id = 0;
    for (const auto& frame : scene.frames) {
      std::vector<Detection> current;
      for (const auto& d : frame.detections)
        if (d.camera_id == cam) current.push_back(d);
      TrackStep step = step_tracks(std::move(open), current, frame.frame_id, cfg, next_id);
      std::map<int, const Track*> by_id;
      for (const auto& t : step.tracks) by_id[t.id] = &t;
      for (int r = 0; r < static_cast<int>(current.size()); ++r) {
        const Track& t = *by_id.at(step.detection_track[r]);
        TrackRecord rec;
        rec.key = {frame.frame_id, cam, r};
        rec.track_id = t.id;
        for (int m = 0; m < t.length(); ++m) rec.window.push_back({t.detections[m].frame_id, cam, t.local_indices[m]});
        per_camera[ci].push_back(std::move(rec));
      }
      open = std::move(step.tracks);
    }
  });

  TracksFile out;
  out.track_length = cfg.track_length;
  for (auto& recs : per_camera)
    for (auto& r : recs) out.records.push_back(std::move(r));
  std::sort(out.records.begin(), out.records.end(), [](const TrackRecord& a, const TrackRecord& b) { return a.key < b.key; });
  return out;
}

// ---------------------------------------------------------------------------
// Embedding
// ---------------------------------------------------------------------------

inline EmbeddingsFile run_embedding(const SceneFile& scene, const TracksFile& tracks, const PipelineConfig& cfg) {
  const auto detections = index_detections(scene);
  EmbeddingsFile out;
  out.dim = scene.header.dim;
  out.num_cameras = scene.header.num_cameras();
  out.people = scene.header.people;
  out.variant = cfg.embed_variant;
  out.records.resize(tracks.records.size());
  parallel_for(static_cast<int>(tracks.records.size()), cfg.threads, [&](int i) {
    const TrackRecord& rec = tracks.records[i];
    std::vector<FeatureVector> window;
    for (const auto& key : rec.window) {
      const auto it = detections.find(key);
      if (it == detections.end())
        throw SchemaError("track window refers to frame " + std::to_string(key.frame_id) + " camera " +
                          std::to_string(key.camera_id) + " index " + std::to_string(key.local_index) +
                          ", which the scene does not contain");
      window.push_back(normalize_feature(it->second->feature));
    }
    out.records[i] = {rec.key, rec.track_id, canonical(aggregate(window, cfg.embed_variant))};
  });
  return out;
}

// ---------------------------------------------------------------------------
// Matching
// ---------------------------------------------------------------------------

/// Per-frame clustering of the embedded detections. Frames are independent
/// and each gets its own seed, so the result does not depend on cfg.threads.
inline ResultsFile run_matching(const EmbeddingsFile& emb, const PipelineConfig& cfg) {
  if (!cfg.k && !cfg.k_auto) throw ConfigError("--k is required (a number or 'auto')");
  std::vector<std::vector<const EmbeddingRecord*>> frames;
  for (const auto& rec : emb.records) {
    if (frames.empty() || frames.back().front()->key.frame_id != rec.key.frame_id) frames.emplace_back();
    frames.back().push_back(&rec);
  }
  ResultsFile out;
  out.dim = emb.dim;
  out.frames.resize(frames.size());
  parallel_for(static_cast<int>(frames.size()), cfg.threads, [&](int fi) {
    const auto& recs = frames[fi];
    std::vector<Sample> samples;
    FrameClusters& fc = out.frames[fi];
    fc.frame_id = recs.front()->key.frame_id;
    for (const auto* r : recs) {
      samples.push_back({r->feature, r->key.camera_id, r->key.local_index});
      fc.samples.push_back(r->key);
    }
    const int k = cfg.k_auto ? max_per_camera(samples) : *cfg.k;
    ClusteringOptions opts;
    opts.seed = mix_seed(cfg.seed, static_cast<std::uint64_t>(fc.frame_id));
    opts.max_iterations = cfg.kmeans_max_iterations;
    try {
      fc.result = match_people(samples, k, emb.num_cameras, opts);
    } catch (const InfeasibleError& e) {
      throw InfeasibleError("frame " + std::to_string(fc.frame_id) + ": " + e.what());
    }
  });
  int conflicts = 0, fallbacks = 0;
  for (const auto& f : out.frames)
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      conflicts += f.result.conflict_flags[i] ? 1 : 0;
      fallbacks += f.result.fallback_flags[i] ? 1 : 0;
    }
  out.summary["conflicts"] = std::to_string(conflicts);
  out.summary["fallbacks"] = std::to_string(fallbacks);
  out.summary["frames"] = std::to_string(out.frames.size());
  return out;
}

// ---------------------------------------------------------------------------
// Reconstruction
// ---------------------------------------------------------------------------

inline std::vector<MatchedFrame> matched_frames(const SceneFile& scene, const ResultsFile& matches) {
  const auto detections = index_detections(scene);
  std::vector<MatchedFrame> out;
  for (const auto& f : matches.frames) {
    MatchedFrame mf;
    mf.frame_id = f.frame_id;
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      const auto it = detections.find(f.samples[i]);
      if (it == detections.end())
        throw SchemaError("match refers to frame " + std::to_string(f.samples[i].frame_id) + " camera " +
                          std::to_string(f.samples[i].camera_id) + " index " + std::to_string(f.samples[i].local_index) +
                          ", which the scene does not contain");
      mf.detections.push_back(*it->second);
      mf.clusters.push_back(f.result.assignments[i]);
    }
    out.push_back(std::move(mf));
  }
  return out;
}

struct PoseEstimate {
  std::map<int, CameraPose> poses;
  int edges_estimated = 0;
  int edges_used = 0;
};

/// Pairwise essential matrices with per-edge metric baselines, composed along
/// a spanning tree rooted at the reference camera.
inline PoseEstimate estimate_cameras(const SceneFile& scene, std::span<const MatchedFrame> frames, int reference,
                                     const PipelineConfig& cfg) {
  const std::size_t window = cfg.geometry_window > 0 ? std::min<std::size_t>(cfg.geometry_window, frames.size()) : frames.size();
  const auto corrs = build_correspondences(frames.first(window), scene.header.intrinsics, cfg.confidence_threshold);
  std::vector<std::optional<RelativePose>> edges(corrs.size());
  parallel_for(static_cast<int>(corrs.size()), cfg.threads, [&](int e) {
    if (!corrs[e].usable()) return;
    RansacOptions ro;
    ro.threshold = cfg.ransac_threshold;
    ro.iterations = cfg.ransac_iterations;
    ro.seed = mix_seed(cfg.seed, 1000003ULL * static_cast<std::uint64_t>(corrs[e].camera_a + 1) +
                                     static_cast<std::uint64_t>(corrs[e].camera_b + 1));
    try {
      RelativePose pose = estimate_relative_pose(corrs[e], ro);
      const auto baseline = pairwise_baseline_from_legs(corrs[e], pose, cfg.lower_leg_length_m);
      if (!baseline) return;
      pose.baseline = *baseline;
      edges[e] = std::move(pose);
    } catch (const DegenerateError&) {
    } catch (const InsufficientInliersError&) {
    }
  });
  std::vector<RelativePose> usable;
  for (auto& e : edges)
    if (e) usable.push_back(std::move(*e));
  std::vector<int> ids;
  for (const auto& [id, k] : scene.header.intrinsics) ids.push_back(id);
  const CameraAlignment aligned = align_cameras(usable, reference, ids);
  return {aligned.poses, static_cast<int>(usable.size()), static_cast<int>(aligned.tree_edges.size())};
}

struct SkeletonObservations {
  int frame_id = 0;
  int cluster = 0;
  SkeletonViews views;                                          // normalized, per joint
  std::array<std::vector<std::pair<int, Eigen::Vector2d>>, kNumJoints> pixels;  // undistorted pixels
};

inline std::vector<SkeletonObservations> collect_observations(std::span<const MatchedFrame> frames,
                                                              const std::map<int, Intrinsics>& intrinsics,
                                                              double confidence_threshold) {
  std::vector<SkeletonObservations> out;
  for (const auto& f : frames) {
    std::map<int, std::map<int, std::vector<int>>> members;  // cluster -> camera -> detections
    for (std::size_t i = 0; i < f.detections.size(); ++i)
      members[f.clusters[i]][f.detections[i].camera_id].push_back(static_cast<int>(i));
    for (const auto& [cluster, by_camera] : members) {
      SkeletonObservations so;
      so.frame_id = f.frame_id;
      so.cluster = cluster;
      for (const auto& [cam, dets] : by_camera) {
        // A camera with two detections in one cluster (fallback) is ambiguous.
        if (dets.size() != 1) continue;
        const Detection& d = f.detections[dets[0]];
        const Intrinsics& k = intrinsics.at(cam);
        for (int j = 0; j < kNumJoints; ++j) {
          if (!d.joint_usable(j, confidence_threshold)) continue;
          const Eigen::Vector2d n = pixel_to_normalized({d.joints[j].u, d.joints[j].v}, k);
          so.views[j].push_back({cam, n});
          so.pixels[j].emplace_back(cam, Eigen::Vector2d(k.fx * n.x() + k.cx, k.fy * n.y() + k.cy));
        }
      }
      out.push_back(std::move(so));
    }
  }
  return out;
}

/// Jitter every 2D joint uniformly over a W x W pixel square.
inline SceneFile inject_joint_noise(SceneFile scene, int window, std::uint64_t seed) {
  std::mt19937_64 rng(mix_seed(seed, 0x6a6974746572ULL));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  for (auto& f : scene.frames)
    for (auto& d : f.detections)
      for (auto& j : d.joints) {
        j.u = canonical(j.u + window * (unit(rng) - 0.5));
        j.v = canonical(j.v + window * (unit(rng) - 0.5));
      }
  return scene;
}

/// Cameras, skeletons and bundle adjustment for matched detections. With
/// cfg.noise_window > 0 the 2D joints are jittered first.
inline ResultsFile run_reconstruction(const SceneFile& input, const ResultsFile& matches, const PipelineConfig& cfg) {
  const SceneFile noisy = cfg.noise_window > 0 ? inject_joint_noise(input, cfg.noise_window, cfg.seed) : SceneFile{};
  const SceneFile& scene = cfg.noise_window > 0 ? noisy : input;
  ResultsFile out = matches;
  const auto frames = matched_frames(scene, matches);
  if (scene.header.intrinsics.empty()) throw SchemaError("scene has no cameras");
  const int reference = cfg.reference_camera.value_or(scene.header.intrinsics.begin()->first);
  if (!scene.header.intrinsics.contains(reference))
    throw ConfigError("--reference-camera " + std::to_string(reference) + " is not in the scene");

  std::map<int, CameraPose> poses;
  if (cfg.fix_cameras) {
    for (const auto& [id, k] : scene.header.intrinsics) {
      const auto it = scene.truth_cameras.find(id);
      if (it == scene.truth_cameras.end())
        throw SchemaError("--fix-cameras needs ground-truth poses, camera " + std::to_string(id) + " has none");
      poses[id] = it->second;
    }
  } else {
    const PoseEstimate est = estimate_cameras(scene, frames, reference, cfg);
    poses = est.poses;
    out.summary["pose_edges_estimated"] = std::to_string(est.edges_estimated);
    out.summary["pose_edges_used"] = std::to_string(est.edges_used);
  }

  const auto observations = collect_observations(frames, scene.header.intrinsics, cfg.confidence_threshold);
  std::vector<Skeleton3D> skeletons(observations.size());
  parallel_for(static_cast<int>(observations.size()), cfg.threads, [&](int i) {
    skeletons[i] = triangulate(observations[i].views, poses, observations[i].cluster);
  });

  if (!cfg.fix_cameras) out.summary["leg_scale_initial"] = format_real(set_scale(skeletons, poses, cfg.lower_leg_length_m));

  // Bundle adjustment over every valid joint.
  BAProblem problem;
  std::map<int, int> camera_index;
  for (const auto& [id, pose] : poses) {
    camera_index[id] = static_cast<int>(problem.poses.size());
    problem.poses.push_back(pose);
    problem.intrinsics.push_back(scene.header.intrinsics.at(id));
  }
  std::vector<std::pair<int, int>> point_owner;  // (skeleton, joint)
  for (std::size_t s = 0; s < skeletons.size(); ++s)
    for (int j = 0; j < kNumJoints; ++j) {
      if (!skeletons[s].joint_valid[j]) continue;
      const int p = static_cast<int>(problem.points.size());
      problem.points.push_back(skeletons[s].joints[j]);
      point_owner.emplace_back(static_cast<int>(s), j);
      for (const auto& [cam, px] : observations[s].pixels[j]) problem.observations.push_back({camera_index.at(cam), p, px, 1.0});
    }
  BAOptions bo;
  bo.max_iterations = cfg.ba_max_iterations;
  bo.gradient_tolerance = cfg.ba_gradient_tolerance;
  bo.step_tolerance = cfg.ba_step_tolerance;
  bo.huber = cfg.ba_huber;
  bo.huber_delta = cfg.ba_huber_delta;
  bo.fix_all_cameras = cfg.fix_cameras;
  bo.fixed_cameras.insert(camera_index.at(reference));
  BAReport report;
  try {
    report = bundle_adjust(problem, bo);
  } catch (const NonConvergenceError& e) {
    problem = e.best();
    report = e.report();
  }
  for (const auto& [id, idx] : camera_index) poses[id] = problem.poses[idx];
  for (std::size_t p = 0; p < point_owner.size(); ++p)
    skeletons[point_owner[p].first].joints[point_owner[p].second] = problem.points[p];
  if (!cfg.fix_cameras) out.summary["leg_scale_final"] = format_real(set_scale(skeletons, poses, cfg.lower_leg_length_m));

  out.cameras = poses;
  out.skeletons.clear();
  for (std::size_t s = 0; s < skeletons.size(); ++s) out.skeletons.push_back({observations[s].frame_id, skeletons[s]});
  out.summary["ba_converged"] = report.converged ? "1" : "0";
  out.summary["ba_initial_rmse"] = format_real(report.initial_rmse);
  out.summary["ba_final_rmse"] = format_real(report.final_rmse);
  out.summary["ba_iterations"] = std::to_string(report.iterations);
  out.summary["ba_observations"] = std::to_string(problem.observations.size());
  out.summary["fix_cameras"] = cfg.fix_cameras ? "1" : "0";
  out.summary["reference_camera"] = std::to_string(reference);
  return out;
}

// ---------------------------------------------------------------------------
// Canonical stage outputs and the full pipeline
// ---------------------------------------------------------------------------

inline TracksFile canonical_tracks(const TracksFile& t) {
  return canonicalize(t, [](std::ostream& o, const TracksFile& v) { write_tracks(o, v); },
                      [](std::istream& i, const std::string& s) { return read_tracks(i, s); });
}

inline EmbeddingsFile canonical_embeddings(const EmbeddingsFile& e) {
  return canonicalize(e, [](std::ostream& o, const EmbeddingsFile& v) { write_embeddings(o, v); },
                      [](std::istream& i, const std::string& s) { return read_embeddings(i, s); });
}

inline ResultsFile canonical_results(const ResultsFile& r) {
  return canonicalize(r, [](std::ostream& o, const ResultsFile& v) { write_results(o, v); },
                      [](std::istream& i, const std::string& s) { return read_results(i, s); });
}

/// All stages in order, each output passed through its file format exactly as
/// when the stages run separately.
inline ResultsFile run_pipeline(const SceneFile& scene, PipelineConfig cfg) {
  resolve_k(cfg, scene.header.people);
  const TracksFile tracks = canonical_tracks(run_tracking(scene, cfg));
  const EmbeddingsFile emb = canonical_embeddings(run_embedding(scene, tracks, cfg));
  const ResultsFile matches = canonical_results(run_matching(emb, cfg));
  return canonical_results(run_reconstruction(scene, matches, cfg));
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

struct FrameEvaluation {
  int frame_id = 0;
  std::optional<ClusteringScores> scores;
  int pcp_correct = 0;
  int pcp_evaluated = 0;
};

struct CameraEvaluation {
  int camera_id = 0;
  double rotation_error_rad = 0.0;
  double center_error_m = 0.0;
  double baseline_error_m = 0.0;  // distance to the reference camera
};

struct Evaluation {
  std::vector<FrameEvaluation> frames;
  ClusteringScores mean_scores;
  int scored_frames = 0;
  std::optional<double> pcp;  // percent; nullopt without geometry or truth
  int pcp_correct = 0;
  int pcp_evaluated = 0;
  std::vector<CameraEvaluation> cameras;
};

/// Map predicted world points into the ground-truth world through the
/// reference camera, whose predicted and true poses must coincide.
struct WorldAlignment {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d apply(const Eigen::Vector3d& x) const { return rotation * x + translation; }
};

inline WorldAlignment reference_alignment(const CameraPose& predicted, const CameraPose& truth) {
  WorldAlignment a;
  a.rotation = truth.rotation.transpose() * predicted.rotation;
  a.translation = truth.rotation.transpose() * (predicted.translation - truth.translation);
  return a;
}

inline Evaluation evaluate(const SceneFile& scene, const ResultsFile& results, double alpha = kDefaultPcpAlpha) {
  Evaluation ev;
  const auto detections = index_detections(scene);

  std::map<int, std::vector<Skeleton3D>> truth_by_frame;
  for (const auto& ts : scene.truth_skeletons) truth_by_frame[ts.frame_id].push_back(ts.skeleton);

  std::optional<WorldAlignment> align;
  int reference = 0;
  if (!results.cameras.empty() && !scene.truth_cameras.empty()) {
    const auto it = results.summary.find("reference_camera");
    reference = it != results.summary.end() ? std::stoi(it->second) : results.cameras.begin()->first;
    if (results.cameras.contains(reference) && scene.truth_cameras.contains(reference))
      align = reference_alignment(results.cameras.at(reference), scene.truth_cameras.at(reference));
  }
  std::map<int, std::vector<Skeleton3D>> pred_by_frame;
  if (align) {
    for (const auto& fs : results.skeletons) {
      Skeleton3D s = fs.skeleton;
      for (auto& j : s.joints) j = align->apply(j);
      pred_by_frame[fs.frame_id].push_back(std::move(s));
    }
  }

  ClusteringScores sum;
  for (const auto& f : results.frames) {
    FrameEvaluation fe;
    fe.frame_id = f.frame_id;
    std::vector<int> truth, pred;
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      const auto it = detections.find(f.samples[i]);
      if (it == detections.end() || !it->second->person_hint) continue;
      truth.push_back(*it->second->person_hint);
      pred.push_back(f.result.assignments[i]);
    }
    if (truth.size() >= 2) {
      fe.scores = clustering_scores(pred, truth);
      sum.purity += fe.scores->purity;
      sum.ri += fe.scores->ri;
      sum.ari += fe.scores->ari;
      sum.f_score += fe.scores->f_score;
      ++ev.scored_frames;
    }
    if (align && truth_by_frame.contains(f.frame_id)) {
      const PcpResult r = scene_pcp(pred_by_frame[f.frame_id], truth_by_frame[f.frame_id], alpha);
      fe.pcp_correct = r.correct;
      fe.pcp_evaluated = r.evaluated;
      ev.pcp_correct += r.correct;
      ev.pcp_evaluated += r.evaluated;
    }
    ev.frames.push_back(fe);
  }
  if (ev.scored_frames > 0) {
    const double n = ev.scored_frames;
    ev.mean_scores = {sum.purity / n, sum.ri / n, sum.ari / n, sum.f_score / n};
  }
  if (align && ev.pcp_evaluated > 0) ev.pcp = 100.0 * ev.pcp_correct / ev.pcp_evaluated;

  if (align) {
    const Eigen::Vector3d ref_center_truth = scene.truth_cameras.at(reference).center();
    const Eigen::Vector3d ref_center_pred = align->apply(results.cameras.at(reference).center());
    for (const auto& [id, pose] : results.cameras) {
      const auto t = scene.truth_cameras.find(id);
      if (t == scene.truth_cameras.end()) continue;
      CameraEvaluation ce;
      ce.camera_id = id;
      const Eigen::Matrix3d r_aligned = pose.rotation * align->rotation.transpose();
      ce.rotation_error_rad = rotation_angle_between(r_aligned, t->second.rotation);
      const Eigen::Vector3d c_pred = align->apply(pose.center());
      ce.center_error_m = (c_pred - t->second.center()).norm();
      ce.baseline_error_m =
          std::abs((c_pred - ref_center_pred).norm() - (t->second.center() - ref_center_truth).norm());
      ev.cameras.push_back(ce);
    }
  }
  return ev;
}

inline void write_evaluation(std::ostream& out, const Evaluation& ev) {
  auto opt = [](const std::optional<double>& v) { return v ? format_real(*v) : std::string("nan"); };
  out << "# summary\n";
  out << "purity\t" << format_real(ev.mean_scores.purity) << '\n';
  out << "ri\t" << format_real(ev.mean_scores.ri) << '\n';
  out << "ari\t" << format_real(ev.mean_scores.ari) << '\n';
  out << "f_score\t" << format_real(ev.mean_scores.f_score) << '\n';
  out << "pcp\t" << opt(ev.pcp) << '\n';
  out << "scored_frames\t" << ev.scored_frames << '\n';
  out << "# frames\n";
  out << "frame\tpurity\tri\tari\tf_score\tpcp_correct\tpcp_evaluated\n";
  for (const auto& f : ev.frames) {
    out << f.frame_id;
    if (f.scores)
      out << '\t' << format_real(f.scores->purity) << '\t' << format_real(f.scores->ri) << '\t'
          << format_real(f.scores->ari) << '\t' << format_real(f.scores->f_score);
    else
      out << "\tnan\tnan\tnan\tnan";
    out << '\t' << f.pcp_correct << '\t' << f.pcp_evaluated << '\n';
  }
  if (!ev.cameras.empty()) {
    out << "# cameras\n";
    out << "camera\trotation_error_rad\tcenter_error_m\tbaseline_error_m\n";
    for (const auto& c : ev.cameras)
      out << c.camera_id << '\t' << format_real(c.rotation_error_rad) << '\t' << format_real(c.center_error_m) << '\t'
          << format_real(c.baseline_error_m) << '\n';
  }
}

inline void write_evaluation_human(std::ostream& out, const Evaluation& ev) {
  char line[160];
  std::snprintf(line, sizeof line, "Purity %.4f  RI %.4f  ARI %.4f  F %.4f  (%d frames)\n", ev.mean_scores.purity,
                ev.mean_scores.ri, ev.mean_scores.ari, ev.mean_scores.f_score, ev.scored_frames);
  out << line;
  if (ev.pcp) {
    std::snprintf(line, sizeof line, "PCP %.2f%%  (%d / %d limbs)\n", *ev.pcp, ev.pcp_correct, ev.pcp_evaluated);
    out << line;
  }
  for (const auto& c : ev.cameras) {
    std::snprintf(line, sizeof line, "camera %d: rotation error %.3g rad, center error %.3g m\n", c.camera_id,
                  c.rotation_error_rad, c.center_error_m);
    out << line;
  }
}

}  // namespace pme
