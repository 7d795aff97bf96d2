#pragma once

// Text interchange formats. Every file opens with a versioned magic line,
// holds one record per line, and prints reals with 9 significant digits.
//
//   PME-SCENE 1        cameras, detections, optional ground truth
//   PME-TRACKS 1       per-detection track windows
//   PME-EMBEDDINGS 1   per-detection aggregated track features
//   PME-RESULTS 1      matches, centers, cameras, skeletons, diagnostics
//
// Readers validate everything and report "<source>:<line>: message".

#include <cerrno>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "pme/config.hpp"
#include "pme/core.hpp"

namespace pme {

// ---------------------------------------------------------------------------
// Number formatting
// ---------------------------------------------------------------------------

inline std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// The value a real takes after a write/read cycle.
inline double canonical(double v) { return std::strtod(format_real(v).c_str(), nullptr); }

inline FeatureVector canonical(const FeatureVector& f) {
  FeatureVector out(f.size());
  for (Eigen::Index i = 0; i < f.size(); ++i) out[i] = canonical(f[i]);
  return out;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

struct SceneHeader {
  int dim = kDefaultFeatureDim;
  double fps = 30.0;
  std::optional<int> people;
  std::optional<bool> feasible;
  std::map<int, Intrinsics> intrinsics;  // camera id -> intrinsics

  int num_cameras() const { return static_cast<int>(intrinsics.size()); }
  bool operator==(const SceneHeader&) const = default;
};

struct SceneFrame {
  int frame_id = 0;
  std::vector<Detection> detections;

  bool operator==(const SceneFrame&) const = default;
};

struct TruthSkeleton {
  int frame_id = 0;
  Skeleton3D skeleton;  // person_id = ground-truth label

  bool operator==(const TruthSkeleton&) const = default;
};

struct SceneFile {
  SceneHeader header;
  std::vector<SceneFrame> frames;
  std::map<int, CameraPose> truth_cameras;
  std::vector<TruthSkeleton> truth_skeletons;

  bool operator==(const SceneFile&) const = default;
};

/// Addresses one detection: its frame, camera and position among that
/// camera's detections in the frame.
struct SampleKey {
  int frame_id = 0;
  int camera_id = 0;
  int local_index = 0;

  auto operator<=>(const SampleKey&) const = default;
};

struct TrackRecord {
  SampleKey key;
  int track_id = 0;
  std::vector<SampleKey> window;  // oldest first; last entry is `key`

  bool operator==(const TrackRecord&) const = default;
};

struct TracksFile {
  int track_length = 10;
  std::vector<TrackRecord> records;

  bool operator==(const TracksFile&) const = default;
};

struct EmbeddingRecord {
  SampleKey key;
  int track_id = 0;
  FeatureVector feature;

  bool operator==(const EmbeddingRecord& o) const {
    return key == o.key && track_id == o.track_id && same_feature(feature, o.feature);
  }
};

struct EmbeddingsFile {
  int dim = 0;
  int num_cameras = 0;
  std::optional<int> people;
  EmbedVariant variant = EmbedVariant::kSignVote;
  std::vector<EmbeddingRecord> records;

  bool operator==(const EmbeddingsFile&) const = default;
};

/// Clustering of one frame; samples[i] carries assignment result.assignments[i].
struct FrameClusters {
  int frame_id = 0;
  std::vector<SampleKey> samples;
  ClusterResult result;

  bool operator==(const FrameClusters& o) const {
    if (frame_id != o.frame_id || samples != o.samples) return false;
    const ClusterResult& a = result;
    const ClusterResult& b = o.result;
    if (a.num_clusters != b.num_clusters || a.assignments != b.assignments || a.conflict_flags != b.conflict_flags ||
        a.fallback_flags != b.fallback_flags || a.objective_trace != b.objective_trace || a.iterations != b.iterations ||
        a.centers.size() != b.centers.size())
      return false;
    for (std::size_t c = 0; c < a.centers.size(); ++c)
      if (!same_feature(a.centers[c], b.centers[c])) return false;
    return true;
  }
};

struct FrameSkeleton {
  int frame_id = 0;
  Skeleton3D skeleton;  // person_id = cluster index within the frame

  bool operator==(const FrameSkeleton&) const = default;
};

struct ResultsFile {
  int dim = 0;
  std::vector<FrameClusters> frames;
  std::map<int, CameraPose> cameras;
  std::vector<FrameSkeleton> skeletons;
  std::map<std::string, std::string> summary;

  bool operator==(const ResultsFile&) const = default;
};

// ---------------------------------------------------------------------------
// Tokenized line reader
// ---------------------------------------------------------------------------

namespace detail {

class RecordReader {
 public:
  RecordReader(std::istream& in, std::string source) : in_(in), source_(std::move(source)) {}

  /// Next non-blank, non-comment line split on whitespace; false at EOF.
  bool next(std::vector<std::string>& tokens) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line.erase(hash);
      tokens.clear();
      std::istringstream ss(line);
      std::string t;
      while (ss >> t) tokens.push_back(t);
      if (!tokens.empty()) return true;
    }
    return false;
  }

  void expect(std::vector<std::string>& tokens, std::string_view what) {
    if (!next(tokens)) fail<ParseError>("unexpected end of file, expected " + std::string(what));
  }

  template <class E = ParseError>
  [[noreturn]] void fail(const std::string& message) const {
    throw E(source_ + ":" + std::to_string(line_no_) + ": " + message);
  }

  void arity(const std::vector<std::string>& t, std::size_t n) const {
    if (t.size() != n)
      fail("record '" + t[0] + "' needs " + std::to_string(n - 1) + " fields, got " + std::to_string(t.size() - 1));
  }

  int integer(const std::string& s) const {
    char* end = nullptr;
    errno = 0;
    const long v = std::strtol(s.c_str(), &end, 10);
    if (s.empty() || *end != '\0' || errno != 0 || v < INT32_MIN || v > INT32_MAX) fail("bad integer '" + s + "'");
    return static_cast<int>(v);
  }

  double real(const std::string& s) const {
    char* end = nullptr;
    const double v = std::strtod(s.c_str(), &end);
    if (s.empty() || *end != '\0') fail("bad number '" + s + "'");
    if (!std::isfinite(v)) fail("non-finite number '" + s + "'");
    return v;
  }

  bool flag(const std::string& s) const {
    if (s == "0") return false;
    if (s == "1") return true;
    fail("expected 0 or 1, got '" + s + "'");
  }

  int line() const { return line_no_; }

 private:
  std::istream& in_;
  std::string source_;
  int line_no_ = 0;
};

inline void expect_magic(RecordReader& r, std::string_view magic) {
  std::vector<std::string> t;
  r.expect(t, std::string(magic) + " header");
  if (t[0] != magic) r.fail("expected '" + std::string(magic) + "', got '" + t[0] + "'");
  if (t.size() != 2 || t[1] != "1") r.fail<SchemaError>("unsupported " + std::string(magic) + " version");
}

inline void write_feature(std::ostream& out, const FeatureVector& f) {
  for (Eigen::Index i = 0; i < f.size(); ++i) out << ' ' << format_real(f[i]);
}

inline FeatureVector read_feature(const RecordReader& r, const std::vector<std::string>& t, std::size_t from, int dim) {
  FeatureVector f(dim);
  for (int i = 0; i < dim; ++i) f[i] = r.real(t[from + i]);
  return f;
}

inline void write_pose(std::ostream& out, const CameraPose& p) {
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) out << ' ' << format_real(p.rotation(i, j));
  for (int i = 0; i < 3; ++i) out << ' ' << format_real(p.translation(i));
}

inline CameraPose read_pose(const RecordReader& r, const std::vector<std::string>& t, std::size_t from) {
  CameraPose p;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) p.rotation(i, j) = r.real(t[from + 3 * i + j]);
  for (int i = 0; i < 3; ++i) p.translation(i) = r.real(t[from + 9 + i]);
  // 9 significant digits keep orthonormality to ~1e-9; reject anything worse.
  const double err = (p.rotation.transpose() * p.rotation - Eigen::Matrix3d::Identity()).norm();
  if (err > 1e-6 || std::abs(p.rotation.determinant() - 1.0) > 1e-6) r.fail<SchemaError>("rotation is not orthonormal");
  return p;
}

inline void write_skeleton_joints(std::ostream& out, const Skeleton3D& s) {
  for (const auto& j : s.joints)
    for (int i = 0; i < 3; ++i) out << ' ' << format_real(j(i));
  out << ' ';
  for (bool v : s.joint_valid) out << (v ? '1' : '0');
}

inline void read_skeleton_joints(const RecordReader& r, const std::vector<std::string>& t, std::size_t from,
                                 Skeleton3D& s) {
  for (int j = 0; j < kNumJoints; ++j)
    for (int i = 0; i < 3; ++i) s.joints[j](i) = r.real(t[from + 3 * j + i]);
  const std::string& mask = t[from + 3 * kNumJoints];
  if (mask.size() != kNumJoints || mask.find_first_not_of("01") != std::string::npos)
    r.fail("validity mask must be 12 characters of 0/1");
  for (int j = 0; j < kNumJoints; ++j) s.joint_valid[j] = mask[j] == '1';
}

inline void write_key(std::ostream& out, const SampleKey& k) {
  out << ' ' << k.frame_id << ' ' << k.camera_id << ' ' << k.local_index;
}

inline SampleKey read_key(const RecordReader& r, const std::vector<std::string>& t, std::size_t from) {
  SampleKey k{r.integer(t[from]), r.integer(t[from + 1]), r.integer(t[from + 2])};
  if (k.local_index < 0) r.fail<SchemaError>("negative local index");
  return k;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Scene
// ---------------------------------------------------------------------------

inline void write_scene(std::ostream& out, const SceneFile& scene) {
  const auto& h = scene.header;
  out << "PME-SCENE 1\n";
  out << "dim " << h.dim << '\n';
  out << "cameras " << h.num_cameras() << '\n';
  out << "fps " << format_real(h.fps) << '\n';
  if (h.people) out << "people " << *h.people << '\n';
  if (h.feasible) out << "feasible " << (*h.feasible ? 1 : 0) << '\n';
  for (const auto& [id, k] : h.intrinsics) {
    out << "intrinsics " << id << ' ' << format_real(k.fx) << ' ' << format_real(k.fy) << ' ' << format_real(k.cx) << ' '
        << format_real(k.cy);
    for (double d : k.distortion) out << ' ' << format_real(d);
    out << '\n';
  }
  for (const auto& f : scene.frames) {
    out << "frame " << f.frame_id << ' ' << f.detections.size() << '\n';
    for (const auto& d : f.detections) {
      out << "det " << d.camera_id << ' ' << (d.person_hint ? std::to_string(*d.person_hint) : "-");
      out << ' ' << format_real(d.bbox.x_min) << ' ' << format_real(d.bbox.y_min) << ' ' << format_real(d.bbox.x_max)
          << ' ' << format_real(d.bbox.y_max);
      for (const auto& j : d.joints)
        out << ' ' << format_real(j.u) << ' ' << format_real(j.v) << ' ' << format_real(j.confidence);
      detail::write_feature(out, d.feature);
      out << '\n';
    }
  }
  for (const auto& [id, pose] : scene.truth_cameras) {
    out << "truth-camera " << id;
    detail::write_pose(out, pose);
    out << '\n';
  }
  for (const auto& ts : scene.truth_skeletons) {
    out << "truth-skeleton " << ts.frame_id << ' ' << ts.skeleton.person_id;
    detail::write_skeleton_joints(out, ts.skeleton);
    out << '\n';
  }
}

inline SceneFile read_scene(std::istream& in, const std::string& source = "scene") {
  detail::RecordReader r(in, source);
  detail::expect_magic(r, "PME-SCENE");
  SceneFile scene;
  auto& h = scene.header;
  std::optional<int> declared_cameras;
  bool have_dim = false;
  bool in_body = false;
  std::vector<std::string> t;
  while (r.next(t)) {
    const std::string& kind = t[0];
    if (kind == "dim" || kind == "cameras" || kind == "fps" || kind == "people" || kind == "feasible" ||
        kind == "intrinsics") {
      if (in_body) r.fail<SchemaError>("header record '" + kind + "' after the first frame");
      if (kind == "dim") {
        r.arity(t, 2);
        h.dim = r.integer(t[1]);
        if (h.dim < 1) r.fail<SchemaError>("feature dimension must be positive");
        have_dim = true;
      } else if (kind == "cameras") {
        r.arity(t, 2);
        declared_cameras = r.integer(t[1]);
      } else if (kind == "fps") {
        r.arity(t, 2);
        h.fps = r.real(t[1]);
        if (!(h.fps > 0.0)) r.fail<SchemaError>("fps must be positive");
      } else if (kind == "people") {
        r.arity(t, 2);
        h.people = r.integer(t[1]);
        if (*h.people < 1) r.fail<SchemaError>("people must be positive");
      } else if (kind == "feasible") {
        r.arity(t, 2);
        h.feasible = r.flag(t[1]);
      } else {
        r.arity(t, 11);
        const int id = r.integer(t[1]);
        Intrinsics k;
        k.fx = r.real(t[2]);
        k.fy = r.real(t[3]);
        k.cx = r.real(t[4]);
        k.cy = r.real(t[5]);
        for (int i = 0; i < 5; ++i) k.distortion[i] = r.real(t[6 + i]);
        if (!k.valid()) r.fail<SchemaError>("camera " + std::to_string(id) + ": focal lengths must be positive");
        if (!h.intrinsics.emplace(id, k).second) r.fail<SchemaError>("duplicate intrinsics for camera " + std::to_string(id));
      }
      continue;
    }
    if (!in_body) {
      if (!have_dim) r.fail<SchemaError>("missing 'dim' header record");
      if (!declared_cameras) r.fail<SchemaError>("missing 'cameras' header record");
      if (*declared_cameras != h.num_cameras())
        r.fail<SchemaError>("header declares " + std::to_string(*declared_cameras) + " cameras but lists intrinsics for " +
                            std::to_string(h.num_cameras()));
      in_body = true;
    }
    if (kind == "frame") {
      r.arity(t, 3);
      SceneFrame frame;
      frame.frame_id = r.integer(t[1]);
      const int count = r.integer(t[2]);
      if (count < 0) r.fail<SchemaError>("negative detection count");
      if (!scene.frames.empty() && frame.frame_id <= scene.frames.back().frame_id)
        r.fail<SchemaError>("frame " + std::to_string(frame.frame_id) + " is not after frame " +
                            std::to_string(scene.frames.back().frame_id));
      if (!scene.truth_cameras.empty() || !scene.truth_skeletons.empty())
        r.fail<SchemaError>("frame record after ground-truth records");
      const std::size_t det_fields = 1 + 2 + 4 + 3 * kNumJoints + static_cast<std::size_t>(h.dim);
      for (int i = 0; i < count; ++i) {
        r.expect(t, "det record");
        if (t[0] != "det") r.fail("expected 'det' record, got '" + t[0] + "'");
        r.arity(t, det_fields);
        Detection d;
        d.camera_id = r.integer(t[1]);
        d.frame_id = frame.frame_id;
        if (!h.intrinsics.contains(d.camera_id))
          r.fail<SchemaError>("detection references camera " + std::to_string(d.camera_id) + " absent from the header");
        if (t[2] != "-") d.person_hint = r.integer(t[2]);
        d.bbox = {r.real(t[3]), r.real(t[4]), r.real(t[5]), r.real(t[6])};
        if (!d.bbox.well_ordered()) r.fail<SchemaError>("bounding box is not well ordered");
        for (int j = 0; j < kNumJoints; ++j) {
          d.joints[j] = {r.real(t[7 + 3 * j]), r.real(t[8 + 3 * j]), r.real(t[9 + 3 * j])};
          if (d.joints[j].confidence < 0.0 || d.joints[j].confidence > 1.0)
            r.fail<SchemaError>("joint " + std::to_string(j) + " confidence outside [0, 1]");
        }
        d.feature = detail::read_feature(r, t, 7 + 3 * kNumJoints, h.dim);
        if (!(d.feature.norm() > 0.0)) r.fail<SchemaError>("zero feature vector");
        frame.detections.push_back(std::move(d));
      }
      scene.frames.push_back(std::move(frame));
    } else if (kind == "truth-camera") {
      r.arity(t, 14);
      const int id = r.integer(t[1]);
      if (!h.intrinsics.contains(id))
        r.fail<SchemaError>("ground truth for camera " + std::to_string(id) + " absent from the header");
      if (!scene.truth_cameras.emplace(id, detail::read_pose(r, t, 2)).second)
        r.fail<SchemaError>("duplicate ground truth for camera " + std::to_string(id));
    } else if (kind == "truth-skeleton") {
      r.arity(t, 3 + 3 * kNumJoints + 1);
      TruthSkeleton ts;
      ts.frame_id = r.integer(t[1]);
      ts.skeleton.person_id = r.integer(t[2]);
      detail::read_skeleton_joints(r, t, 3, ts.skeleton);
      scene.truth_skeletons.push_back(std::move(ts));
    } else {
      r.fail("unknown record '" + kind + "'");
    }
  }
  if (!in_body) {
    if (!have_dim) r.fail<SchemaError>("missing 'dim' header record");
    if (!declared_cameras || *declared_cameras != h.num_cameras())
      r.fail<SchemaError>("camera count does not match the intrinsics records");
  }
  return scene;
}

// ---------------------------------------------------------------------------
// Tracks
// ---------------------------------------------------------------------------

inline void write_tracks(std::ostream& out, const TracksFile& tracks) {
  out << "PME-TRACKS 1\n";
  out << "t " << tracks.track_length << '\n';
  for (const auto& rec : tracks.records) {
    out << "track";
    detail::write_key(out, rec.key);
    out << ' ' << rec.track_id << ' ' << rec.window.size();
    for (const auto& w : rec.window) out << ' ' << w.frame_id << ' ' << w.local_index;
    out << '\n';
  }
}

inline TracksFile read_tracks(std::istream& in, const std::string& source = "tracks") {
  detail::RecordReader r(in, source);
  detail::expect_magic(r, "PME-TRACKS");
  TracksFile tracks;
  std::vector<std::string> t;
  r.expect(t, "'t' record");
  if (t[0] != "t") r.fail("expected 't' record");
  r.arity(t, 2);
  tracks.track_length = r.integer(t[1]);
  if (tracks.track_length < 1) r.fail<SchemaError>("track length must be at least 1");
  while (r.next(t)) {
    if (t[0] != "track") r.fail("unknown record '" + t[0] + "'");
    if (t.size() < 6) r.fail("truncated track record");
    TrackRecord rec;
    rec.key = detail::read_key(r, t, 1);
    rec.track_id = r.integer(t[4]);
    const int len = r.integer(t[5]);
    if (len < 1 || len > tracks.track_length) r.fail<SchemaError>("track window length outside [1, t]");
    r.arity(t, 6 + 2 * static_cast<std::size_t>(len));
    for (int i = 0; i < len; ++i)
      rec.window.push_back({r.integer(t[6 + 2 * i]), rec.key.camera_id, r.integer(t[7 + 2 * i])});
    for (int i = 1; i < len; ++i)
      if (rec.window[i].frame_id <= rec.window[i - 1].frame_id) r.fail<SchemaError>("track window frames not increasing");
    if (rec.window.back() != rec.key) r.fail<SchemaError>("track window must end at its own detection");
    if (!tracks.records.empty() && !(tracks.records.back().key < rec.key))
      r.fail<SchemaError>("track records not sorted by (frame, camera, index)");
    tracks.records.push_back(std::move(rec));
  }
  return tracks;
}

// ---------------------------------------------------------------------------
// Embeddings
// ---------------------------------------------------------------------------

inline void write_embeddings(std::ostream& out, const EmbeddingsFile& emb) {
  out << "PME-EMBEDDINGS 1\n";
  out << "dim " << emb.dim << '\n';
  out << "cameras " << emb.num_cameras << '\n';
  if (emb.people) out << "people " << *emb.people << '\n';
  out << "variant " << to_string(emb.variant) << '\n';
  for (const auto& rec : emb.records) {
    out << "sample";
    detail::write_key(out, rec.key);
    out << ' ' << rec.track_id;
    detail::write_feature(out, rec.feature);
    out << '\n';
  }
}

inline EmbeddingsFile read_embeddings(std::istream& in, const std::string& source = "embeddings") {
  detail::RecordReader r(in, source);
  detail::expect_magic(r, "PME-EMBEDDINGS");
  EmbeddingsFile emb;
  std::vector<std::string> t;
  bool have_dim = false, have_cameras = false, have_variant = false;
  while (r.next(t)) {
    if (t[0] == "dim") {
      r.arity(t, 2);
      emb.dim = r.integer(t[1]);
      if (emb.dim < 1) r.fail<SchemaError>("feature dimension must be positive");
      have_dim = true;
    } else if (t[0] == "cameras") {
      r.arity(t, 2);
      emb.num_cameras = r.integer(t[1]);
      if (emb.num_cameras < 1) r.fail<SchemaError>("camera count must be positive");
      have_cameras = true;
    } else if (t[0] == "people") {
      r.arity(t, 2);
      emb.people = r.integer(t[1]);
    } else if (t[0] == "variant") {
      r.arity(t, 2);
      const auto v = parse_embed_variant(t[1]);
      if (!v) r.fail<SchemaError>("unknown embedding variant '" + t[1] + "'");
      emb.variant = *v;
      have_variant = true;
    } else if (t[0] == "sample") {
      if (!have_dim || !have_cameras || !have_variant) r.fail<SchemaError>("sample record before the complete header");
      r.arity(t, 5 + static_cast<std::size_t>(emb.dim));
      EmbeddingRecord rec;
      rec.key = detail::read_key(r, t, 1);
      rec.track_id = r.integer(t[4]);
      rec.feature = detail::read_feature(r, t, 5, emb.dim);
      if (!emb.records.empty() && !(emb.records.back().key < rec.key))
        r.fail<SchemaError>("sample records not sorted by (frame, camera, index)");
      emb.records.push_back(std::move(rec));
    } else {
      r.fail("unknown record '" + t[0] + "'");
    }
  }
  if (!have_dim || !have_cameras || !have_variant) r.fail<SchemaError>("incomplete embeddings header");
  return emb;
}

// ---------------------------------------------------------------------------
// Results
// ---------------------------------------------------------------------------

inline void write_results(std::ostream& out, const ResultsFile& res) {
  out << "PME-RESULTS 1\n";
  out << "dim " << res.dim << '\n';

  std::size_t matches = 0, centers = 0, diagnostics = 0;
  for (const auto& f : res.frames) {
    matches += f.samples.size();
    centers += f.result.centers.size();
    diagnostics += f.samples.size() + 1;
  }

  out << "section MATCHES " << matches << '\n';
  for (const auto& f : res.frames)
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      out << "m";
      detail::write_key(out, f.samples[i]);
      out << ' ' << f.result.assignments[i] << '\n';
    }

  out << "section CENTERS " << centers << '\n';
  for (const auto& f : res.frames)
    for (std::size_t c = 0; c < f.result.centers.size(); ++c) {
      out << "c " << f.frame_id << ' ' << c;
      detail::write_feature(out, f.result.centers[c]);
      out << '\n';
    }

  out << "section CAMERAS " << res.cameras.size() << '\n';
  for (const auto& [id, pose] : res.cameras) {
    out << "cam " << id;
    detail::write_pose(out, pose);
    out << '\n';
  }

  out << "section SKELETONS " << res.skeletons.size() << '\n';
  for (const auto& s : res.skeletons) {
    out << "s " << s.frame_id << ' ' << s.skeleton.person_id;
    detail::write_skeleton_joints(out, s.skeleton);
    out << '\n';
  }

  out << "section DIAGNOSTICS " << diagnostics << '\n';
  for (const auto& f : res.frames) {
    out << "trace " << f.frame_id << ' ' << f.result.num_clusters << ' ' << f.result.iterations << ' '
        << f.result.objective_trace.size();
    for (double v : f.result.objective_trace) out << ' ' << format_real(v);
    out << '\n';
    for (std::size_t i = 0; i < f.samples.size(); ++i) {
      out << "d";
      detail::write_key(out, f.samples[i]);
      out << ' ' << (f.result.conflict_flags[i] ? 1 : 0) << ' ' << (f.result.fallback_flags[i] ? 1 : 0) << '\n';
    }
  }

  out << "section SUMMARY " << res.summary.size() << '\n';
  for (const auto& [k, v] : res.summary) out << k << ' ' << v << '\n';
}

inline ResultsFile read_results(std::istream& in, const std::string& source = "results") {
  detail::RecordReader r(in, source);
  detail::expect_magic(r, "PME-RESULTS");
  ResultsFile res;
  std::vector<std::string> t;
  r.expect(t, "'dim' record");
  if (t[0] != "dim") r.fail("expected 'dim' record");
  r.arity(t, 2);
  res.dim = r.integer(t[1]);
  if (res.dim < 0) r.fail<SchemaError>("negative feature dimension");

  auto section = [&](const std::string& name) {
    r.expect(t, "section " + name);
    if (t.size() != 3 || t[0] != "section" || t[1] != name) r.fail("expected 'section " + name + " <count>'");
    const int n = r.integer(t[2]);
    if (n < 0) r.fail<SchemaError>("negative record count");
    return n;
  };

  std::map<int, std::size_t> frame_index;
  auto frame_of = [&](int frame_id) -> FrameClusters& {
    auto it = frame_index.find(frame_id);
    if (it != frame_index.end()) return res.frames[it->second];
    if (!res.frames.empty() && frame_id < res.frames.back().frame_id) r.fail<SchemaError>("frames not sorted");
    frame_index[frame_id] = res.frames.size();
    res.frames.push_back({});
    res.frames.back().frame_id = frame_id;
    return res.frames.back();
  };

  for (int n = section("MATCHES"), i = 0; i < n; ++i) {
    r.expect(t, "'m' record");
    if (t[0] != "m") r.fail("expected 'm' record, got '" + t[0] + "'");
    r.arity(t, 5);
    const SampleKey key = detail::read_key(r, t, 1);
    FrameClusters& f = frame_of(key.frame_id);
    if (!f.samples.empty() && !(f.samples.back() < key)) r.fail<SchemaError>("match records not sorted");
    f.samples.push_back(key);
    const int cluster = r.integer(t[4]);
    if (cluster < 0) r.fail<SchemaError>("negative cluster index");
    f.result.assignments.push_back(cluster);
  }

  for (int n = section("CENTERS"), i = 0; i < n; ++i) {
    r.expect(t, "'c' record");
    if (t[0] != "c") r.fail("expected 'c' record, got '" + t[0] + "'");
    r.arity(t, 3 + static_cast<std::size_t>(res.dim));
    const int frame_id = r.integer(t[1]);
    if (!frame_index.contains(frame_id)) r.fail<SchemaError>("centers for frame " + std::to_string(frame_id) + " without matches");
    FrameClusters& f = res.frames[frame_index[frame_id]];
    if (r.integer(t[2]) != static_cast<int>(f.result.centers.size())) r.fail<SchemaError>("cluster centers out of order");
    f.result.centers.push_back(detail::read_feature(r, t, 3, res.dim));
  }
  for (auto& f : res.frames) {
    f.result.num_clusters = static_cast<int>(f.result.centers.size());
    for (int a : f.result.assignments)
      if (a >= f.result.num_clusters)
        throw SchemaError(source + ": frame " + std::to_string(f.frame_id) + " assigns cluster " + std::to_string(a) +
                          " but has " + std::to_string(f.result.num_clusters) + " centers");
  }

  for (int n = section("CAMERAS"), i = 0; i < n; ++i) {
    r.expect(t, "'cam' record");
    if (t[0] != "cam") r.fail("expected 'cam' record, got '" + t[0] + "'");
    r.arity(t, 14);
    const int id = r.integer(t[1]);
    if (!res.cameras.emplace(id, detail::read_pose(r, t, 2)).second) r.fail<SchemaError>("duplicate camera " + std::to_string(id));
  }

  for (int n = section("SKELETONS"), i = 0; i < n; ++i) {
    r.expect(t, "'s' record");
    if (t[0] != "s") r.fail("expected 's' record, got '" + t[0] + "'");
    r.arity(t, 3 + 3 * kNumJoints + 1);
    FrameSkeleton s;
    s.frame_id = r.integer(t[1]);
    s.skeleton.person_id = r.integer(t[2]);
    detail::read_skeleton_joints(r, t, 3, s.skeleton);
    res.skeletons.push_back(std::move(s));
  }

  for (auto& f : res.frames) {
    f.result.conflict_flags.assign(f.samples.size(), false);
    f.result.fallback_flags.assign(f.samples.size(), false);
  }
  std::map<int, std::size_t> seen_flags;
  for (int n = section("DIAGNOSTICS"), i = 0; i < n; ++i) {
    r.expect(t, "diagnostic record");
    if (t[0] == "trace") {
      if (t.size() < 5) r.fail("truncated trace record");
      const int frame_id = r.integer(t[1]);
      if (!frame_index.contains(frame_id)) r.fail<SchemaError>("trace for frame " + std::to_string(frame_id) + " without matches");
      FrameClusters& f = res.frames[frame_index[frame_id]];
      if (r.integer(t[2]) != f.result.num_clusters) r.fail<SchemaError>("trace cluster count disagrees with centers");
      f.result.iterations = r.integer(t[3]);
      const int len = r.integer(t[4]);
      if (len < 0) r.fail<SchemaError>("negative trace length");
      r.arity(t, 5 + static_cast<std::size_t>(len));
      f.result.objective_trace.clear();
      for (int k = 0; k < len; ++k) f.result.objective_trace.push_back(r.real(t[5 + k]));
    } else if (t[0] == "d") {
      r.arity(t, 6);
      const SampleKey key = detail::read_key(r, t, 1);
      if (!frame_index.contains(key.frame_id)) r.fail<SchemaError>("diagnostic for an unmatched sample");
      FrameClusters& f = res.frames[frame_index[key.frame_id]];
      const std::size_t pos = seen_flags[key.frame_id]++;
      if (pos >= f.samples.size() || f.samples[pos] != key) r.fail<SchemaError>("diagnostic records do not follow the matches");
      f.result.conflict_flags[pos] = r.flag(t[4]);
      f.result.fallback_flags[pos] = r.flag(t[5]);
    } else {
      r.fail("unknown diagnostic record '" + t[0] + "'");
    }
  }

  for (int n = section("SUMMARY"), i = 0; i < n; ++i) {
    r.expect(t, "summary record");
    r.arity(t, 2);
    if (!res.summary.empty() && !(res.summary.rbegin()->first < t[0])) r.fail<SchemaError>("summary keys not sorted");
    res.summary[t[0]] = t[1];
  }
  if (r.next(t)) r.fail("trailing record '" + t[0] + "'");
  return res;
}

// ---------------------------------------------------------------------------
// Paths
// ---------------------------------------------------------------------------

template <class T, class Reader>
T read_file(const std::string& path, Reader reader) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open '" + path + "' for reading");
  return reader(in, path);
}

template <class T, class Writer>
void write_file(const std::string& path, const T& value, Writer writer) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open '" + path + "' for writing");
  writer(out, value);
  out.flush();
  if (!out) throw IoError("failed writing '" + path + "'");
}

inline SceneFile read_scene(const std::string& path) {
  return read_file<SceneFile>(path, [](std::istream& in, const std::string& src) { return read_scene(in, src); });
}
inline void write_scene(const std::string& path, const SceneFile& scene) {
  write_file(path, scene, [](std::ostream& out, const SceneFile& s) { write_scene(out, s); });
}
inline ResultsFile read_results(const std::string& path) {
  return read_file<ResultsFile>(path, [](std::istream& in, const std::string& src) { return read_results(in, src); });
}
inline void write_results(const std::string& path, const ResultsFile& res) {
  write_file(path, res, [](std::ostream& out, const ResultsFile& r) { write_results(out, r); });
}

template <class T, class Writer>
std::string to_text(const T& value, Writer writer) {
  std::ostringstream out;
  writer(out, value);
  return out.str();
}

}  // namespace pme
