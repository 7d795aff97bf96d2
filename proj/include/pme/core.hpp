#pragma once

// Shared value types for the person-matching and pose-estimation pipeline.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SVD>

namespace pme {

// ---------------------------------------------------------------------------
// Errors
// ---------------------------------------------------------------------------

/// Base of every error raised by the library. Data errors map to CLI exit 2.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

#define PME_DEFINE_ERROR(Name)            \
  class Name : public Error {             \
   public:                                \
    using Error::Error;                   \
  }

PME_DEFINE_ERROR(ParseError);
PME_DEFINE_ERROR(SchemaError);
PME_DEFINE_ERROR(IoError);
PME_DEFINE_ERROR(ConfigError);
PME_DEFINE_ERROR(MixedCameraError);
PME_DEFINE_ERROR(ZeroVectorError);
PME_DEFINE_ERROR(EmptyTrackError);
PME_DEFINE_ERROR(DimensionMismatchError);
PME_DEFINE_ERROR(InfeasibleError);
PME_DEFINE_ERROR(NoEligibleClusterError);
PME_DEFINE_ERROR(DegenerateError);
PME_DEFINE_ERROR(InsufficientInliersError);
PME_DEFINE_ERROR(DisconnectedGraphError);
PME_DEFINE_ERROR(NoLegObservedError);
PME_DEFINE_ERROR(BehindCameraError);
PME_DEFINE_ERROR(LengthMismatchError);
PME_DEFINE_ERROR(SpecError);

#undef PME_DEFINE_ERROR

// ---------------------------------------------------------------------------
// Skeleton convention
// ---------------------------------------------------------------------------

inline constexpr int kNumJoints = 12;

enum class JointId : int {
  kLeftShoulder = 0,
  kRightShoulder = 1,
  kLeftElbow = 2,
  kRightElbow = 3,
  kLeftWrist = 4,
  kRightWrist = 5,
  kLeftHip = 6,
  kRightHip = 7,
  kLeftKnee = 8,
  kRightKnee = 9,
  kLeftAnkle = 10,
  kRightAnkle = 11,
};

constexpr int index(JointId j) { return static_cast<int>(j); }

struct Limb {
  JointId a;
  JointId b;
};

/// The ten segments used for PCP and rendering.
inline constexpr std::array<Limb, 10> kLimbs = {{
    {JointId::kLeftShoulder, JointId::kLeftElbow},
    {JointId::kRightShoulder, JointId::kRightElbow},
    {JointId::kLeftElbow, JointId::kLeftWrist},
    {JointId::kRightElbow, JointId::kRightWrist},
    {JointId::kLeftHip, JointId::kLeftKnee},
    {JointId::kRightHip, JointId::kRightKnee},
    {JointId::kLeftKnee, JointId::kLeftAnkle},
    {JointId::kRightKnee, JointId::kRightAnkle},
    {JointId::kLeftShoulder, JointId::kLeftHip},
    {JointId::kRightShoulder, JointId::kRightHip},
}};

/// Knee-ankle segments; these carry the metric scale prior.
inline constexpr std::array<Limb, 2> kLowerLegs = {{
    {JointId::kLeftKnee, JointId::kLeftAnkle},
    {JointId::kRightKnee, JointId::kRightAnkle},
}};

inline constexpr double kDefaultConfidenceThreshold = 0.1;
inline constexpr int kDefaultFeatureDim = 128;

// ---------------------------------------------------------------------------
// Detections
// ---------------------------------------------------------------------------

/// Appearance descriptor. Unit norm once it has passed through normalize_feature.
using FeatureVector = Eigen::VectorXd;

inline bool same_feature(const FeatureVector& a, const FeatureVector& b) {
  return a.size() == b.size() && (a.size() == 0 || a == b);
}

struct BoundingBox {
  double x_min = 0.0;
  double y_min = 0.0;
  double x_max = 0.0;
  double y_max = 0.0;

  bool well_ordered() const { return x_min < x_max && y_min < y_max; }
  bool operator==(const BoundingBox&) const = default;
};

struct Joint2D {
  double u = 0.0;
  double v = 0.0;
  double confidence = 0.0;

  bool operator==(const Joint2D&) const = default;
};

struct Detection {
  int camera_id = 0;
  int frame_id = 0;
  std::optional<int> person_hint;  // ground truth, evaluation only
  BoundingBox bbox;
  std::array<Joint2D, kNumJoints> joints{};
  FeatureVector feature;

  bool joint_usable(int j, double threshold = kDefaultConfidenceThreshold) const {
    return joints[j].confidence >= threshold;
  }

  bool operator==(const Detection& o) const {
    return camera_id == o.camera_id && frame_id == o.frame_id &&
           person_hint == o.person_hint && bbox == o.bbox && joints == o.joints &&
           same_feature(feature, o.feature);
  }
};

/// Short single-camera identity chain; oldest detection first.
struct Track {
  int id = 0;
  int camera_id = 0;
  std::vector<Detection> detections;
  std::vector<int> local_indices;  // index of each detection within its (frame, camera)
  FeatureVector track_feature;

  int length() const { return static_cast<int>(detections.size()); }
  int last_frame() const { return detections.back().frame_id; }
};

// ---------------------------------------------------------------------------
// Clustering
// ---------------------------------------------------------------------------

struct ClusterResult {
  int num_clusters = 0;
  std::vector<int> assignments;  // sample -> cluster
  std::vector<FeatureVector> centers;
  std::vector<bool> conflict_flags;
  std::vector<bool> fallback_flags;
  std::vector<double> objective_trace;  // Step 1 objective per iteration
  int iterations = 0;

  std::vector<int> cluster_sizes() const {
    std::vector<int> sizes(num_clusters, 0);
    for (int a : assignments) ++sizes[a];
    return sizes;
  }
};

// ---------------------------------------------------------------------------
// Cameras and 3D
// ---------------------------------------------------------------------------

struct Intrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  std::array<double, 5> distortion{};  // k1 k2 p1 p2 k3

  bool valid() const { return fx > 0.0 && fy > 0.0; }
  bool has_distortion() const {
    for (double d : distortion)
      if (d != 0.0) return true;
    return false;
  }
  bool operator==(const Intrinsics&) const = default;
};

/// World-to-camera rigid transform: x_cam = rotation * x_world + translation.
struct CameraPose {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  Eigen::Vector3d center() const { return -rotation.transpose() * translation; }
  Eigen::Vector3d to_camera(const Eigen::Vector3d& x) const { return rotation * x + translation; }

  bool operator==(const CameraPose& o) const {
    return rotation == o.rotation && translation == o.translation;
  }
};

struct Skeleton3D {
  int person_id = 0;
  std::array<Eigen::Vector3d, kNumJoints> joints;
  std::array<bool, kNumJoints> joint_valid{};

  Skeleton3D() {
    for (auto& j : joints) j.setZero();
  }

  int valid_count() const {
    int n = 0;
    for (bool v : joint_valid) n += v ? 1 : 0;
    return n;
  }

  bool operator==(const Skeleton3D& o) const {
    return person_id == o.person_id && joints == o.joints && joint_valid == o.joint_valid;
  }
};

/// Nearest orthonormal matrix with det +1.
inline Eigen::Matrix3d orthonormalize(const Eigen::Matrix3d& m) {
  Eigen::JacobiSVD<Eigen::Matrix3d> svd(m, Eigen::ComputeFullU | Eigen::ComputeFullV);
  Eigen::Matrix3d r = svd.matrixU() * svd.matrixV().transpose();
  if (r.determinant() < 0.0) {
    Eigen::Matrix3d u = svd.matrixU();
    u.col(2) *= -1.0;
    r = u * svd.matrixV().transpose();
  }
  return r;
}

/// Angle of the rotation taking a to b, in radians.
inline double rotation_angle_between(const Eigen::Matrix3d& a, const Eigen::Matrix3d& b) {
  const double c = std::clamp(((a.transpose() * b).trace() - 1.0) / 2.0, -1.0, 1.0);
  // acos loses precision near zero; use the skew part instead.
  const Eigen::Matrix3d d = a.transpose() * b;
  const Eigen::Vector3d w(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  return std::atan2(0.5 * w.norm(), c);
}

}  // namespace pme
