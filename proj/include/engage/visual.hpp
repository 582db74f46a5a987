#pragma once

#include <array>
#include <span>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "engage/datamodel.hpp"

namespace engage::visual {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

/// Pinhole camera without distortion.
struct CameraModel {
  double focal_length = 0.0;
  double cx = 0.0;
  double cy = 0.0;

  /// focal = image width, principal point = image centre.
  static CameraModel for_image(int width, int height);
};

/// Axis-angle vector; its norm is the rotation angle in radians.
struct RotationVector {
  Vec3 v = Vec3::Zero();
  double angle() const { return v.norm(); }
};

struct EulerAngles {
  double pitch_deg = 0.0;
  double yaw_deg = 0.0;
  double roll_deg = 0.0;
};

/// R = I + sin(theta) K + (1 - cos(theta)) K^2, K the skew matrix of the unit axis.
Mat3 rodrigues(const RotationVector& rv);

/// Inverse of rodrigues; angle in [0, pi].
RotationVector rotation_log(const Mat3& rm);

/// Decomposes R = Rz(roll) * Ry(yaw) * Rx(pitch). Falls back to roll = 0 when
/// sqrt(R00^2 + R10^2) < 1e-6 (yaw at +/-90 deg).
EulerAngles rotation_to_euler(const Mat3& rm);

/// Rz(roll) * Ry(yaw) * Rx(pitch).
Mat3 euler_to_rotation(const EulerAngles& a);

// ---------------------------------------------------------------------------
// Head pose

/// Landmark indices of the six PnP anchors, in model-point order:
/// nose tip, chin, left-eye outer corner, right-eye outer corner,
/// left mouth corner, right mouth corner.
inline constexpr std::array<std::size_t, 6> kPoseAnchorIndices{30, 8, 36, 45, 48, 54};

/// Generic rigid face model (mm) in the camera frame: x right, y down,
/// z away from the camera. These are the familiar y-up generic values
/// rotated 180 deg about x, so an upright frontal face is the identity pose.
const std::array<Vec3, 6>& face_model_points();

struct PnpResult {
  RotationVector rotation;
  Vec3 translation = Vec3::Zero();
  double rms_reprojection_px = 0.0;
  int iterations = 0;
};

struct PnpOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
};

/// Levenberg-Marquardt minimisation of the pinhole reprojection error over
/// (rotation, translation). Throws DegenerateError for collinear image points
/// or a solution behind the camera, ConvergenceError when the iteration cap
/// is reached.
PnpResult solve_pnp(std::span<const Vec3> model_points, std::span<const Point2> image_points,
                    const CameraModel& cam, const PnpOptions& opts = {});

/// Projects camera-frame-model points through (R, t) and the pinhole camera.
Point2 project_point(const Vec3& model_point, const Mat3& r, const Vec3& t, const CameraModel& cam);

/// Runs solve_pnp on the six anchors and converts to Euler angles.
/// Sign conventions in image terms: yaw > 0 turns the nose toward image-left,
/// pitch > 0 toward image-down, roll > 0 leans the top of the head toward
/// image-right.
EulerAngles estimate_head_pose(const LandmarkFrame& frame, const CameraModel& cam);

// ---------------------------------------------------------------------------
// Eyes and gaze

/// Mean of the two per-eye aspect ratios. Throws DataError naming the eye
/// whose horizontal span is zero.
double compute_ear(const LandmarkFrame& frame);

/// Image centre minus the mean of the two eye centres, in pixels.
Point2 compute_gaze_vector(const LandmarkFrame& frame);

// ---------------------------------------------------------------------------
// Categorical level

enum class GazeDirection { kForward, kLeft, kRight, kUp, kDown };
enum class HeadPosition { kNeutral, kTurnedLeft, kTurnedRight, kUp, kDown, kTiltedLeft, kTiltedRight };
enum class EyeOpenness { kFullyOpen, kPartiallyClosed, kClosed };

inline constexpr std::size_t kNumGaze = 5;
inline constexpr std::size_t kNumHead = 7;
inline constexpr std::size_t kNumEye = 3;
inline constexpr std::size_t kVisualDim = kNumGaze + kNumHead + kNumEye;

std::string_view to_string(GazeDirection g);
std::string_view to_string(HeadPosition h);
std::string_view to_string(EyeOpenness e);

struct VisualThresholds {
  double ear_closed_max = 0.15;
  double ear_partial_max = 0.25;
  double gaze_frac = 0.10;
  double yaw_deg = 15.0;
  double pitch_deg = 15.0;
  double roll_deg = 15.0;

  /// Throws ConfigError if any ordering/positivity invariant is broken.
  void validate() const;
};

struct VisualFrameFeatures {
  double ear = 0.0;
  EulerAngles pose;
  Point2 gaze;
};

struct VisualCategorical {
  GazeDirection gaze_dir = GazeDirection::kForward;
  HeadPosition head_pos = HeadPosition::kNeutral;
  EyeOpenness eye_open = EyeOpenness::kFullyOpen;
  friend bool operator==(const VisualCategorical&, const VisualCategorical&) = default;
};

/// Bins the numeric frame features. Horizontal gaze wins ties; head position
/// checks yaw, then pitch, then roll.
VisualCategorical categorize(const VisualFrameFeatures& feat, int image_width, int image_height,
                             const VisualThresholds& th);

/// Per-class frame proportions: 5 gaze slots (forward, left, right, up, down),
/// 7 head slots (enum order), 3 eye slots (enum order).
struct VisualVideoFeatures {
  std::array<double, kVisualDim> values{};
  friend bool operator==(const VisualVideoFeatures&, const VisualVideoFeatures&) = default;
};

VisualVideoFeatures aggregate_video(std::span<const VisualCategorical> cats);

/// Column names matching VisualVideoFeatures slot order.
const std::array<std::string_view, kVisualDim>& visual_feature_names();

/// Optional camera override; unset fields fall back to CameraModel::for_image.
struct CameraOverride {
  double focal_length = 0.0;  // <= 0 means unset
  bool has_principal_point = false;
  double cx = 0.0;
  double cy = 0.0;

  CameraModel resolve(int width, int height) const;
};

struct FrameAnalysis {
  VisualFrameFeatures features;
  VisualCategorical category;
};

/// Frame-level features and categories for every frame of a record.
std::vector<FrameAnalysis> analyze_frames(const VideoRecord& rec, const VisualThresholds& th,
                                          const CameraOverride& cam = {});

VisualVideoFeatures extract_visual_features(const VideoRecord& rec, const VisualThresholds& th,
                                            const CameraOverride& cam = {});

}  // namespace engage::visual
