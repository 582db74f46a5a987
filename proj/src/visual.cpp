#include "engage/visual.hpp"

#include <cmath>
#include <numbers>

#include <Eigen/Geometry>

#include "engage/error.hpp"

namespace engage::visual {

namespace {

constexpr double kRadToDeg = 180.0 / std::numbers::pi;

Mat3 skew(const Vec3& u) {
  Mat3 k;
  k << 0.0, -u.z(), u.y(),  //
      u.z(), 0.0, -u.x(),   //
      -u.y(), u.x(), 0.0;
  return k;
}

double dist(const Point2& a, const Point2& b) { return std::hypot(a.x - b.x, a.y - b.y); }

}  // namespace

CameraModel CameraModel::for_image(int width, int height) {
  return {static_cast<double>(width), width / 2.0, height / 2.0};
}

CameraModel CameraOverride::resolve(int width, int height) const {
  CameraModel cam = CameraModel::for_image(width, height);
  if (focal_length > 0.0) cam.focal_length = focal_length;
  if (has_principal_point) {
    cam.cx = cx;
    cam.cy = cy;
  }
  return cam;
}

Mat3 rodrigues(const RotationVector& rv) {
  const double theta = rv.v.norm();
  if (theta == 0.0) return Mat3::Identity();
  const Mat3 k = skew(rv.v / theta);
  return Mat3::Identity() + std::sin(theta) * k + (1.0 - std::cos(theta)) * (k * k);
}

RotationVector rotation_log(const Mat3& rm) {
  const Eigen::AngleAxisd aa(rm);
  return {aa.axis() * aa.angle()};
}

EulerAngles rotation_to_euler(const Mat3& r) {
  const double sy = std::sqrt(r(0, 0) * r(0, 0) + r(1, 0) * r(1, 0));
  double pitch, yaw, roll;
  if (sy >= 1e-6) {
    pitch = std::atan2(r(2, 1), r(2, 2));
    yaw = std::atan2(-r(2, 0), sy);
    roll = std::atan2(r(1, 0), r(0, 0));
  } else {
    pitch = std::atan2(-r(1, 2), r(1, 1));
    yaw = std::atan2(-r(2, 0), sy);
    roll = 0.0;
  }
  return {pitch * kRadToDeg, yaw * kRadToDeg, roll * kRadToDeg};
}

Mat3 euler_to_rotation(const EulerAngles& a) {
  const double p = a.pitch_deg / kRadToDeg;
  const double y = a.yaw_deg / kRadToDeg;
  const double r = a.roll_deg / kRadToDeg;
  Mat3 rx, ry, rz;
  rx << 1, 0, 0, 0, std::cos(p), -std::sin(p), 0, std::sin(p), std::cos(p);
  ry << std::cos(y), 0, std::sin(y), 0, 1, 0, -std::sin(y), 0, std::cos(y);
  rz << std::cos(r), -std::sin(r), 0, std::sin(r), std::cos(r), 0, 0, 0, 1;
  return rz * ry * rx;
}

double compute_ear(const LandmarkFrame& frame) {
  const auto& p = frame.points;
  const double span_l = dist(p[36], p[39]);
  const double span_r = dist(p[42], p[45]);
  if (span_l == 0.0) throw DataError("left eye has zero horizontal span (p36 == p39)");
  if (span_r == 0.0) throw DataError("right eye has zero horizontal span (p42 == p45)");
  const double ear_l = (dist(p[37], p[41]) + dist(p[38], p[40])) / (2.0 * span_l);
  const double ear_r = (dist(p[43], p[47]) + dist(p[44], p[46])) / (2.0 * span_r);
  return (ear_l + ear_r) / 2.0;
}

Point2 compute_gaze_vector(const LandmarkFrame& frame) {
  Point2 left, right;
  for (std::size_t i = 36; i <= 41; ++i) {
    left.x += frame.points[i].x;
    left.y += frame.points[i].y;
  }
  for (std::size_t i = 42; i <= 47; ++i) {
    right.x += frame.points[i].x;
    right.y += frame.points[i].y;
  }
  const Point2 eye{(left.x / 6.0 + right.x / 6.0) / 2.0, (left.y / 6.0 + right.y / 6.0) / 2.0};
  return {frame.image_width / 2.0 - eye.x, frame.image_height / 2.0 - eye.y};
}

std::string_view to_string(GazeDirection g) {
  switch (g) {
    case GazeDirection::kForward: return "forward";
    case GazeDirection::kLeft: return "left";
    case GazeDirection::kRight: return "right";
    case GazeDirection::kUp: return "up";
    case GazeDirection::kDown: return "down";
  }
  return "?";
}

std::string_view to_string(HeadPosition h) {
  switch (h) {
    case HeadPosition::kNeutral: return "neutral";
    case HeadPosition::kTurnedLeft: return "turned_left";
    case HeadPosition::kTurnedRight: return "turned_right";
    case HeadPosition::kUp: return "up";
    case HeadPosition::kDown: return "down";
    case HeadPosition::kTiltedLeft: return "tilted_left";
    case HeadPosition::kTiltedRight: return "tilted_right";
  }
  return "?";
}

std::string_view to_string(EyeOpenness e) {
  switch (e) {
    case EyeOpenness::kFullyOpen: return "fully_open";
    case EyeOpenness::kPartiallyClosed: return "partially_closed";
    case EyeOpenness::kClosed: return "closed";
  }
  return "?";
}

void VisualThresholds::validate() const {
  if (!(ear_closed_max > 0.0 && ear_closed_max < ear_partial_max))
    throw ConfigError("visual thresholds need 0 < ear_closed_max < ear_partial_max");
  if (!(gaze_frac > 0.0 && yaw_deg > 0.0 && pitch_deg > 0.0 && roll_deg > 0.0))
    throw ConfigError("visual gaze/angle thresholds must be positive");
}

VisualCategorical categorize(const VisualFrameFeatures& feat, int image_width, int image_height,
                             const VisualThresholds& th) {
  VisualCategorical out;

  const double gx = feat.gaze.x;
  const double gy = feat.gaze.y;
  const double w = static_cast<double>(image_width);
  const double h = static_cast<double>(image_height);
  if (std::abs(gx) <= th.gaze_frac * w && std::abs(gy) <= th.gaze_frac * h) {
    out.gaze_dir = GazeDirection::kForward;
  } else if (std::abs(gx) / w >= std::abs(gy) / h) {
    out.gaze_dir = gx > 0.0 ? GazeDirection::kLeft : GazeDirection::kRight;
  } else {
    out.gaze_dir = gy > 0.0 ? GazeDirection::kUp : GazeDirection::kDown;
  }

  const auto& a = feat.pose;
  if (std::abs(a.yaw_deg) > th.yaw_deg)
    out.head_pos = a.yaw_deg > 0.0 ? HeadPosition::kTurnedLeft : HeadPosition::kTurnedRight;
  else if (std::abs(a.pitch_deg) > th.pitch_deg)
    out.head_pos = a.pitch_deg > 0.0 ? HeadPosition::kDown : HeadPosition::kUp;
  else if (std::abs(a.roll_deg) > th.roll_deg)
    out.head_pos = a.roll_deg > 0.0 ? HeadPosition::kTiltedRight : HeadPosition::kTiltedLeft;
  else
    out.head_pos = HeadPosition::kNeutral;

  if (feat.ear <= th.ear_closed_max)
    out.eye_open = EyeOpenness::kClosed;
  else if (feat.ear <= th.ear_partial_max)
    out.eye_open = EyeOpenness::kPartiallyClosed;
  else
    out.eye_open = EyeOpenness::kFullyOpen;
  return out;
}

VisualVideoFeatures aggregate_video(std::span<const VisualCategorical> cats) {
  if (cats.empty()) throw DataError("cannot aggregate an empty frame sequence");
  std::array<std::size_t, kVisualDim> counts{};
  for (const auto& c : cats) {
    ++counts[static_cast<std::size_t>(c.gaze_dir)];
    ++counts[kNumGaze + static_cast<std::size_t>(c.head_pos)];
    ++counts[kNumGaze + kNumHead + static_cast<std::size_t>(c.eye_open)];
  }
  VisualVideoFeatures out;
  const double n = static_cast<double>(cats.size());
  for (std::size_t i = 0; i < kVisualDim; ++i) out.values[i] = static_cast<double>(counts[i]) / n;
  return out;
}

const std::array<std::string_view, kVisualDim>& visual_feature_names() {
  static const std::array<std::string_view, kVisualDim> names{
      "gaze_forward",   "gaze_left",       "gaze_right",        "gaze_up",
      "gaze_down",      "head_neutral",    "head_turned_left",  "head_turned_right",
      "head_up",        "head_down",       "head_tilted_left",  "head_tilted_right",
      "eye_fully_open", "eye_partially_closed", "eye_closed"};
  return names;
}

std::vector<FrameAnalysis> analyze_frames(const VideoRecord& rec, const VisualThresholds& th,
                                          const CameraOverride& cam_override) {
  std::vector<FrameAnalysis> out;
  out.reserve(rec.frames.size());
  for (const auto& frame : rec.frames) {
    const CameraModel cam = cam_override.resolve(frame.image_width, frame.image_height);
    FrameAnalysis fa;
    try {
      fa.features.ear = compute_ear(frame);
      fa.features.pose = estimate_head_pose(frame, cam);
    } catch (const DataError& e) {
      throw DataError("frame " + std::to_string(frame.frame_index) + ": " + e.what());
    }
    fa.features.gaze = compute_gaze_vector(frame);
    fa.category = categorize(fa.features, frame.image_width, frame.image_height, th);
    out.push_back(fa);
  }
  return out;
}

VisualVideoFeatures extract_visual_features(const VideoRecord& rec, const VisualThresholds& th,
                                            const CameraOverride& cam) {
  const auto frames = analyze_frames(rec, th, cam);
  std::vector<VisualCategorical> cats;
  cats.reserve(frames.size());
  for (const auto& f : frames) cats.push_back(f.category);
  return aggregate_video(cats);
}

}  // namespace engage::visual
