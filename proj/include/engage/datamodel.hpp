#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace engage {

inline constexpr std::size_t kNumLandmarks = 68;
inline constexpr int kNumClasses = 4;

struct Point2 {
  double x = 0.0;
  double y = 0.0;
  friend bool operator==(const Point2&, const Point2&) = default;
};

/// 68 iBUG landmarks for one frame, 0-based (p0..p67).
struct LandmarkFrame {
  std::size_t frame_index = 0;
  double timestamp_s = 0.0;
  int image_width = 0;
  int image_height = 0;
  std::array<Point2, kNumLandmarks> points{};

  friend bool operator==(const LandmarkFrame&, const LandmarkFrame&) = default;
};

/// Mean colour of the skin ROI in one frame, channels in [0, 255].
struct Rgb {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  friend bool operator==(const Rgb&, const Rgb&) = default;
};

struct RgbTrace {
  double fps = 0.0;
  std::vector<Rgb> samples;
  friend bool operator==(const RgbTrace&, const RgbTrace&) = default;
};

/// Ordinal engagement level in {0, 1, 2, 3}.
class EngagementLabel {
 public:
  /// Throws DataError when `level` is out of range.
  explicit EngagementLabel(int level);
  int value() const noexcept { return level_; }
  friend bool operator==(const EngagementLabel&, const EngagementLabel&) = default;

 private:
  int level_;
};

struct VideoRecord {
  std::string video_id;
  double fps = 0.0;
  int width = 0;
  int height = 0;
  std::vector<LandmarkFrame> frames;
  RgbTrace trace;
  std::optional<EngagementLabel> label;

  double duration_s() const { return static_cast<double>(frames.size()) / fps; }
  friend bool operator==(const VideoRecord&, const VideoRecord&) = default;
};

/// Distribution over the four engagement levels.
class ProbabilityVector {
 public:
  /// Validates non-negativity and unit sum (1e-9).
  explicit ProbabilityVector(const std::array<double, kNumClasses>& p);
  /// Uniform distribution.
  ProbabilityVector();

  double operator[](std::size_t k) const { return p_[k]; }
  const std::array<double, kNumClasses>& values() const noexcept { return p_; }
  /// Index of the largest component; ties go to the lower index.
  int argmax() const noexcept;

 private:
  std::array<double, kNumClasses> p_;
};

/// Parses one interchange JSON document. Throws DataError naming the
/// offending frame for any invariant violation.
VideoRecord parse_video_record(std::string_view text);

/// Inverse of parse_video_record. `t` is only written for frames whose
/// timestamp differs from frame_index / fps.
std::string serialize_video_record(const VideoRecord& rec);

/// Checks every VideoRecord invariant; throws DataError on the first failure.
void validate_video_record(const VideoRecord& rec);

VideoRecord load_video_record(const std::string& path);
void save_video_record(const VideoRecord& rec, const std::string& path);

struct ManifestEntry {
  std::string video_id;
  std::string path;
  std::optional<EngagementLabel> label;
  friend bool operator==(const ManifestEntry&, const ManifestEntry&) = default;
};

/// Parses a `video_id,path,engagement` CSV. An empty engagement cell means
/// the video is unlabeled.
std::vector<ManifestEntry> parse_manifest(std::string_view text);
std::string serialize_manifest(const std::vector<ManifestEntry>& entries);

}  // namespace engage
