#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "engage/datamodel.hpp"
#include "engage/visual.hpp"

namespace engage::synth {

/// Everything needed to draw one synthetic face.
struct FaceState {
  visual::EulerAngles pose;
  visual::Vec3 translation{0.0, 170.0, 1000.0};  // mm; puts the eyes on the optical axis
  double ear = 0.30;
};

/// Places the six pose anchors by projecting the rigid face model, fills the
/// other landmarks from a frontal template scaled to the anchor bounding box,
/// then rebuilds both eyes so that compute_ear() returns state.ear exactly.
LandmarkFrame render_face(const FaceState& state, const visual::CameraModel& cam, int width, int height,
                          std::size_t frame_index, double fps);

struct PoseSequence {
  std::vector<LandmarkFrame> frames;
  visual::EulerAngles truth;
};

/// Frames of a rigid head held at `angles` (each within [-45, 45] deg),
/// with optional i.i.d. Gaussian landmark noise.
PoseSequence gen_pose_frames(const visual::EulerAngles& angles, const visual::CameraModel& cam,
                             std::size_t n_frames, int width = 640, int height = 480, double noise_px = 0.0,
                             std::uint64_t seed = 0, double fps = 30.0);

/// Frontal frames whose EAR follows ear_profile(t_seconds) exactly.
/// Throws ConfigError if the profile leaves [0, 0.6].
std::vector<LandmarkFrame> gen_blink_frames(const std::function<double(double)>& ear_profile,
                                            std::size_t n_frames, double fps = 30.0, int width = 640,
                                            int height = 480);

/// Pulse waveform shared by every synthetic trace: sin(wt) + 0.3 sin(2wt).
double pulse_waveform(double phase_rad);

/// White-noise sigma (RGB units, per channel) giving `snr_db` against the
/// green-channel pulse power of a trace with the given amplitude.
double noise_sigma_for_snr(double snr_db, double amplitude = 1.0);

/// Baseline (140, 110, 95) plus a pulse at bpm/60 Hz with channel weights
/// (-0.3, 1.0, 0.2) * amplitude, a 0.05 Hz luminance drift and white noise.
/// Throws ConfigError unless bpm is in [40, 180].
RgbTrace gen_pulse_trace(double bpm, double fps, double duration_s, double noise_sigma = 0.0,
                         double drift_amp = 0.0, std::uint64_t seed = 0, double amplitude = 1.0);

enum class Informativeness { kVisual, kPhysio, kBoth, kComplementary, kNone };

std::string_view to_string(Informativeness m);
Informativeness informativeness_from_string(std::string_view s);

/// Per-class generative parameters. Ranges are sampled uniformly per video.
struct ClassProfile {
  std::array<double, 2> attentive{0.5, 0.5};   // fraction of 1 s segments facing the screen
  std::array<double, 2> ear{0.28, 0.32};       // open-eye baseline
  std::array<double, 2> blink_rate_hz{0.2, 0.4};
  std::array<double, 2> bpm{70.0, 80.0};
};

struct SynthSpec {
  std::size_t n_videos = 40;
  double fps = 30.0;
  double duration_s = 10.0;
  int width = 640;
  int height = 480;
  Informativeness informativeness = Informativeness::kBoth;
  std::uint64_t seed = 1;
  double landmark_noise_px = 0.3;
  double pulse_amplitude = 1.0;
  double rgb_noise_sigma = -1.0;  // < 0 selects the 14 dB SNR level
  double drift_amp = 0.5;
  std::array<ClassProfile, kNumClasses> classes;

  /// Fills `classes` with the built-in profiles for `informativeness`.
  void apply_default_profiles();
  void validate() const;
};

/// Parses the JSON spec file; missing keys keep their defaults and the class
/// profiles default to those of the chosen informativeness.
SynthSpec synth_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SynthSpec& spec);

struct GroundTruth {
  std::string video_id;
  int label = 0;
  double bpm = 0.0;
  double attentive_fraction = 0.0;
  double ear_baseline = 0.0;
  double blink_rate_hz = 0.0;
};

struct Corpus {
  std::vector<VideoRecord> records;
  std::vector<GroundTruth> truth;
};

/// Video i gets class i % 4 and an RNG stream derived from (seed, i).
Corpus gen_labeled_corpus(const SynthSpec& spec, std::size_t workers = 1);

/// Writes <dir>/<video_id>.json, <dir>/manifest.csv (relative paths) and
/// <dir>/ground_truth.csv. Generated landmarks and colours are already
/// rounded to 1e-3, so a reload reproduces the in-memory corpus.
void write_corpus(const Corpus& corpus, const std::string& dir);

}  // namespace engage::synth
