#include "engage/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "engage/error.hpp"
#include "engage/parallel.hpp"
#include "engage/random.hpp"

namespace engage::synth {

using visual::Vec3;

namespace {

// Frontal 68-point layout in face-model units (x right, y down, nose tip at
// the origin). Anchor and eye entries are overwritten when rendering.
const std::array<Point2, kNumLandmarks>& frontal_template() {
  static const std::array<Point2, kNumLandmarks> tpl = [] {
    std::array<Point2, kNumLandmarks> t{};
    for (int i = 0; i <= 16; ++i) {
      const double s = std::numbers::pi * i / 16.0;
      t[i] = {-300.0 * std::cos(s), -170.0 + 500.0 * std::sin(s)};
    }
    for (int i = 0; i < 5; ++i) {
      const double s = i / 4.0;
      const double arch = 40.0 * std::sin(std::numbers::pi * s);
      t[17 + i] = {-280.0 + 220.0 * s, -250.0 - arch};
      t[22 + i] = {60.0 + 220.0 * s, -250.0 - arch};
    }
    t[27] = {0.0, -170.0};
    t[28] = {0.0, -115.0};
    t[29] = {0.0, -58.0};
    t[30] = {0.0, 0.0};
    const double nostril_x[] = {-70.0, -35.0, 0.0, 35.0, 70.0};
    const double nostril_y[] = {45.0, 55.0, 60.0, 55.0, 45.0};
    for (int i = 0; i < 5; ++i) t[31 + i] = {nostril_x[i], nostril_y[i]};
    for (int i = 36; i <= 47; ++i) t[i] = {0.0, -170.0};
    const Point2 mouth[] = {{-150, 150}, {-95, 125}, {-40, 115}, {0, 120},  {40, 115},  {95, 125},
                            {150, 150},  {100, 190}, {45, 205},  {0, 208},  {-45, 205}, {-100, 190},
                            {-130, 150}, {-45, 140}, {0, 142},   {45, 140}, {130, 150}, {45, 165},
                            {0, 167},    {-45, 165}};
    for (int i = 0; i < 20; ++i) t[48 + i] = mouth[i];
    return t;
  }();
  return tpl;
}

// Frontal anchor bounding box in template units.
constexpr double kTplMinX = -225.0, kTplMaxX = 225.0, kTplMinY = -170.0, kTplMaxY = 330.0;

// Eye width as a fraction of the outer-corner distance.
constexpr double kEyeWidthFrac = 0.27;

void place_eyes(std::array<Point2, kNumLandmarks>& p, double ear) {
  const Point2 a = p[36];
  const Point2 b = p[45];
  const double dx = b.x - a.x, dy = b.y - a.y;
  const double d = std::hypot(dx, dy);
  const Point2 u{dx / d, dy / d};
  const Point2 n{u.y, -u.x};  // image "up" for an upright face
  const double w = kEyeWidthFrac * d;
  const double h = ear * w / 2.0;  // (2h + 2h) / (2w) == ear
  auto at = [&](Point2 base, double along, double up) {
    return Point2{base.x + along * u.x + up * n.x, base.y + along * u.y + up * n.y};
  };
  // Left eye: 36 outer, 37/38 upper, 39 inner, 40/41 lower (40 under 38).
  p[39] = at(a, w, 0.0);
  p[37] = at(a, w / 3.0, h);
  p[38] = at(a, 2.0 * w / 3.0, h);
  p[41] = at(a, w / 3.0, -h);
  p[40] = at(a, 2.0 * w / 3.0, -h);
  // Right eye: 42 inner, 43/44 upper, 45 outer, 46/47 lower (47 under 43).
  const Point2 inner = at(b, -w, 0.0);
  p[42] = inner;
  p[43] = at(inner, w / 3.0, h);
  p[44] = at(inner, 2.0 * w / 3.0, h);
  p[47] = at(inner, w / 3.0, -h);
  p[46] = at(inner, 2.0 * w / 3.0, -h);
}

double quantize(double v) { return std::round(v * 1000.0) / 1000.0; }

double draw(Rng& rng, const std::array<double, 2>& range) { return rng.uniform(range[0], range[1]); }

void check_range(const std::array<double, 2>& r, double lo, double hi, const char* what) {
  if (!(r[0] >= lo && r[1] <= hi && r[0] <= r[1]))
    throw ConfigError(std::string("class profile ") + what + " range outside [" + std::to_string(lo) + ", " +
                      std::to_string(hi) + "]");
}

}  // namespace

LandmarkFrame render_face(const FaceState& state, const visual::CameraModel& cam, int width, int height,
                          std::size_t frame_index, double fps) {
  const visual::Mat3 r = visual::euler_to_rotation(state.pose);
  const auto& model = visual::face_model_points();

  std::array<Point2, 6> anchors;
  double min_x = 1e300, max_x = -1e300, min_y = 1e300, max_y = -1e300;
  for (std::size_t k = 0; k < 6; ++k) {
    anchors[k] = visual::project_point(model[k], r, state.translation, cam);
    min_x = std::min(min_x, anchors[k].x);
    max_x = std::max(max_x, anchors[k].x);
    min_y = std::min(min_y, anchors[k].y);
    max_y = std::max(max_y, anchors[k].y);
  }

  LandmarkFrame f;
  f.frame_index = frame_index;
  f.timestamp_s = static_cast<double>(frame_index) / fps;
  f.image_width = width;
  f.image_height = height;
  const auto& tpl = frontal_template();
  for (std::size_t i = 0; i < kNumLandmarks; ++i) {
    const double sx = (tpl[i].x - kTplMinX) / (kTplMaxX - kTplMinX);
    const double sy = (tpl[i].y - kTplMinY) / (kTplMaxY - kTplMinY);
    f.points[i] = {min_x + sx * (max_x - min_x), min_y + sy * (max_y - min_y)};
  }
  for (std::size_t k = 0; k < 6; ++k) f.points[visual::kPoseAnchorIndices[k]] = anchors[k];
  place_eyes(f.points, state.ear);
  return f;
}

PoseSequence gen_pose_frames(const visual::EulerAngles& angles, const visual::CameraModel& cam,
                             std::size_t n_frames, int width, int height, double noise_px, std::uint64_t seed,
                             double fps) {
  for (double a : {angles.pitch_deg, angles.yaw_deg, angles.roll_deg})
    if (!(a >= -45.0 && a <= 45.0)) throw ConfigError("synthetic pose angles must lie in [-45, 45] deg");
  PoseSequence seq;
  seq.truth = angles;
  Rng rng(seed);
  FaceState state;
  state.pose = angles;
  for (std::size_t i = 0; i < n_frames; ++i) {
    LandmarkFrame f = render_face(state, cam, width, height, i, fps);
    if (noise_px > 0.0)
      for (auto& p : f.points) {
        p.x += rng.normal(0.0, noise_px);
        p.y += rng.normal(0.0, noise_px);
      }
    seq.frames.push_back(f);
  }
  return seq;
}

std::vector<LandmarkFrame> gen_blink_frames(const std::function<double(double)>& ear_profile,
                                            std::size_t n_frames, double fps, int width, int height) {
  const auto cam = visual::CameraModel::for_image(width, height);
  std::vector<LandmarkFrame> out;
  out.reserve(n_frames);
  for (std::size_t i = 0; i < n_frames; ++i) {
    const double t = static_cast<double>(i) / fps;
    const double ear = ear_profile(t);
    if (!(ear >= 0.0 && ear <= 0.6))
      throw ConfigError("EAR profile value " + std::to_string(ear) + " at t=" + std::to_string(t) +
                        " s outside [0, 0.6]");
    FaceState s;
    s.ear = ear;
    out.push_back(render_face(s, cam, width, height, i, fps));
  }
  return out;
}

double pulse_waveform(double phase) { return std::sin(phase) + 0.3 * std::sin(2.0 * phase); }

double noise_sigma_for_snr(double snr_db, double amplitude) {
  const double signal_power = amplitude * amplitude * (1.0 + 0.3 * 0.3) / 2.0;
  return std::sqrt(signal_power / std::pow(10.0, snr_db / 10.0));
}

RgbTrace gen_pulse_trace(double bpm, double fps, double duration_s, double noise_sigma, double drift_amp,
                         std::uint64_t seed, double amplitude) {
  if (!(bpm >= 40.0 && bpm <= 180.0)) throw ConfigError("synthetic BPM must lie in [40, 180]");
  if (!(fps > 0.0 && duration_s > 0.0)) throw ConfigError("fps and duration must be positive");
  Rng rng(seed);
  const double phase0 = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double drift_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double w = 2.0 * std::numbers::pi * bpm / 60.0;
  const auto n = static_cast<std::size_t>(std::lround(duration_s * fps));
  RgbTrace trace{fps, {}};
  trace.samples.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / fps;
    const double pulse = amplitude * pulse_waveform(w * t + phase0);
    const double drift = drift_amp * std::sin(2.0 * std::numbers::pi * 0.05 * t + drift_phase);
    auto channel = [&](double base, double weight) {
      double v = base + weight * pulse + drift;
      if (noise_sigma > 0.0) v += rng.normal(0.0, noise_sigma);
      return std::clamp(v, 0.0, 255.0);
    };
    const double r = channel(140.0, -0.3);
    const double g = channel(110.0, 1.0);
    const double b = channel(95.0, 0.2);
    trace.samples.push_back({r, g, b});
  }
  return trace;
}

std::string_view to_string(Informativeness m) {
  switch (m) {
    case Informativeness::kVisual: return "visual";
    case Informativeness::kPhysio: return "physio";
    case Informativeness::kBoth: return "both";
    case Informativeness::kComplementary: return "complementary";
    case Informativeness::kNone: return "none";
  }
  return "?";
}

Informativeness informativeness_from_string(std::string_view s) {
  for (auto m : {Informativeness::kVisual, Informativeness::kPhysio, Informativeness::kBoth,
                 Informativeness::kComplementary, Informativeness::kNone})
    if (to_string(m) == s) return m;
  throw ConfigError("unknown modality_informativeness '" + std::string(s) + "'");
}

void SynthSpec::apply_default_profiles() {
  // Visual signatures: (attentive fraction, EAR baseline, blink rate).
  const std::array<ClassProfile, kNumClasses> visual_sep{{
      {{0.05, 0.30}, {0.18, 0.24}, {0.5, 0.8}, {}},
      {{0.35, 0.55}, {0.23, 0.29}, {0.3, 0.5}, {}},
      {{0.60, 0.78}, {0.27, 0.33}, {0.2, 0.4}, {}},
      {{0.82, 1.00}, {0.30, 0.36}, {0.1, 0.3}, {}},
  }};
  const ClassProfile visual_pooled{{0.05, 1.00}, {0.18, 0.36}, {0.1, 0.8}, {}};
  const std::array<std::array<double, 2>, kNumClasses> bpm_sep{{{52, 62}, {67, 77}, {82, 92}, {97, 107}}};
  const std::array<double, 2> bpm_pooled{52, 107};

  for (int c = 0; c < kNumClasses; ++c) {
    ClassProfile p;
    const bool vis = informativeness == Informativeness::kVisual || informativeness == Informativeness::kBoth;
    const bool phy = informativeness == Informativeness::kPhysio || informativeness == Informativeness::kBoth;
    ClassProfile v = vis ? visual_sep[c] : visual_pooled;
    std::array<double, 2> bpm = phy ? bpm_sep[c] : bpm_pooled;
    if (informativeness == Informativeness::kComplementary) {
      // Faces tell 0 from 1 (and both from the {2,3} pair); pulse tells 2 from 3.
      v = c == 0 ? visual_sep[0] : c == 1 ? visual_sep[3] : ClassProfile{{0.40, 0.65}, {0.25, 0.31}, {0.2, 0.5}, {}};
      bpm = c == 2 ? bpm_sep[0] : c == 3 ? bpm_sep[3] : std::array<double, 2>{70, 89};
    }
    p = v;
    p.bpm = bpm;
    classes[c] = p;
  }
}

void SynthSpec::validate() const {
  if (n_videos == 0) throw ConfigError("n_videos must be positive");
  if (!(fps > 0.0)) throw ConfigError("fps must be positive");
  if (!(duration_s > 0.0)) throw ConfigError("duration_s must be positive");
  if (width <= 0 || height <= 0) throw ConfigError("image size must be positive");
  if (!(landmark_noise_px >= 0.0) || !(drift_amp >= 0.0) || !(pulse_amplitude >= 0.0))
    throw ConfigError("noise, drift and amplitude must be non-negative");
  for (const auto& c : classes) {
    check_range(c.attentive, 0.0, 1.0, "attentive");
    check_range(c.ear, 0.02, 0.6, "ear");
    check_range(c.blink_rate_hz, 0.0, 5.0, "blink_rate_hz");
    check_range(c.bpm, 40.0, 180.0, "bpm");
  }
}

namespace {

ClassProfile profile_from_json(const nlohmann::json& j, ClassProfile p) {
  auto range = [&](const char* key, std::array<double, 2>& dst) {
    if (j.contains(key)) dst = j.at(key).get<std::array<double, 2>>();
  };
  range("attentive", p.attentive);
  range("ear", p.ear);
  range("blink_rate_hz", p.blink_rate_hz);
  range("bpm", p.bpm);
  return p;
}

}  // namespace

SynthSpec synth_spec_from_json(const nlohmann::json& j) {
  SynthSpec s;
  try {
    s.n_videos = j.value("n_videos", s.n_videos);
    s.fps = j.value("fps", s.fps);
    s.duration_s = j.value("duration_s", s.duration_s);
    s.width = j.value("width", s.width);
    s.height = j.value("height", s.height);
    s.seed = j.value("seed", s.seed);
    s.landmark_noise_px = j.value("landmark_noise_px", s.landmark_noise_px);
    s.pulse_amplitude = j.value("pulse_amplitude", s.pulse_amplitude);
    s.rgb_noise_sigma = j.value("rgb_noise_sigma", s.rgb_noise_sigma);
    s.drift_amp = j.value("drift_amp", s.drift_amp);
    if (j.contains("modality_informativeness"))
      s.informativeness = informativeness_from_string(j.at("modality_informativeness").get<std::string>());
    s.apply_default_profiles();
    if (j.contains("classes")) {
      const auto& cls = j.at("classes");
      if (!cls.is_array() || cls.size() != kNumClasses) throw ConfigError("'classes' must list 4 profiles");
      for (int c = 0; c < kNumClasses; ++c) s.classes[c] = profile_from_json(cls[c], s.classes[c]);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("invalid synth spec: ") + e.what());
  }
  s.validate();
  return s;
}

nlohmann::json to_json(const SynthSpec& s) {
  nlohmann::json classes = nlohmann::json::array();
  for (const auto& c : s.classes)
    classes.push_back(
        {{"attentive", c.attentive}, {"ear", c.ear}, {"blink_rate_hz", c.blink_rate_hz}, {"bpm", c.bpm}});
  return {{"n_videos", s.n_videos},
          {"fps", s.fps},
          {"duration_s", s.duration_s},
          {"width", s.width},
          {"height", s.height},
          {"modality_informativeness", std::string(to_string(s.informativeness))},
          {"seed", s.seed},
          {"landmark_noise_px", s.landmark_noise_px},
          {"pulse_amplitude", s.pulse_amplitude},
          {"rgb_noise_sigma", s.rgb_noise_sigma},
          {"drift_amp", s.drift_amp},
          {"classes", classes}};
}

namespace {

struct Segment {
  visual::EulerAngles pose;
  Vec3 translation;
};

Segment draw_segment(Rng& rng, bool attentive, const visual::CameraModel& cam, int width, int height) {
  Segment s;
  const double z = 1000.0 + rng.normal(0.0, 30.0);
  s.translation = Vec3(rng.normal(0.0, 15.0), 170.0 + rng.normal(0.0, 15.0), z);
  if (attentive) {
    s.pose = {rng.normal(0.0, 3.0), rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)};
    return s;
  }
  const double sign = rng.bernoulli(0.5) ? 1.0 : -1.0;
  switch (rng.index(4)) {
    case 0:
      s.pose = {rng.normal(0.0, 3.0), sign * rng.uniform(22.0, 35.0), rng.normal(0.0, 3.0)};
      break;
    case 1:
      s.pose = {sign * rng.uniform(22.0, 32.0), rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)};
      break;
    case 2:
      s.pose = {rng.normal(0.0, 3.0), rng.normal(0.0, 3.0), sign * rng.uniform(22.0, 32.0)};
      break;
    default: {
      // Face shifted off-centre: gaze leaves the forward band.
      s.pose = {rng.normal(0.0, 3.0), rng.normal(0.0, 3.0), rng.normal(0.0, 3.0)};
      const bool horizontal = rng.bernoulli(0.5);
      const double frac = rng.uniform(0.16, 0.28);
      const double px = frac * (horizontal ? width : height);
      const double mm = sign * px * z / cam.focal_length;
      (horizontal ? s.translation.x() : s.translation.y()) += mm;
      break;
    }
  }
  return s;
}

VideoRecord gen_video(const SynthSpec& spec, std::size_t index, GroundTruth& truth) {
  Rng rng(derive_seed(spec.seed, index));
  const int label = static_cast<int>(index % kNumClasses);
  const ClassProfile& prof = spec.classes[label];

  truth.label = label;
  truth.attentive_fraction = draw(rng, prof.attentive);
  truth.ear_baseline = draw(rng, prof.ear);
  truth.blink_rate_hz = draw(rng, prof.blink_rate_hz);
  truth.bpm = draw(rng, prof.bpm);

  char id[32];
  std::snprintf(id, sizeof id, "synth_%05zu", index);
  truth.video_id = id;

  VideoRecord rec;
  rec.video_id = id;
  rec.fps = spec.fps;
  rec.width = spec.width;
  rec.height = spec.height;
  rec.label = EngagementLabel(label);

  const auto cam = visual::CameraModel::for_image(spec.width, spec.height);
  const auto n = static_cast<std::size_t>(std::lround(spec.duration_s * spec.fps));
  const std::size_t seg_len = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(spec.fps)));
  const std::size_t blink_len = std::max<std::size_t>(3, static_cast<std::size_t>(std::lround(0.3 * spec.fps)));

  Segment seg{};
  std::size_t blink_left = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (i % seg_len == 0) seg = draw_segment(rng, rng.bernoulli(truth.attentive_fraction), cam, spec.width, spec.height);
    FaceState st;
    st.pose = {seg.pose.pitch_deg + rng.normal(0.0, 1.0), seg.pose.yaw_deg + rng.normal(0.0, 1.0),
               seg.pose.roll_deg + rng.normal(0.0, 1.0)};
    st.translation = seg.translation;
    double ear = std::clamp(truth.ear_baseline + rng.normal(0.0, 0.01), 0.02, 0.6);
    if (blink_left == 0 && rng.bernoulli(truth.blink_rate_hz / spec.fps)) blink_left = blink_len;
    if (blink_left > 0) {
      const double pos = static_cast<double>(blink_len - blink_left) / static_cast<double>(blink_len - 1);
      const double depth = 1.0 - std::abs(2.0 * pos - 1.0);  // 0 -> 1 -> 0
      ear = std::min(ear, ear + (0.05 - ear) * depth);
      --blink_left;
    }
    st.ear = ear;
    LandmarkFrame f = render_face(st, cam, spec.width, spec.height, i, spec.fps);
    for (auto& p : f.points) {
      if (spec.landmark_noise_px > 0.0) {
        p.x += rng.normal(0.0, spec.landmark_noise_px);
        p.y += rng.normal(0.0, spec.landmark_noise_px);
      }
      p = {quantize(p.x), quantize(p.y)};
    }
    rec.frames.push_back(f);
  }

  const double sigma =
      spec.rgb_noise_sigma < 0.0 ? noise_sigma_for_snr(14.0, spec.pulse_amplitude) : spec.rgb_noise_sigma;
  rec.trace = gen_pulse_trace(truth.bpm, spec.fps, spec.duration_s, sigma, spec.drift_amp,
                              derive_seed(spec.seed, index + 0x100000000ULL), spec.pulse_amplitude);
  for (auto& c : rec.trace.samples) c = {quantize(c.r), quantize(c.g), quantize(c.b)};
  return rec;
}

}  // namespace

Corpus gen_labeled_corpus(const SynthSpec& spec, std::size_t workers) {
  spec.validate();
  Corpus corpus;
  corpus.records.resize(spec.n_videos);
  corpus.truth.resize(spec.n_videos);
  parallel_for(spec.n_videos, workers, [&](std::size_t i) { corpus.records[i] = gen_video(spec, i, corpus.truth[i]); });
  return corpus;
}

void write_corpus(const Corpus& corpus, const std::string& dir) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw DataError("cannot create " + dir + ": " + ec.message());
  std::vector<ManifestEntry> manifest;
  for (const auto& rec : corpus.records) {
    const std::string name = rec.video_id + ".json";
    save_video_record(rec, (fs::path(dir) / name).string());
    manifest.push_back({rec.video_id, name, rec.label});
  }
  std::ofstream m(fs::path(dir) / "manifest.csv");
  if (!m) throw DataError("cannot write manifest in " + dir);
  m << serialize_manifest(manifest);

  std::ofstream gt(fs::path(dir) / "ground_truth.csv");
  if (!gt) throw DataError("cannot write ground truth in " + dir);
  gt << "video_id,engagement,bpm,attentive_fraction,ear_baseline,blink_rate_hz\n";
  for (const auto& t : corpus.truth)
    gt << t.video_id << "," << t.label << "," << t.bpm << "," << t.attentive_fraction << "," << t.ear_baseline
       << "," << t.blink_rate_hz << "\n";
}

}  // namespace engage::synth
