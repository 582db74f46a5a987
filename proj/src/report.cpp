#include <cstdio>
#include <sstream>

#include "engage/error.hpp"
#include "engage/pipeline.hpp"

namespace engage::pipeline {

namespace {

template <typename Enum, std::size_t N>
void category_line(std::ostringstream& o, const char* title, const std::array<double, visual::kVisualDim>& v,
                   std::size_t offset) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < N; ++k)
    if (v[offset + k] > v[offset + best]) best = k;
  char buf[96];
  std::snprintf(buf, sizeof buf, "%-22s %s\n", title, std::string(visual::to_string(static_cast<Enum>(best))).c_str());
  o << buf;
  for (std::size_t k = 0; k < N; ++k) {
    std::snprintf(buf, sizeof buf, "    %-18s %6.1f%%\n", std::string(visual::to_string(static_cast<Enum>(k))).c_str(),
                  100.0 * v[offset + k]);
    o << buf;
  }
}

}  // namespace

std::string report_video(const VideoRecord& rec, const PipelineConfig& cfg, const ensemble::FusedModel* model) {
  std::ostringstream o;
  char buf[160];
  o << "video: " << rec.video_id << "\n";
  std::snprintf(buf, sizeof buf, "frames: %zu at %.3g fps (%.2f s), %dx%d\n", rec.frames.size(), rec.fps,
                rec.duration_s(), rec.width, rec.height);
  o << buf;
  o << "label: " << (rec.label ? std::to_string(rec.label->value()) : std::string("none")) << "\n";

  const auto v = visual::extract_visual_features(rec, cfg.visual, cfg.camera).values;
  category_line<visual::EyeOpenness, visual::kNumEye>(o, "EC (eye category):", v, visual::kNumGaze + visual::kNumHead);
  category_line<visual::HeadPosition, visual::kNumHead>(o, "HP (head position):", v, visual::kNumGaze);
  category_line<visual::GazeDirection, visual::kNumGaze>(o, "GD (gaze direction):", v, 0);

  std::optional<physio::PhysioVideoFeatures> phys;
  std::string phys_error;
  try {
    phys = physio::extract_physio_features(rec.trace, cfg.physio);
    if (!phys->plausible()) {
      phys_error = "heart rate outside the plausible range";
      phys.reset();
    }
  } catch (const DataError& e) {
    phys_error = e.what();
  }
  if (phys) {
    std::snprintf(buf, sizeof buf,
                  "HR (heart rate):       %.1f bpm\nPPI (mean interval):   %.3f s\n"
                  "SPS (systolic sum):    %.4f\nDPS (diastolic sum):   %.4f\n",
                  phys->hr_trend_bpm, phys->ppi_avg_s, phys->cs_sys, phys->cs_dia);
    o << buf;
  } else {
    o << "HR (heart rate):       unavailable\nPPI (mean interval):   unavailable\n"
         "SPS (systolic sum):    unavailable\nDPS (diastolic sum):   unavailable\n"
      << "physio note: " << phys_error << "\n";
  }

  if (model) {
    if (phys) {
      const auto p = phys->as_array();
      const auto pred = ensemble::predict_engagement(*model, v, p);
      std::snprintf(buf, sizeof buf, "predicted engagement: %d (p = %.3f %.3f %.3f %.3f)\n", pred.label.value(),
                    pred.proba[0], pred.proba[1], pred.proba[2], pred.proba[3]);
      o << buf;
    } else {
      o << "predicted engagement: unavailable\n";
    }
  }
  return o.str();
}

}  // namespace engage::pipeline
