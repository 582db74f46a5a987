#include "engage/config.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <initializer_list>
#include <sstream>
#include <string_view>

#include "engage/error.hpp"

namespace engage {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, std::string_view section, std::initializer_list<std::string_view> known) {
  if (!j.is_object()) throw ConfigError("config section '" + std::string(section) + "' must be an object");
  for (const auto& [key, _] : j.items()) {
    bool ok = false;
    for (auto k : known) ok = ok || k == key;
    if (!ok) {
      const std::string where = section.empty() ? "" : std::string(section) + ".";
      throw ConfigError("unknown config key '" + where + key + "'");
    }
  }
}

template <typename T>
void read(const json& j, const char* key, T& dst) {
  if (j.contains(key)) dst = j.at(key).get<T>();
}

}  // namespace

void PipelineConfig::validate() const {
  visual.validate();
  physio.validate();
  ensemble.validate();
  if (workers < 1) throw ConfigError("workers must be >= 1");
  if (!(split_ratio > 0.0 && split_ratio < 1.0)) throw ConfigError("split_ratio must lie in (0, 1)");
  if (cv_folds < 2) throw ConfigError("cv_folds must be >= 2");
  if (camera.has_principal_point && !(std::isfinite(camera.cx) && std::isfinite(camera.cy)))
    throw ConfigError("principal point must be finite");
}

PipelineConfig config_from_json(const json& j) {
  PipelineConfig c;
  try {
    reject_unknown(j, "", {"seed", "workers", "split_ratio", "cv_folds", "visual", "physio", "ensemble"});
    read(j, "seed", c.seed);
    read(j, "workers", c.workers);
    read(j, "split_ratio", c.split_ratio);
    read(j, "cv_folds", c.cv_folds);

    if (j.contains("visual")) {
      const json& v = j.at("visual");
      reject_unknown(v, "visual",
                     {"ear_closed_max", "ear_partial_max", "gaze_frac", "yaw_deg", "pitch_deg", "roll_deg",
                      "focal_length_px", "principal_point"});
      read(v, "ear_closed_max", c.visual.ear_closed_max);
      read(v, "ear_partial_max", c.visual.ear_partial_max);
      read(v, "gaze_frac", c.visual.gaze_frac);
      read(v, "yaw_deg", c.visual.yaw_deg);
      read(v, "pitch_deg", c.visual.pitch_deg);
      read(v, "roll_deg", c.visual.roll_deg);
      if (v.contains("focal_length_px") && !v.at("focal_length_px").is_null())
        c.camera.focal_length = v.at("focal_length_px").get<double>();
      if (v.contains("principal_point") && !v.at("principal_point").is_null()) {
        const auto pp = v.at("principal_point").get<std::array<double, 2>>();
        c.camera.has_principal_point = true;
        c.camera.cx = pp[0];
        c.camera.cy = pp[1];
      }
    }

    if (j.contains("physio")) {
      const json& p = j.at("physio");
      reject_unknown(p, "physio",
                     {"pos_window_s", "detrend_window_s", "band_low_hz", "band_high_hz", "filter_order",
                      "peak_prominence_sigma", "max_bpm"});
      read(p, "pos_window_s", c.physio.pos_window_s);
      read(p, "detrend_window_s", c.physio.detrend_window_s);
      read(p, "band_low_hz", c.physio.band_low_hz);
      read(p, "band_high_hz", c.physio.band_high_hz);
      read(p, "filter_order", c.physio.filter_order);
      read(p, "peak_prominence_sigma", c.physio.peak_prominence_sigma);
      read(p, "max_bpm", c.physio.max_bpm);
    }

    if (j.contains("ensemble")) {
      const json& e = j.at("ensemble");
      reject_unknown(e, "ensemble",
                     {"adaboost_rounds", "rf_trees", "rf_min_leaf", "rf_max_features", "rf_bootstrap",
                      "meta_learning_rate", "meta_epochs", "meta_l2", "stack_folds"});
      read(e, "adaboost_rounds", c.ensemble.adaboost_rounds);
      read(e, "rf_trees", c.ensemble.forest.n_trees);
      read(e, "rf_min_leaf", c.ensemble.forest.min_leaf);
      read(e, "rf_max_features", c.ensemble.forest.max_features);
      read(e, "rf_bootstrap", c.ensemble.forest.bootstrap);
      read(e, "meta_learning_rate", c.ensemble.meta.learning_rate);
      read(e, "meta_epochs", c.ensemble.meta.epochs);
      read(e, "meta_l2", c.ensemble.meta.l2);
      read(e, "stack_folds", c.ensemble.stack_folds);
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid config: ") + e.what());
  }
  c.validate();
  return c;
}

PipelineConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  json j;
  try {
    j = json::parse(ss.str());
  } catch (const json::parse_error& e) {
    throw ConfigError(path + ": malformed JSON: " + e.what());
  }
  return config_from_json(j);
}

json to_json(const PipelineConfig& c) {
  json visual = {{"ear_closed_max", c.visual.ear_closed_max},
                 {"ear_partial_max", c.visual.ear_partial_max},
                 {"gaze_frac", c.visual.gaze_frac},
                 {"yaw_deg", c.visual.yaw_deg},
                 {"pitch_deg", c.visual.pitch_deg},
                 {"roll_deg", c.visual.roll_deg},
                 {"focal_length_px", nullptr},
                 {"principal_point", nullptr}};
  if (c.camera.focal_length > 0.0) visual["focal_length_px"] = c.camera.focal_length;
  if (c.camera.has_principal_point) visual["principal_point"] = {c.camera.cx, c.camera.cy};
  return {{"seed", c.seed},
          {"workers", c.workers},
          {"split_ratio", c.split_ratio},
          {"cv_folds", c.cv_folds},
          {"visual", visual},
          {"physio",
           {{"pos_window_s", c.physio.pos_window_s},
            {"detrend_window_s", c.physio.detrend_window_s},
            {"band_low_hz", c.physio.band_low_hz},
            {"band_high_hz", c.physio.band_high_hz},
            {"filter_order", c.physio.filter_order},
            {"peak_prominence_sigma", c.physio.peak_prominence_sigma},
            {"max_bpm", c.physio.max_bpm}}},
          {"ensemble",
           {{"adaboost_rounds", c.ensemble.adaboost_rounds},
            {"rf_trees", c.ensemble.forest.n_trees},
            {"rf_min_leaf", c.ensemble.forest.min_leaf},
            {"rf_max_features", c.ensemble.forest.max_features},
            {"rf_bootstrap", c.ensemble.forest.bootstrap},
            {"meta_learning_rate", c.ensemble.meta.learning_rate},
            {"meta_epochs", c.ensemble.meta.epochs},
            {"meta_l2", c.ensemble.meta.l2},
            {"stack_folds", c.ensemble.stack_folds}}}};
}

void apply_env_overrides(PipelineConfig& cfg) {
  const char* raw = std::getenv(kWorkersEnvVar);
  if (raw == nullptr || *raw == '\0') return;
  const std::string_view s(raw);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), value);
  if (ec != std::errc{} || ptr != s.data() + s.size() || value == 0)
    throw ConfigError(std::string(kWorkersEnvVar) + " must be a positive integer, got '" + raw + "'");
  cfg.workers = value;
}

}  // namespace engage
