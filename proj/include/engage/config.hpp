#pragma once

#include <cstdint>
#include <string>

#include <json.hpp>

#include "engage/ensemble.hpp"
#include "engage/physio.hpp"
#include "engage/visual.hpp"

namespace engage {

/// Environment variable that overrides PipelineConfig::workers.
inline constexpr const char* kWorkersEnvVar = "ENGAGE_WORKERS";

struct PipelineConfig {
  visual::VisualThresholds visual;
  visual::CameraOverride camera;
  physio::PhysioParams physio;
  ensemble::EnsembleParams ensemble;
  std::uint64_t seed = 42;
  std::size_t workers = 1;
  double split_ratio = 0.8;
  int cv_folds = 10;

  /// Throws ConfigError if any sub-config is invalid or workers == 0.
  void validate() const;
};

/// Missing keys keep their defaults; unknown keys are rejected so that typos
/// cannot silently fall back to a default.
PipelineConfig config_from_json(const nlohmann::json& j);
PipelineConfig load_config(const std::string& path);

/// Every field, including defaults. Round-trips through config_from_json.
nlohmann::json to_json(const PipelineConfig& cfg);

/// Applies ENGAGE_WORKERS if set. Throws ConfigError on a malformed value.
void apply_env_overrides(PipelineConfig& cfg);

}  // namespace engage
