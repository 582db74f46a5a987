#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "engage/config.hpp"
#include "engage/datamodel.hpp"
#include "engage/ensemble.hpp"
#include "engage/physio.hpp"
#include "engage/visual.hpp"

namespace engage::pipeline {

// ---------------------------------------------------------------------------
// Feature store

/// One video. A failed row keeps only its id, label and error message.
struct FeatureRow {
  std::string video_id;
  std::array<double, visual::kVisualDim> visual{};
  std::array<double, physio::kPhysioDim> physio{};
  std::optional<EngagementLabel> label;
  std::string error;  // empty means extraction succeeded

  bool ok() const noexcept { return error.empty(); }
  friend bool operator==(const FeatureRow&, const FeatureRow&) = default;
};

/// Rows sorted by video_id, ids unique.
struct FeatureStore {
  std::vector<FeatureRow> rows;
  nlohmann::json config;  // effective config used for extraction

  std::size_t ok_count() const;
  friend bool operator==(const FeatureStore&, const FeatureStore&) = default;
};

/// `# config: <json>` line, then a header of id, 15 visual, 4 physio,
/// engagement and status columns. Numbers round-trip exactly.
std::string serialize_feature_store(const FeatureStore& store);
FeatureStore parse_feature_store(std::string_view text);
void save_feature_store(const FeatureStore& store, const std::string& path);
FeatureStore load_feature_store(const std::string& path);

/// Per-video feature extraction. Throws on failure.
FeatureRow extract_row(const VideoRecord& rec, const PipelineConfig& cfg);

std::vector<ManifestEntry> load_manifest(const std::string& path);

/// Loads and extracts every manifest entry on `workers` threads. Relative
/// paths resolve against `base_dir`. Per-video failures become error rows.
/// Throws DataError on duplicate video ids.
FeatureStore extract_features(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                              const PipelineConfig& cfg, std::size_t workers);
FeatureStore extract_features(const std::string& manifest_path, const PipelineConfig& cfg);

/// In-memory variant; a record's own label is used.
FeatureStore extract_features(const std::vector<VideoRecord>& records, const PipelineConfig& cfg,
                              std::size_t workers);

// ---------------------------------------------------------------------------
// Training data

/// Successful, labelled rows in store order.
struct Dataset {
  std::vector<std::string> ids;
  ensemble::Matrix visual;
  ensemble::Matrix physio;
  ensemble::Labels labels;

  std::size_t size() const noexcept { return labels.size(); }
  ensemble::Matrix fused() const { return ensemble::concat_columns(visual, physio); }
  Dataset subset(std::span<const std::size_t> idx) const;
};

Dataset to_dataset(const FeatureStore& store);

struct Split {
  std::vector<std::size_t> train;
  std::vector<std::size_t> test;
  std::vector<std::string> warnings;
};

/// Per class, round(ratio * n_c) rows go to train after a seeded shuffle.
/// Classes with fewer than two rows produce a warning.
Split split_train_eval(const ensemble::Labels& labels, double ratio, std::uint64_t seed);

// ---------------------------------------------------------------------------
// Evaluation

struct EvalReport {
  double accuracy = 0.0;  // trace / total of the pooled confusion matrix
  std::array<std::array<int, kNumClasses>, kNumClasses> confusion{};  // [true][predicted]
  std::array<double, kNumClasses> precision{};  // 0 where a class is never predicted
  std::array<double, kNumClasses> recall{};     // 0 where a class has no support
  std::vector<double> fold_accuracy;            // cross-validation only

  double mean_fold_accuracy() const;
};

/// Throws DataError on a length mismatch or a label outside 0..3.
EvalReport evaluate(const std::vector<int>& predicted, const std::vector<int>& truth);

/// Stacked model on the train rows, scored on the test rows.
EvalReport evaluate_split(const Dataset& data, const Split& split, const PipelineConfig& cfg);

/// Stratified k-fold; train_stacked per fold; pooled confusion matrix.
EvalReport cross_validate(const Dataset& data, int k, const PipelineConfig& cfg);

ensemble::FusedModel train_model(const Dataset& data, const PipelineConfig& cfg);
EvalReport evaluate_model(const ensemble::FusedModel& model, const Dataset& data);

std::string format_eval(const EvalReport& r);

// ---------------------------------------------------------------------------
// Ablation

struct AblationRow {
  std::string name;
  double accuracy = 0.0;
};

/// Rows: visual-only, physio-only, early fusion, late fusion.
using AblationReport = std::array<AblationRow, 4>;

/// All four models share the same split (cv_folds == 0) or the same folds.
AblationReport ablate(const Dataset& data, const PipelineConfig& cfg, int cv_folds = 0);

std::string format_ablation(const AblationReport& r);

// ---------------------------------------------------------------------------
// Parallel benchmark

struct BenchRow {
  std::size_t batch = 0;
  double sequential_s = 0.0;
  double parallel_s = 0.0;
  double speedup() const { return sequential_s / parallel_s; }
};

struct BenchReport {
  std::size_t workers = 1;
  std::vector<BenchRow> rows;
};

/// Times extraction of the first `b` entries for every batch size b, first
/// with one worker, then with `workers`. Throws std::logic_error if the two
/// stores differ and DataError if the manifest is shorter than a batch.
BenchReport bench_parallel(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                           const std::vector<std::size_t>& batch_sizes, const PipelineConfig& cfg,
                           std::size_t workers);

std::string format_bench(const BenchReport& r);

// ---------------------------------------------------------------------------
// Per-video report

/// EC/HP/GD category shares, HR, PPI and systolic/diastolic sums, plus the
/// predicted engagement when a model is given. Physio fields read
/// "unavailable" when beat detection fails.
std::string report_video(const VideoRecord& rec, const PipelineConfig& cfg,
                         const ensemble::FusedModel* model = nullptr);

}  // namespace engage::pipeline
