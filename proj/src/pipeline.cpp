#include "engage/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "engage/error.hpp"
#include "engage/parallel.hpp"
#include "engage/random.hpp"

namespace engage::pipeline {

namespace fs = std::filesystem;
using ensemble::Labels;
using ensemble::Matrix;

namespace {

std::string one_line(std::string s) {
  std::replace_if(s.begin(), s.end(), [](char c) { return c == '\n' || c == '\r'; }, ' ');
  return s;
}

nlohmann::json extraction_snapshot(const PipelineConfig& cfg) {
  nlohmann::json j = to_json(cfg);
  j.erase("workers");  // must not make sequential and parallel stores differ
  return j;
}

FeatureStore assemble(std::vector<FeatureRow> rows, const PipelineConfig& cfg) {
  std::sort(rows.begin(), rows.end(), [](const auto& a, const auto& b) { return a.video_id < b.video_id; });
  for (std::size_t i = 1; i < rows.size(); ++i)
    if (rows[i].video_id == rows[i - 1].video_id)
      throw DataError("duplicate video_id '" + rows[i].video_id + "'");
  return {std::move(rows), extraction_snapshot(cfg)};
}

int argmax_label(const ProbabilityVector& p) { return static_cast<int>(p.argmax()); }

}  // namespace

FeatureRow extract_row(const VideoRecord& rec, const PipelineConfig& cfg) {
  FeatureRow row;
  row.video_id = rec.video_id;
  row.label = rec.label;
  row.visual = visual::extract_visual_features(rec, cfg.visual, cfg.camera).values;
  const auto phys = physio::extract_physio_features(rec.trace, cfg.physio);
  if (!phys.plausible())
    throw DataError("heart rate " + std::to_string(phys.hr_trend_bpm) + " bpm outside the plausible range");
  row.physio = phys.as_array();
  return row;
}

std::vector<ManifestEntry> load_manifest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open manifest " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_manifest(ss.str());
}

FeatureStore extract_features(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                              const PipelineConfig& cfg, std::size_t workers) {
  {
    std::vector<std::string> ids;
    for (const auto& e : entries) ids.push_back(e.video_id);
    std::sort(ids.begin(), ids.end());
    const auto dup = std::adjacent_find(ids.begin(), ids.end());
    if (dup != ids.end()) throw DataError("manifest lists video_id '" + *dup + "' twice");
  }
  std::vector<FeatureRow> rows(entries.size());
  parallel_for(entries.size(), workers, [&](std::size_t i) {
    const ManifestEntry& e = entries[i];
    FeatureRow& row = rows[i];
    try {
      fs::path p(e.path);
      if (p.is_relative()) p = fs::path(base_dir) / p;
      const VideoRecord rec = load_video_record(p.string());
      if (rec.video_id != e.video_id)
        throw DataError("file holds video_id '" + rec.video_id + "', manifest says '" + e.video_id + "'");
      if (e.label && rec.label && *e.label != *rec.label)
        throw DataError("manifest label " + std::to_string(e.label->value()) + " disagrees with file label " +
                        std::to_string(rec.label->value()));
      row = extract_row(rec, cfg);
      if (e.label) row.label = e.label;
    } catch (const std::exception& ex) {
      row = FeatureRow{};
      row.label = e.label;
      row.error = one_line(ex.what());
    }
    row.video_id = e.video_id;
  });
  return assemble(std::move(rows), cfg);
}

FeatureStore extract_features(const std::string& manifest_path, const PipelineConfig& cfg) {
  const auto entries = load_manifest(manifest_path);
  return extract_features(entries, fs::path(manifest_path).parent_path().string(), cfg, cfg.workers);
}

FeatureStore extract_features(const std::vector<VideoRecord>& records, const PipelineConfig& cfg,
                              std::size_t workers) {
  std::vector<FeatureRow> rows(records.size());
  parallel_for(records.size(), workers, [&](std::size_t i) {
    try {
      rows[i] = extract_row(records[i], cfg);
    } catch (const std::exception& ex) {
      rows[i] = FeatureRow{};
      rows[i].video_id = records[i].video_id;
      rows[i].label = records[i].label;
      rows[i].error = one_line(ex.what());
    }
  });
  return assemble(std::move(rows), cfg);
}

// ---------------------------------------------------------------------------

Dataset Dataset::subset(std::span<const std::size_t> idx) const {
  Dataset d;
  for (std::size_t i : idx) d.ids.push_back(ids[i]);
  d.visual = visual.select_rows(idx);
  d.physio = physio.select_rows(idx);
  d.labels = ensemble::select(labels, idx);
  return d;
}

Dataset to_dataset(const FeatureStore& store) {
  std::vector<std::vector<double>> vis, phy;
  Dataset d;
  for (const auto& r : store.rows) {
    if (!r.ok() || !r.label) continue;
    d.ids.push_back(r.video_id);
    vis.emplace_back(r.visual.begin(), r.visual.end());
    phy.emplace_back(r.physio.begin(), r.physio.end());
    d.labels.push_back(r.label->value());
  }
  d.visual = vis.empty() ? Matrix(0, visual::kVisualDim) : Matrix::from_rows(vis);
  d.physio = phy.empty() ? Matrix(0, physio::kPhysioDim) : Matrix::from_rows(phy);
  return d;
}

Split split_train_eval(const Labels& labels, double ratio, std::uint64_t seed) {
  if (!(ratio > 0.0 && ratio < 1.0)) throw ConfigError("split ratio must lie in (0, 1)");
  Split s;
  for (int c = 0; c < kNumClasses; ++c) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == c) members.push_back(i);
    if (members.empty()) continue;
    if (members.size() < 2)
      s.warnings.push_back("class " + std::to_string(c) + " has " + std::to_string(members.size()) +
                           " sample; stratification is degraded");
    Rng rng(derive_seed(seed, 0x5B17ULL + static_cast<std::uint64_t>(c)));
    for (std::size_t i = members.size(); i > 1; --i) std::swap(members[i - 1], members[rng.index(i)]);
    const auto n_train = static_cast<std::size_t>(std::lround(ratio * static_cast<double>(members.size())));
    s.train.insert(s.train.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_train));
    s.test.insert(s.test.end(), members.begin() + static_cast<std::ptrdiff_t>(n_train), members.end());
  }
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

// ---------------------------------------------------------------------------

double EvalReport::mean_fold_accuracy() const {
  if (fold_accuracy.empty()) return accuracy;
  double sum = 0.0;
  for (double a : fold_accuracy) sum += a;
  return sum / static_cast<double>(fold_accuracy.size());
}

EvalReport evaluate(const std::vector<int>& predicted, const std::vector<int>& truth) {
  if (predicted.size() != truth.size())
    throw DataError("evaluate: " + std::to_string(predicted.size()) + " predictions for " +
                    std::to_string(truth.size()) + " labels");
  EvalReport r;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= kNumClasses || predicted[i] < 0 || predicted[i] >= kNumClasses)
      throw DataError("evaluate: label outside 0..3 at index " + std::to_string(i));
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }
  int diag = 0;
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    diag += r.confusion[c][c];
    int row = 0, col = 0;
    for (std::size_t k = 0; k < kNumClasses; ++k) {
      row += r.confusion[c][k];
      col += r.confusion[k][c];
    }
    r.recall[c] = row ? static_cast<double>(r.confusion[c][c]) / row : 0.0;
    r.precision[c] = col ? static_cast<double>(r.confusion[c][c]) / col : 0.0;
  }
  r.accuracy = truth.empty() ? 0.0 : static_cast<double>(diag) / static_cast<double>(truth.size());
  return r;
}

ensemble::FusedModel train_model(const Dataset& data, const PipelineConfig& cfg) {
  if (data.size() == 0) throw DataError("no labelled rows with features to train on");
  auto model = ensemble::train_stacked(data.visual, data.physio, data.labels, cfg.ensemble, cfg.seed, cfg.workers);
  model.config = to_json(cfg);
  return model;
}

namespace {

std::vector<int> predict_all(const ensemble::FusedModel& m, const Dataset& data) {
  std::vector<int> out(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out[i] = ensemble::predict_engagement(m, data.visual.row(i), data.physio.row(i)).label.value();
  return out;
}

}  // namespace

EvalReport evaluate_model(const ensemble::FusedModel& model, const Dataset& data) {
  return evaluate(predict_all(model, data), data.labels);
}

EvalReport evaluate_split(const Dataset& data, const Split& split, const PipelineConfig& cfg) {
  if (split.train.empty() || split.test.empty()) throw DataError("split has an empty train or test side");
  const Dataset train = data.subset(split.train);
  const Dataset test = data.subset(split.test);
  return evaluate_model(train_model(train, cfg), test);
}

EvalReport cross_validate(const Dataset& data, int k, const PipelineConfig& cfg) {
  if (k < 2) throw ConfigError("cross-validation needs k >= 2");
  if (data.size() < static_cast<std::size_t>(k))
    throw DataError(std::to_string(data.size()) + " labelled rows are fewer than k = " + std::to_string(k));
  const auto folds = ensemble::stratified_folds(data.labels, static_cast<std::size_t>(k), derive_seed(cfg.seed, 0xC5));
  PipelineConfig inner = cfg;
  inner.workers = 1;
  std::vector<std::vector<int>> preds(folds.size());
  parallel_for(folds.size(), cfg.workers, [&](std::size_t f) {
    std::vector<std::size_t> train_idx;
    for (std::size_t g = 0; g < folds.size(); ++g)
      if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
    std::sort(train_idx.begin(), train_idx.end());
    const auto model = train_model(data.subset(train_idx), inner);
    preds[f] = predict_all(model, data.subset(folds[f]));
  });
  std::vector<int> pooled_pred, pooled_true;
  std::vector<double> fold_acc;
  for (std::size_t f = 0; f < folds.size(); ++f) {
    const auto truth = ensemble::select(data.labels, folds[f]);
    fold_acc.push_back(evaluate(preds[f], truth).accuracy);
    pooled_pred.insert(pooled_pred.end(), preds[f].begin(), preds[f].end());
    pooled_true.insert(pooled_true.end(), truth.begin(), truth.end());
  }
  EvalReport r = evaluate(pooled_pred, pooled_true);
  r.fold_accuracy = std::move(fold_acc);
  return r;
}

std::string format_eval(const EvalReport& r) {
  std::ostringstream o;
  char buf[128];
  std::snprintf(buf, sizeof buf, "accuracy: %.4f\n", r.accuracy);
  o << buf;
  if (!r.fold_accuracy.empty()) {
    std::snprintf(buf, sizeof buf, "mean fold accuracy: %.4f over %zu folds\n", r.mean_fold_accuracy(),
                  r.fold_accuracy.size());
    o << buf << "folds:";
    for (double a : r.fold_accuracy) {
      std::snprintf(buf, sizeof buf, " %.4f", a);
      o << buf;
    }
    o << "\n";
  }
  o << "confusion (rows = true, cols = predicted):\n";
  for (std::size_t t = 0; t < kNumClasses; ++t) {
    std::snprintf(buf, sizeof buf, "  %zu: %5d %5d %5d %5d\n", t, r.confusion[t][0], r.confusion[t][1],
                  r.confusion[t][2], r.confusion[t][3]);
    o << buf;
  }
  o << "class  precision  recall\n";
  for (std::size_t c = 0; c < kNumClasses; ++c) {
    std::snprintf(buf, sizeof buf, "  %zu    %.4f     %.4f\n", c, r.precision[c], r.recall[c]);
    o << buf;
  }
  return o.str();
}

// ---------------------------------------------------------------------------

namespace {

// Accuracy of the four ablation models trained on `train`, scored on `test`.
std::array<std::vector<int>, 4> ablation_predictions(const Dataset& train, const Dataset& test,
                                                     const PipelineConfig& cfg) {
  const auto& e = cfg.ensemble;
  const auto ab = ensemble::train_adaboost(train.visual, train.labels, e.adaboost_rounds, cfg.seed);
  const auto rf = ensemble::train_random_forest(train.physio, train.labels, e.forest, cfg.seed, cfg.workers);
  const auto early = ensemble::train_early_fusion(train.fused(), train.labels, e.forest, cfg.seed, cfg.workers);
  const auto late = train_model(train, cfg);
  const Matrix test_fused = test.fused();
  std::array<std::vector<int>, 4> p;
  for (std::size_t i = 0; i < test.size(); ++i) {
    p[0].push_back(argmax_label(ensemble::predict_proba(ab, test.visual.row(i))));
    p[1].push_back(argmax_label(ensemble::predict_proba(rf, test.physio.row(i))));
    p[2].push_back(argmax_label(ensemble::predict_proba(early, test_fused.row(i))));
    p[3].push_back(ensemble::predict_engagement(late, test.visual.row(i), test.physio.row(i)).label.value());
  }
  return p;
}

}  // namespace

AblationReport ablate(const Dataset& data, const PipelineConfig& cfg, int cv_folds) {
  AblationReport report{{{"visual-only (AdaBoost)", 0.0},
                         {"physio-only (random forest)", 0.0},
                         {"early fusion (random forest)", 0.0},
                         {"late fusion (stacked)", 0.0}}};
  std::array<std::vector<int>, 4> pred;
  std::vector<int> truth;
  if (cv_folds == 0) {
    const Split split = split_train_eval(data.labels, cfg.split_ratio, cfg.seed);
    if (split.train.empty() || split.test.empty()) throw DataError("split has an empty train or test side");
    const Dataset test = data.subset(split.test);
    pred = ablation_predictions(data.subset(split.train), test, cfg);
    truth = test.labels;
  } else {
    if (cv_folds < 2) throw ConfigError("ablation folds must be >= 2");
    if (data.size() < static_cast<std::size_t>(cv_folds))
      throw DataError("fewer labelled rows than ablation folds");
    const auto folds =
        ensemble::stratified_folds(data.labels, static_cast<std::size_t>(cv_folds), derive_seed(cfg.seed, 0xC5));
    for (std::size_t f = 0; f < folds.size(); ++f) {
      std::vector<std::size_t> train_idx;
      for (std::size_t g = 0; g < folds.size(); ++g)
        if (g != f) train_idx.insert(train_idx.end(), folds[g].begin(), folds[g].end());
      std::sort(train_idx.begin(), train_idx.end());
      const Dataset test = data.subset(folds[f]);
      const auto p = ablation_predictions(data.subset(train_idx), test, cfg);
      for (std::size_t m = 0; m < 4; ++m) pred[m].insert(pred[m].end(), p[m].begin(), p[m].end());
      truth.insert(truth.end(), test.labels.begin(), test.labels.end());
    }
  }
  for (std::size_t m = 0; m < 4; ++m) report[m].accuracy = evaluate(pred[m], truth).accuracy;
  return report;
}

std::string format_ablation(const AblationReport& r) {
  std::ostringstream o;
  char buf[128];
  o << "model                          accuracy\n";
  for (const auto& row : r) {
    std::snprintf(buf, sizeof buf, "%-30s %.4f\n", row.name.c_str(), row.accuracy);
    o << buf;
  }
  return o.str();
}

// ---------------------------------------------------------------------------

BenchReport bench_parallel(const std::vector<ManifestEntry>& entries, const std::string& base_dir,
                           const std::vector<std::size_t>& batch_sizes, const PipelineConfig& cfg,
                           std::size_t workers) {
  if (workers < 1) throw ConfigError("workers must be >= 1");
  BenchReport report;
  report.workers = workers;
  using clock = std::chrono::steady_clock;
  for (std::size_t b : batch_sizes) {
    if (b == 0) throw ConfigError("batch sizes must be positive");
    if (b > entries.size())
      throw DataError("batch size " + std::to_string(b) + " exceeds the " + std::to_string(entries.size()) +
                      " manifest entries");
    const std::vector<ManifestEntry> batch(entries.begin(), entries.begin() + static_cast<std::ptrdiff_t>(b));
    const auto t0 = clock::now();
    const FeatureStore seq = extract_features(batch, base_dir, cfg, 1);
    const auto t1 = clock::now();
    const FeatureStore par = extract_features(batch, base_dir, cfg, workers);
    const auto t2 = clock::now();
    if (!(seq == par))
      throw std::logic_error("parallel feature store differs from sequential at batch " + std::to_string(b));
    BenchRow row;
    row.batch = b;
    row.sequential_s = std::chrono::duration<double>(t1 - t0).count();
    row.parallel_s = std::chrono::duration<double>(t2 - t1).count();
    report.rows.push_back(row);
  }
  return report;
}

std::string format_bench(const BenchReport& r) {
  std::ostringstream o;
  char buf[128];
  std::snprintf(buf, sizeof buf, "workers: %zu (outputs verified identical)\n", r.workers);
  o << buf << "batch  sequential_s  parallel_s  speedup\n";
  for (const auto& row : r.rows) {
    std::snprintf(buf, sizeof buf, "%5zu  %12.3f  %10.3f  %7.2f\n", row.batch, row.sequential_s, row.parallel_s,
                  row.speedup());
    o << buf;
  }
  return o.str();
}

}  // namespace engage::pipeline
