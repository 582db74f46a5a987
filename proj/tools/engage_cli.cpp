#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "engage/config.hpp"
#include "engage/error.hpp"
#include "engage/pipeline.hpp"
#include "engage/synthgen.hpp"

namespace {

namespace fs = std::filesystem;
using namespace engage;

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;
constexpr int kExitInternal = 3;

struct Globals {
  std::string config_path;
  std::size_t workers = 0;  // 0 keeps the config / environment value
};

PipelineConfig resolve_config(const Globals& g, const nlohmann::json* fallback = nullptr) {
  PipelineConfig cfg;
  if (!g.config_path.empty())
    cfg = load_config(g.config_path);
  else if (fallback != nullptr)
    cfg = config_from_json(*fallback);
  apply_env_overrides(cfg);
  if (g.workers > 0) cfg.workers = g.workers;
  cfg.validate();
  return cfg;
}

pipeline::Dataset load_dataset(const std::string& store_path) {
  const auto store = pipeline::load_feature_store(store_path);
  auto data = pipeline::to_dataset(store);
  if (data.size() == 0) throw DataError(store_path + " has no labelled rows with features");
  if (data.size() < store.rows.size())
    std::cerr << "note: using " << data.size() << " of " << store.rows.size()
              << " rows (failed or unlabelled rows skipped)\n";
  return data;
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::vector<std::size_t> parse_batches(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    std::size_t pos = 0;
    long long v = 0;
    try {
      v = std::stoll(item, &pos);
    } catch (const std::exception&) {
      pos = 0;
    }
    if (pos != item.size() || v <= 0) throw ConfigError("bad batch size '" + item + "'");
    out.push_back(static_cast<std::size_t>(v));
  }
  if (out.empty()) throw ConfigError("no batch sizes given");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multimodal engagement detection from facial landmarks and rPPG traces"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--config", g.config_path, "Pipeline config JSON (defaults apply to missing keys)");
  app.add_option("--workers", g.workers, "Worker threads (overrides config and ENGAGE_WORKERS)")
      ->check(CLI::PositiveNumber);

  std::string manifest, store_path, model_path, out_path, video_path, dump_path, spec_path, batches_arg;
  bool full = false;
  int k = 0;
  int ablate_folds = 0;

  auto* features = app.add_subcommand("features", "Extract per-video features from a manifest");
  features->add_option("manifest", manifest, "Manifest CSV (video_id,path,engagement)")->required();
  features->add_option("-o,--output", out_path, "Feature store CSV")->required();

  auto* train = app.add_subcommand("train", "Train the stacked late-fusion model");
  train->add_option("store", store_path, "Feature store CSV")->required();
  train->add_option("-o,--output", out_path, "Model JSON")->required();
  train->add_flag("--full", full, "Train on every row instead of the stratified train split");

  auto* eval = app.add_subcommand("eval", "Score a trained model on a feature store");
  eval->add_option("store", store_path, "Feature store CSV")->required();
  eval->add_option("model", model_path, "Model JSON")->required();

  auto* cv = app.add_subcommand("cv", "Stratified k-fold cross-validation");
  cv->add_option("store", store_path, "Feature store CSV")->required();
  cv->add_option("-k,--folds", k, "Folds (default: config cv_folds)")->check(CLI::Range(2, 1000));

  auto* ablate = app.add_subcommand("ablate", "Visual-only, physio-only, early and late fusion on one split");
  ablate->add_option("store", store_path, "Feature store CSV")->required();
  ablate->add_option("--cv", ablate_folds, "Use k-fold cross-validation instead of the split")
      ->check(CLI::Range(2, 1000));

  auto* bench = app.add_subcommand("bench", "Sequential vs parallel feature extraction timing");
  bench->add_option("manifest", manifest, "Manifest CSV")->required();
  bench->add_option("--batches", batches_arg, "Comma-separated batch sizes")->default_val("1,2,4,8,16,32,64");

  auto* report = app.add_subcommand("report", "Human-readable feature summary for one video");
  report->add_option("video", video_path, "Interchange JSON")->required();
  report->add_option("--model", model_path, "Model JSON for a prediction");
  report->add_option("--dump-physio", dump_path, "Write t_s,bvp,filtered,is_sys_peak,is_trough CSV");

  auto* synth = app.add_subcommand("synth", "Generate a labelled synthetic corpus");
  synth->add_option("spec", spec_path, "Synth spec JSON")->required();
  synth->add_option("-o,--output", out_path, "Output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*features) {
      const auto cfg = resolve_config(g);
      const auto store = pipeline::extract_features(manifest, cfg);
      pipeline::save_feature_store(store, out_path);
      const std::size_t ok = store.ok_count();
      for (const auto& r : store.rows)
        if (!r.ok()) std::cerr << "failed: " << r.video_id << ": " << r.error << "\n";
      std::cout << ok << " ok, " << store.rows.size() - ok << " failed -> " << out_path << "\n";
      if (store.rows.empty()) {
        std::cerr << "warning: manifest lists no videos\n";
        return kExitOk;
      }
      return ok == 0 ? kExitData : kExitOk;
    }

    if (*train) {
      const auto cfg = resolve_config(g);
      const auto data = load_dataset(store_path);
      if (full) {
        ensemble::save_model(pipeline::train_model(data, cfg), out_path);
        std::cout << "trained on " << data.size() << " rows -> " << out_path << "\n";
        return kExitOk;
      }
      const auto split = pipeline::split_train_eval(data.labels, cfg.split_ratio, cfg.seed);
      for (const auto& w : split.warnings) std::cerr << "warning: " << w << "\n";
      if (split.test.empty()) throw DataError("held-out split is empty; use --full");
      const auto model = pipeline::train_model(data.subset(split.train), cfg);
      ensemble::save_model(model, out_path);
      std::cout << "trained on " << split.train.size() << " rows, held out " << split.test.size() << " -> "
                << out_path << "\n"
                << pipeline::format_eval(pipeline::evaluate_model(model, data.subset(split.test)));
      return kExitOk;
    }

    if (*eval) {
      const auto model = ensemble::load_model(model_path);
      const auto data = load_dataset(store_path);
      std::cout << pipeline::format_eval(pipeline::evaluate_model(model, data));
      return kExitOk;
    }

    if (*cv) {
      const auto cfg = resolve_config(g);
      const auto data = load_dataset(store_path);
      std::cout << pipeline::format_eval(pipeline::cross_validate(data, k > 0 ? k : cfg.cv_folds, cfg));
      return kExitOk;
    }

    if (*ablate) {
      const auto cfg = resolve_config(g);
      const auto data = load_dataset(store_path);
      std::cout << pipeline::format_ablation(pipeline::ablate(data, cfg, ablate_folds));
      return kExitOk;
    }

    if (*bench) {
      const auto cfg = resolve_config(g);
      const auto entries = pipeline::load_manifest(manifest);
      const auto r = pipeline::bench_parallel(entries, fs::path(manifest).parent_path().string(),
                                              parse_batches(batches_arg), cfg, cfg.workers);
      std::cout << pipeline::format_bench(r);
      return kExitOk;
    }

    if (*report) {
      std::optional<ensemble::FusedModel> model;
      if (!model_path.empty()) model = ensemble::load_model(model_path);
      const auto cfg = resolve_config(g, model ? &model->config : nullptr);
      const auto rec = parse_video_record(read_text(video_path));
      std::cout << pipeline::report_video(rec, cfg, model ? &*model : nullptr);
      if (!dump_path.empty()) {
        std::ofstream out(dump_path);
        if (!out) throw DataError("cannot write " + dump_path);
        out << physio::physio_debug_csv(physio::analyze_trace(rec.trace, cfg.physio));
      }
      return kExitOk;
    }

    if (*synth) {
      const auto spec = synth::synth_spec_from_json([&] {
        try {
          return nlohmann::json::parse(read_text(spec_path));
        } catch (const nlohmann::json::parse_error& e) {
          throw ConfigError(spec_path + ": malformed JSON: " + e.what());
        }
      }());
      PipelineConfig cfg;
      apply_env_overrides(cfg);
      if (g.workers > 0) cfg.workers = g.workers;
      const auto corpus = synth::gen_labeled_corpus(spec, cfg.workers);
      synth::write_corpus(corpus, out_path);
      std::ofstream(fs::path(out_path) / "synth_spec.json") << synth::to_json(spec).dump(2) << "\n";
      std::cout << corpus.records.size() << " videos -> " << out_path << "\n";
      return kExitOk;
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitUsage;
}
