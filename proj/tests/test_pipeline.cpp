#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "engage/config.hpp"
#include "engage/error.hpp"
#include "engage/pipeline.hpp"
#include "engage/synthgen.hpp"

using namespace engage;
using namespace engage::pipeline;
namespace fs = std::filesystem;

namespace {

PipelineConfig fast_config() {
  PipelineConfig cfg;
  cfg.ensemble.adaboost_rounds = 20;
  cfg.ensemble.forest.n_trees = 30;
  cfg.ensemble.meta.epochs = 200;
  return cfg;
}

synth::Corpus small_corpus(std::size_t n, synth::Informativeness m = synth::Informativeness::kBoth,
                           std::uint64_t seed = 1) {
  synth::SynthSpec spec;
  spec.n_videos = n;
  spec.duration_s = 6.0;
  spec.informativeness = m;
  spec.seed = seed;
  spec.apply_default_profiles();
  return synth::gen_labeled_corpus(spec);
}

struct TempDir {
  fs::path path;
  explicit TempDir(const char* name) : path(fs::temp_directory_path() / name) {
    fs::remove_all(path);
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

VideoRecord frontal_record(double bpm, double seconds) {
  const auto cam = visual::CameraModel::for_image(640, 480);
  VideoRecord rec;
  rec.video_id = "frontal";
  rec.fps = 30.0;
  rec.width = 640;
  rec.height = 480;
  const auto n = static_cast<std::size_t>(seconds * 30.0);
  rec.frames = synth::gen_pose_frames({}, cam, n).frames;
  rec.trace = synth::gen_pulse_trace(bpm, 30.0, seconds);
  return rec;
}

}  // namespace

TEST_SUITE("pipeline") {
  TEST_CASE("config defaults, round trip and unknown keys") {
    const auto cfg = config_from_json(nlohmann::json::object());
    CHECK(cfg.visual.ear_closed_max == 0.15);
    CHECK(cfg.ensemble.forest.n_trees == 200);
    CHECK(to_json(config_from_json(to_json(cfg))) == to_json(cfg));
    CHECK_THROWS_AS(config_from_json({{"physio", {{"band_lo_hz", 0.5}}}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"workers", 0}}), ConfigError);
    CHECK_THROWS_AS(config_from_json({{"visual", {{"ear_partial_max", 0.1}}}}), ConfigError);
    const auto cam = config_from_json({{"visual", {{"focal_length_px", 700.0}, {"principal_point", {300, 200}}}}});
    CHECK(cam.camera.resolve(640, 480).focal_length == 700.0);
    CHECK(cam.camera.resolve(640, 480).cy == 200.0);
  }

  TEST_CASE("worker count environment override") {
    PipelineConfig cfg;
    setenv(kWorkersEnvVar, "6", 1);
    apply_env_overrides(cfg);
    CHECK(cfg.workers == 6);
    setenv(kWorkersEnvVar, "six", 1);
    CHECK_THROWS_AS(apply_env_overrides(cfg), ConfigError);
    unsetenv(kWorkersEnvVar);
  }

  TEST_CASE("feature store round trip is exact, error rows included") {
    const auto corpus = small_corpus(4);
    auto store = extract_features(corpus.records, fast_config(), 1);
    store.rows[1] = FeatureRow{store.rows[1].video_id, {}, {}, store.rows[1].label, "bad \"thing\", really"};
    const auto back = parse_feature_store(serialize_feature_store(store));
    CHECK(back == store);
    CHECK(back.ok_count() == 3);
    CHECK_THROWS_AS(parse_feature_store("video_id,x\n"), DataError);
  }

  TEST_CASE("parallel extraction is identical to sequential") {
    const auto corpus = small_corpus(16);
    const auto cfg = fast_config();
    const auto seq = extract_features(corpus.records, cfg, 1);
    for (std::size_t w : {2, 4, 8}) CHECK(extract_features(corpus.records, cfg, w) == seq);
    CHECK(serialize_feature_store(extract_features(corpus.records, cfg, 8)) == serialize_feature_store(seq));
  }

  TEST_CASE("manifest extraction isolates a corrupt file") {
    TempDir dir("engage_pipeline_corrupt");
    synth::write_corpus(small_corpus(8), dir.path.string());
    std::ofstream(dir.path / "synth_00005.json") << "{\"video_id\": \"synth_00005\", \"fps\": ";
    PipelineConfig cfg = fast_config();
    cfg.workers = 3;
    const auto store = extract_features((dir.path / "manifest.csv").string(), cfg);
    CHECK(store.rows.size() == 8);
    CHECK(store.ok_count() == 7);
    CHECK_FALSE(store.rows[5].ok());
    CHECK(store.rows[5].label.has_value());
    CHECK(to_dataset(store).size() == 7);
  }

  TEST_CASE("empty and duplicate manifests") {
    CHECK(extract_features(std::vector<ManifestEntry>{}, ".", fast_config(), 2).rows.empty());
    std::vector<ManifestEntry> dup{{"a", "a.json", std::nullopt}, {"a", "b.json", std::nullopt}};
    CHECK_THROWS_AS(extract_features(dup, ".", fast_config(), 1), DataError);
  }

  TEST_CASE("stratified 80/20 split") {
    ensemble::Labels y;
    for (int i = 0; i < 100; ++i) y.push_back(i % 4);
    const auto s = split_train_eval(y, 0.8, 1);
    CHECK(s.train.size() == 80);
    CHECK(s.test.size() == 20);
    for (int c = 0; c < 4; ++c) {
      int n = 0;
      for (auto i : s.train) n += y[i] == c;
      CHECK(n == 20);
    }
    CHECK(split_train_eval(y, 0.8, 1).train == s.train);
    const auto other = split_train_eval(y, 0.8, 2);
    CHECK(other.train != s.train);
    CHECK(other.train.size() == s.train.size());
    CHECK(split_train_eval(ensemble::Labels{0, 0, 1, 2, 2}, 0.8, 1).warnings.size() == 1);
  }

  TEST_CASE("evaluate") {
    const std::vector<int> truth{0, 1, 2, 3, 0, 1, 2, 3, 3};
    const auto perfect = evaluate(truth, truth);
    CHECK(perfect.accuracy == 1.0);
    CHECK(perfect.confusion[3][3] == 3);
    CHECK(perfect.precision[2] == 1.0);
    std::vector<int> shifted;
    for (int t : truth) shifted.push_back((t + 1) % 4);
    const auto bad = evaluate(shifted, truth);
    CHECK(bad.accuracy == 0.0);
    for (int c = 0; c < 4; ++c) {
      CHECK(bad.confusion[c][c] == 0);
      int row = 0;
      for (int k = 0; k < 4; ++k) row += bad.confusion[c][k];
      CHECK(row == std::count(truth.begin(), truth.end(), c));
    }
    CHECK_THROWS_AS(evaluate({0, 1}, {0}), DataError);
  }

  TEST_CASE("cross-validation, ablation and model evaluation on a small corpus") {
    const auto store = extract_features(small_corpus(40).records, fast_config(), 2);
    const auto data = to_dataset(store);
    REQUIRE(data.size() == 40);
    const auto cv = cross_validate(data, 4, fast_config());
    CHECK(cv.fold_accuracy.size() == 4);
    int total = 0;
    for (const auto& row : cv.confusion)
      for (int v : row) total += v;
    CHECK(total == 40);
    CHECK(cv.mean_fold_accuracy() > 0.5);
    CHECK_THROWS_AS(cross_validate(data.subset(std::vector<std::size_t>{0, 1}), 4, fast_config()), DataError);

    const auto ab = ablate(data, fast_config());
    CHECK(ab.size() == 4);
    CHECK(format_ablation(ab).find("late fusion") != std::string::npos);

    const auto model = train_model(data, fast_config());
    CHECK(model.config["seed"] == fast_config().seed);
    CHECK(evaluate_model(model, data).accuracy > 0.5);
  }

  TEST_CASE("bench verifies equivalence and reports positive times") {
    TempDir dir("engage_pipeline_bench");
    synth::write_corpus(small_corpus(4), dir.path.string());
    const auto entries = load_manifest((dir.path / "manifest.csv").string());
    const auto r = bench_parallel(entries, dir.path.string(), {1, 4}, fast_config(), 2);
    REQUIRE(r.rows.size() == 2);
    for (const auto& row : r.rows) {
      CHECK(row.sequential_s > 0.0);
      CHECK(row.parallel_s > 0.0);
    }
    CHECK_THROWS_AS(bench_parallel(entries, dir.path.string(), {8}, fast_config(), 2), DataError);
  }

  TEST_CASE("report on a frontal 72 BPM face") {
    const auto rec = frontal_record(72.0, 10.0);
    const auto text = report_video(rec, {});
    CHECK(text.find("EC (eye category):     fully_open") != std::string::npos);
    CHECK(text.find("HP (head position):    neutral") != std::string::npos);
    CHECK(text.find("GD (gaze direction):   forward") != std::string::npos);
    CHECK(text.find("HR (heart rate):       72.") != std::string::npos);
    CHECK(report_video(rec, {}) == text);
  }

  TEST_CASE("report marks physio unavailable on a too-short record") {
    const auto text = report_video(frontal_record(72.0, 1.0), {});
    CHECK(text.find("HR (heart rate):       unavailable") != std::string::npos);
  }

  TEST_CASE("informative corpora: cross-validation and ablation ordering") {
    PipelineConfig cfg;
    cfg.workers = 2;
    synth::SynthSpec spec;
    spec.n_videos = 200;
    spec.informativeness = synth::Informativeness::kBoth;
    spec.apply_default_profiles();
    const auto both = to_dataset(extract_features(synth::gen_labeled_corpus(spec).records, cfg, 2));
    REQUIRE(both.size() == 200);
    CHECK(cross_validate(both, 10, cfg).mean_fold_accuracy() >= 0.95);

    spec.informativeness = synth::Informativeness::kVisual;
    spec.apply_default_profiles();
    const auto vis = to_dataset(extract_features(synth::gen_labeled_corpus(spec).records, cfg, 2));
    const auto ab = ablate(vis, cfg);
    CHECK(ab[0].accuracy >= ab[1].accuracy);
  }
}
