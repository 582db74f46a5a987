#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>

#include "engage/error.hpp"
#include "engage/synthgen.hpp"
#include "engage/visual.hpp"

using namespace engage;
using namespace engage::synth;

TEST_SUITE("synthgen") {
  TEST_CASE("blink frames are an exact right-inverse of EAR") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(0.0, 0.6);
    std::vector<double> targets(64);
    for (auto& t : targets) t = u(gen);
    const auto frames = gen_blink_frames([&](double t) { return targets[static_cast<std::size_t>(std::lround(t * 30.0))]; },
                                         targets.size());
    for (std::size_t i = 0; i < frames.size(); ++i) CHECK(std::abs(visual::compute_ear(frames[i]) - targets[i]) <= 1e-9);
    CHECK_THROWS_AS(gen_blink_frames([](double) { return 0.7; }, 3), ConfigError);
  }

  TEST_CASE("triangular blink walks through every eye category") {
    auto profile = [](double t) {
      const double d = std::abs(t - 0.5) / 0.5;  // 0 at the blink apex
      return 0.05 + (0.30 - 0.05) * std::min(1.0, d);
    };
    const auto frames = gen_blink_frames(profile, 31);
    std::vector<visual::EyeOpenness> seq;
    for (const auto& f : frames) {
      visual::VisualFrameFeatures feat;
      feat.ear = visual::compute_ear(f);
      const auto e = visual::categorize(feat, 640, 480, {}).eye_open;
      if (seq.empty() || seq.back() != e) seq.push_back(e);
    }
    using E = visual::EyeOpenness;
    CHECK(seq == std::vector<E>{E::kFullyOpen, E::kPartiallyClosed, E::kClosed, E::kPartiallyClosed, E::kFullyOpen});
  }

  TEST_CASE("pose frames reject out-of-range angles") {
    const auto cam = visual::CameraModel::for_image(640, 480);
    CHECK_THROWS_AS(gen_pose_frames({50.0, 0.0, 0.0}, cam, 1), ConfigError);
    const auto seq = gen_pose_frames({1.0, 2.0, 3.0}, cam, 4, 640, 480, 0.5, 9);
    CHECK(seq.frames.size() == 4);
    CHECK(seq.frames[3].frame_index == 3);
    CHECK(seq.truth.roll_deg == 3.0);
  }

  TEST_CASE("noise sigma produces the requested SNR") {
    const double sigma = noise_sigma_for_snr(14.0);
    const auto clean = gen_pulse_trace(72.0, 30.0, 60.0, 0.0, 0.0, 4);
    const auto noisy = gen_pulse_trace(72.0, 30.0, 60.0, sigma, 0.0, 4);
    double ps = 0.0, pn = 0.0, mean = 0.0;
    for (const auto& s : clean.samples) mean += s.g;
    mean /= static_cast<double>(clean.samples.size());
    for (std::size_t i = 0; i < clean.samples.size(); ++i) {
      ps += (clean.samples[i].g - mean) * (clean.samples[i].g - mean);
      const double n = noisy.samples[i].g - clean.samples[i].g;
      pn += n * n;
    }
    CHECK(10.0 * std::log10(ps / pn) == doctest::Approx(14.0).epsilon(0.05));
    CHECK_THROWS_AS(gen_pulse_trace(200.0, 30.0, 10.0), ConfigError);
  }

  TEST_CASE("corpus generation is a pure function of the spec") {
    SynthSpec spec;
    spec.n_videos = 6;
    spec.duration_s = 3.0;
    const auto a = gen_labeled_corpus(spec, 1);
    const auto b = gen_labeled_corpus(spec, 3);
    CHECK(a.records == b.records);
    for (std::size_t i = 0; i < a.truth.size(); ++i) {
      CHECK(a.truth[i].label == static_cast<int>(i % 4));
      CHECK(a.records[i].label->value() == a.truth[i].label);
      CHECK(a.records[i].frames.size() == 90);
    }
    spec.seed = 2;
    CHECK_FALSE(gen_labeled_corpus(spec, 1).records == a.records);
  }

  TEST_CASE("written corpus reloads bit-identically") {
    SynthSpec spec;
    spec.n_videos = 3;
    spec.duration_s = 2.0;
    const auto corpus = gen_labeled_corpus(spec);
    const auto dir = std::filesystem::temp_directory_path() / "engage_synth_roundtrip";
    std::filesystem::remove_all(dir);
    write_corpus(corpus, dir.string());
    CHECK(std::filesystem::exists(dir / "manifest.csv"));
    CHECK(std::filesystem::exists(dir / "ground_truth.csv"));
    for (const auto& rec : corpus.records) CHECK(load_video_record((dir / (rec.video_id + ".json")).string()) == rec);
    std::filesystem::remove_all(dir);
  }

  TEST_CASE("spec JSON") {
    const auto s = synth_spec_from_json({{"n_videos", 12}, {"modality_informativeness", "complementary"}});
    CHECK(s.n_videos == 12);
    CHECK(s.informativeness == Informativeness::kComplementary);
    const auto back = synth_spec_from_json(to_json(s));
    CHECK(to_json(back) == to_json(s));
    CHECK_THROWS_AS(synth_spec_from_json({{"modality_informativeness", "audio"}}), ConfigError);
    CHECK_THROWS_AS(synth_spec_from_json({{"n_videos", 0}}), ConfigError);
    CHECK_THROWS_AS(synth_spec_from_json({{"classes", {{{"bpm", {20, 30}}}, {}, {}, {}}}}), ConfigError);
  }

  TEST_CASE("informativeness shapes the class profiles") {
    SynthSpec s;
    s.informativeness = Informativeness::kNone;
    s.apply_default_profiles();
    for (int c = 1; c < 4; ++c) {
      CHECK(s.classes[c].bpm == s.classes[0].bpm);
      CHECK(s.classes[c].attentive == s.classes[0].attentive);
    }
    s.informativeness = Informativeness::kComplementary;
    s.apply_default_profiles();
    CHECK(s.classes[0].bpm == s.classes[1].bpm);
    CHECK(s.classes[2].attentive == s.classes[3].attentive);
    CHECK(s.classes[2].bpm[1] < s.classes[3].bpm[0]);
    CHECK(s.classes[0].attentive[1] < s.classes[1].attentive[0]);
  }
}
