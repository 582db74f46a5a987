#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>
#include <numeric>
#include <random>

#include "engage/error.hpp"
#include "engage/physio.hpp"
#include "engage/synthgen.hpp"

using namespace engage;
using namespace engage::physio;

namespace {

constexpr double kPi = std::numbers::pi;

std::complex<double> response(const std::vector<Biquad>& sos, double f, double fs) {
  const std::complex<double> z1 = std::polar(1.0, -2.0 * kPi * f / fs);
  const std::complex<double> z2 = z1 * z1;
  std::complex<double> h = 1.0;
  for (const auto& s : sos) h *= (s.b0 + s.b1 * z1 + s.b2 * z2) / (1.0 + s.a1 * z1 + s.a2 * z2);
  return h;
}

// Butterworth band-pass magnitude after the bilinear map: 1 / (1 + x^(2N)).
double analytic_gain2(int order, double lo, double hi, double f, double fs) {
  const double wl = std::tan(kPi * lo / fs), wh = std::tan(kPi * hi / fs), w = std::tan(kPi * f / fs);
  const double x = (w * w - wl * wh) / (w * (wh - wl));
  return 1.0 / (1.0 + std::pow(x, 2.0 * order));
}

// Frequency of the largest naive-DFT bin in (0.5, 5) Hz.
double dominant_hz(const std::vector<double>& x, double fs) {
  const std::size_t n = x.size();
  double best_f = 0.0, best_p = -1.0;
  for (double f = 0.5; f < 5.0; f += 0.005) {
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * std::polar(1.0, -2.0 * kPi * f * static_cast<double>(i) / fs);
    if (std::norm(acc) > best_p) {
      best_p = std::norm(acc);
      best_f = f;
    }
  }
  return best_f;
}

std::vector<double> tone(double f, double fs, std::size_t n, double amp = 1.0) {
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * kPi * f * static_cast<double>(i) / fs);
  return x;
}

double rms(std::span<const double> x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return std::sqrt(s / static_cast<double>(x.size()));
}

}  // namespace

TEST_SUITE("physio") {
  TEST_CASE("band-pass design matches the analytic Butterworth magnitude") {
    for (int order : {1, 2, 3}) {
      const auto sos = design_butterworth_bandpass(order, 0.7, 4.0, 30.0);
      CHECK(sos.size() == static_cast<std::size_t>(order));
      for (double f : {0.1, 0.5, 0.7, 1.0, 1.5, 2.5, 4.0, 6.0, 8.0, 12.0}) {
        const double got = std::norm(response(sos, f, 30.0));
        CHECK(got == doctest::Approx(analytic_gain2(order, 0.7, 4.0, f, 30.0)).epsilon(1e-9));
      }
    }
  }

  TEST_CASE("band edges sit at -3 dB") {
    const auto sos = design_butterworth_bandpass(2, 0.7, 4.0, 30.0);
    CHECK(std::norm(response(sos, 0.7, 30.0)) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(std::norm(response(sos, 4.0, 30.0)) == doctest::Approx(0.5).epsilon(1e-9));
  }

  TEST_CASE("zero-phase filtering keeps an in-band tone aligned") {
    const auto x = tone(1.5, 30.0, 600);
    const auto sos = design_butterworth_bandpass(2, 0.7, 4.0, 30.0);
    const auto y = sosfiltfilt(sos, x);
    REQUIRE(y.size() == x.size());
    const double expect_gain = analytic_gain2(2, 0.7, 4.0, 1.5, 30.0);  // |H|^2 after two passes
    for (std::size_t i = 150; i < 450; ++i) CHECK(y[i] == doctest::Approx(expect_gain * x[i]).epsilon(0.02).scale(1.0));
  }

  TEST_CASE("sosfilt steady state: constant input through a band-pass decays to zero") {
    const auto sos = design_butterworth_bandpass(2, 0.7, 4.0, 30.0);
    const std::vector<double> x(300, 5.0);
    const auto y = sosfilt(sos, x);
    for (double v : y) CHECK(std::abs(v) < 1e-9);
  }

  TEST_CASE("invalid band rejected") {
    BvpSignal s{std::vector<double>(300, 0.0), 30.0};
    CHECK_THROWS_AS(bandpass(s, 4.0, 0.7), DataError);
    CHECK_THROWS_AS(bandpass(s, 0.7, 15.0), DataError);
    CHECK_THROWS_AS(bandpass(s, 0.0, 4.0), DataError);
  }

  TEST_CASE("detrend subtracts a centred, edge-clipped moving average") {
    BvpSignal s{{}, 4.0};
    for (int i = 0; i < 10; ++i) s.samples.push_back(i * i);
    const auto d = detrend(s, 1.0);  // window 4: [i-1, i+2]
    REQUIRE(d.samples.size() == 10);
    auto mean = [&](int lo, int hi) {
      double acc = 0.0;
      for (int k = lo; k <= hi; ++k) acc += k * k;
      return acc / (hi - lo + 1);
    };
    CHECK(d.samples[0] == doctest::Approx(0.0 - mean(0, 2)));
    CHECK(d.samples[5] == doctest::Approx(25.0 - mean(4, 7)));
    CHECK(d.samples[9] == doctest::Approx(81.0 - mean(8, 9)));
    BvpSignal short_sig{std::vector<double>(7, 0.0), 4.0};
    CHECK_THROWS_AS(detrend(short_sig, 1.0), DataError);
  }

  TEST_CASE("POS keeps length and recovers the pulse frequency") {
    const auto trace = synth::gen_pulse_trace(72.0, 30.0, 10.0);
    const auto bvp = extract_bvp(trace);
    CHECK(bvp.samples.size() == trace.samples.size());
    CHECK(dominant_hz(bvp.samples, 30.0) == doctest::Approx(1.2).epsilon(0.01));
  }

  TEST_CASE("POS names the window with a zero channel mean") {
    auto trace = synth::gen_pulse_trace(72.0, 30.0, 10.0);
    for (std::size_t i = 100; i < 160; ++i) trace.samples[i].b = 0.0;
    try {
      extract_bvp(trace);
      FAIL("expected DataError");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("window") != std::string::npos);
    }
    RgbTrace tiny{30.0, std::vector<Rgb>(10, Rgb{1, 1, 1})};
    CHECK_THROWS_AS(extract_bvp(tiny), DataError);
  }

  TEST_CASE("find_peaks: plateaus, distance and prominence") {
    const std::vector<double> x{0, 1, 3, 3, 3, 1, 0, 2, 0, 5, 0};
    const auto p = find_peaks(x, 0.0, 1);
    CHECK(p == std::vector<std::size_t>{3, 7, 9});
    CHECK(find_peaks(x, 2.5, 1) == std::vector<std::size_t>{3, 9});
    CHECK(find_peaks(x, 0.0, 4) == std::vector<std::size_t>{3, 9});
    CHECK(peak_prominence(x, 7) == doctest::Approx(2.0));
    CHECK(peak_prominence(x, 9) == doctest::Approx(5.0));
  }

  TEST_CASE("physio features from a hand-made beat series") {
    FilteredBvp f{{0, 1, 0, -1, 0, 2, 0, -2, 0, 1}, 2.0, 0.7, 0.9};
    BeatSeries b;
    b.systolic_peak_indices = {1, 5, 9};
    b.trough_indices = {3, 7};
    b.rr_intervals_s = {2.0, 2.0};
    const auto feat = compute_physio_features(b, f);
    CHECK(feat.ppi_avg_s == doctest::Approx(2.0));
    CHECK(feat.hr_trend_bpm == doctest::Approx(30.0));
    CHECK(feat.cs_sys == doctest::Approx(4.0));
    CHECK(feat.cs_dia == doctest::Approx(-3.0));
  }

  TEST_CASE("clean 72 BPM trace through the whole chain") {
    const auto trace = synth::gen_pulse_trace(72.0, 30.0, 10.0);
    const auto a = analyze_trace(trace, {});
    CHECK(a.features.hr_trend_bpm == doctest::Approx(72.0).epsilon(1.0 / 72.0));
    CHECK(a.features.ppi_avg_s == doctest::Approx(60.0 / 72.0).epsilon(0.04 / 0.833));
    CHECK(a.features.plausible());
    for (std::size_t i = 1; i < a.beats.systolic_peak_indices.size(); ++i)
      CHECK(a.beats.systolic_peak_indices[i] - a.beats.systolic_peak_indices[i - 1] >= 8);
    const auto csv = physio_debug_csv(a);
    CHECK(csv.rfind("t_s,bvp,filtered,is_sys_peak,is_trough\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 301);
  }

  TEST_CASE("a pulseless trace yields no beats") {
    const auto flat = synth::gen_pulse_trace(72.0, 30.0, 10.0, 0.0, 0.0, 0, 0.0);
    CHECK_THROWS_WITH_AS(extract_physio_features(flat, {}), doctest::Contains("insufficient beats"), DataError);
  }

  TEST_CASE("parameter validation") {
    PhysioParams p;
    p.band_low_hz = 5.0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
    p = {};
    p.filter_order = 0;
    CHECK_THROWS_AS(p.validate(), ConfigError);
  }
}
