#include "engage/physio.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <numeric>

#include "engage/error.hpp"

namespace engage::physio {

namespace {

double mean_of(std::span<const double> v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stddev_of(std::span<const double> v) {
  const double m = mean_of(v);
  double acc = 0.0;
  for (double x : v) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(v.size()));
}

std::size_t samples_for(double seconds, double fps) {
  return static_cast<std::size_t>(std::lround(seconds * fps));
}

}  // namespace

const std::array<std::string_view, kPhysioDim>& physio_feature_names() {
  static const std::array<std::string_view, kPhysioDim> names{"ppi_avg_s", "cs_sys", "cs_dia",
                                                              "hr_trend_bpm"};
  return names;
}

void PhysioParams::validate() const {
  if (!(pos_window_s > 0.0)) throw ConfigError("pos_window_s must be positive");
  if (!(detrend_window_s > 0.0)) throw ConfigError("detrend_window_s must be positive");
  if (!(band_low_hz > 0.0 && band_low_hz < band_high_hz))
    throw ConfigError("band must satisfy 0 < band_low_hz < band_high_hz");
  if (filter_order < 1 || filter_order > 8) throw ConfigError("filter_order must be in [1, 8]");
  if (!(peak_prominence_sigma >= 0.0)) throw ConfigError("peak_prominence_sigma must be >= 0");
  if (!(max_bpm > 0.0)) throw ConfigError("max_bpm must be positive");
}

BvpSignal extract_bvp(const RgbTrace& trace, double window_s) {
  if (!(trace.fps > 0.0)) throw DataError("trace fps must be positive");
  const std::size_t n = trace.samples.size();
  const std::size_t len = std::max<std::size_t>(2, samples_for(window_s, trace.fps));
  if (n < len)
    throw DataError("trace of " + std::to_string(n) + " samples is shorter than one POS window (" +
                    std::to_string(len) + ")");

  BvpSignal out{std::vector<double>(n, 0.0), trace.fps};
  std::vector<double> s1(len), s2(len);
  for (std::size_t start = 0; start + len <= n; ++start) {
    double mr = 0.0, mg = 0.0, mb = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      const Rgb& c = trace.samples[start + k];
      mr += c.r;
      mg += c.g;
      mb += c.b;
    }
    mr /= static_cast<double>(len);
    mg /= static_cast<double>(len);
    mb /= static_cast<double>(len);
    if (mr == 0.0 || mg == 0.0 || mb == 0.0)
      throw DataError("zero channel mean in POS window starting at sample " + std::to_string(start));

    for (std::size_t k = 0; k < len; ++k) {
      const Rgb& c = trace.samples[start + k];
      const double r = c.r / mr, g = c.g / mg, b = c.b / mb;
      s1[k] = g - b;
      s2[k] = g + b - 2.0 * r;
    }
    const double sd1 = stddev_of(s1);
    const double sd2 = stddev_of(s2);
    const double alpha = sd2 > 1e-12 ? sd1 / sd2 : 0.0;
    double hmean = 0.0;
    for (std::size_t k = 0; k < len; ++k) {
      s1[k] += alpha * s2[k];
      hmean += s1[k];
    }
    hmean /= static_cast<double>(len);
    for (std::size_t k = 0; k < len; ++k) out.samples[start + k] += s1[k] - hmean;
  }
  return out;
}

BvpSignal detrend(const BvpSignal& bvp, double window_s) {
  const std::size_t n = bvp.samples.size();
  if (!(bvp.fps > 0.0) || static_cast<double>(n) < 2.0 * bvp.fps)
    throw DataError("signal of " + std::to_string(n) + " samples too short to detrend (need 2 s)");
  const std::size_t w = std::max<std::size_t>(1, samples_for(window_s, bvp.fps));
  const std::size_t before = (w - 1) / 2;
  const std::size_t after = w / 2;

  std::vector<double> prefix(n + 1, 0.0);
  for (std::size_t i = 0; i < n; ++i) prefix[i + 1] = prefix[i] + bvp.samples[i];

  BvpSignal out{std::vector<double>(n), bvp.fps};
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t lo = i >= before ? i - before : 0;
    const std::size_t hi = std::min(n - 1, i + after);
    const double avg = (prefix[hi + 1] - prefix[lo]) / static_cast<double>(hi - lo + 1);
    out.samples[i] = bvp.samples[i] - avg;
  }
  return out;
}

FilteredBvp bandpass(const BvpSignal& bvp, double low_hz, double high_hz, int order) {
  const auto sos = design_butterworth_bandpass(order, low_hz, high_hz, bvp.fps);
  return {sosfiltfilt(sos, bvp.samples), bvp.fps, low_hz, high_hz};
}

double peak_prominence(std::span<const double> x, std::size_t peak) {
  const double h = x[peak];
  double left_min = h;
  for (std::size_t j = peak + 1; j-- > 0;) {
    if (x[j] > h) break;
    left_min = std::min(left_min, x[j]);
  }
  double right_min = h;
  for (std::size_t j = peak; j < x.size(); ++j) {
    if (x[j] > h) break;
    right_min = std::min(right_min, x[j]);
  }
  return h - std::max(left_min, right_min);
}

std::vector<std::size_t> find_peaks(std::span<const double> x, double min_prominence,
                                    std::size_t min_distance) {
  // Local maxima; a flat top reports its (lower) middle sample.
  std::vector<std::size_t> peaks;
  const std::size_t n = x.size();
  std::size_t i = 1;
  while (n >= 3 && i + 1 < n) {
    if (x[i - 1] < x[i]) {
      std::size_t ahead = i + 1;
      while (ahead + 1 < n && x[ahead] == x[i]) ++ahead;
      if (x[ahead] < x[i]) {
        peaks.push_back((i + ahead - 1) / 2);
        i = ahead;
      }
    }
    ++i;
  }

  if (min_distance > 1 && peaks.size() > 1) {
    std::vector<std::size_t> order(peaks.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return x[peaks[a]] > x[peaks[b]]; });
    std::vector<bool> keep(peaks.size(), true);
    for (std::size_t idx : order) {
      if (!keep[idx]) continue;
      for (std::size_t j = idx; j-- > 0 && peaks[idx] - peaks[j] < min_distance;) keep[j] = false;
      for (std::size_t j = idx + 1; j < peaks.size() && peaks[j] - peaks[idx] < min_distance; ++j)
        keep[j] = false;
    }
    std::vector<std::size_t> kept;
    for (std::size_t k = 0; k < peaks.size(); ++k)
      if (keep[k]) kept.push_back(peaks[k]);
    peaks = std::move(kept);
  }

  std::vector<std::size_t> out;
  for (std::size_t p : peaks)
    if (peak_prominence(x, p) >= min_prominence) out.push_back(p);
  return out;
}

BeatSeries detect_beats(const FilteredBvp& f, double prominence_sigma, double max_bpm) {
  if (f.samples.empty()) throw DataError("insufficient beats: empty signal");
  const double sigma = stddev_of(f.samples);
  const double min_prom = prominence_sigma * sigma;
  const auto min_dist =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(f.fps * 60.0 / max_bpm)));

  BeatSeries beats;
  if (sigma > 0.0) {
    beats.systolic_peak_indices = find_peaks(f.samples, min_prom, min_dist);
    std::vector<double> neg(f.samples.size());
    std::transform(f.samples.begin(), f.samples.end(), neg.begin(), [](double v) { return -v; });
    beats.trough_indices = find_peaks(neg, min_prom, min_dist);
  }
  if (beats.systolic_peak_indices.size() < 2)
    throw DataError("insufficient beats: " + std::to_string(beats.systolic_peak_indices.size()) +
                    " systolic peak(s) found");
  for (std::size_t k = 1; k < beats.systolic_peak_indices.size(); ++k)
    beats.rr_intervals_s.push_back(
        static_cast<double>(beats.systolic_peak_indices[k] - beats.systolic_peak_indices[k - 1]) / f.fps);
  return beats;
}

PhysioVideoFeatures compute_physio_features(const BeatSeries& beats, const FilteredBvp& f) {
  if (beats.systolic_peak_indices.size() < 2 || beats.rr_intervals_s.empty())
    throw DataError("insufficient beats: need at least 2 systolic peaks");
  PhysioVideoFeatures out;
  double bpm_sum = 0.0;
  for (double rr : beats.rr_intervals_s) {
    out.ppi_avg_s += rr;
    bpm_sum += 60.0 / rr;
  }
  const double count = static_cast<double>(beats.rr_intervals_s.size());
  out.ppi_avg_s /= count;
  out.hr_trend_bpm = bpm_sum / count;
  for (std::size_t i : beats.systolic_peak_indices) out.cs_sys += f.samples[i];
  for (std::size_t i : beats.trough_indices) out.cs_dia += f.samples[i];
  return out;
}

PhysioAnalysis analyze_trace(const RgbTrace& trace, const PhysioParams& params) {
  PhysioAnalysis a;
  a.bvp = extract_bvp(trace, params.pos_window_s);
  a.detrended = detrend(a.bvp, params.detrend_window_s);
  a.filtered = bandpass(a.detrended, params.band_low_hz, params.band_high_hz, params.filter_order);
  a.beats = detect_beats(a.filtered, params.peak_prominence_sigma, params.max_bpm);
  a.features = compute_physio_features(a.beats, a.filtered);
  return a;
}

PhysioVideoFeatures extract_physio_features(const RgbTrace& trace, const PhysioParams& params) {
  return analyze_trace(trace, params).features;
}

std::string physio_debug_csv(const PhysioAnalysis& a) {
  std::string out = "t_s,bvp,filtered,is_sys_peak,is_trough\n";
  const std::size_t n = a.filtered.samples.size();
  std::vector<char> sys(n, 0), dia(n, 0);
  for (auto i : a.beats.systolic_peak_indices) sys[i] = 1;
  for (auto i : a.beats.trough_indices) dia[i] = 1;
  char buf[64];
  auto num = [&](double v) {
    auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
  };
  for (std::size_t i = 0; i < n; ++i) {
    out += num(static_cast<double>(i) / a.filtered.fps) + "," + num(a.bvp.samples[i]) + "," +
           num(a.filtered.samples[i]) + "," + (sys[i] ? "1" : "0") + "," + (dia[i] ? "1" : "0") + "\n";
  }
  return out;
}

}  // namespace engage::physio
