#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "engage/datamodel.hpp"

namespace engage::physio {

inline constexpr std::size_t kPhysioDim = 4;

struct BvpSignal {
  std::vector<double> samples;
  double fps = 0.0;
};

struct FilteredBvp {
  std::vector<double> samples;
  double fps = 0.0;
  double low_hz = 0.0;
  double high_hz = 0.0;
};

struct BeatSeries {
  std::vector<std::size_t> systolic_peak_indices;
  std::vector<std::size_t> trough_indices;
  std::vector<double> rr_intervals_s;
};

struct PhysioVideoFeatures {
  double ppi_avg_s = 0.0;
  double cs_sys = 0.0;
  double cs_dia = 0.0;
  double hr_trend_bpm = 0.0;

  std::array<double, kPhysioDim> as_array() const { return {ppi_avg_s, cs_sys, cs_dia, hr_trend_bpm}; }
  /// hr_trend within [30, 240] BPM.
  bool plausible() const { return hr_trend_bpm >= 30.0 && hr_trend_bpm <= 240.0; }
  friend bool operator==(const PhysioVideoFeatures&, const PhysioVideoFeatures&) = default;
};

const std::array<std::string_view, kPhysioDim>& physio_feature_names();

struct PhysioParams {
  double pos_window_s = 1.6;
  double detrend_window_s = 1.0;
  double band_low_hz = 0.7;
  double band_high_hz = 4.0;
  int filter_order = 2;
  double peak_prominence_sigma = 0.3;
  double max_bpm = 240.0;

  /// Throws ConfigError on non-positive or inconsistent values.
  void validate() const;
};

/// Plane-orthogonal-to-skin pulse extraction with sliding windows of
/// round(window_s * fps) samples, stride 1, overlap-added. Output length
/// equals input length. Throws DataError if the trace is shorter than one
/// window or a window has a zero channel mean.
BvpSignal extract_bvp(const RgbTrace& trace, double window_s = 1.6);

/// Subtracts a centred moving average of round(window_s * fps) samples,
/// shrinking the window at the edges. Needs at least 2 * fps samples.
BvpSignal detrend(const BvpSignal& bvp, double window_s = 1.0);

/// One second-order section, a0 normalised to 1.
struct Biquad {
  double b0, b1, b2, a1, a2;
};

/// Digital Butterworth band-pass of the given prototype order (bilinear
/// transform with pre-warping), as 'order' second-order sections with unit
/// gain at the geometric band centre.
std::vector<Biquad> design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs);

/// Cascaded forward pass with steady-state initial conditions scaled by x[0].
std::vector<double> sosfilt(std::span<const Biquad> sos, std::span<const double> x);

/// Zero-phase forward-backward filtering with odd-reflection edge padding.
std::vector<double> sosfiltfilt(std::span<const Biquad> sos, std::span<const double> x);

/// Zero-phase Butterworth band-pass. Throws DataError unless
/// 0 < low_hz < high_hz < fps / 2.
FilteredBvp bandpass(const BvpSignal& bvp, double low_hz, double high_hz, int order = 2);

/// Peak indices of local maxima having prominence >= min_prominence and
/// pairwise separation >= min_distance samples (taller peaks win).
std::vector<std::size_t> find_peaks(std::span<const double> x, double min_prominence,
                                    std::size_t min_distance);

/// Prominence of the peak at index `peak` (search bounded by higher samples
/// or the signal ends).
double peak_prominence(std::span<const double> x, std::size_t peak);

/// Systolic crests and diastolic troughs of a filtered pulse. Throws
/// DataError("insufficient beats") with fewer than 2 crests.
BeatSeries detect_beats(const FilteredBvp& f, double prominence_sigma = 0.3, double max_bpm = 240.0);

/// PPI average, summed crest/trough amplitudes and mean per-interval BPM.
PhysioVideoFeatures compute_physio_features(const BeatSeries& beats, const FilteredBvp& f);

/// Intermediate signals of the full chain, for debugging and reports.
struct PhysioAnalysis {
  BvpSignal bvp;
  BvpSignal detrended;
  FilteredBvp filtered;
  BeatSeries beats;
  PhysioVideoFeatures features;
};

PhysioAnalysis analyze_trace(const RgbTrace& trace, const PhysioParams& params);

PhysioVideoFeatures extract_physio_features(const RgbTrace& trace, const PhysioParams& params);

/// CSV with columns t_s,bvp,filtered,is_sys_peak,is_trough.
std::string physio_debug_csv(const PhysioAnalysis& a);

}  // namespace engage::physio
