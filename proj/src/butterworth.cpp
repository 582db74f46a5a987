#include <algorithm>
#include <cmath>
#include <complex>
#include <numbers>

#include "engage/error.hpp"
#include "engage/physio.hpp"

namespace engage::physio {

namespace {

using cplx = std::complex<double>;

cplx bilinear(cplx s) { return (1.0 + s) / (1.0 - s); }

// Section with zeros at z = +1 and z = -1 and the two given digital poles.
Biquad section_from_poles(cplx z1, cplx z2) {
  const cplx sum = z1 + z2;
  const cplx prod = z1 * z2;
  return {1.0, 0.0, -1.0, -sum.real(), prod.real()};
}

cplx response(const Biquad& s, cplx z) {
  const cplx zi = 1.0 / z;
  return (s.b0 + s.b1 * zi + s.b2 * zi * zi) / (1.0 + s.a1 * zi + s.a2 * zi * zi);
}

// Steady-state DF2T state for a unit-step input.
std::array<double, 2> step_state(const Biquad& s, double gain) {
  const double z2 = s.b2 - s.a2 * gain;
  const double z1 = gain - s.b0;
  return {z1, z2};
}

}  // namespace

std::vector<Biquad> design_butterworth_bandpass(int order, double low_hz, double high_hz, double fs) {
  if (order < 1 || order > 8) throw ConfigError("band-pass order must be in [1, 8]");
  if (!(low_hz > 0.0 && low_hz < high_hz && high_hz < fs / 2.0))
    throw DataError("invalid band [" + std::to_string(low_hz) + ", " + std::to_string(high_hz) +
                    "] Hz for sampling rate " + std::to_string(fs) + " Hz");

  // Pre-warped analog band edges for the bilinear map s = (z - 1) / (z + 1).
  const double w_lo = std::tan(std::numbers::pi * low_hz / fs);
  const double w_hi = std::tan(std::numbers::pi * high_hz / fs);
  const double bw = w_hi - w_lo;
  const double w0_sq = w_lo * w_hi;

  // Each low-pass prototype pole p maps to the roots of s^2 - p*bw*s + w0^2.
  auto bp_roots = [&](cplx p) {
    const cplx disc = std::sqrt(p * p * bw * bw - 4.0 * w0_sq);
    return std::pair<cplx, cplx>{(p * bw + disc) / 2.0, (p * bw - disc) / 2.0};
  };

  std::vector<Biquad> sos;
  for (int k = 0; k < order / 2; ++k) {
    const double angle = std::numbers::pi / 2.0 + std::numbers::pi * (2.0 * k + 1.0) / (2.0 * order);
    const cplx p = std::polar(1.0, angle);
    const auto [q1, q2] = bp_roots(p);
    const cplx z1 = bilinear(q1);
    const cplx z2 = bilinear(q2);
    sos.push_back(section_from_poles(z1, std::conj(z1)));
    sos.push_back(section_from_poles(z2, std::conj(z2)));
  }
  if (order % 2 == 1) {
    const auto [q1, q2] = bp_roots(cplx(-1.0, 0.0));
    sos.push_back(section_from_poles(bilinear(q1), bilinear(q2)));
  }

  // Unit gain at the digital image of the analog centre frequency.
  const double wc = 2.0 * std::atan(std::sqrt(w0_sq));
  const cplx zc = std::polar(1.0, wc);
  cplx h = 1.0;
  for (const auto& s : sos) h *= response(s, zc);
  const double g = 1.0 / std::abs(h);
  const double per_section = std::pow(g, 1.0 / static_cast<double>(sos.size()));
  for (auto& s : sos) {
    s.b0 *= per_section;
    s.b1 *= per_section;
    s.b2 *= per_section;
  }
  return sos;
}

std::vector<double> sosfilt(std::span<const Biquad> sos, std::span<const double> x) {
  std::vector<double> y(x.begin(), x.end());
  if (y.empty()) return y;
  double level = x[0];
  for (const auto& s : sos) {
    const double dc_gain = (s.b0 + s.b1 + s.b2) / (1.0 + s.a1 + s.a2);
    auto [z1, z2] = step_state(s, dc_gain);
    z1 *= level;
    z2 *= level;
    for (double& v : y) {
      const double in = v;
      const double out = s.b0 * in + z1;
      z1 = s.b1 * in - s.a1 * out + z2;
      z2 = s.b2 * in - s.a2 * out;
      v = out;
    }
    level *= dc_gain;
  }
  return y;
}

std::vector<double> sosfiltfilt(std::span<const Biquad> sos, std::span<const double> x) {
  const std::size_t n = x.size();
  if (n == 0) return {};
  const std::size_t pad = std::min<std::size_t>(3 * (2 * sos.size() + 1), n - 1);

  std::vector<double> ext;
  ext.reserve(n + 2 * pad);
  for (std::size_t i = pad; i >= 1; --i) ext.push_back(2.0 * x[0] - x[i]);
  ext.insert(ext.end(), x.begin(), x.end());
  for (std::size_t i = 1; i <= pad; ++i) ext.push_back(2.0 * x[n - 1] - x[n - 1 - i]);

  std::vector<double> fwd = sosfilt(sos, ext);
  std::reverse(fwd.begin(), fwd.end());
  std::vector<double> bwd = sosfilt(sos, fwd);
  std::reverse(bwd.begin(), bwd.end());
  return {bwd.begin() + static_cast<std::ptrdiff_t>(pad),
          bwd.begin() + static_cast<std::ptrdiff_t>(pad + n)};
}

}  // namespace engage::physio
