// Window functions, FIR design and convolution helpers shared by the
// waveform, spectrum and cyclo modules.
#pragma once

#include <algorithm>

#include "rfwb/common.hpp"

namespace rfwb {

inline rvec hann_window(std::size_t n) {
  rvec w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                static_cast<double>(n));
  return w;
}

inline rvec hamming_window(std::size_t n) {
  rvec w(n);
  for (std::size_t i = 0; i < n; ++i)
    w[i] = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(i) /
                                  static_cast<double>(n - 1));
  return w;
}

namespace detail {

// Modified Bessel I0 by series, adequate for Kaiser windows.
inline double bessel_i0(double x) {
  double sum = 1.0, term = 1.0;
  const double q = x * x / 4.0;
  for (int k = 1; k < 64; ++k) {
    term *= q / (static_cast<double>(k) * static_cast<double>(k));
    sum += term;
    if (term < 1e-18 * sum) break;
  }
  return sum;
}

}  // namespace detail

inline rvec kaiser_window(std::size_t n, double beta) {
  rvec w(n);
  const double denom = detail::bessel_i0(beta);
  const double m = static_cast<double>(n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double r = 2.0 * static_cast<double>(i) / m - 1.0;
    w[i] = detail::bessel_i0(beta * std::sqrt(std::max(0.0, 1.0 - r * r))) / denom;
  }
  return w;
}

// Odd-length linear-phase low-pass, cutoff = -6 dB edge in Hz.
inline rvec lowpass_fir(std::size_t taps, double cutoff_hz, double fs,
                        double kaiser_beta = 8.0) {
  if (taps % 2 == 0) throw ParameterError("lowpass_fir: taps must be odd");
  if (cutoff_hz <= 0.0 || cutoff_hz >= fs / 2.0)
    throw ParameterError("lowpass_fir: cutoff outside (0, fs/2)");
  rvec h(taps);
  const rvec w = kaiser_window(taps, kaiser_beta);
  const double fc = cutoff_hz / fs;  // normalized
  const int mid = static_cast<int>(taps) / 2;
  double dc = 0.0;
  for (std::size_t i = 0; i < taps; ++i) {
    const int k = static_cast<int>(i) - mid;
    const double s = (k == 0) ? 2.0 * fc
                              : std::sin(2.0 * kPi * fc * k) / (kPi * k);
    h[i] = s * w[i];
    dc += h[i];
  }
  for (auto& v : h) v /= dc;  // unity gain at DC
  return h;
}

// Root-raised-cosine taps, unit energy, length span*sps + 1.
inline rvec rrc_taps(int sps, double rolloff, int span_symbols) {
  if (rolloff < 0.0 || rolloff > 1.0)
    throw ParameterError("rrc_taps: rolloff outside [0, 1]");
  if (sps < 2) throw ParameterError("rrc_taps: sps must be >= 2");
  if (span_symbols <= 0 || span_symbols % 2 != 0)
    throw ParameterError("rrc_taps: span must be positive and even");

  const int n = span_symbols * sps + 1;
  rvec h(n);
  const double b = rolloff;
  for (int i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - span_symbols * sps / 2.0) / sps;
    const double den = 1.0 - 16.0 * b * b * t * t;
    if (std::abs(t) < 1e-12) {
      h[i] = 1.0 + b * (4.0 / kPi - 1.0);
    } else if (std::abs(den) < 1e-9) {
      const double a = kPi / (4.0 * b);
      h[i] = b / std::sqrt(2.0) *
             ((1.0 + 2.0 / kPi) * std::sin(a) + (1.0 - 2.0 / kPi) * std::cos(a));
    } else {
      h[i] = (std::sin(kPi * t * (1.0 - b)) +
              4.0 * b * t * std::cos(kPi * t * (1.0 + b))) /
             (kPi * t * den);
    }
  }
  double e = 0.0;
  for (double v : h) e += v * v;
  const double s = 1.0 / std::sqrt(e);
  for (auto& v : h) v *= s;
  return h;
}

// Gaussian pulse for GFSK, bt = 3 dB bandwidth x symbol time, truncated to
// span symbols and normalized to unit sum (preserves the phase ramp area).
inline rvec gaussian_pulse(int sps, double bt, int span_symbols) {
  if (bt <= 0.0) throw ParameterError("gaussian_pulse: bt must be positive");
  const int n = span_symbols * sps + 1;
  rvec h(n);
  const double delta = std::sqrt(std::log(2.0)) / (2.0 * kPi * bt);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = (static_cast<double>(i) - span_symbols * sps / 2.0) / sps;
    h[i] = std::exp(-t * t / (2.0 * delta * delta));
    sum += h[i];
  }
  for (auto& v : h) v /= sum;
  return h;
}

// Odd-length type-III Hilbert transformer (Hamming windowed).
inline rvec hilbert_fir(std::size_t taps) {
  if (taps % 2 == 0) throw ParameterError("hilbert_fir: taps must be odd");
  rvec h(taps, 0.0);
  const rvec w = hamming_window(taps);
  const int mid = static_cast<int>(taps) / 2;
  for (std::size_t i = 0; i < taps; ++i) {
    const int k = static_cast<int>(i) - mid;
    if (k % 2 != 0) h[i] = 2.0 / (kPi * k) * w[i];
  }
  return h;
}

// Full convolution, output length x.size() + h.size() - 1.
template <typename T>
inline std::vector<T> convolve_full(const std::vector<T>& x, const rvec& h) {
  std::vector<T> y(x.size() + h.size() - 1, T{});
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < h.size(); ++j) y[i + j] += x[i] * h[j];
  return y;
}

// Zero-phase FIR filtering for odd-length symmetric h: convolves with edge
// zero-padding and removes the group delay, so y.size() == x.size().
template <typename T>
inline std::vector<T> filter_zero_phase(const std::vector<T>& x, const rvec& h) {
  const std::size_t gd = h.size() / 2;
  std::vector<T> full = convolve_full(x, h);
  return std::vector<T>(full.begin() + static_cast<std::ptrdiff_t>(gd),
                        full.begin() + static_cast<std::ptrdiff_t>(gd + x.size()));
}

}  // namespace rfwb
