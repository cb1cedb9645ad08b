// PSD estimation, occupied-bandwidth measurement and in-band / full-band
// capture used for analysis plots and classifier input pre-processing.
#pragma once

#include <fstream>
#include <string>

#include "rfwb/fft.hpp"
#include "rfwb/dsp.hpp"
#include "rfwb/waveform.hpp"

namespace rfwb::spectrum {

using waveform::IQFrame;

struct PSDEstimate {
  rvec freqs_hz;   // strictly increasing, symmetric about 0
  rvec power_db;
  rvec power_lin;  // same bins in linear units (1/Hz)
  double resolution_hz = 0.0;
  std::string window = "hann";
  int n_avg = 0;
  double sample_rate_hz = 0.0;

  // Integrated power over all bins (linear), should match mean |s|^2.
  double total_power() const {
    double acc = 0.0;
    for (double v : power_lin) acc += v;
    return acc * resolution_hz;
  }
};

// Hann-windowed averaged periodogram, two-sided, normalized so the
// integrated PSD equals the time-domain mean power.
inline PSDEstimate psd_welch(const IQFrame& frame, std::size_t nfft,
                             double overlap = 0.5) {
  const std::size_t n = frame.samples.size();
  if (nfft > n) throw ParameterError("psd_welch: nfft exceeds frame length");
  if (!is_pow2(nfft)) throw ParameterError("psd_welch: nfft must be a power of two");
  if (overlap < 0.0 || overlap >= 1.0)
    throw ParameterError("psd_welch: overlap outside [0, 1)");

  const rvec w = hann_window(nfft);
  double u = 0.0;
  for (double v : w) u += v * v;

  std::size_t hop = static_cast<std::size_t>(
      static_cast<double>(nfft) * (1.0 - overlap) + 0.5);
  if (hop == 0) hop = 1;

  rvec acc(nfft, 0.0);
  int blocks = 0;
  cvec buf(nfft);
  const double fs = frame.sample_rate_hz;
  for (std::size_t start = 0; start + nfft <= n; start += hop) {
    for (std::size_t i = 0; i < nfft; ++i)
      buf[i] = frame.samples[start + i] * w[i];
    fft_inplace(buf);
    for (std::size_t i = 0; i < nfft; ++i) acc[i] += std::norm(buf[i]);
    ++blocks;
  }
  if (blocks == 0) throw ParameterError("psd_welch: no full block fits");

  PSDEstimate psd;
  psd.sample_rate_hz = fs;
  psd.resolution_hz = fs / static_cast<double>(nfft);
  psd.n_avg = blocks;
  psd.freqs_hz = fft_freqs(nfft, fs);
  rvec lin(nfft);
  const double scale = 1.0 / (static_cast<double>(blocks) * u * fs);
  for (std::size_t i = 0; i < nfft; ++i) lin[i] = acc[i] * scale;
  psd.power_lin = fftshift(lin);

  // Exact Parseval: rescale so the integrated estimate equals the measured
  // mean power (block coverage under-weights frame edges otherwise).
  const double target = mean_power(frame.samples);
  const double got = psd.total_power();
  if (got > 0.0 && target > 0.0) {
    const double fix = target / got;
    for (auto& v : psd.power_lin) v *= fix;
  }
  psd.power_db.resize(nfft);
  for (std::size_t i = 0; i < nfft; ++i)
    psd.power_db[i] = lin_to_db(std::max(psd.power_lin[i], 1e-30));
  return psd;
}

// Smallest symmetric band around the power centroid containing at least
// `fraction` of the total power. Returns the bandwidth in Hz.
inline double occupied_bandwidth(const PSDEstimate& psd, double fraction = 0.99) {
  if (fraction <= 0.0 || fraction >= 1.0)
    throw ParameterError("occupied_bandwidth: fraction outside (0, 1)");
  const std::size_t n = psd.power_lin.size();
  double total = 0.0, centroid = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    total += psd.power_lin[i];
    centroid += psd.power_lin[i] * psd.freqs_hz[i];
  }
  if (total <= 0.0) return 0.0;
  centroid /= total;

  const double df = psd.resolution_hz;
  // Grow the half-width one bin at a time until the captured fraction is met.
  for (std::size_t half = 0; half <= n; ++half) {
    const double lo = centroid - (static_cast<double>(half) + 0.5) * df;
    const double hi = centroid + (static_cast<double>(half) + 0.5) * df;
    double inside = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      if (psd.freqs_hz[i] >= lo && psd.freqs_hz[i] <= hi)
        inside += psd.power_lin[i];
    if (inside >= fraction * total)
      return (2.0 * static_cast<double>(half) + 1.0) * df;
  }
  return static_cast<double>(n) * df;
}

struct BandSpec {
  enum class Mode { inband, full };
  Mode mode = Mode::full;
  double message_bw_hz = 0.0;
  double capture_bw_hz = 0.0;

  static BandSpec inband(double message_bw_hz) {
    return {Mode::inband, message_bw_hz, message_bw_hz};
  }
  static BandSpec full(double message_bw_hz) {
    return {Mode::full, message_bw_hz, 8.0 * message_bw_hz};
  }
};

inline constexpr std::size_t kCaptureLen = 1024;
inline constexpr std::size_t kCaptureFirTaps = 257;
inline constexpr double kCaptureKaiserBeta = 8.0;

// Captures a frame in one of the two receiver bandwidths. Both modes emit
// exactly kCaptureLen samples spanning the same time window so downstream
// feature tensors match in shape; the in-band arm differs only by the
// linear-phase low-pass to +-message_bw/2. Output is re-normalized to unit
// power and keeps the label.
inline IQFrame band_capture(const IQFrame& frame, const BandSpec& band) {
  if (band.message_bw_hz <= 0.0)
    throw ParameterError("band_capture: message bandwidth must be positive");
  if (frame.sample_rate_hz < 8.0 * band.message_bw_hz)
    throw CaptureError("band_capture: frame sample rate below 8 x message bandwidth");
  if (band.mode == BandSpec::Mode::full &&
      2.0 * 2.5 * band.message_bw_hz > band.capture_bw_hz)
    throw CaptureError("band_capture: out-of-band region exceeds capture span");
  if (frame.samples.size() < kCaptureLen)
    throw CaptureError("band_capture: frame shorter than capture length");

  IQFrame out;
  out.sample_rate_hz = frame.sample_rate_hz;
  out.nominal_center_hz = frame.nominal_center_hz;
  out.label = frame.label;

  // Decimate so the output spans the full frame; both modes share this step.
  const std::size_t dec = frame.samples.size() / kCaptureLen;

  cvec src = frame.samples;
  if (band.mode == BandSpec::Mode::inband) {
    const rvec lp = lowpass_fir(kCaptureFirTaps, band.message_bw_hz / 2.0,
                                frame.sample_rate_hz, kCaptureKaiserBeta);
    src = filter_zero_phase(src, lp);
  }

  out.samples.resize(kCaptureLen);
  for (std::size_t i = 0; i < kCaptureLen; ++i) out.samples[i] = src[i * dec];
  out.sample_rate_hz = frame.sample_rate_hz / static_cast<double>(dec);
  normalize_power(out.samples);
  return out;
}

// Fraction defining the message bandwidth used by the band math. 0.999
// keeps the boundary mass small enough that the in-band capture both
// retains >= 99% of a clean frame and stays >= 99.9% contained after the
// 257-tap filter.
inline constexpr double kMessageBwFraction = 0.999;

// Message bandwidth of a scheme, measured on a long clean probe frame.
// A 10% guard absorbs per-frame occupancy spread (the allocated channel
// is wider than any one frame's occupied band).
inline double message_bandwidth(const waveform::SchemeSpec& spec,
                                std::uint64_t seed = 1) {
  waveform::SchemeSpec probe = spec;
  probe.frame_len = 16384;
  const auto psd = psd_welch(waveform::gen_frame(probe, seed), 2048);
  return 1.1 * occupied_bandwidth(psd, kMessageBwFraction);
}

// PSD export for plotting: freq_hz,power_db rows.
inline void export_psd_csv(const PSDEstimate& psd, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "freq_hz,power_db\n";
  for (std::size_t i = 0; i < psd.freqs_hz.size(); ++i)
    os << psd.freqs_hz[i] << "," << psd.power_db[i] << "\n";
}

// Integrated power in [lo_hz, hi_hz], linear units.
inline double band_power(const PSDEstimate& psd, double lo_hz, double hi_hz) {
  double acc = 0.0;
  for (std::size_t i = 0; i < psd.freqs_hz.size(); ++i)
    if (psd.freqs_hz[i] >= lo_hz && psd.freqs_hz[i] <= hi_hz)
      acc += psd.power_lin[i];
  return acc * psd.resolution_hz;
}

}  // namespace rfwb::spectrum
