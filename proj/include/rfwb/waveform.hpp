// Labeled baseband frame synthesis for the eleven modulation schemes:
// BPSK, QPSK, 8PSK, 16QAM, 64QAM, PAM4, GFSK, CPFSK, B-FM, DSB-AM, SSB-AM.
#pragma once

#include <limits>
#include <string>

#include "rfwb/dsp.hpp"
#include "rfwb/rng.hpp"

namespace rfwb::waveform {

enum class Scheme {
  bpsk,
  qpsk,
  psk8,
  qam16,
  qam64,
  pam4,
  gfsk,
  cpfsk,
  bfm,
  dsbam,
  ssbam,
};

inline constexpr int kSchemeCount = 11;

inline const char* scheme_name(Scheme s) {
  switch (s) {
    case Scheme::bpsk: return "BPSK";
    case Scheme::qpsk: return "QPSK";
    case Scheme::psk8: return "8PSK";
    case Scheme::qam16: return "16QAM";
    case Scheme::qam64: return "64QAM";
    case Scheme::pam4: return "PAM4";
    case Scheme::gfsk: return "GFSK";
    case Scheme::cpfsk: return "CPFSK";
    case Scheme::bfm: return "B-FM";
    case Scheme::dsbam: return "DSB-AM";
    case Scheme::ssbam: return "SSB-AM";
  }
  return "?";
}

inline Scheme scheme_from_name(const std::string& name) {
  for (int i = 0; i < kSchemeCount; ++i) {
    const Scheme s = static_cast<Scheme>(i);
    if (name == scheme_name(s)) return s;
  }
  throw ParameterError("unknown scheme: " + name);
}

inline bool is_digital(Scheme s) {
  return s != Scheme::bfm && s != Scheme::dsbam && s != Scheme::ssbam;
}

// Linearly modulated schemes take the RRC path; GFSK/CPFSK are CPM.
inline bool is_linear_digital(Scheme s) {
  return is_digital(s) && s != Scheme::gfsk && s != Scheme::cpfsk;
}

inline bool is_constant_envelope(Scheme s) {
  return s == Scheme::gfsk || s == Scheme::cpfsk || s == Scheme::bfm;
}

// FM frequency deviation as a multiple of the audio bandwidth.
inline constexpr double kBfmDeviationRatio = 2.0;

struct SchemeSpec {
  Scheme scheme = Scheme::bpsk;
  int samples_per_symbol = 8;
  double rolloff = 0.35;
  int rrc_span_symbols = 12;  // truncation lands on a near-zero of the tail
  double modulation_index = 0.5;   // CPFSK / GFSK
  double gaussian_bt = 0.35;       // GFSK
  double audio_bandwidth_hz = 0.0; // analog schemes; 0 = 0.03 * sample rate
  int frame_len = 1024;
  double sample_rate_hz = 1.0e6;

  double symbol_rate_hz() const { return sample_rate_hz / samples_per_symbol; }

  double audio_bw() const {
    return audio_bandwidth_hz > 0.0 ? audio_bandwidth_hz
                                    : 0.03 * sample_rate_hz;
  }

  void validate() const {
    if (frame_len <= 0) throw ParameterError("spec: frame_len must be > 0");
    if (samples_per_symbol < 2)
      throw ParameterError("spec: samples_per_symbol must be >= 2");
    if (rolloff < 0.0 || rolloff > 1.0)
      throw ParameterError("spec: rolloff outside [0, 1]");
    if (sample_rate_hz <= 0.0)
      throw ParameterError("spec: sample_rate_hz must be > 0");
  }
};

struct FrameLabel {
  std::string scheme;
  std::string device_id;
  double snr_db = std::numeric_limits<double>::infinity();
  std::string channel_id;
  std::uint64_t seed = 0;
};

struct IQFrame {
  cvec samples;
  double sample_rate_hz = 0.0;
  double nominal_center_hz = 0.0;
  FrameLabel label;
};

// I.i.d. uniform draws from the scheme's unit-average-power constellation.
inline cvec gen_symbols(const SchemeSpec& spec, int n_symbols,
                        std::uint64_t seed) {
  spec.validate();
  if (!is_digital(spec.scheme))
    throw ParameterError("gen_symbols: analog scheme has no symbol alphabet");
  if (n_symbols <= 0) throw ParameterError("gen_symbols: n_symbols must be > 0");

  cvec alphabet;
  switch (spec.scheme) {
    case Scheme::bpsk:
    case Scheme::gfsk:
    case Scheme::cpfsk:
      alphabet = {cplx(1, 0), cplx(-1, 0)};
      break;
    case Scheme::qpsk: {
      const double s = 1.0 / std::sqrt(2.0);
      alphabet = {cplx(s, s), cplx(-s, s), cplx(-s, -s), cplx(s, -s)};
      break;
    }
    case Scheme::psk8:
      for (int k = 0; k < 8; ++k) {
        const double a = 2.0 * kPi * k / 8.0;
        alphabet.emplace_back(std::cos(a), std::sin(a));
      }
      break;
    case Scheme::qam16: {
      const double s = 1.0 / std::sqrt(10.0);
      for (int i : {-3, -1, 1, 3})
        for (int q : {-3, -1, 1, 3}) alphabet.emplace_back(s * i, s * q);
      break;
    }
    case Scheme::qam64: {
      const double s = 1.0 / std::sqrt(42.0);
      for (int i = -7; i <= 7; i += 2)
        for (int q = -7; q <= 7; q += 2) alphabet.emplace_back(s * i, s * q);
      break;
    }
    case Scheme::pam4: {
      const double s = 1.0 / std::sqrt(5.0);
      alphabet = {cplx(-3 * s, 0), cplx(-s, 0), cplx(s, 0), cplx(3 * s, 0)};
      break;
    }
    default:
      throw ParameterError("gen_symbols: unsupported scheme");
  }

  Rng rng(seed);
  cvec out(static_cast<std::size_t>(n_symbols));
  for (auto& v : out) v = alphabet[rng.below(alphabet.size())];
  return out;
}

// Upsample-by-sps + unit-energy RRC, group delay removed; output length is
// symbols.size() * sps so symbol instants land on multiples of sps.
inline cvec pulse_shape_rrc(const cvec& symbols, int sps, double rolloff,
                            int span_symbols) {
  if (sps < 2) throw ParameterError("pulse_shape_rrc: sps must be >= 2");
  if (rolloff < 0.0 || rolloff > 1.0)
    throw ParameterError("pulse_shape_rrc: rolloff outside [0, 1]");
  if (span_symbols <= 0 || span_symbols % 2 != 0)
    throw ParameterError("pulse_shape_rrc: span must be positive and even");

  const rvec h = rrc_taps(sps, rolloff, span_symbols);
  cvec up(symbols.size() * static_cast<std::size_t>(sps), cplx(0, 0));
  for (std::size_t k = 0; k < symbols.size(); ++k)
    up[k * static_cast<std::size_t>(sps)] = symbols[k];
  cvec full = convolve_full(up, h);
  const std::size_t gd = static_cast<std::size_t>(span_symbols * sps / 2);
  return cvec(full.begin() + static_cast<std::ptrdiff_t>(gd),
              full.begin() + static_cast<std::ptrdiff_t>(gd + up.size()));
}

namespace detail {

// Seeded voice-like source: low-pass filtered Gaussian noise, mean removed,
// unit power. Edge transients of the filter are generated and discarded.
inline rvec analog_message(std::size_t n, double bandwidth_hz, double fs,
                           std::uint64_t seed) {
  const std::size_t taps = 257;
  const std::size_t pad = taps;
  Rng rng(seed);
  rvec raw(n + 2 * pad);
  for (auto& v : raw) v = rng.gaussian();
  const rvec lp = lowpass_fir(taps, bandwidth_hz, fs);
  rvec filt = filter_zero_phase(raw, lp);
  rvec m(filt.begin() + static_cast<std::ptrdiff_t>(pad),
         filt.begin() + static_cast<std::ptrdiff_t>(pad + n));
  double mean = 0.0;
  for (double v : m) mean += v;
  mean /= static_cast<double>(m.size());
  double p = 0.0;
  for (auto& v : m) {
    v -= mean;
    p += v * v;
  }
  p /= static_cast<double>(m.size());
  const double s = p > 0.0 ? 1.0 / std::sqrt(p) : 1.0;
  for (auto& v : m) v *= s;
  return m;
}

inline cvec phase_to_signal(const rvec& phase_increments) {
  cvec s(phase_increments.size());
  double phi = 0.0;
  for (std::size_t i = 0; i < s.size(); ++i) {
    phi += phase_increments[i];
    s[i] = {std::cos(phi), std::sin(phi)};
  }
  return s;
}

}  // namespace detail

// Two-sided design bandwidth used for spectral-containment checks and for
// sizing capture bands. Deliberately conservative.
inline double design_bandwidth(const SchemeSpec& spec) {
  const double rs = spec.symbol_rate_hz();
  switch (spec.scheme) {
    case Scheme::gfsk:
    case Scheme::cpfsk:
      return (1.0 + spec.modulation_index) * rs;  // Carson-style bound
    case Scheme::bfm:
      // Gaussian message: quasi-static spectrum spreads ~2.6 sigma per side
      return 2.0 * (2.6 * kBfmDeviationRatio + 1.0) * spec.audio_bw();
    case Scheme::dsbam:
      return 2.9 * spec.audio_bw();
    case Scheme::ssbam:
      return 1.9 * spec.audio_bw();
    default:
      return (1.0 + spec.rolloff) * rs;
  }
}

// Synthesizes one labeled frame. Pure function of (spec, seed); output has
// unit mean power. Linear digital symbol instants align to multiples of sps.
inline IQFrame gen_frame(const SchemeSpec& spec, std::uint64_t seed) {
  spec.validate();
  const int sps = spec.samples_per_symbol;
  const int span = spec.rrc_span_symbols;
  const std::size_t n = static_cast<std::size_t>(spec.frame_len);
  cvec samples;

  switch (spec.scheme) {
    case Scheme::bpsk:
    case Scheme::qpsk:
    case Scheme::psk8:
    case Scheme::qam16:
    case Scheme::qam64:
    case Scheme::pam4: {
      const int n_sym = static_cast<int>((n + sps - 1) / sps) + 2 * span;
      const cvec syms = gen_symbols(spec, n_sym, seed);
      const cvec shaped = pulse_shape_rrc(syms, sps, spec.rolloff, span);
      const std::size_t offset = static_cast<std::size_t>(span * sps);
      samples.assign(shaped.begin() + static_cast<std::ptrdiff_t>(offset),
                     shaped.begin() + static_cast<std::ptrdiff_t>(offset + n));
      break;
    }
    case Scheme::cpfsk: {
      const int n_sym = static_cast<int>((n + sps - 1) / sps);
      const cvec syms = gen_symbols(spec, n_sym, seed);
      rvec inc(static_cast<std::size_t>(n_sym) * sps);
      for (std::size_t i = 0; i < inc.size(); ++i)
        inc[i] = kPi * spec.modulation_index * syms[i / sps].real() / sps;
      cvec s = detail::phase_to_signal(inc);
      samples.assign(s.begin(), s.begin() + static_cast<std::ptrdiff_t>(n));
      break;
    }
    case Scheme::gfsk: {
      const int gspan = 4;
      const int n_sym = static_cast<int>((n + sps - 1) / sps) + 2 * gspan;
      const cvec syms = gen_symbols(spec, n_sym, seed);
      rvec nrz(static_cast<std::size_t>(n_sym) * sps);
      for (std::size_t i = 0; i < nrz.size(); ++i)
        nrz[i] = syms[i / sps].real();
      const rvec g = gaussian_pulse(sps, spec.gaussian_bt, gspan);
      rvec shaped = filter_zero_phase(nrz, g);
      rvec inc(shaped.size());
      for (std::size_t i = 0; i < inc.size(); ++i)
        inc[i] = kPi * spec.modulation_index * shaped[i] / sps;
      cvec s = detail::phase_to_signal(inc);
      const std::size_t offset = static_cast<std::size_t>(gspan * sps);
      samples.assign(s.begin() + static_cast<std::ptrdiff_t>(offset),
                     s.begin() + static_cast<std::ptrdiff_t>(offset + n));
      break;
    }
    case Scheme::bfm: {
      const rvec m =
          detail::analog_message(n, spec.audio_bw(), spec.sample_rate_hz, seed);
      const double fdev = kBfmDeviationRatio * spec.audio_bw();
      rvec inc(n);
      for (std::size_t i = 0; i < n; ++i)
        inc[i] = 2.0 * kPi * fdev * m[i] / spec.sample_rate_hz;
      samples = detail::phase_to_signal(inc);
      break;
    }
    case Scheme::dsbam: {
      const rvec m =
          detail::analog_message(n, spec.audio_bw(), spec.sample_rate_hz, seed);
      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) samples[i] = {m[i], 0.0};
      break;
    }
    case Scheme::ssbam: {
      const rvec m =
          detail::analog_message(n, spec.audio_bw(), spec.sample_rate_hz, seed);
      const rvec mh = filter_zero_phase(m, hilbert_fir(129));
      samples.resize(n);
      for (std::size_t i = 0; i < n; ++i) samples[i] = {m[i], mh[i]};
      break;
    }
  }

  normalize_power(samples);

  IQFrame frame;
  frame.samples = std::move(samples);
  frame.sample_rate_hz = spec.sample_rate_hz;
  frame.nominal_center_hz = 0.0;
  frame.label.scheme = scheme_name(spec.scheme);
  frame.label.seed = seed;
  return frame;
}

// Matched-filter symbol decisions for linear digital frames, for checks that
// need a demodulation oracle. Returns symbols at multiples of sps, trimmed
// of edge transients.
inline cvec matched_filter_symbols(const IQFrame& frame, const SchemeSpec& spec) {
  if (!is_linear_digital(spec.scheme))
    throw ParameterError("matched_filter_symbols: linear digital schemes only");
  const rvec h = rrc_taps(spec.samples_per_symbol, spec.rolloff,
                          spec.rrc_span_symbols);
  const cvec mf = filter_zero_phase(frame.samples, h);
  const int sps = spec.samples_per_symbol;
  const int guard = spec.rrc_span_symbols;
  cvec syms;
  for (std::size_t k = static_cast<std::size_t>(guard) * sps;
       k + static_cast<std::size_t>(guard) * sps < mf.size();
       k += static_cast<std::size_t>(sps))
    syms.push_back(mf[k]);
  return syms;
}

// RMS error-vector magnitude (in percent) of rx against the clean reference
// tx, after a least-squares complex gain fit on matched-filtered symbols.
inline double evm_percent(const IQFrame& rx, const IQFrame& tx,
                          const SchemeSpec& spec) {
  const cvec y = matched_filter_symbols(rx, spec);
  const cvec s = matched_filter_symbols(tx, spec);
  const std::size_t n = std::min(y.size(), s.size());
  if (n == 0) throw EstimationError("evm: no symbols");
  cplx num(0, 0);
  double den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    num += y[i] * std::conj(s[i]);
    den += std::norm(s[i]);
  }
  const cplx g = num / den;
  double err = 0.0, ref = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    err += std::norm(y[i] - g * s[i]);
    ref += std::norm(g * s[i]);
  }
  return 100.0 * std::sqrt(err / ref);
}

}  // namespace rfwb::waveform
