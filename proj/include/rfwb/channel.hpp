// AWGN and block-fading Rayleigh multipath with controlled SNR.
#pragma once

#include "rfwb/rng.hpp"
#include "rfwb/waveform.hpp"

namespace rfwb::channel {

using waveform::IQFrame;

struct ChannelConfig {
  enum class Kind { awgn, rayleigh };
  Kind kind = Kind::awgn;
  double snr_db = 10.0;
  rvec path_gains_db = {0.0};
  std::vector<int> path_delays_samples = {0};
  std::uint64_t seed = 0;

  void validate() const {
    if (path_gains_db.size() != path_delays_samples.size())
      throw ParameterError("channel: gains and delays must have equal length");
    if (path_delays_samples.empty() || path_delays_samples.front() != 0)
      throw ParameterError("channel: first path delay must be 0");
    for (std::size_t i = 1; i < path_delays_samples.size(); ++i)
      if (path_delays_samples[i] <= path_delays_samples[i - 1])
        throw ParameterError("channel: path delays must be strictly increasing");
  }
};

// Adds circular complex Gaussian noise at the requested SNR; the signal
// power is re-measured, never assumed. +inf SNR is the identity.
inline IQFrame awgn(const IQFrame& frame, double snr_db, std::uint64_t seed) {
  IQFrame out = frame;
  out.label.snr_db = snr_db;
  if (std::isinf(snr_db) && snr_db > 0.0) return out;
  const double p = mean_power(frame.samples);
  const double noise_var = p / db_to_lin(snr_db);
  Rng rng(seed);
  for (auto& v : out.samples) v += rng.cgaussian(noise_var);
  return out;
}

// Per-frame block fading: tap h_p ~ CN(0, 10^(gain_p/10)) held constant
// over the frame, FIR over (delay, tap) pairs, then AWGN at cfg.snr_db.
inline IQFrame rayleigh(const IQFrame& frame, const ChannelConfig& cfg) {
  if (cfg.kind != ChannelConfig::Kind::rayleigh)
    throw ParameterError("rayleigh: config kind mismatch");
  cfg.validate();
  const std::size_t n = frame.samples.size();
  if (static_cast<std::size_t>(cfg.path_delays_samples.back()) > n / 4)
    throw ParameterError("rayleigh: path delay exceeds N/4");

  Rng rng(derive_seed(cfg.seed, 0x7a95));
  cvec taps(cfg.path_gains_db.size());
  for (std::size_t p = 0; p < taps.size(); ++p)
    taps[p] = rng.cgaussian(db_to_lin(cfg.path_gains_db[p]));

  IQFrame out = frame;
  out.label.channel_id = "rayleigh";
  cvec y(n, cplx(0, 0));
  for (std::size_t p = 0; p < taps.size(); ++p) {
    const std::size_t d = static_cast<std::size_t>(cfg.path_delays_samples[p]);
    for (std::size_t k = d; k < n; ++k) y[k] += taps[p] * frame.samples[k - d];
  }
  out.samples = std::move(y);
  return awgn(out, cfg.snr_db, derive_seed(cfg.seed, 0x6e01));
}

}  // namespace rfwb::channel
