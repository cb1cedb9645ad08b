#include <gtest/gtest.h>

#include <algorithm>

#include "rfwb/channel.hpp"
#include "rfwb/spectrum.hpp"
#include "rfwb/waveform.hpp"

using namespace rfwb;
using namespace rfwb::channel;
using rfwb::waveform::IQFrame;

namespace {

IQFrame unit_noise_frame(std::size_t n, std::uint64_t seed) {
  IQFrame f;
  f.sample_rate_hz = 1e6;
  f.samples.resize(n);
  Rng rng(seed);
  for (auto& v : f.samples) v = rng.cgaussian(1.0);
  normalize_power(f.samples);
  return f;
}

ChannelConfig ray_cfg(rvec gains, std::vector<int> delays, double snr,
                      std::uint64_t seed) {
  ChannelConfig cfg;
  cfg.kind = ChannelConfig::Kind::rayleigh;
  cfg.snr_db = snr;
  cfg.path_gains_db = std::move(gains);
  cfg.path_delays_samples = std::move(delays);
  cfg.seed = seed;
  return cfg;
}

constexpr double kInf = std::numeric_limits<double>::infinity();

}  // namespace

TEST(Awgn, InfiniteSnrIsIdentity) {
  const IQFrame f = unit_noise_frame(256, 1);
  const IQFrame out = awgn(f, kInf, 3);
  for (std::size_t k = 0; k < f.samples.size(); ++k)
    EXPECT_EQ(out.samples[k], f.samples[k]);
}

TEST(Awgn, NoisePowerAtZeroDb) {
  const IQFrame f = unit_noise_frame(1 << 16, 2);
  const IQFrame out = awgn(f, 0.0, 5);
  double np = 0.0;
  for (std::size_t k = 0; k < f.samples.size(); ++k)
    np += std::norm(out.samples[k] - f.samples[k]);
  np /= static_cast<double>(f.samples.size());
  EXPECT_NEAR(np, 1.0, 0.05);
}

TEST(Awgn, SnrRoundTrip) {
  const IQFrame f = unit_noise_frame(1 << 16, 3);
  const IQFrame out = awgn(f, 5.0, 7);
  double sp = 0.0, np = 0.0;
  for (std::size_t k = 0; k < f.samples.size(); ++k) {
    sp += std::norm(f.samples[k]);
    np += std::norm(out.samples[k] - f.samples[k]);
  }
  EXPECT_NEAR(lin_to_db(sp / np), 5.0, 0.2);
}

TEST(Awgn, NoiseIndependentOfSignal) {
  const IQFrame f = unit_noise_frame(1 << 16, 4);
  const IQFrame out = awgn(f, 0.0, 9);
  cplx corr(0, 0);
  for (std::size_t k = 0; k < f.samples.size(); ++k)
    corr += (out.samples[k] - f.samples[k]) * std::conj(f.samples[k]);
  corr /= static_cast<double>(f.samples.size());
  // estimator sigma = sqrt(Pn * Ps / N)
  const double sigma = std::sqrt(1.0 / static_cast<double>(f.samples.size()));
  EXPECT_LT(std::abs(corr), 3.0 * sigma);
}

TEST(Rayleigh, SinglePathTapIsRayleigh) {
  // Kolmogorov-Smirnov against the Rayleigh CDF over 10^4 seeds
  const IQFrame f = unit_noise_frame(16, 5);
  const int trials = 10000;
  rvec mags;
  mags.reserve(trials);
  for (int t = 0; t < trials; ++t) {
    const auto cfg = ray_cfg({0.0}, {0}, kInf, static_cast<std::uint64_t>(t));
    const IQFrame out = rayleigh(f, cfg);
    mags.push_back(std::abs(out.samples[0] / f.samples[0]));
  }
  std::sort(mags.begin(), mags.end());
  double d = 0.0;
  for (int i = 0; i < trials; ++i) {
    const double cdf = 1.0 - std::exp(-mags[i] * mags[i]);  // sigma^2 = 1
    const double emp_hi = static_cast<double>(i + 1) / trials;
    const double emp_lo = static_cast<double>(i) / trials;
    d = std::max({d, std::abs(cdf - emp_hi), std::abs(cdf - emp_lo)});
  }
  // critical value at p = 0.01
  EXPECT_LT(d, 1.63 / std::sqrt(static_cast<double>(trials)));
}

TEST(Rayleigh, WeakSecondPathHasLessRipple) {
  waveform::SchemeSpec spec;
  spec.scheme = waveform::Scheme::qam16;
  spec.frame_len = 4096;
  const IQFrame f = waveform::gen_frame(spec, 6);
  const double rs = spec.symbol_rate_hz();

  auto ripple = [&](double g2, std::uint64_t seed) {
    const auto cfg = ray_cfg({0.0, g2}, {0, 4}, kInf, seed);
    const auto psd = spectrum::psd_welch(rayleigh(f, cfg), 512);
    rvec vals;
    for (std::size_t i = 0; i < psd.freqs_hz.size(); ++i)
      if (std::abs(psd.freqs_hz[i]) < rs / 2.0) vals.push_back(psd.power_db[i]);
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    double var = 0.0;
    for (double v : vals) var += (v - m) * (v - m);
    return std::sqrt(var / static_cast<double>(vals.size()));
  };

  double weak = 0.0, strong = 0.0;
  for (std::uint64_t s = 0; s < 20; ++s) {
    weak += ripple(-25.0, s);
    strong += ripple(0.0, s + 1000);
  }
  EXPECT_LT(weak, strong);
}

TEST(Rayleigh, Deterministic) {
  const IQFrame f = unit_noise_frame(1024, 7);
  const auto cfg = ray_cfg({0.0, -3.0}, {0, 4}, 10.0, 1234);
  const IQFrame a = rayleigh(f, cfg);
  const IQFrame b = rayleigh(f, cfg);
  for (std::size_t k = 0; k < a.samples.size(); ++k)
    EXPECT_EQ(a.samples[k], b.samples[k]);
}

TEST(Rayleigh, ExpectedReceivedPower) {
  const IQFrame f = unit_noise_frame(1024, 8);
  const rvec gains = {0.0, -3.0};
  double expected = 0.0;
  for (double g : gains) expected += db_to_lin(g);
  expected *= mean_power(f.samples);

  double acc = 0.0;
  const int trials = 2000;
  for (int t = 0; t < trials; ++t) {
    const auto cfg = ray_cfg(gains, {0, 4}, kInf, 5000 + t);
    acc += mean_power(rayleigh(f, cfg).samples);
  }
  acc /= trials;
  EXPECT_NEAR(acc, expected, 0.02 * expected);
}

TEST(Rayleigh, DelayTooLarge) {
  const IQFrame f = unit_noise_frame(64, 9);
  const auto cfg = ray_cfg({0.0, -3.0}, {0, 20}, 10.0, 1);
  EXPECT_THROW(rayleigh(f, cfg), ParameterError);
}

TEST(ChannelConfig, Validation) {
  ChannelConfig cfg;
  cfg.path_gains_db = {0.0, -3.0};
  cfg.path_delays_samples = {0};
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg.path_delays_samples = {1, 4};
  EXPECT_THROW(cfg.validate(), ParameterError);
  cfg.path_delays_samples = {0, 4};
  EXPECT_NO_THROW(cfg.validate());
}
