#include <gtest/gtest.h>

#include <algorithm>

#include "rfwb/channel.hpp"
#include "rfwb/cyclo.hpp"
#include "rfwb/spectrum.hpp"
#include "rfwb/waveform.hpp"

using namespace rfwb;
using namespace rfwb::cyclo;
using rfwb::waveform::IQFrame;

namespace {

IQFrame bpsk_frame(std::uint64_t seed, int frame_len = 1024, int sps = 8) {
  waveform::SchemeSpec spec;
  spec.scheme = waveform::Scheme::bpsk;
  spec.samples_per_symbol = sps;
  spec.frame_len = frame_len;
  return waveform::gen_frame(spec, seed);
}

IQFrame noise_frame(std::uint64_t seed, std::size_t n = 1024, double fs = 1e6) {
  IQFrame f;
  f.sample_rate_hz = fs;
  f.samples.resize(n);
  Rng rng(seed);
  for (auto& v : f.samples) v = rng.cgaussian(1.0);
  return f;
}

IQFrame tone_frame(double f0_rel, std::uint64_t noise_seed, std::size_t n = 1024,
                   double fs = 1e6) {
  IQFrame f;
  f.sample_rate_hz = fs;
  f.samples.resize(n);
  Rng rng(noise_seed);
  for (std::size_t k = 0; k < n; ++k) {
    const double ph = 2.0 * kPi * f0_rel * static_cast<double>(k);
    f.samples[k] = cplx(std::cos(ph), std::sin(ph)) + rng.cgaussian(1e-4);
  }
  return f;
}

// Detection-grade TSM grid: dense block averaging, fine cycle axis.
SCFMatrix detect_tsm(const IQFrame& f, Pairing pairing = Pairing::nonconjugate) {
  return scf_tsm(f, 128, 57, f.sample_rate_hz / 1024.0, pairing);
}

}  // namespace

TEST(CyclicAutocorr, ZeroAlphaZeroLagIsPower) {
  const IQFrame f = bpsk_frame(1);
  const auto r = cyclic_autocorr(f, 0.0, {0});
  EXPECT_NEAR(r.values[0].real(), mean_power(f.samples), 1e-12);
  EXPECT_NEAR(r.values[0].imag(), 0.0, 1e-12);
}

TEST(CyclicAutocorr, BpskPeaksAtSymbolRate) {
  const IQFrame f = bpsk_frame(7, 4096);
  const double fs = f.sample_rate_hz;
  const double rs = fs / 8.0;

  rvec mags;
  std::size_t rs_idx = 0;
  for (int k = 16; k < 256; ++k) {
    const double alpha = static_cast<double>(k) * fs / 512.0;
    if (k == 64) rs_idx = mags.size();  // alpha == rs
    mags.push_back(std::abs(cyclic_autocorr(f, alpha, {0}).values[0]));
  }
  ASSERT_NEAR(16.0 * 4.0 * fs / 512.0, rs / 2.0 * 0.5, rs);  // sanity of grid

  rvec sorted = mags;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  EXPECT_GE(20.0 * std::log10(mags[rs_idx] / median), 10.0);
  // local maximum
  EXPECT_GT(mags[rs_idx], mags[rs_idx - 1]);
  EXPECT_GT(mags[rs_idx], mags[rs_idx + 1]);
}

TEST(CyclicAutocorr, WhiteNoiseFloor) {
  const IQFrame f = noise_frame(5, 4096);
  const double fs = f.sample_rate_hz;
  const double bound = 4.0 / std::sqrt(static_cast<double>(f.samples.size()));
  for (int k = 1; k <= 50; ++k) {
    const double alpha = static_cast<double>(k) * fs / 128.0;
    const auto r = cyclic_autocorr(f, alpha, {0, 5});
    for (const auto& v : r.values) EXPECT_LE(std::abs(v), bound);
  }
}

TEST(CyclicAutocorr, BadArgs) {
  const IQFrame f = noise_frame(1, 256);
  EXPECT_THROW(cyclic_autocorr(f, 0.6e6, {0}), ParameterError);
  EXPECT_THROW(cyclic_autocorr(f, 0.0, {300}), ParameterError);
}

TEST(ScfTsm, AlphaZeroSliceIsWelchPsd) {
  const IQFrame f = bpsk_frame(3);
  // same windowing: hop 28 -> 33 blocks, overlap 1 - 28/128
  const auto scf = scf_tsm(f, 128, 33, f.sample_rate_hz / 1024.0);
  const auto psd = spectrum::psd_welch(f, 128, 1.0 - 28.0 / 128.0);
  const rvec& slice = scf.mag[scf.alpha_index(0.0)];
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < slice.size(); ++i) {
    num += (slice[i] - psd.power_lin[i]) * (slice[i] - psd.power_lin[i]);
    den += psd.power_lin[i] * psd.power_lin[i];
  }
  EXPECT_LT(std::sqrt(num / den), 0.05);
}

TEST(ScfTsm, BpskSpectralCorrelationPeak) {
  const IQFrame f = bpsk_frame(9);
  const double fs = f.sample_rate_hz;
  const auto scf = detect_tsm(f);

  // row-max profile over the cycle axis, away from the PSD band
  rvec row_max;
  std::size_t rs_row = 0;
  for (std::size_t m = 0; m < scf.alphas_hz.size(); ++m) {
    if (scf.alphas_hz[m] < 0.03 * fs) continue;
    if (std::abs(scf.alphas_hz[m] - fs / 8.0) < 1e-9) rs_row = row_max.size();
    row_max.push_back(*std::max_element(scf.mag[m].begin(), scf.mag[m].end()));
  }
  rvec sorted = row_max;
  std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2,
                   sorted.end());
  const double median = sorted[sorted.size() / 2];
  EXPECT_GE(20.0 * std::log10(row_max[rs_row] / median), 10.0);

  // detected peak location agrees with the cyclic-autocorrelation oracle
  double best_alpha = 0.0, best = -1.0;
  for (int k = 32; k < 512; ++k) {
    const double alpha = static_cast<double>(k) * fs / 1024.0;
    const double v = std::abs(cyclic_autocorr(f, alpha, {0}).values[0]);
    if (v > best) {
      best = v;
      best_alpha = alpha;
    }
  }
  const auto peaks = detect_cfs(scf, 1, 6.0);
  ASSERT_FALSE(peaks.empty());
  EXPECT_NEAR(peaks[0].alpha_hz, best_alpha, 1.5 * fs / 1024.0);
}

TEST(ScfTsm, NoiseCoherenceFloor) {
  // Monte-Carlo floor over 100 noise frames: no frame's peak coherence may
  // exceed 5x the ensemble mean
  rvec peaks;
  for (int t = 0; t < 100; ++t) {
    const IQFrame f = noise_frame(100 + t);
    const auto scf = scf_tsm(f, 128, 32, f.sample_rate_hz / 128.0);
    const rvec& psd_row = scf.mag[scf.alpha_index(0.0)];
    double peak = 0.0;
    for (std::size_t m = 0; m < scf.alphas_hz.size(); ++m) {
      if (std::abs(scf.alphas_hz[m]) < 2.0 * f.sample_rate_hz / 128.0) continue;
      const rvec c = coherence_row(scf, m, psd_row);
      for (double v : c) peak = std::max(peak, v);
    }
    peaks.push_back(peak);
  }
  double mean = 0.0;
  for (double v : peaks) mean += v;
  mean /= static_cast<double>(peaks.size());
  for (double v : peaks) EXPECT_LT(v, 5.0 * mean);
}

namespace {

// equality up to FMA-contraction rounding
void expect_same_mag(double a, double b) {
  EXPECT_LE(std::abs(a - b), 1e-12 * std::max({std::abs(a), std::abs(b), 1e-30}));
}

}  // namespace

TEST(ScfTsm, SymmetryNonConjugate) {
  // |S(f, -alpha)| == |S(f, alpha)| for the x conj(x) pairing
  const IQFrame f = bpsk_frame(11);
  const auto scf = scf_tsm(f, 128, 32, f.sample_rate_hz / 128.0);
  const std::size_t zero = scf.alpha_index(0.0);
  for (std::size_t m = 1; m + zero < scf.alphas_hz.size(); ++m)
    for (std::size_t j = 0; j < scf.freqs_hz.size(); ++j)
      expect_same_mag(scf.mag[zero + m][j], scf.mag[zero - m][j]);
}

TEST(ScfTsm, SymmetryConjugate) {
  // |S(f, alpha)| == |S(-f, alpha)| for the x x pairing
  const IQFrame f = bpsk_frame(13);
  const auto scf =
      scf_tsm(f, 128, 32, f.sample_rate_hz / 128.0, Pairing::conjugate);
  const std::size_t n = scf.freqs_hz.size();
  for (std::size_t m = 0; m < scf.alphas_hz.size(); ++m)
    for (std::size_t j = 1; j < n; ++j)
      expect_same_mag(scf.mag[m][j], scf.mag[m][n - j]);
}

TEST(ScfTsm, BadArgs) {
  const IQFrame f = noise_frame(1);
  EXPECT_THROW(scf_tsm(f, 2048, 4, 1e3), ParameterError);
  EXPECT_THROW(scf_tsm(f, 100, 4, 1e3), ParameterError);
  EXPECT_THROW(scf_tsm(f, 128, 4, 1.0), ParameterError);  // finer than fs/N
  EXPECT_THROW(scf_tsm(f, 1024, 2, 1e3), ParameterError); // hop would be 0
}

TEST(ScfSsca, AgreesWithTsmOnBpsk) {
  const IQFrame f = bpsk_frame(17);
  const double fs = f.sample_rate_hz;
  const auto tsm_peaks = detect_cfs(detect_tsm(f), 1, 6.0);
  const auto ssca =
      scf_ssca(f, fs / 64.0, fs / 1024.0, Pairing::nonconjugate);
  const auto ssca_peaks = detect_cfs(ssca, 1, 6.0);
  ASSERT_FALSE(tsm_peaks.empty());
  ASSERT_FALSE(ssca_peaks.empty());
  EXPECT_NEAR(std::abs(tsm_peaks[0].alpha_hz), std::abs(ssca_peaks[0].alpha_hz),
              1.5 * fs / 1024.0);
}

TEST(ScfSsca, ToneConjugateFeatureAtTwiceF0) {
  const double f0_rel = 136.0 / 1024.0;
  const IQFrame f = tone_frame(f0_rel, 23);
  const double fs = f.sample_rate_hz;
  const auto ssca = scf_ssca(f, fs / 64.0, fs / 1024.0, Pairing::conjugate);
  const auto peaks = detect_cfs(ssca, 1, 6.0);
  ASSERT_FALSE(peaks.empty());
  EXPECT_NEAR(peaks[0].alpha_hz, 2.0 * f0_rel * fs, 1.5 * fs / 1024.0);
}

TEST(ScfSsca, ZeroInputAllZero) {
  IQFrame f;
  f.sample_rate_hz = 1e6;
  f.samples.assign(1024, cplx(0, 0));
  const auto ssca = scf_ssca(f, f.sample_rate_hz / 64.0, f.sample_rate_hz / 1024.0);
  for (const auto& row : ssca.mag)
    for (double v : row) EXPECT_EQ(v, 0.0);
}

TEST(ScfSsca, BadArgs) {
  const IQFrame f = noise_frame(2);
  EXPECT_THROW(scf_ssca(f, 1e6 / 64.0, 1e6 / 32.0), ParameterError);
  EXPECT_THROW(scf_ssca(f, 1e6 / 64.0, 1.0), ParameterError);
  EXPECT_THROW(scf_ssca(f, 1.0, 0.5), ParameterError);
}

TEST(DetectCfs, BpskSymbolRate) {
  const IQFrame f = bpsk_frame(19);
  const double fs = f.sample_rate_hz;
  const auto peaks = detect_cfs(detect_tsm(f), 4, 6.0);
  ASSERT_FALSE(peaks.empty());
  EXPECT_NEAR(std::abs(peaks[0].alpha_hz), fs / 8.0, 1.5 * fs / 1024.0);
}

TEST(DetectCfs, NoiseOnlyIsEmpty) {
  for (std::uint64_t s : {31u, 37u, 41u}) {
    const IQFrame f = noise_frame(s);
    const auto peaks = detect_cfs(detect_tsm(f), 8, 10.0);
    EXPECT_TRUE(peaks.empty());
  }
}

TEST(DetectCfs, TwoMultiplexedRates) {
  // frequency-multiplexed BPSK signals with distinct symbol rates; the
  // second band sits at fs/4 so the two occupations are disjoint
  const IQFrame a = bpsk_frame(43, 1024, 8);
  const IQFrame b = bpsk_frame(1043, 1024, 6);
  IQFrame mix = a;
  const double fs = mix.sample_rate_hz;
  for (std::size_t k = 0; k < mix.samples.size(); ++k) {
    const double ph = 2.0 * kPi * 0.25 * static_cast<double>(k);
    mix.samples[k] =
        a.samples[k] + b.samples[k] * cplx(std::cos(ph), std::sin(ph));
  }
  normalize_power(mix.samples);

  const auto peaks = detect_cfs(detect_tsm(mix), 4, 3.0);
  auto found = [&](double alpha) {
    for (const auto& p : peaks)
      if (std::abs(std::abs(p.alpha_hz) - alpha) < 1.5 * fs / 1024.0) return true;
    return false;
  };
  EXPECT_TRUE(found(fs / 8.0));
  EXPECT_TRUE(found(fs / 6.0));
}

TEST(DetectCfs, RecoveryAtSnr10) {
  // symbol-rate recovery across linear digital schemes at SNR 10 dB
  int hits = 0, total = 0;
  for (auto s : {waveform::Scheme::bpsk, waveform::Scheme::qpsk,
                 waveform::Scheme::qam16}) {
    waveform::SchemeSpec spec;
    spec.scheme = s;
    for (std::uint64_t t = 0; t < 10; ++t) {
      IQFrame f = waveform::gen_frame(spec, 100 + t);
      f = channel::awgn(f, 10.0, 500 + t);
      const auto peaks = detect_cfs(detect_tsm(f), 3, 6.0);
      ++total;
      for (const auto& p : peaks)
        if (std::abs(std::abs(p.alpha_hz) - spec.symbol_rate_hz()) <
            1.5 * f.sample_rate_hz / 1024.0) {
          ++hits;
          break;
        }
    }
  }
  EXPECT_GE(hits, static_cast<int>(0.95 * total));
}

TEST(Cumulants, BpskAgainstEnumeration) {
  // exact alphabet oracle: E[x^4] = 1, E[x^2] = 1 -> c40 = 1 - 3 = -2
  waveform::SchemeSpec spec;
  spec.scheme = waveform::Scheme::bpsk;
  const cvec syms = waveform::gen_symbols(spec, 1 << 15, 3);
  const auto c = cumulants(syms);
  EXPECT_NEAR(c.c40.real(), -2.0, 0.05);
  EXPECT_NEAR(c.c40.imag(), 0.0, 0.05);
  EXPECT_NEAR(c.c21, 1.0, 1e-9);
}

TEST(Cumulants, GaussianVanishAtOrder4) {
  cvec x(1 << 17);
  Rng rng(7);
  for (auto& v : x) v = rng.cgaussian(1.0);
  const auto c = cumulants(x);
  EXPECT_LE(std::abs(c.c40), 0.05);
  EXPECT_LE(std::abs(c.c42), 0.05);
  EXPECT_LE(std::abs(c.c41), 0.05);
}

TEST(Cumulants, QamOrder4Separability) {
  // c42 separates QPSK / 16QAM / 64QAM by > 10x the estimator std at N=2^15
  const auto schemes = {waveform::Scheme::qpsk, waveform::Scheme::qam16,
                        waveform::Scheme::qam64};
  std::vector<rvec> c42s;
  for (auto s : schemes) {
    waveform::SchemeSpec spec;
    spec.scheme = s;
    rvec vals;
    for (std::uint64_t t = 0; t < 50; ++t) {
      const cvec syms = waveform::gen_symbols(spec, 1 << 15, 1000 + t);
      vals.push_back(cumulants(syms).c42);
    }
    c42s.push_back(std::move(vals));
  }
  auto mean_std = [](const rvec& v) {
    double m = 0.0;
    for (double x : v) m += x;
    m /= static_cast<double>(v.size());
    double s2 = 0.0;
    for (double x : v) s2 += (x - m) * (x - m);
    return std::pair<double, double>(m, std::sqrt(s2 / (v.size() - 1)));
  };
  double max_std = 0.0;
  rvec means;
  for (const auto& v : c42s) {
    const auto [m, s] = mean_std(v);
    means.push_back(m);
    max_std = std::max(max_std, s);
  }
  std::sort(means.begin(), means.end());
  EXPECT_GT(means[1] - means[0], 10.0 * max_std);
  EXPECT_GT(means[2] - means[1], 10.0 * max_std);
}

TEST(Cumulants, ConvergenceRate) {
  // estimator std shrinks as 1/sqrt(N): log-log slope -0.5 +- 0.1
  waveform::SchemeSpec spec;
  spec.scheme = waveform::Scheme::qam16;
  rvec log_n, log_std;
  for (int p : {10, 13, 16}) {
    rvec vals;
    for (std::uint64_t t = 0; t < 100; ++t)
      vals.push_back(
          cumulants(waveform::gen_symbols(spec, 1 << p, 7000 + t)).c42);
    double m = 0.0;
    for (double v : vals) m += v;
    m /= static_cast<double>(vals.size());
    double s2 = 0.0;
    for (double v : vals) s2 += (v - m) * (v - m);
    log_n.push_back(std::log(static_cast<double>(1 << p)));
    log_std.push_back(0.5 * std::log(s2 / (vals.size() - 1)));
  }
  // least-squares slope
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < log_n.size(); ++i) {
    mx += log_n[i];
    my += log_std[i];
  }
  mx /= 3.0;
  my /= 3.0;
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < 3; ++i) {
    num += (log_n[i] - mx) * (log_std[i] - my);
    den += (log_n[i] - mx) * (log_n[i] - mx);
  }
  EXPECT_NEAR(num / den, -0.5, 0.1);
}

TEST(Cumulants, TooFewSamples) {
  cvec x(100, cplx(1, 0));
  EXPECT_THROW(cumulants(x), EstimationError);
}

TEST(Compress, OrthonormalizedIsometry) {
  const std::size_t d = 32;
  rvec g = gaussian_projection(d, d, 5);
  // Gram-Schmidt on rows
  for (std::size_t i = 0; i < d; ++i) {
    double* ri = g.data() + i * d;
    for (std::size_t j = 0; j < i; ++j) {
      const double* rj = g.data() + j * d;
      double dot = 0.0;
      for (std::size_t k = 0; k < d; ++k) dot += ri[k] * rj[k];
      for (std::size_t k = 0; k < d; ++k) ri[k] -= dot * rj[k];
    }
    double nrm = 0.0;
    for (std::size_t k = 0; k < d; ++k) nrm += ri[k] * ri[k];
    nrm = std::sqrt(nrm);
    for (std::size_t k = 0; k < d; ++k) ri[k] /= nrm;
  }
  Rng rng(9);
  rvec x(d), y(d);
  for (auto& v : x) v = rng.gaussian();
  for (auto& v : y) v = rng.gaussian();
  auto apply = [&](const rvec& v) {
    rvec out(d, 0.0);
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t k = 0; k < d; ++k) out[i] += g[i * d + k] * v[k];
    return out;
  };
  const rvec px = apply(x), py = apply(y);
  double din = 0.0, dout = 0.0;
  for (std::size_t k = 0; k < d; ++k) {
    din += (x[k] - y[k]) * (x[k] - y[k]);
    dout += (px[k] - py[k]) * (px[k] - py[k]);
  }
  EXPECT_NEAR(std::sqrt(dout), std::sqrt(din), 1e-6);
}

TEST(Compress, JohnsonLindenstraussDistortion) {
  const std::size_t dim = 1024, out = 128, count = 100;
  std::vector<rvec> vecs(count, rvec(dim));
  Rng rng(13);
  for (auto& v : vecs)
    for (auto& x : v) x = rng.gaussian();
  std::vector<rvec> proj;
  for (const auto& v : vecs) proj.push_back(compress_features(v, out, 77));

  int ok = 0, total = 0;
  for (std::size_t i = 0; i < count; ++i)
    for (std::size_t j = i + 1; j < count; ++j) {
      double din = 0.0, dout = 0.0;
      for (std::size_t k = 0; k < dim; ++k)
        din += (vecs[i][k] - vecs[j][k]) * (vecs[i][k] - vecs[j][k]);
      for (std::size_t k = 0; k < out; ++k)
        dout += (proj[i][k] - proj[j][k]) * (proj[i][k] - proj[j][k]);
      const double ratio = std::sqrt(dout / din);
      if (ratio > 0.7 && ratio < 1.3) ++ok;
      ++total;
    }
  EXPECT_GE(static_cast<double>(ok) / total, 0.95);
}

TEST(Compress, ZeroAndDeterminism) {
  rvec zero(64, 0.0);
  const rvec y = compress_features(zero, 16, 3);
  for (double v : y) EXPECT_EQ(v, 0.0);

  rvec x(64);
  Rng rng(1);
  for (auto& v : x) v = rng.gaussian();
  const rvec a = compress_features(x, 16, 42);
  const rvec b = compress_features(x, 16, 42);
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
  EXPECT_THROW(compress_features(x, 0, 1), ParameterError);
}

TEST(Feature, ScfGridShapeAndDeterminism) {
  const IQFrame f = bpsk_frame(55);
  const auto a = scf_feature(f);
  const auto b = scf_feature(f);
  ASSERT_EQ(a.size(), static_cast<std::size_t>(2 * 64 * 64));
  for (std::size_t k = 0; k < a.size(); ++k) EXPECT_EQ(a[k], b[k]);
  for (float v : a) {
    EXPECT_GE(v, 0.0f);
    EXPECT_LE(v, 2.0f);
  }
}
