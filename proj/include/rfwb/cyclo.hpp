// Cyclostationary analysis: cyclic autocorrelation, spectral correlation
// estimated by time smoothing (TSM) and by the strip spectral correlation
// analyzer (SSCA), cyclic-frequency detection, high-order cumulants and
// random-projection feature compression.
#pragma once

#include <algorithm>
#include <fstream>
#include <string>

#include "rfwb/fft.hpp"
#include "rfwb/dsp.hpp"
#include "rfwb/rng.hpp"
#include "rfwb/waveform.hpp"

namespace rfwb::cyclo {

using waveform::IQFrame;

struct CyclicAutocorr {
  double alpha_hz = 0.0;
  std::vector<int> lags;
  cvec values;
};

// R^a(tau) = (1/N) sum_k x[k+tau] conj(x[k]) e^{-j 2 pi a k / fs}.
inline CyclicAutocorr cyclic_autocorr(const IQFrame& frame, double alpha_hz,
                                      const std::vector<int>& lags) {
  const std::size_t n = frame.samples.size();
  const double fs = frame.sample_rate_hz;
  if (std::abs(alpha_hz) >= fs / 2.0)
    throw ParameterError("cyclic_autocorr: |alpha| must be < fs/2");

  CyclicAutocorr out;
  out.alpha_hz = alpha_hz;
  out.lags = lags;
  out.values.reserve(lags.size());
  const double w = -2.0 * kPi * alpha_hz / fs;
  for (int tau : lags) {
    if (static_cast<std::size_t>(std::abs(tau)) >= n)
      throw ParameterError("cyclic_autocorr: lag exceeds frame length");
    cplx acc(0, 0);
    const std::size_t k0 = tau < 0 ? static_cast<std::size_t>(-tau) : 0;
    const std::size_t k1 = tau > 0 ? n - static_cast<std::size_t>(tau) : n;
    for (std::size_t k = k0; k < k1; ++k) {
      const cplx rot(std::cos(w * static_cast<double>(k)),
                     std::sin(w * static_cast<double>(k)));
      acc += frame.samples[k + tau] * std::conj(frame.samples[k]) * rot;
    }
    out.values.push_back(acc / static_cast<double>(n));
  }
  return out;
}

enum class Pairing { nonconjugate, conjugate };

struct SCFMatrix {
  rvec alphas_hz;               // ascending, includes 0
  rvec freqs_hz;                // ascending
  std::vector<rvec> mag;        // [alpha][freq], |SCF|
  std::string method;           // "tsm" or "ssca"
  Pairing pairing = Pairing::nonconjugate;
  int nfft = 0;
  int n_blocks = 0;
  double sample_rate_hz = 0.0;

  std::size_t alpha_index(double alpha_hz) const {
    std::size_t best = 0;
    double dist = std::numeric_limits<double>::max();
    for (std::size_t i = 0; i < alphas_hz.size(); ++i) {
      const double d = std::abs(alphas_hz[i] - alpha_hz);
      if (d < dist) {
        dist = d;
        best = i;
      }
    }
    return best;
  }
  std::size_t freq_index(double f_hz) const {
    const double step = freqs_hz.size() > 1 ? freqs_hz[1] - freqs_hz[0] : 1.0;
    const double pos = (f_hz - freqs_hz.front()) / step;
    const long j = std::lround(pos);
    return static_cast<std::size_t>(
        std::clamp<long>(j, 0, static_cast<long>(freqs_hz.size()) - 1));
  }
};

// Time-smoothed cyclic periodogram. Blocks are Hann windowed with a hop
// chosen so n_blocks blocks cover the frame; block products at bin shifts
// matching each alpha are phase-compensated by e^{-j 2 pi a t_b / fs} and
// averaged. Normalization makes the alpha = 0 row equal the Welch PSD of
// the same windowing.
inline SCFMatrix scf_tsm(const IQFrame& frame, std::size_t nfft,
                         int n_blocks, double alpha_res_hz,
                         Pairing pairing = Pairing::nonconjugate) {
  const std::size_t n = frame.samples.size();
  const double fs = frame.sample_rate_hz;
  if (!is_pow2(nfft)) throw ParameterError("scf_tsm: nfft must be a power of two");
  if (nfft > n) throw ParameterError("scf_tsm: nfft exceeds frame length");
  if (n_blocks < 1) throw ParameterError("scf_tsm: n_blocks must be >= 1");
  if (alpha_res_hz < 0.999 * fs / static_cast<double>(n))
    throw ParameterError("scf_tsm: cyclic resolution finer than the record supports");
  std::size_t hop = 0;
  if (n_blocks > 1) {
    if (static_cast<std::size_t>(n_blocks - 1) > n - nfft)
      throw ParameterError("scf_tsm: too many blocks for this frame");
    hop = (n - nfft) / static_cast<std::size_t>(n_blocks - 1);
  }

  const rvec w = hann_window(nfft);
  double u = 0.0;
  for (double v : w) u += v * v;

  // Windowed, fftshifted block spectra.
  std::vector<cvec> blocks(static_cast<std::size_t>(n_blocks));
  cvec buf(nfft);
  for (int b = 0; b < n_blocks; ++b) {
    const std::size_t start = static_cast<std::size_t>(b) * hop;
    for (std::size_t i = 0; i < nfft; ++i)
      buf[i] = frame.samples[start + i] * w[i];
    fft_inplace(buf);
    blocks[static_cast<std::size_t>(b)] = fftshift(buf);
  }

  const double df = fs / static_cast<double>(nfft);
  const int m_max = static_cast<int>(std::floor(fs / 2.0 / alpha_res_hz));
  const int half = static_cast<int>(nfft) / 2;

  SCFMatrix scf;
  scf.method = "tsm";
  scf.pairing = pairing;
  scf.nfft = static_cast<int>(nfft);
  scf.n_blocks = n_blocks;
  scf.sample_rate_hz = fs;
  scf.freqs_hz = fft_freqs(nfft, fs);
  scf.alphas_hz.resize(static_cast<std::size_t>(2 * m_max + 1));
  scf.mag.assign(scf.alphas_hz.size(), rvec(nfft, 0.0));

  const double scale = 1.0 / (static_cast<double>(n_blocks) * u * fs);
  cvec acc(nfft);

  for (int m = -m_max; m <= m_max; ++m) {
    const double alpha = static_cast<double>(m) * alpha_res_hz;
    scf.alphas_hz[static_cast<std::size_t>(m + m_max)] = alpha;
    const int r = static_cast<int>(std::lround(alpha / df));
    const int chi = (r + 1) >> 1;  // ceil(r/2), also for negative r
    const int clo = r - chi;       // floor(r/2)
    std::fill(acc.begin(), acc.end(), cplx(0, 0));

    for (int b = 0; b < n_blocks; ++b) {
      const double tb = static_cast<double>(static_cast<std::size_t>(b) * hop);
      const double ph = -2.0 * kPi * alpha * tb / fs;
      const cplx comp(std::cos(ph), std::sin(ph));
      const cvec& X = blocks[static_cast<std::size_t>(b)];

      if (pairing == Pairing::nonconjugate) {
        for (int k = 0; k < static_cast<int>(nfft); ++k) {
          const int k1 = k + chi;
          const int k2 = k - clo;
          if (k1 < 0 || k2 < 0 || k1 >= static_cast<int>(nfft) ||
              k2 >= static_cast<int>(nfft))
            continue;
          acc[static_cast<std::size_t>(k)] +=
              X[static_cast<std::size_t>(k1)] *
              std::conj(X[static_cast<std::size_t>(k2)]) * comp;
        }
      } else {
        for (int j = 0; j < static_cast<int>(nfft); ++j) {
          const int d = j - half;
          // bins with k1 + k2 = r + 2*half, averaged over both half-bin
          // splits when r is odd so the surface is exactly even in f
          const int a1 = half + chi + d, a2 = half + clo - d;
          cplx p(0, 0);
          int cnt = 0;
          if (a1 >= 0 && a2 >= 0 && a1 < static_cast<int>(nfft) &&
              a2 < static_cast<int>(nfft)) {
            p += X[static_cast<std::size_t>(a1)] * X[static_cast<std::size_t>(a2)];
            ++cnt;
          }
          if (chi != clo) {
            const int b1 = half + clo + d, b2 = half + chi - d;
            if (b1 >= 0 && b2 >= 0 && b1 < static_cast<int>(nfft) &&
                b2 < static_cast<int>(nfft)) {
              p += X[static_cast<std::size_t>(b1)] * X[static_cast<std::size_t>(b2)];
              ++cnt;
            }
          }
          if (cnt > 0) acc[static_cast<std::size_t>(j)] += p / static_cast<double>(cnt) * comp;
        }
      }
    }
    rvec& row = scf.mag[static_cast<std::size_t>(m + m_max)];
    for (std::size_t k = 0; k < nfft; ++k) row[k] = std::abs(acc[k]) * scale;
  }
  return scf;
}

// Strip spectral correlation analyzer. The frame is channelized by a
// length-Np windowed sliding DFT (one strip per channel), each strip is
// correlated against the raw signal and an N-point FFT over time spreads
// the result along the cycle axis; lattice points land at
// alpha = f_k + q fs / N, f = f_k / 2 - q fs / (2N) and are averaged into
// a regular (alpha x f) grid.
inline SCFMatrix scf_ssca(const IQFrame& frame, double spectral_res_hz,
                          double cyclic_res_hz,
                          Pairing pairing = Pairing::nonconjugate) {
  const std::size_t n = frame.samples.size();
  const double fs = frame.sample_rate_hz;
  if (!is_pow2(n)) throw ParameterError("scf_ssca: frame length must be a power of two");
  if (cyclic_res_hz >= spectral_res_hz)
    throw ParameterError("scf_ssca: cyclic resolution must be finer than spectral");
  if (cyclic_res_hz < 0.999 * fs / static_cast<double>(n))
    throw ParameterError("scf_ssca: cyclic resolution not realizable from this record");

  std::size_t np = 8;
  while (fs / static_cast<double>(np) > spectral_res_hz) np <<= 1;
  if (np > n / 4)
    throw ParameterError("scf_ssca: spectral resolution not realizable from this record");

  const rvec a = hamming_window(np);
  double a_sum = 0.0;
  for (double v : a) a_sum += v;

  // Channelizer: Xc[n][kbin], window centered on sample n.
  std::vector<cvec> xc(n, cvec(np));
  {
    cvec seg(np);
    const int off = static_cast<int>(np) / 2;
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t r = 0; r < np; ++r) {
        const long idx = static_cast<long>(i) - off + static_cast<long>(r);
        seg[r] = (idx >= 0 && idx < static_cast<long>(n))
                     ? frame.samples[static_cast<std::size_t>(idx)] * a[r]
                     : cplx(0, 0);
      }
      fft_inplace(seg);
      xc[i] = seg;
    }
  }

  // Regular output grid.
  const double row_step = std::max(cyclic_res_hz, fs / static_cast<double>(n));
  const int rows_half = static_cast<int>(std::floor(fs / row_step));
  const int n_rows = 2 * rows_half + 1;
  const int n_cols = static_cast<int>(np) + 1;

  SCFMatrix scf;
  scf.method = "ssca";
  scf.pairing = pairing;
  scf.nfft = static_cast<int>(np);
  scf.n_blocks = static_cast<int>(n);
  scf.sample_rate_hz = fs;
  scf.alphas_hz.resize(static_cast<std::size_t>(n_rows));
  for (int m = 0; m < n_rows; ++m)
    scf.alphas_hz[static_cast<std::size_t>(m)] =
        static_cast<double>(m - rows_half) * row_step;
  scf.freqs_hz.resize(static_cast<std::size_t>(n_cols));
  for (int c = 0; c < n_cols; ++c)
    scf.freqs_hz[static_cast<std::size_t>(c)] =
        (static_cast<double>(c) - static_cast<double>(np) / 2.0) *
        (fs / static_cast<double>(np));
  scf.mag.assign(static_cast<std::size_t>(n_rows), rvec(static_cast<std::size_t>(n_cols), 0.0));
  std::vector<std::vector<int>> counts(
      static_cast<std::size_t>(n_rows), std::vector<int>(static_cast<std::size_t>(n_cols), 0));

  const double lattice_scale = 1.0 / (static_cast<double>(n) * a_sum);
  cvec u(n);
  for (int ck = -static_cast<int>(np) / 2; ck < static_cast<int>(np) / 2; ++ck) {
    const std::size_t kbin = static_cast<std::size_t>((ck + static_cast<int>(np)) %
                                                      static_cast<int>(np));
    // e^{-j 2 pi ck (i - np/2) / np}, periodic in i
    cvec demod(np);
    for (std::size_t i = 0; i < np; ++i) {
      const double ph = -2.0 * kPi * static_cast<double>(ck) *
                        (static_cast<double>(i) - static_cast<double>(np) / 2.0) /
                        static_cast<double>(np);
      demod[i] = {std::cos(ph), std::sin(ph)};
    }
    for (std::size_t i = 0; i < n; ++i) {
      const cplx xt = xc[i][kbin] * demod[i % np];
      u[i] = (pairing == Pairing::nonconjugate)
                 ? xt * std::conj(frame.samples[i])
                 : xt * frame.samples[i];
    }
    fft_inplace(u);
    const double fk = static_cast<double>(ck) * fs / static_cast<double>(np);
    for (std::size_t qbin = 0; qbin < n; ++qbin) {
      const int q = qbin < n / 2 ? static_cast<int>(qbin)
                                 : static_cast<int>(qbin) - static_cast<int>(n);
      const double alpha = fk + static_cast<double>(q) * fs / static_cast<double>(n);
      const double f = fk / 2.0 - static_cast<double>(q) * fs / (2.0 * static_cast<double>(n));
      const int row = static_cast<int>(std::lround(alpha / row_step)) + rows_half;
      const int col = static_cast<int>(std::lround(
                          f / (fs / static_cast<double>(np)))) +
                      static_cast<int>(np) / 2;
      if (row < 0 || row >= n_rows || col < 0 || col >= n_cols) continue;
      scf.mag[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)] +=
          std::abs(u[qbin]) * lattice_scale;
      ++counts[static_cast<std::size_t>(row)][static_cast<std::size_t>(col)];
    }
  }
  for (int m = 0; m < n_rows; ++m)
    for (int c = 0; c < n_cols; ++c)
      if (counts[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)] > 0)
        scf.mag[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)] /=
            counts[static_cast<std::size_t>(m)][static_cast<std::size_t>(c)];
  return scf;
}

// Coherence is meaningless where the PSD carries no power; cells whose
// denominators fall below this fraction of the PSD peak are zeroed.
inline constexpr double kCoherencePsdFloorRel = 1e-4;

// Spectral coherence of one row against the PSD (the alpha = 0 row of the
// non-conjugate surface), denominator floor-clamped at 1e-12. For TSM
// matrices the denominator bins replicate the estimator's integer bin
// split exactly; a one-bin mismatch at a steep band edge would otherwise
// inflate the ratio.
inline rvec coherence_row(const SCFMatrix& scf, std::size_t row,
                          const rvec& psd_row) {
  const double alpha = scf.alphas_hz[row];
  const std::size_t nf = scf.freqs_hz.size();
  double psd_peak = 0.0;
  for (double v : psd_row) psd_peak = std::max(psd_peak, v);
  const double valid_floor = psd_peak * kCoherencePsdFloorRel;
  const double bin =
      scf.freqs_hz.size() > 1 ? scf.freqs_hz[1] - scf.freqs_hz[0] : 1.0;
  const bool exact_bins = scf.method == "tsm";
  const long r = std::lround(alpha / bin);
  const long chi = (r + 1) >> 1;  // ceil(r/2)
  const long clo = r - chi;       // floor(r/2)
  const long half = static_cast<long>(nf) / 2;

  rvec c(nf, 0.0);
  for (std::size_t j = 0; j < nf; ++j) {
    long k1, k2;
    if (exact_bins) {
      if (scf.pairing == Pairing::nonconjugate) {
        k1 = static_cast<long>(j) + chi;
        k2 = static_cast<long>(j) - clo;
      } else {
        const long d = static_cast<long>(j) - half;
        k1 = half + chi + d;
        k2 = half + clo - d;
      }
      if (k1 < 0 || k2 < 0 || k1 >= static_cast<long>(nf) ||
          k2 >= static_cast<long>(nf))
        continue;
    } else {
      const double f = scf.freqs_hz[j];
      const double f1 = (scf.pairing == Pairing::nonconjugate)
                            ? f + alpha / 2.0
                            : alpha / 2.0 + f;
      const double f2 = (scf.pairing == Pairing::nonconjugate)
                            ? f - alpha / 2.0
                            : alpha / 2.0 - f;
      if (f1 < scf.freqs_hz.front() || f1 > scf.freqs_hz.back() ||
          f2 < scf.freqs_hz.front() || f2 > scf.freqs_hz.back())
        continue;
      k1 = static_cast<long>(scf.freq_index(f1));
      k2 = static_cast<long>(scf.freq_index(f2));
    }
    // Binned grids (SSCA) can misalign the denominator by a cell at a
    // steep band edge; take the larger of the neighboring bins there.
    auto psd_at = [&](long k) {
      double p = psd_row[static_cast<std::size_t>(k)];
      if (!exact_bins) {
        if (k > 0) p = std::max(p, psd_row[static_cast<std::size_t>(k - 1)]);
        if (k + 1 < static_cast<long>(nf))
          p = std::max(p, psd_row[static_cast<std::size_t>(k + 1)]);
      }
      return p;
    };
    const double p1 = psd_at(k1);
    const double p2 = psd_at(k2);
    if (p1 < valid_floor || p2 < valid_floor) continue;
    c[j] = scf.mag[row][j] /
           std::sqrt(std::max(p1, 1e-12) * std::max(p2, 1e-12));
  }
  return c;
}

struct DetectedCF {
  double alpha_hz = 0.0;
  double strength = 0.0;  // peak coherence (linear)
};

// Ranks alpha != 0 rows by their max-over-f coherence (raw magnitude for
// conjugate surfaces, which carry no PSD row) and returns peaks at least
// min_snr_db (amplitude dB) above the row-median floor, strongest first.
// Rows within ~2 frequency bins of alpha = 0 measure window-mainlobe
// correlation rather than cyclic structure and are skipped.
inline std::vector<DetectedCF> detect_cfs(const SCFMatrix& scf, int max_peaks,
                                          double min_snr_db) {
  const std::size_t zero_row = scf.alpha_index(0.0);
  const rvec& psd_row = scf.mag[zero_row];
  double psd_peak = 0.0;
  for (double v : psd_row) psd_peak = std::max(psd_peak, v);
  if (psd_peak <= 0.0) return {};

  const double row_step =
      scf.alphas_hz.size() > 1 ? scf.alphas_hz[1] - scf.alphas_hz[0] : 1.0;
  const double bin_hz =
      scf.freqs_hz.size() > 1 ? scf.freqs_hz[1] - scf.freqs_hz[0] : 0.0;
  const double alpha_min = std::max(1.5 * row_step, 2.2 * bin_hz);

  std::vector<double> strength(scf.alphas_hz.size(), 0.0);
  std::vector<bool> eligible(scf.alphas_hz.size(), false);
  rvec cells;  // all valid cell values; their median is the noise floor
  for (std::size_t m = 0; m < scf.alphas_hz.size(); ++m) {
    // the non-conjugate surface is mirror-symmetric in alpha; report a > 0
    if (scf.pairing == Pairing::nonconjugate && scf.alphas_hz[m] <= 0.0)
      continue;
    if (std::abs(scf.alphas_hz[m]) < alpha_min) continue;
    // A genuine cyclic feature spans several frequency cells; ranking by
    // the second-largest valid cell suppresses single-cell noise flukes.
    double best = 0.0, second = 0.0;
    auto feed = [&](double v) {
      cells.push_back(v);
      if (v > best) {
        second = best;
        best = v;
      } else if (v > second) {
        second = v;
      }
    };
    // Coherence ranking needs the exact-bin PSD row; conjugate surfaces
    // and binned SSCA grids are ranked by raw magnitude instead.
    if (scf.pairing == Pairing::nonconjugate && scf.method == "tsm") {
      const rvec c = coherence_row(scf, m, psd_row);
      // skip f ~ 0: real-valued signals have X(-f) = conj(X(f)), which
      // makes that column degenerate at every alpha
      for (std::size_t j = 0; j < c.size(); ++j)
        if (c[j] > 0.0 && std::abs(scf.freqs_hz[j]) > 0.9 * bin_hz) feed(c[j]);
    } else {
      for (double v : scf.mag[m])
        if (v > 0.0) feed(v);
    }
    if (best <= 0.0) continue;  // no cell with measurable power
    strength[m] = second > 0.0 ? second : best;
    eligible[m] = true;
  }

  if (cells.empty()) return {};
  std::nth_element(cells.begin(), cells.begin() + cells.size() / 2, cells.end());
  const double floor_level = std::max(cells[cells.size() / 2], 1e-300);
  const double thresh = floor_level * std::pow(10.0, min_snr_db / 20.0);

  std::vector<DetectedCF> peaks;
  for (std::size_t m = 1; m + 1 < strength.size(); ++m) {
    if (!eligible[m] || strength[m] < thresh) continue;
    const double left = eligible[m - 1] ? strength[m - 1] : 0.0;
    const double right = eligible[m + 1] ? strength[m + 1] : 0.0;
    if (strength[m] >= left && strength[m] > right)
      peaks.push_back({scf.alphas_hz[m], strength[m]});
  }
  std::sort(peaks.begin(), peaks.end(),
            [](const DetectedCF& a, const DetectedCF& b) {
              return a.strength > b.strength;
            });
  if (max_peaks >= 0 && peaks.size() > static_cast<std::size_t>(max_peaks))
    peaks.resize(static_cast<std::size_t>(max_peaks));
  return peaks;
}

struct CumulantVec {
  cplx c20{0, 0};
  double c21 = 0.0;
  cplx c40{0, 0};
  cplx c41{0, 0};
  double c42 = 0.0;
  bool normalized = false;
};

// Moment-based order-2/order-4 cumulants of the mean-removed sequence.
// The normalized variant divides c20 by c21 and the order-4 terms by c21^2.
inline CumulantVec cumulants(const cvec& samples, bool normalize = true) {
  const std::size_t n = samples.size();
  if (n < 1000) throw EstimationError("cumulants: need at least 1000 samples");

  cplx mean(0, 0);
  for (const auto& v : samples) mean += v;
  mean /= static_cast<double>(n);

  cplx m20(0, 0), m40(0, 0), m41(0, 0);
  double m21 = 0.0, m42 = 0.0;
  for (const auto& s : samples) {
    const cplx x = s - mean;
    const cplx x2 = x * x;
    const double p = std::norm(x);
    m20 += x2;
    m21 += p;
    m40 += x2 * x2;
    m41 += x2 * x * std::conj(x);
    m42 += p * p;
  }
  const double dn = static_cast<double>(n);
  m20 /= dn;
  m21 /= dn;
  m40 /= dn;
  m41 /= dn;
  m42 /= dn;

  CumulantVec c;
  c.c20 = m20;
  c.c21 = m21;
  c.c40 = m40 - 3.0 * m20 * m20;
  c.c41 = m41 - 3.0 * m20 * m21;
  c.c42 = m42 - std::norm(m20) - 2.0 * m21 * m21;
  if (normalize && m21 > 0.0) {
    c.c20 /= m21;
    c.c40 /= m21 * m21;
    c.c41 /= m21 * m21;
    c.c42 /= m21 * m21;
    c.c21 = 1.0;
    c.normalized = true;
  }
  return c;
}

// Row-major out_dim x in_dim i.i.d. standard Gaussian matrix, fixed per seed.
inline rvec gaussian_projection(std::size_t out_dim, std::size_t in_dim,
                                std::uint64_t seed) {
  Rng rng(seed);
  rvec g(out_dim * in_dim);
  for (auto& v : g) v = rng.gaussian();
  return g;
}

// y = G x / sqrt(out_dim); distance-preserving in the Johnson-Lindenstrauss
// sense for out_dim large enough.
inline rvec compress_features(const rvec& vec, std::size_t out_dim,
                              std::uint64_t seed) {
  if (out_dim == 0) throw ParameterError("compress_features: out_dim must be > 0");
  if (out_dim > vec.size())
    throw ParameterError("compress_features: out_dim exceeds input dimension");
  const rvec g = gaussian_projection(out_dim, vec.size(), seed);
  rvec y(out_dim, 0.0);
  const double s = 1.0 / std::sqrt(static_cast<double>(out_dim));
  for (std::size_t i = 0; i < out_dim; ++i) {
    double acc = 0.0;
    const double* row = g.data() + i * vec.size();
    for (std::size_t j = 0; j < vec.size(); ++j) acc += row[j] * vec[j];
    y[i] = acc * s;
  }
  return y;
}

inline constexpr int kFeatureGrid = 64;

// Stacked classifier feature: coherence-normalized SCF magnitude from both
// pairings, downsampled to two kFeatureGrid x kFeatureGrid grids
// (alpha rows above 0 up to fs/2, frequency bins pooled in pairs).
inline std::vector<float> scf_feature(const IQFrame& frame) {
  const double fs = frame.sample_rate_hz;
  const std::size_t nfft = 128;
  const int n_blocks = 32;
  const double alpha_res = fs / 128.0;

  const SCFMatrix nc = scf_tsm(frame, nfft, n_blocks, alpha_res, Pairing::nonconjugate);
  const SCFMatrix cj = scf_tsm(frame, nfft, n_blocks, alpha_res, Pairing::conjugate);
  const rvec& psd_row = nc.mag[nc.alpha_index(0.0)];

  std::vector<float> feat;
  feat.reserve(2 * kFeatureGrid * kFeatureGrid);
  for (const SCFMatrix* scf : {&nc, &cj}) {
    const std::size_t zero = scf->alpha_index(0.0);
    for (int m = 1; m <= kFeatureGrid; ++m) {
      const rvec c = coherence_row(*scf, zero + static_cast<std::size_t>(m), psd_row);
      for (int j = 0; j < kFeatureGrid; ++j) {
        const double v = 0.5 * (c[static_cast<std::size_t>(2 * j)] +
                                c[static_cast<std::size_t>(2 * j + 1)]);
        feat.push_back(static_cast<float>(std::min(v, 2.0)));
      }
    }
  }
  return feat;
}

// Coherence slices at chosen cyclic frequencies, the feature behind the
// known-CF vs random-CF comparison. Each request is (pairing, alpha_hz).
inline std::vector<float> scf_slice_feature(
    const IQFrame& frame,
    const std::vector<std::pair<Pairing, double>>& slices) {
  const double fs = frame.sample_rate_hz;
  const SCFMatrix nc = scf_tsm(frame, 128, 32, fs / 256.0, Pairing::nonconjugate);
  const SCFMatrix cj = scf_tsm(frame, 128, 32, fs / 256.0, Pairing::conjugate);
  const rvec& psd_row = nc.mag[nc.alpha_index(0.0)];

  std::vector<float> feat;
  for (const auto& [pairing, alpha] : slices) {
    const SCFMatrix& scf = pairing == Pairing::nonconjugate ? nc : cj;
    const rvec c = coherence_row(scf, scf.alpha_index(alpha), psd_row);
    for (double v : c) feat.push_back(static_cast<float>(std::min(v, 2.0)));
  }
  return feat;
}

// CSV export of an SCF magnitude grid: alpha_hz,freq_hz,mag rows.
inline void export_scf_csv(const SCFMatrix& scf, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open " + path);
  os << "alpha_hz,freq_hz,mag\n";
  for (std::size_t m = 0; m < scf.alphas_hz.size(); ++m)
    for (std::size_t j = 0; j < scf.freqs_hz.size(); ++j)
      os << scf.alphas_hz[m] << "," << scf.freqs_hz[j] << "," << scf.mag[m][j]
         << "\n";
}

}  // namespace rfwb::cyclo
