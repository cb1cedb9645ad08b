// Iterative radix-2 FFT for power-of-two sizes, with shift helpers.
#pragma once

#include <bit>

#include "rfwb/common.hpp"

namespace rfwb {

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

namespace detail {

// Twiddle table for one size, grown lazily. thread_local keeps estimators
// reentrant without locking.
inline const cvec& twiddles(std::size_t n) {
  thread_local std::size_t cached_n = 0;
  thread_local cvec table;
  if (cached_n != n) {
    table.resize(n / 2);
    for (std::size_t k = 0; k < n / 2; ++k) {
      const double a = -2.0 * kPi * static_cast<double>(k) / static_cast<double>(n);
      table[k] = {std::cos(a), std::sin(a)};
    }
    cached_n = n;
  }
  return table;
}

}  // namespace detail

// In-place forward DFT, x.size() must be a power of two.
inline void fft_inplace(cvec& x) {
  const std::size_t n = x.size();
  if (n <= 1) return;
  if (!is_pow2(n)) throw ParameterError("fft: size must be a power of two");

  // bit-reversal permutation
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(x[i], x[j]);
  }

  const cvec& tw = detail::twiddles(n);
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const std::size_t step = n / len;
    for (std::size_t i = 0; i < n; i += len) {
      for (std::size_t k = 0; k < len / 2; ++k) {
        const cplx w = tw[k * step];
        const cplx u = x[i + k];
        const cplx v = x[i + k + len / 2] * w;
        x[i + k] = u + v;
        x[i + k + len / 2] = u - v;
      }
    }
  }
}

inline cvec fft(cvec x) {
  fft_inplace(x);
  return x;
}

inline void ifft_inplace(cvec& x) {
  for (auto& v : x) v = std::conj(v);
  fft_inplace(x);
  const double s = 1.0 / static_cast<double>(x.size());
  for (auto& v : x) v = std::conj(v) * s;
}

// Reorders an FFT result so bin 0 (DC) sits at index n/2.
template <typename Vec>
inline Vec fftshift(const Vec& x) {
  const std::size_t n = x.size();
  Vec y(n);
  const std::size_t h = n / 2;
  for (std::size_t i = 0; i < n; ++i) y[i] = x[(i + h) % n];
  return y;
}

// Frequency axis matching fftshift order: n bins spanning [-fs/2, fs/2).
inline rvec fft_freqs(std::size_t n, double fs) {
  rvec f(n);
  const double df = fs / static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    f[i] = (static_cast<double>(i) - static_cast<double>(n / 2)) * df;
  return f;
}

}  // namespace rfwb
