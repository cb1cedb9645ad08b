// Shared aliases, error types and small helpers used across the library.
#pragma once

#include <complex>
#include <cstdint>
#include <functional>
#include <numbers>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace rfwb {

using cplx = std::complex<double>;
using cvec = std::vector<cplx>;
using rvec = std::vector<double>;

inline constexpr double kPi = std::numbers::pi;
inline constexpr const char* kCodeVersion = "0.3.0";

// Thrown when an argument violates an operation's stated precondition.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Thrown when inputs are outside the validity region of a physical model.
class OutOfModelError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class CaptureError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class EstimationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DivergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File-format errors carry a distinct kind so callers can tell them apart.
class FormatError : public std::runtime_error {
 public:
  enum class Kind { version_mismatch, truncation, checksum, malformed };

  FormatError(Kind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

inline double db_to_lin(double db) { return std::pow(10.0, db / 10.0); }
inline double lin_to_db(double lin) { return 10.0 * std::log10(lin); }

inline double mean_power(const cvec& x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (const auto& v : x) acc += std::norm(v);
  return acc / static_cast<double>(x.size());
}

// Scales x to unit mean power. Zero input is left untouched.
inline void normalize_power(cvec& x) {
  const double p = mean_power(x);
  if (p <= 0.0) return;
  const double s = 1.0 / std::sqrt(p);
  for (auto& v : x) v *= s;
}

// Runs fn(i) for i in [0, n). Work is split into a fixed chunk grid so the
// result layout is identical for any worker count; fn must write only to
// slots owned by its index.
inline void parallel_for(std::size_t n, unsigned threads,
                         const std::function<void(std::size_t)>& fn) {
  if (n == 0) return;
  if (threads <= 1 || n < 4) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  std::size_t per = (n + threads - 1) / threads;
  for (unsigned t = 0; t < threads; ++t) {
    std::size_t lo = t * per;
    std::size_t hi = std::min(n, lo + per);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

// FNV-1a, used for config hashes embedded in artifacts.
inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 1469598103934665603ull;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace rfwb
