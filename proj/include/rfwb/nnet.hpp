// Minimal CNN engine: 2-D convolution, batch normalization, ReLU, max and
// average pooling, dense, dropout and softmax with cross-entropy, trained
// by SGD with momentum through full backpropagation. Double precision
// throughout; softmax uses max subtraction.
//
// Activations live in the model between forward and backward, layers write
// into reusable buffers. Convolutions run their batch loop in two fixed
// chunks so threaded and serial runs are bit-identical.
#pragma once

#include <chrono>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>

#include <json.hpp>

#include "rfwb/rng.hpp"

namespace rfwb::nnet {

struct Tensor {
  std::vector<int> dims;
  rvec data;

  Tensor() = default;
  explicit Tensor(std::vector<int> d) : dims(std::move(d)) {
    data.assign(static_cast<std::size_t>(numel()), 0.0);
  }

  long numel() const {
    long n = 1;
    for (int d : dims) n *= d;
    return n;
  }
  void zero() { std::fill(data.begin(), data.end(), 0.0); }
  // Reshape in place, reusing storage when the element count matches.
  void ensure(const std::vector<int>& d) {
    if (dims == d) return;
    dims = d;
    data.assign(static_cast<std::size_t>(numel()), 0.0);
  }
};

inline std::string dims_str(const std::vector<int>& d) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < d.size(); ++i) os << (i ? "x" : "") << d[i];
  os << "]";
  return os.str();
}

namespace detail {

// Runs fn(0) and fn(1) on up to two threads. The split is fixed, so the
// result is identical however many threads execute it.
inline void run_two_chunks(const std::function<void(int)>& fn, bool threaded) {
  if (!threaded) {
    fn(0);
    fn(1);
    return;
  }
  std::thread t([&] { fn(0); });
  fn(1);
  t.join();
}

}  // namespace detail

// Activations move through layers as [batch, channels, height, width].
class Layer {
 public:
  virtual ~Layer() = default;
  virtual std::string kind() const = 0;
  // Resolves output dims from input dims (per sample, no batch) and
  // allocates parameters.
  virtual std::vector<int> setup(const std::vector<int>& in, Rng& rng) = 0;
  virtual void forward(const Tensor& in, Tensor& out, bool training,
                       Rng& rng) = 0;
  // in/out are the activations recorded by the matching forward call.
  virtual void backward(const Tensor& in, const Tensor& out,
                        const Tensor& grad_out, Tensor& grad_in) = 0;
  virtual std::vector<Tensor*> params() { return {}; }
  virtual std::vector<Tensor*> grads() { return {}; }
  // Parameters plus non-learnable state (batchnorm running stats).
  virtual std::vector<Tensor*> state() { return params(); }
  virtual nlohmann::json spec() const = 0;
};

class Conv2d : public Layer {
 public:
  Conv2d(int maps, int kh, int kw) : maps_(maps), kh_(kh), kw_(kw) {}
  std::string kind() const override { return "conv2d"; }

  std::vector<int> setup(const std::vector<int>& in, Rng& rng) override {
    in_ = in;
    if (in.size() != 3 || in[1] < kh_ || in[2] < kw_)
      throw ShapeError("conv2d: input " + dims_str(in) + " too small for " +
                       std::to_string(kh_) + "x" + std::to_string(kw_));
    const int c = in[0];
    w_ = Tensor({maps_, c, kh_, kw_});
    b_ = Tensor({maps_});
    gw_ = Tensor(w_.dims);
    gb_ = Tensor(b_.dims);
    const double limit = std::sqrt(6.0 / (c * kh_ * kw_));
    for (auto& v : w_.data) v = rng.uniform(-limit, limit);
    out_ = {maps_, in[1] - kh_ + 1, in[2] - kw_ + 1};
    return out_;
  }

  void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
    const int b = in.dims[0], c = in_[0], ih = in_[1], iw = in_[2];
    const int oh = out_[1], ow = out_[2];
    out.ensure({b, maps_, oh, ow});
    auto work = [&](int chunk) {
      const int n0 = chunk == 0 ? 0 : b / 2;
      const int n1 = chunk == 0 ? b / 2 : b;
      for (int n = n0; n < n1; ++n) {
        const double* xb = in.data.data() + static_cast<long>(n) * c * ih * iw;
        double* yb = out.data.data() + static_cast<long>(n) * maps_ * oh * ow;
        for (int m = 0; m < maps_; ++m) {
          const double bias = b_.data[static_cast<std::size_t>(m)];
          for (int y = 0; y < oh; ++y) {
            double* dst = yb + (static_cast<long>(m) * oh + y) * ow;
            for (int x = 0; x < ow; ++x) dst[x] = bias;
          }
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < kh_; ++ky)
              for (int kx = 0; kx < kw_; ++kx) {
                const double wv =
                    w_.data[((static_cast<std::size_t>(m) * c + ci) * kh_ + ky) *
                                kw_ +
                            kx];
                for (int y = 0; y < oh; ++y) {
                  const double* src =
                      xb + (static_cast<long>(ci) * ih + y + ky) * iw + kx;
                  double* dst = yb + (static_cast<long>(m) * oh + y) * ow;
                  for (int x = 0; x < ow; ++x) dst[x] += wv * src[x];
                }
              }
        }
      }
    };
    detail::run_two_chunks(work, threaded && b > 1);
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    const int b = in.dims[0], c = in_[0], ih = in_[1], iw = in_[2];
    const int oh = out_[1], ow = out_[2];
    grad_in.ensure(in.dims);
    grad_in.zero();
    gw_.zero();
    gb_.zero();
    // two fixed batch chunks with private weight-gradient buffers, reduced
    // in chunk order
    gw_chunk_[0].ensure(w_.dims);
    gw_chunk_[1].ensure(w_.dims);
    gb_chunk_[0].ensure(b_.dims);
    gb_chunk_[1].ensure(b_.dims);
    gw_chunk_[0].zero();
    gw_chunk_[1].zero();
    gb_chunk_[0].zero();
    gb_chunk_[1].zero();

    auto work = [&](int chunk) {
      Tensor& gw = gw_chunk_[chunk];
      Tensor& gb = gb_chunk_[chunk];
      const int n0 = chunk == 0 ? 0 : b / 2;
      const int n1 = chunk == 0 ? b / 2 : b;
      for (int n = n0; n < n1; ++n) {
        const double* xb = in.data.data() + static_cast<long>(n) * c * ih * iw;
        const double* gyb =
            grad_out.data.data() + static_cast<long>(n) * maps_ * oh * ow;
        double* gxb = grad_in.data.data() + static_cast<long>(n) * c * ih * iw;
        for (int m = 0; m < maps_; ++m) {
          for (int y = 0; y < oh; ++y) {
            const double* gy = gyb + (static_cast<long>(m) * oh + y) * ow;
            double acc = 0.0;
            for (int x = 0; x < ow; ++x) acc += gy[x];
            gb.data[static_cast<std::size_t>(m)] += acc;
          }
          for (int ci = 0; ci < c; ++ci)
            for (int ky = 0; ky < kh_; ++ky)
              for (int kx = 0; kx < kw_; ++kx) {
                const std::size_t widx =
                    ((static_cast<std::size_t>(m) * c + ci) * kh_ + ky) * kw_ +
                    kx;
                const double wv = w_.data[widx];
                double acc = 0.0;
                for (int y = 0; y < oh; ++y) {
                  const double* gy = gyb + (static_cast<long>(m) * oh + y) * ow;
                  const double* src =
                      xb + (static_cast<long>(ci) * ih + y + ky) * iw + kx;
                  double* gsrc =
                      gxb + (static_cast<long>(ci) * ih + y + ky) * iw + kx;
                  for (int x = 0; x < ow; ++x) {
                    acc += gy[x] * src[x];
                    gsrc[x] += gy[x] * wv;
                  }
                }
                gw.data[widx] += acc;
              }
        }
      }
    };
    detail::run_two_chunks(work, threaded && b > 1);
    for (int chunk = 0; chunk < 2; ++chunk) {
      for (std::size_t i = 0; i < gw_.data.size(); ++i)
        gw_.data[i] += gw_chunk_[chunk].data[i];
      for (std::size_t i = 0; i < gb_.data.size(); ++i)
        gb_.data[i] += gb_chunk_[chunk].data[i];
    }
  }

  std::vector<Tensor*> params() override { return {&w_, &b_}; }
  std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }
  nlohmann::json spec() const override {
    return {{"kind", "conv2d"}, {"maps", maps_}, {"kh", kh_}, {"kw", kw_}};
  }

  static inline bool threaded = true;

 private:
  int maps_, kh_, kw_;
  std::vector<int> in_, out_;
  Tensor w_, b_, gw_, gb_;
  Tensor gw_chunk_[2], gb_chunk_[2];
};

class BatchNorm : public Layer {
 public:
  std::string kind() const override { return "batchnorm"; }

  std::vector<int> setup(const std::vector<int>& in, Rng&) override {
    in_ = in;
    channels_ = in[0];
    gamma_ = Tensor({channels_});
    beta_ = Tensor({channels_});
    ggamma_ = Tensor({channels_});
    gbeta_ = Tensor({channels_});
    run_mean_ = Tensor({channels_});
    run_var_ = Tensor({channels_});
    for (auto& v : gamma_.data) v = 1.0;
    for (auto& v : run_var_.data) v = 1.0;
    return in;
  }

  void forward(const Tensor& in, Tensor& out, bool training, Rng&) override {
    const int b = in.dims[0];
    const long plane = static_cast<long>(in_.size() > 1 ? in_[1] * in_[2] : 1);
    const long per_sample = channels_ * plane;
    out.ensure(in.dims);
    mean_.assign(static_cast<std::size_t>(channels_), 0.0);
    var_.assign(static_cast<std::size_t>(channels_), 0.0);
    const double m = static_cast<double>(b) * static_cast<double>(plane);

    for (int c = 0; c < channels_; ++c) {
      double mu, v;
      if (training) {
        mu = 0.0;
        for (int n = 0; n < b; ++n) {
          const double* x = in.data.data() + n * per_sample + c * plane;
          for (long i = 0; i < plane; ++i) mu += x[i];
        }
        mu /= m;
        v = 0.0;
        for (int n = 0; n < b; ++n) {
          const double* x = in.data.data() + n * per_sample + c * plane;
          for (long i = 0; i < plane; ++i) v += (x[i] - mu) * (x[i] - mu);
        }
        v /= m;
        run_mean_.data[c] = 0.9 * run_mean_.data[c] + 0.1 * mu;
        run_var_.data[c] = 0.9 * run_var_.data[c] + 0.1 * v;
      } else {
        mu = run_mean_.data[c];
        v = run_var_.data[c];
      }
      mean_[c] = mu;
      var_[c] = v;
      const double inv = 1.0 / std::sqrt(v + kEps);
      const double g = gamma_.data[c], bt = beta_.data[c];
      for (int n = 0; n < b; ++n) {
        const double* x = in.data.data() + n * per_sample + c * plane;
        double* y = out.data.data() + n * per_sample + c * plane;
        for (long i = 0; i < plane; ++i) y[i] = g * (x[i] - mu) * inv + bt;
      }
    }
    training_ = training;
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    const int b = grad_out.dims[0];
    const long plane = static_cast<long>(in_.size() > 1 ? in_[1] * in_[2] : 1);
    const long per_sample = channels_ * plane;
    const double m = static_cast<double>(b) * static_cast<double>(plane);
    grad_in.ensure(grad_out.dims);
    ggamma_.zero();
    gbeta_.zero();

    for (int c = 0; c < channels_; ++c) {
      const double mu = mean_[c];
      const double inv = 1.0 / std::sqrt(var_[c] + kEps);
      const double g = gamma_.data[c];
      double sum_gy = 0.0, sum_gy_xh = 0.0;
      for (int n = 0; n < b; ++n) {
        const double* gy = grad_out.data.data() + n * per_sample + c * plane;
        const double* x = in.data.data() + n * per_sample + c * plane;
        for (long i = 0; i < plane; ++i) {
          sum_gy += gy[i];
          sum_gy_xh += gy[i] * (x[i] - mu) * inv;
        }
      }
      ggamma_.data[c] = sum_gy_xh;
      gbeta_.data[c] = sum_gy;
      for (int n = 0; n < b; ++n) {
        const double* gy = grad_out.data.data() + n * per_sample + c * plane;
        const double* x = in.data.data() + n * per_sample + c * plane;
        double* gx = grad_in.data.data() + n * per_sample + c * plane;
        if (training_) {
          for (long i = 0; i < plane; ++i) {
            const double xh = (x[i] - mu) * inv;
            gx[i] = g * inv * (gy[i] - sum_gy / m - xh * sum_gy_xh / m);
          }
        } else {
          for (long i = 0; i < plane; ++i) gx[i] = g * inv * gy[i];
        }
      }
    }
  }

  std::vector<Tensor*> params() override { return {&gamma_, &beta_}; }
  std::vector<Tensor*> grads() override { return {&ggamma_, &gbeta_}; }
  std::vector<Tensor*> state() override {
    return {&gamma_, &beta_, &run_mean_, &run_var_};
  }
  nlohmann::json spec() const override { return {{"kind", "batchnorm"}}; }

  static constexpr double kEps = 1e-5;

 private:
  int channels_ = 0;
  std::vector<int> in_;
  Tensor gamma_, beta_, ggamma_, gbeta_, run_mean_, run_var_;
  rvec mean_, var_;
  bool training_ = false;
};

class ReLU : public Layer {
 public:
  std::string kind() const override { return "relu"; }
  std::vector<int> setup(const std::vector<int>& in, Rng&) override { return in; }
  void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
    out.ensure(in.dims);
    for (std::size_t i = 0; i < in.data.size(); ++i)
      out.data[i] = in.data[i] > 0.0 ? in.data[i] : 0.0;
  }
  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    grad_in.ensure(grad_out.dims);
    for (std::size_t i = 0; i < grad_in.data.size(); ++i)
      grad_in.data[i] = in.data[i] > 0.0 ? grad_out.data[i] : 0.0;
  }
  nlohmann::json spec() const override { return {{"kind", "relu"}}; }
};

class Pool : public Layer {
 public:
  Pool(bool take_max, int kh, int kw, int sh, int sw)
      : max_(take_max), kh_(kh), kw_(kw), sh_(sh), sw_(sw) {}
  std::string kind() const override { return max_ ? "maxpool" : "avgpool"; }

  std::vector<int> setup(const std::vector<int>& in, Rng&) override {
    in_ = in;
    if (in[1] < kh_ || in[2] < kw_)
      throw ShapeError(kind() + ": input " + dims_str(in) + " smaller than window");
    out_ = {in[0], (in[1] - kh_) / sh_ + 1, (in[2] - kw_) / sw_ + 1};
    return out_;
  }

  void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
    const int b = in.dims[0], c = in_[0], ih = in_[1], iw = in_[2];
    const int oh = out_[1], ow = out_[2];
    out.ensure({b, c, oh, ow});
    if (max_) argmax_.assign(out.data.size(), 0);
    const double inv = 1.0 / (kh_ * kw_);
    for (int n = 0; n < b; ++n)
      for (int ci = 0; ci < c; ++ci) {
        const double* x =
            in.data.data() + (static_cast<long>(n) * c + ci) * ih * iw;
        double* y =
            out.data.data() + (static_cast<long>(n) * c + ci) * oh * ow;
        long* am = max_ ? argmax_.data() + (static_cast<long>(n) * c + ci) * oh * ow
                        : nullptr;
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const int y0 = oy * sh_, x0 = ox * sw_;
            if (max_) {
              double best = x[static_cast<long>(y0) * iw + x0];
              long best_idx = static_cast<long>(y0) * iw + x0;
              for (int ky = 0; ky < kh_; ++ky)
                for (int kx = 0; kx < kw_; ++kx) {
                  const long idx = static_cast<long>(y0 + ky) * iw + x0 + kx;
                  if (x[idx] > best) {
                    best = x[idx];
                    best_idx = idx;
                  }
                }
              y[static_cast<long>(oy) * ow + ox] = best;
              am[static_cast<long>(oy) * ow + ox] = best_idx;
            } else {
              double acc = 0.0;
              for (int ky = 0; ky < kh_; ++ky)
                for (int kx = 0; kx < kw_; ++kx)
                  acc += x[static_cast<long>(y0 + ky) * iw + x0 + kx];
              y[static_cast<long>(oy) * ow + ox] = acc * inv;
            }
          }
      }
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    const int b = grad_out.dims[0], c = in_[0], ih = in_[1], iw = in_[2];
    const int oh = out_[1], ow = out_[2];
    grad_in.ensure(in.dims);
    grad_in.zero();
    const double inv = 1.0 / (kh_ * kw_);
    for (int n = 0; n < b; ++n)
      for (int ci = 0; ci < c; ++ci) {
        const double* gy =
            grad_out.data.data() + (static_cast<long>(n) * c + ci) * oh * ow;
        double* gx =
            grad_in.data.data() + (static_cast<long>(n) * c + ci) * ih * iw;
        const long* am =
            max_ ? argmax_.data() + (static_cast<long>(n) * c + ci) * oh * ow
                 : nullptr;
        for (int oy = 0; oy < oh; ++oy)
          for (int ox = 0; ox < ow; ++ox) {
            const double g = gy[static_cast<long>(oy) * ow + ox];
            if (max_) {
              gx[am[static_cast<long>(oy) * ow + ox]] += g;
            } else {
              const int y0 = oy * sh_, x0 = ox * sw_;
              for (int ky = 0; ky < kh_; ++ky)
                for (int kx = 0; kx < kw_; ++kx)
                  gx[static_cast<long>(y0 + ky) * iw + x0 + kx] += g * inv;
            }
          }
      }
  }

  nlohmann::json spec() const override {
    return {{"kind", kind()}, {"kh", kh_}, {"kw", kw_}, {"sh", sh_}, {"sw", sw_}};
  }

 private:
  bool max_;
  int kh_, kw_, sh_, sw_;
  std::vector<int> in_, out_;
  std::vector<long> argmax_;
};

class Dense : public Layer {
 public:
  explicit Dense(int units) : units_(units) {}
  std::string kind() const override { return "dense"; }

  std::vector<int> setup(const std::vector<int>& in, Rng& rng) override {
    in_features_ = 1;
    for (int d : in) in_features_ *= d;
    w_ = Tensor({units_, in_features_});
    b_ = Tensor({units_});
    gw_ = Tensor(w_.dims);
    gb_ = Tensor(b_.dims);
    const double limit = std::sqrt(6.0 / in_features_);
    for (auto& v : w_.data) v = rng.uniform(-limit, limit);
    return {units_};
  }

  void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
    const int b = in.dims[0];
    out.ensure({b, units_});
    for (int n = 0; n < b; ++n) {
      const double* x = in.data.data() + static_cast<long>(n) * in_features_;
      double* y = out.data.data() + static_cast<long>(n) * units_;
      for (int u = 0; u < units_; ++u) {
        const double* wr = w_.data.data() + static_cast<long>(u) * in_features_;
        double acc = b_.data[static_cast<std::size_t>(u)];
        for (int i = 0; i < in_features_; ++i) acc += wr[i] * x[i];
        y[u] = acc;
      }
    }
  }

  void backward(const Tensor& in, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    const int b = grad_out.dims[0];
    grad_in.ensure(in.dims);
    grad_in.zero();
    gw_.zero();
    gb_.zero();
    for (int n = 0; n < b; ++n) {
      const double* x = in.data.data() + static_cast<long>(n) * in_features_;
      const double* gy = grad_out.data.data() + static_cast<long>(n) * units_;
      double* gx = grad_in.data.data() + static_cast<long>(n) * in_features_;
      for (int u = 0; u < units_; ++u) {
        const double g = gy[u];
        gb_.data[static_cast<std::size_t>(u)] += g;
        double* gwr = gw_.data.data() + static_cast<long>(u) * in_features_;
        const double* wr = w_.data.data() + static_cast<long>(u) * in_features_;
        for (int i = 0; i < in_features_; ++i) {
          gwr[i] += g * x[i];
          gx[i] += g * wr[i];
        }
      }
    }
  }

  std::vector<Tensor*> params() override { return {&w_, &b_}; }
  std::vector<Tensor*> grads() override { return {&gw_, &gb_}; }
  nlohmann::json spec() const override {
    return {{"kind", "dense"}, {"units", units_}};
  }

 private:
  int units_, in_features_ = 0;
  Tensor w_, b_, gw_, gb_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double rate) : rate_(rate) {
    if (rate < 0.0 || rate >= 1.0)
      throw ParameterError("dropout: rate outside [0, 1)");
  }
  std::string kind() const override { return "dropout"; }
  std::vector<int> setup(const std::vector<int>& in, Rng&) override { return in; }

  void forward(const Tensor& in, Tensor& out, bool training, Rng& rng) override {
    out.ensure(in.dims);
    if (!training || rate_ == 0.0) {
      out.data = in.data;
      active_ = false;
      return;
    }
    active_ = true;
    mask_.assign(in.data.size(), 0.0);
    const double scale = 1.0 / (1.0 - rate_);
    for (std::size_t i = 0; i < out.data.size(); ++i) {
      if (rng.uniform() >= rate_) {
        mask_[i] = scale;
        out.data[i] = in.data[i] * scale;
      } else {
        out.data[i] = 0.0;
      }
    }
  }

  void backward(const Tensor&, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    grad_in.ensure(grad_out.dims);
    if (!active_) {
      grad_in.data = grad_out.data;
      return;
    }
    for (std::size_t i = 0; i < grad_in.data.size(); ++i)
      grad_in.data[i] = grad_out.data[i] * mask_[i];
  }

  nlohmann::json spec() const override {
    return {{"kind", "dropout"}, {"rate", rate_}};
  }

 private:
  double rate_;
  rvec mask_;
  bool active_ = false;
};

class Softmax : public Layer {
 public:
  std::string kind() const override { return "softmax"; }
  std::vector<int> setup(const std::vector<int>& in, Rng&) override {
    if (in.size() != 1)
      throw ShapeError("softmax: expects a flat class vector, got " + dims_str(in));
    return in;
  }
  void forward(const Tensor& in, Tensor& out, bool, Rng&) override {
    const int b = in.dims[0], k = in.dims[1];
    out.ensure(in.dims);
    for (int n = 0; n < b; ++n) {
      const double* x = in.data.data() + static_cast<long>(n) * k;
      double* y = out.data.data() + static_cast<long>(n) * k;
      double mx = x[0];
      for (int i = 1; i < k; ++i) mx = std::max(mx, x[i]);
      double sum = 0.0;
      for (int i = 0; i < k; ++i) {
        y[i] = std::exp(x[i] - mx);
        sum += y[i];
      }
      for (int i = 0; i < k; ++i) y[i] /= sum;
    }
  }
  // Softmax gradients are folded into the cross-entropy delta; the model
  // starts backprop below this layer.
  void backward(const Tensor&, const Tensor&, const Tensor& grad_out,
                Tensor& grad_in) override {
    grad_in.ensure(grad_out.dims);
    grad_in.data = grad_out.data;
  }
  nlohmann::json spec() const override { return {{"kind", "softmax"}}; }
};

struct Hyper {
  double lr = 0.01;
  double momentum = 0.9;
  int batch = 64;
  int epochs = 30;
  double dropout = 0.5;
};

namespace detail {

inline void check_input(const Tensor& t, const std::vector<int>& expect) {
  if (std::vector<int>(t.dims.begin() + 1, t.dims.end()) != expect)
    throw ShapeError("layer 0 (input): batch dims " + dims_str(t.dims) +
                     " do not match model input " + dims_str(expect));
}

}  // namespace detail

class NNModel {
 public:
  NNModel(std::string arch, std::vector<int> input_dims, int classes,
          Hyper hyper, std::uint64_t seed)
      : arch_(std::move(arch)),
        input_dims_(std::move(input_dims)),
        classes_(classes),
        hyper_(hyper),
        seed_(seed),
        rng_(derive_seed(seed, 0xd0)) {
    build();
    Rng init(derive_seed(seed_, 0x11));
    std::vector<int> dims = input_dims_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      try {
        dims = layers_[i]->setup(dims, init);
      } catch (const ShapeError& e) {
        throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
      }
    }
    if (dims != std::vector<int>{classes_})
      throw ShapeError("arch " + arch_ + ": final dims " + dims_str(dims) +
                       " do not match " + std::to_string(classes_) + " classes");
    for (auto& l : layers_)
      for (Tensor* p : l->params()) velocity_.emplace_back(p->dims);
    acts_.resize(layers_.size() + 1);
  }

  const std::string& arch() const { return arch_; }
  const std::vector<int>& input_dims() const { return input_dims_; }
  int classes() const { return classes_; }
  const Hyper& hyper() const { return hyper_; }
  Hyper& hyper() { return hyper_; }
  std::uint64_t seed() const { return seed_; }
  std::vector<std::unique_ptr<Layer>>& layers() { return layers_; }

  // Class probabilities for a batch; rows sum to 1.
  Tensor forward(const Tensor& batch, bool training) {
    detail::check_input(batch, input_dims_);
    acts_[0] = batch;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      layers_[i]->forward(acts_[i], acts_[i + 1], training, rng_);
    return acts_.back();
  }

  // One SGD-momentum step on a batch; returns the mean cross-entropy.
  double backward_and_step(const Tensor& batch, const std::vector<int>& labels) {
    const int b = batch.dims[0];
    if (static_cast<int>(labels.size()) != b)
      throw ParameterError("backward_and_step: labels/batch size mismatch");
    for (int y : labels)
      if (y < 0 || y >= classes_)
        throw ParameterError("backward_and_step: label out of range");

    const Tensor& probs = forward(batch, true);
    double loss = 0.0;
    for (int n = 0; n < b; ++n)
      loss -= std::log(std::max(probs.data[static_cast<long>(n) * classes_ +
                                           labels[static_cast<std::size_t>(n)]],
                                1e-300));
    loss /= b;
    if (!std::isfinite(loss))
      throw DivergenceError("training loss is not finite");

    // softmax + cross-entropy gradient is (p - y)/b at the logits
    grad_a_ = probs;
    for (int n = 0; n < b; ++n)
      grad_a_.data[static_cast<long>(n) * classes_ +
                   labels[static_cast<std::size_t>(n)]] -= 1.0;
    for (auto& v : grad_a_.data) v /= b;

    Tensor* gout = &grad_a_;
    Tensor* gin = &grad_b_;
    for (std::size_t i = layers_.size() - 1; i-- > 0;) {
      layers_[i]->backward(acts_[i], acts_[i + 1], *gout, *gin);
      std::swap(gout, gin);
    }

    std::size_t vi = 0;
    for (auto& l : layers_) {
      auto ps = l->params();
      auto gs = l->grads();
      for (std::size_t i = 0; i < ps.size(); ++i, ++vi) {
        rvec& v = velocity_[vi].data;
        rvec& w = ps[i]->data;
        const rvec& g = gs[i]->data;
        for (std::size_t k = 0; k < w.size(); ++k) {
          v[k] = hyper_.momentum * v[k] - hyper_.lr * g[k];
          w[k] += v[k];
        }
      }
    }
    return loss;
  }

  nlohmann::json header() const {
    nlohmann::json layers = nlohmann::json::array();
    for (const auto& l : layers_) layers.push_back(l->spec());
    return {{"arch", arch_},       {"input_dims", input_dims_},
            {"classes", classes_}, {"lr", hyper_.lr},
            {"momentum", hyper_.momentum}, {"batch", hyper_.batch},
            {"epochs", hyper_.epochs},     {"dropout", hyper_.dropout},
            {"seed", seed_},       {"layers", layers}};
  }

  std::vector<Tensor*> state_tensors() {
    std::vector<Tensor*> out;
    for (auto& l : layers_)
      for (Tensor* t : l->state()) out.push_back(t);
    return out;
  }

 private:
  void build() {
    auto conv_block = [&](int maps, int kh, int kw, int ph, int pw) {
      layers_.push_back(std::make_unique<Conv2d>(maps, kh, kw));
      layers_.push_back(std::make_unique<BatchNorm>());
      layers_.push_back(std::make_unique<ReLU>());
      layers_.push_back(std::make_unique<Pool>(true, ph, pw, ph, pw));
    };
    if (arch_ == "iq3") {
      conv_block(16, 1, 4, 1, 2);
      conv_block(24, 1, 4, 1, 2);
      conv_block(32, 1, 4, 1, 2);
      layers_.push_back(std::make_unique<Pool>(false, 1, 32, 1, 32));
      layers_.push_back(std::make_unique<Dropout>(hyper_.dropout));
      layers_.push_back(std::make_unique<Dense>(classes_));
      layers_.push_back(std::make_unique<Softmax>());
    } else if (arch_ == "iq2") {
      conv_block(8, 1, 4, 1, 2);
      conv_block(16, 1, 4, 1, 2);
      layers_.push_back(std::make_unique<Pool>(false, 1, 32, 1, 32));
      layers_.push_back(std::make_unique<Dropout>(hyper_.dropout));
      layers_.push_back(std::make_unique<Dense>(classes_));
      layers_.push_back(std::make_unique<Softmax>());
    } else if (arch_ == "scf2") {
      conv_block(8, 3, 3, 2, 2);
      conv_block(16, 3, 3, 2, 2);
      layers_.push_back(std::make_unique<Dropout>(hyper_.dropout));
      layers_.push_back(std::make_unique<Dense>(classes_));
      layers_.push_back(std::make_unique<Softmax>());
    } else if (arch_ == "mlp") {
      layers_.push_back(std::make_unique<Dense>(32));
      layers_.push_back(std::make_unique<ReLU>());
      layers_.push_back(std::make_unique<Dropout>(hyper_.dropout));
      layers_.push_back(std::make_unique<Dense>(classes_));
      layers_.push_back(std::make_unique<Softmax>());
    } else {
      throw ParameterError("unknown architecture: " + arch_);
    }
  }

  std::string arch_;
  std::vector<int> input_dims_;
  int classes_;
  Hyper hyper_;
  std::uint64_t seed_;
  Rng rng_;
  std::vector<std::unique_ptr<Layer>> layers_;
  std::vector<Tensor> velocity_;
  std::vector<Tensor> acts_;
  Tensor grad_a_, grad_b_;
};

// Feature matrix plus labels, float storage as persisted.
struct LabeledData {
  std::vector<int> feature_dims;
  std::vector<std::vector<float>> x;
  std::vector<int> y;
};

inline Tensor make_batch(const LabeledData& data, const std::vector<int>& idx,
                         std::size_t lo, std::size_t hi) {
  std::vector<int> dims = {static_cast<int>(hi - lo)};
  dims.insert(dims.end(), data.feature_dims.begin(), data.feature_dims.end());
  Tensor t(dims);
  const std::size_t per = data.x[0].size();
  for (std::size_t i = lo; i < hi; ++i) {
    const auto& src = data.x[static_cast<std::size_t>(idx[i])];
    double* dst = t.data.data() + (i - lo) * per;
    for (std::size_t k = 0; k < per; ++k) dst[k] = src[k];
  }
  return t;
}

struct ConfusionMatrix {
  int classes = 0;
  std::vector<long> counts;  // row = true, col = predicted

  long& at(int truth, int pred) { return counts[static_cast<std::size_t>(truth * classes + pred)]; }
  long at(int truth, int pred) const { return counts[static_cast<std::size_t>(truth * classes + pred)]; }
  long total() const { return std::accumulate(counts.begin(), counts.end(), 0l); }
  double accuracy() const {
    long diag = 0;
    for (int i = 0; i < classes; ++i) diag += at(i, i);
    const long t = total();
    return t > 0 ? static_cast<double>(diag) / static_cast<double>(t) : 0.0;
  }
};

inline ConfusionMatrix evaluate(NNModel& model, const LabeledData& data,
                                const std::vector<int>& idx) {
  ConfusionMatrix cm;
  cm.classes = model.classes();
  cm.counts.assign(static_cast<std::size_t>(cm.classes) * cm.classes, 0);
  const int batch = model.hyper().batch;
  for (std::size_t lo = 0; lo < idx.size(); lo += static_cast<std::size_t>(batch)) {
    const std::size_t hi = std::min(idx.size(), lo + static_cast<std::size_t>(batch));
    const Tensor probs = model.forward(make_batch(data, idx, lo, hi), false);
    for (std::size_t n = 0; n < hi - lo; ++n) {
      const double* p = probs.data.data() + n * static_cast<std::size_t>(cm.classes);
      int best = 0;
      for (int k = 1; k < cm.classes; ++k)
        if (p[k] > p[best]) best = k;
      ++cm.at(data.y[static_cast<std::size_t>(idx[lo + n])], best);
    }
  }
  return cm;
}

struct TrainReport {
  struct Row {
    int epoch = 0;
    long iterations = 0;  // cumulative optimizer steps
    double train_loss = 0.0;
    double val_acc = 0.0;
    double wall_ms = 0.0;
  };
  std::vector<Row> rows;

  double final_val_acc() const { return rows.empty() ? 0.0 : rows.back().val_acc; }
  double plateau_acc() const {
    double best = 0.0;
    for (const auto& r : rows) best = std::max(best, r.val_acc);
    return best;
  }
  // First cumulative iteration count reaching the given accuracy.
  long iterations_to(double acc) const {
    for (const auto& r : rows)
      if (r.val_acc >= acc) return r.iterations;
    return rows.empty() ? 0 : rows.back().iterations;
  }
};

// Shuffled mini-batch SGD training with per-epoch validation. Deterministic
// for a fixed seed.
inline TrainReport train(NNModel& model, const LabeledData& data,
                         const std::vector<int>& train_idx,
                         const std::vector<int>& val_idx, std::uint64_t seed) {
  if (train_idx.empty() || data.x.empty())
    throw ParameterError("train: empty dataset");
  TrainReport report;
  std::vector<int> order = train_idx;
  const int batch = model.hyper().batch;
  long iterations = 0;
  const auto t0 = std::chrono::steady_clock::now();

  for (int epoch = 0; epoch < model.hyper().epochs; ++epoch) {
    Rng shuffle_rng(derive_seed(seed, 0x5f, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = order.size(); i > 1; --i)
      std::swap(order[i - 1], order[shuffle_rng.below(i)]);

    double loss_acc = 0.0;
    int batches = 0;
    for (std::size_t lo = 0; lo < order.size(); lo += static_cast<std::size_t>(batch)) {
      const std::size_t hi = std::min(order.size(), lo + static_cast<std::size_t>(batch));
      const Tensor b = make_batch(data, order, lo, hi);
      std::vector<int> labels;
      labels.reserve(hi - lo);
      for (std::size_t i = lo; i < hi; ++i)
        labels.push_back(data.y[static_cast<std::size_t>(order[i])]);
      loss_acc += model.backward_and_step(b, labels);
      ++batches;
      ++iterations;
    }

    TrainReport::Row row;
    row.epoch = epoch;
    row.iterations = iterations;
    row.train_loss = loss_acc / std::max(batches, 1);
    row.val_acc = val_idx.empty() ? 0.0 : evaluate(model, data, val_idx).accuracy();
    row.wall_ms = std::chrono::duration<double, std::milli>(
                      std::chrono::steady_clock::now() - t0)
                      .count();
    report.rows.push_back(row);
  }
  return report;
}

// Checkpoint: magic + version + JSON header + little-endian f64 blocks.
inline constexpr char kCheckpointMagic[8] = {'R', 'F', 'W', 'B',
                                             'N', 'N', '1', '\n'};

inline void save_model(NNModel& model, const std::string& path) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream os(tmp, std::ios::binary);
    if (!os) throw std::runtime_error("cannot write " + tmp);
    os.write(kCheckpointMagic, 8);
    const std::uint16_t ver[2] = {1, 0};
    os.write(reinterpret_cast<const char*>(ver), 4);
    const std::string hdr = model.header().dump();
    const std::uint32_t len = static_cast<std::uint32_t>(hdr.size());
    os.write(reinterpret_cast<const char*>(&len), 4);
    os.write(hdr.data(), static_cast<std::streamsize>(hdr.size()));
    for (Tensor* t : model.state_tensors())
      os.write(reinterpret_cast<const char*>(t->data.data()),
               static_cast<std::streamsize>(t->data.size() * sizeof(double)));
  }
  std::filesystem::rename(tmp, path);
}

inline NNModel load_model(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw std::runtime_error("cannot read " + path);
  char magic[8];
  is.read(magic, 8);
  if (is.gcount() != 8 || std::memcmp(magic, kCheckpointMagic, 8) != 0)
    throw FormatError(FormatError::Kind::malformed, "bad checkpoint magic");
  std::uint16_t ver[2];
  is.read(reinterpret_cast<char*>(ver), 4);
  if (ver[0] != 1)
    throw FormatError(FormatError::Kind::version_mismatch,
                      "checkpoint major version " + std::to_string(ver[0]));
  std::uint32_t len = 0;
  is.read(reinterpret_cast<char*>(&len), 4);
  std::string hdr(len, '\0');
  is.read(hdr.data(), len);
  if (is.gcount() != static_cast<std::streamsize>(len))
    throw FormatError(FormatError::Kind::truncation, "checkpoint header truncated");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(hdr);
  } catch (const std::exception& e) {
    throw FormatError(FormatError::Kind::malformed, e.what());
  }

  Hyper hyper;
  hyper.lr = j.at("lr").get<double>();
  hyper.momentum = j.at("momentum").get<double>();
  hyper.batch = j.at("batch").get<int>();
  hyper.epochs = j.at("epochs").get<int>();
  hyper.dropout = j.at("dropout").get<double>();
  NNModel model(j.at("arch").get<std::string>(),
                j.at("input_dims").get<std::vector<int>>(),
                j.at("classes").get<int>(), hyper,
                j.at("seed").get<std::uint64_t>());
  for (Tensor* t : model.state_tensors()) {
    is.read(reinterpret_cast<char*>(t->data.data()),
            static_cast<std::streamsize>(t->data.size() * sizeof(double)));
    if (is.gcount() != static_cast<std::streamsize>(t->data.size() * sizeof(double)))
      throw FormatError(FormatError::Kind::truncation, "checkpoint parameters truncated");
  }
  return model;
}

}  // namespace rfwb::nnet
