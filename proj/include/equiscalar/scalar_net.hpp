#pragma once

// Small fully connected network with a single scalar output and hand-written
// reverse-mode gradients. Parameters live in one flat vector:
// for each layer, the weight matrix (out x in, row-major) then the bias.

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "equiscalar/core_types.hpp"
#include "equiscalar/random.hpp"

namespace equiscalar {

enum class Activation { Tanh, Softplus };

inline const char* to_string(Activation a) { return a == Activation::Tanh ? "tanh" : "softplus"; }

inline Activation parse_activation(const std::string& s) {
  if (s == "tanh") return Activation::Tanh;
  if (s == "softplus") return Activation::Softplus;
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + s + "' (expected tanh or softplus)");
}

class ScalarNet {
 public:
  /// Activations of every layer for one input; post[0] is the input.
  struct Cache {
    std::vector<std::vector<double>> pre;
    std::vector<std::vector<double>> post;
  };

  /// widths = input width, hidden widths..., and the output width 1 is implied.
  ScalarNet(std::size_t input_width, std::vector<std::size_t> hidden, Activation act)
      : act_(act), widths_{input_width} {
    if (input_width == 0) throw Error(ErrorCode::InvalidArgument, "network input width must be positive");
    for (std::size_t w : hidden) {
      if (w == 0) throw Error(ErrorCode::InvalidArgument, "hidden widths must be positive");
      widths_.push_back(w);
    }
    widths_.push_back(1);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      offsets_.push_back(total);
      total += widths_[l + 1] * widths_[l] + widths_[l + 1];
    }
    params_.assign(total, 0.0);
  }

  /// Weights ~ N(0, 1/fan_in), zero biases.
  void initialize(RngState& rng) {
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const double scale = 1.0 / std::sqrt(static_cast<double>(widths_[l]));
      double* w = params_.data() + offsets_[l];
      for (std::size_t k = 0; k < widths_[l + 1] * widths_[l]; ++k) w[k] = scale * rng.normal();
      for (std::size_t k = 0; k < widths_[l + 1]; ++k) w[widths_[l + 1] * widths_[l] + k] = 0.0;
    }
  }

  [[nodiscard]] std::size_t input_width() const noexcept { return widths_.front(); }
  [[nodiscard]] const std::vector<std::size_t>& widths() const noexcept { return widths_; }
  [[nodiscard]] Activation activation() const noexcept { return act_; }
  [[nodiscard]] std::size_t parameter_count() const noexcept { return params_.size(); }
  [[nodiscard]] const std::vector<double>& params() const noexcept { return params_; }
  std::vector<double>& params() noexcept { return params_; }

  double forward(std::span<const double> x, Cache* cache = nullptr) const {
    if (x.size() != input_width()) throw DimensionError(input_width(), x.size(), "network input");
    std::vector<double> cur(x.begin(), x.end());
    if (cache) {
      cache->pre.clear();
      cache->post.assign(1, cur);
    }
    const std::size_t layers = widths_.size() - 1;
    for (std::size_t l = 0; l < layers; ++l) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double* w = params_.data() + offsets_[l];
      const double* b = w + out * in;
      std::vector<double> z(out);
      for (std::size_t o = 0; o < out; ++o) {
        double s = b[o];
        for (std::size_t i = 0; i < in; ++i) s += w[o * in + i] * cur[i];
        z[o] = s;
      }
      if (l + 1 == layers) {
        if (cache) {
          cache->pre.push_back(z);
          cache->post.push_back(z);
        }
        return z[0];
      }
      std::vector<double> a(out);
      for (std::size_t o = 0; o < out; ++o) a[o] = activate(z[o]);
      if (cache) {
        cache->pre.push_back(std::move(z));
        cache->post.push_back(a);
      }
      cur = std::move(a);
    }
    return cur[0];
  }

  /// Adds dout * d(output)/d(params) into grad (same layout as params()).
  void backward(const Cache& cache, double dout, std::span<double> grad) const {
    if (grad.size() != params_.size()) throw DimensionError(params_.size(), grad.size(), "network gradient");
    if (dout == 0.0) return;
    const std::size_t layers = widths_.size() - 1;
    std::vector<double> delta{dout};  // dL/dz of the current layer
    for (std::size_t l = layers; l-- > 0;) {
      const std::size_t in = widths_[l], out = widths_[l + 1];
      const double* w = params_.data() + offsets_[l];
      double* gw = grad.data() + offsets_[l];
      double* gb = gw + out * in;
      const std::vector<double>& input = cache.post[l];
      for (std::size_t o = 0; o < out; ++o) {
        gb[o] += delta[o];
        for (std::size_t i = 0; i < in; ++i) gw[o * in + i] += delta[o] * input[i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < out; ++o)
        for (std::size_t i = 0; i < in; ++i) prev[i] += w[o * in + i] * delta[o];
      const std::vector<double>& z = cache.pre[l - 1];
      for (std::size_t i = 0; i < in; ++i) prev[i] *= activate_derivative(z[i]);
      delta = std::move(prev);
    }
  }

 private:
  double activate(double z) const {
    if (act_ == Activation::Tanh) return std::tanh(z);
    return z > 30.0 ? z : std::log1p(std::exp(z));
  }
  double activate_derivative(double z) const {
    if (act_ == Activation::Tanh) {
      const double t = std::tanh(z);
      return 1.0 - t * t;
    }
    return 1.0 / (1.0 + std::exp(-z));
  }

  Activation act_;
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> offsets_;
  std::vector<double> params_;
};

}  // namespace equiscalar
