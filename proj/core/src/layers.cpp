#include "kpff/layers.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace kpff {

std::optional<Activation> parse_activation(const std::string& name) {
  if (name == "relu") return Activation::relu;
  if (name == "sigmoid") return Activation::sigmoid;
  if (name == "leaky_relu") return Activation::leaky_relu;
  if (name == "identity") return Activation::identity;
  return std::nullopt;
}

std::string activation_name(Activation a) {
  switch (a) {
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
    case Activation::leaky_relu: return "leaky_relu";
    case Activation::identity: return "identity";
  }
  return "identity";
}

double activate(Activation a, double pre) noexcept {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? pre : 0.0;
    case Activation::sigmoid: return 1.0 / (1.0 + std::exp(-pre));
    case Activation::leaky_relu: return pre > 0.0 ? pre : 0.01 * pre;
    case Activation::identity: return pre;
  }
  return pre;
}

double activate_derivative(Activation a, double pre) noexcept {
  switch (a) {
    case Activation::relu: return pre > 0.0 ? 1.0 : 0.0;
    case Activation::sigmoid: {
      const double s = 1.0 / (1.0 + std::exp(-pre));
      return s * (1.0 - s);
    }
    case Activation::leaky_relu: return pre > 0.0 ? 1.0 : 0.01;
    case Activation::identity: return 1.0;
  }
  return 1.0;
}

namespace {

void init_uniform_fan_in(Tensor& weight, Tensor& bias, std::size_t fan_in, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (auto& w : weight.values()) w = rng.uniform(-bound, bound);
  for (auto& b : bias.values()) b = rng.uniform(-bound, bound);
}

}  // namespace

// ---------------------------------------------------------------- ConvLayer

ConvLayer::ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
                     std::size_t kernel_w, Activation activation)
    : kernels_({out_channels, in_channels, kernel_h, kernel_w}),
      bias_({out_channels}),
      kernel_grad_({out_channels, in_channels, kernel_h, kernel_w}),
      bias_grad_({out_channels}),
      activation_(activation) {
  if (kernel_h % 2 == 0 || kernel_w % 2 == 0) {
    throw ShapeError("convolution kernel extents must be odd, got " + std::to_string(kernel_h) +
                     "x" + std::to_string(kernel_w));
  }
}

void ConvLayer::init_uniform(Rng& rng) {
  init_uniform_fan_in(kernels_, bias_, in_channels() * kernel_h() * kernel_w(), rng);
}

Shape ConvLayer::output_shape(const Shape& input) const {
  if (input.size() != 3) {
    throw ShapeError("convolution expects a [C,H,W] map, got " + shape_to_string(input));
  }
  if (input[0] != in_channels()) {
    throw ShapeError("convolution expects " + std::to_string(in_channels()) +
                     " input channels, got " + std::to_string(input[0]));
  }
  if (input[1] < kernel_h() || input[2] < kernel_w()) {
    throw ShapeError("input " + shape_to_string(input) + " is smaller than the " +
                     std::to_string(kernel_h()) + "x" + std::to_string(kernel_w()) + " kernel");
  }
  return {out_channels(), input[1] - kernel_h() + 1, input[2] - kernel_w() + 1};
}

Tensor ConvLayer::forward(const Tensor& input) {
  const Shape out_shape = output_shape(input.shape());
  const std::size_t oh = out_shape[1], ow = out_shape[2];
  const std::size_t kh = kernel_h(), kw = kernel_w();
  Tensor pre(out_shape);
  for (std::size_t j = 0; j < out_channels(); ++j) {
    for (std::size_t x = 0; x < oh; ++x) {
      for (std::size_t y = 0; y < ow; ++y) {
        double acc = bias_[j];
        for (std::size_t t = 0; t < in_channels(); ++t) {
          for (std::size_t s = 0; s < kh; ++s) {
            for (std::size_t q = 0; q < kw; ++q) {
              acc += kernels_.at(j, t, s, q) * input.at(t, x + s, y + q);
            }
          }
        }
        pre.at(j, x, y) = acc;
      }
    }
  }
  Tensor out = pre;
  for (auto& v : out.values()) v = activate(activation_, v);
  require_finite(out, "convolution");
  input_cache_ = input;
  pre_cache_ = std::move(pre);
  return out;
}

Tensor ConvLayer::backward(const Tensor& upstream) {
  if (pre_cache_.empty()) throw std::logic_error("convolution backward called before forward");
  require_shape(upstream, pre_cache_.shape(), "convolution backward");
  const std::size_t oh = pre_cache_.extent(1), ow = pre_cache_.extent(2);
  const std::size_t kh = kernel_h(), kw = kernel_w();
  Tensor dinput(input_cache_.shape());
  for (std::size_t j = 0; j < out_channels(); ++j) {
    for (std::size_t x = 0; x < oh; ++x) {
      for (std::size_t y = 0; y < ow; ++y) {
        const double g = upstream.at(j, x, y) * activate_derivative(activation_, pre_cache_.at(j, x, y));
        if (g == 0.0) continue;
        bias_grad_[j] += g;
        for (std::size_t t = 0; t < in_channels(); ++t) {
          for (std::size_t s = 0; s < kh; ++s) {
            for (std::size_t q = 0; q < kw; ++q) {
              kernel_grad_.at(j, t, s, q) += g * input_cache_.at(t, x + s, y + q);
              dinput.at(t, x + s, y + q) += g * kernels_.at(j, t, s, q);
            }
          }
        }
      }
    }
  }
  return dinput;
}

void ConvLayer::zero_grads() noexcept {
  kernel_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

void ConvLayer::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".kernels", &kernels_, &kernel_grad_});
  out.push_back({prefix + ".bias", &bias_, &bias_grad_});
}

// --------------------------------------------------------------- DenseLayer

DenseLayer::DenseLayer(std::size_t in, std::size_t out, Activation activation)
    : weight_({out, in}),
      bias_({out}),
      weight_grad_({out, in}),
      bias_grad_({out}),
      activation_(activation) {}

void DenseLayer::init_uniform(Rng& rng) { init_uniform_fan_in(weight_, bias_, in_dim(), rng); }

Tensor DenseLayer::forward(const Tensor& input) {
  if (input.rank() != 1 || input.size() != in_dim()) {
    throw ShapeError("dense layer expects length " + std::to_string(in_dim()) + ", got " +
                     shape_to_string(input.shape()));
  }
  Tensor pre({out_dim()});
  for (std::size_t o = 0; o < out_dim(); ++o) {
    double acc = bias_[o];
    for (std::size_t i = 0; i < in_dim(); ++i) acc += weight_.at(o, i) * input[i];
    pre[o] = acc;
  }
  Tensor out = pre;
  for (auto& v : out.values()) v = activate(activation_, v);
  require_finite(out, "dense layer");
  input_cache_ = input;
  pre_cache_ = std::move(pre);
  return out;
}

Tensor DenseLayer::backward(const Tensor& upstream) {
  if (pre_cache_.empty()) throw std::logic_error("dense backward called before forward");
  require_shape(upstream, {out_dim()}, "dense backward");
  Tensor dinput({in_dim()});
  for (std::size_t o = 0; o < out_dim(); ++o) {
    const double g = upstream[o] * activate_derivative(activation_, pre_cache_[o]);
    bias_grad_[o] += g;
    for (std::size_t i = 0; i < in_dim(); ++i) {
      weight_grad_.at(o, i) += g * input_cache_[i];
      dinput[i] += g * weight_.at(o, i);
    }
  }
  return dinput;
}

void DenseLayer::zero_grads() noexcept {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

void DenseLayer::append_params(const std::string& prefix, std::vector<ParamRef>& out) {
  out.push_back({prefix + ".weight", &weight_, &weight_grad_});
  out.push_back({prefix + ".bias", &bias_, &bias_grad_});
}

// ------------------------------------------------------------------ pooling

Shape MaxPool2::output_shape(const Shape& input) {
  if (input.size() != 3 || input[1] < 2 || input[2] < 2) {
    throw ShapeError("max pool needs a [C,H,W] map with H,W >= 2, got " + shape_to_string(input));
  }
  return {input[0], input[1] / 2, input[2] / 2};
}

Tensor MaxPool2::forward(const Tensor& input) {
  const Shape out_shape = output_shape(input.shape());
  Tensor out(out_shape);
  argmax_.assign(out.size(), 0);
  const std::size_t w_in = input.extent(2);
  std::size_t o = 0;
  for (std::size_t c = 0; c < out_shape[0]; ++c) {
    for (std::size_t x = 0; x < out_shape[1]; ++x) {
      for (std::size_t y = 0; y < out_shape[2]; ++y, ++o) {
        std::size_t best = (c * input.extent(1) + 2 * x) * w_in + 2 * y;
        for (std::size_t dx = 0; dx < 2; ++dx) {
          for (std::size_t dy = 0; dy < 2; ++dy) {
            const std::size_t idx = (c * input.extent(1) + 2 * x + dx) * w_in + 2 * y + dy;
            if (input[idx] > input[best]) best = idx;
          }
        }
        argmax_[o] = best;
        out[o] = input[best];
      }
    }
  }
  input_shape_ = input.shape();
  return out;
}

Tensor MaxPool2::backward(const Tensor& upstream) const {
  if (input_shape_.empty()) throw std::logic_error("max pool backward called before forward");
  if (upstream.size() != argmax_.size()) throw ShapeError("max pool backward: shape mismatch");
  Tensor dinput(input_shape_);
  for (std::size_t o = 0; o < argmax_.size(); ++o) dinput[argmax_[o]] += upstream[o];
  return dinput;
}

Tensor global_average_pool(const Tensor& input) {
  if (input.rank() != 3) {
    throw ShapeError("global average pool expects [C,H,W], got " + shape_to_string(input.shape()));
  }
  const std::size_t channels = input.extent(0);
  const std::size_t area = input.extent(1) * input.extent(2);
  Tensor out({channels});
  for (std::size_t c = 0; c < channels; ++c) {
    double acc = 0.0;
    for (std::size_t k = 0; k < area; ++k) acc += input[c * area + k];
    out[c] = acc / static_cast<double>(area);
  }
  return out;
}

Tensor global_average_pool_backward(const Tensor& upstream, const Shape& input_shape) {
  Tensor dinput(input_shape);
  const std::size_t area = input_shape[1] * input_shape[2];
  require_shape(upstream, {input_shape[0]}, "global average pool backward");
  for (std::size_t c = 0; c < input_shape[0]; ++c) {
    const double g = upstream[c] / static_cast<double>(area);
    for (std::size_t k = 0; k < area; ++k) dinput[c * area + k] = g;
  }
  return dinput;
}

// ------------------------------------------------------------------ dropout

Dropout::Dropout(double p) : p_(p) {
  if (!(p >= 0.0 && p < 1.0)) {
    throw std::invalid_argument("dropout probability must be in [0, 1), got " + std::to_string(p));
  }
}

Tensor Dropout::forward(const Tensor& input, Mode mode, Rng& rng) {
  mask_.assign(input.size(), 1.0);
  if (mode == Mode::eval || p_ == 0.0) return input;
  const double keep_scale = 1.0 / (1.0 - p_);
  Tensor out = input;
  for (std::size_t k = 0; k < out.size(); ++k) {
    mask_[k] = rng.uniform() < p_ ? 0.0 : keep_scale;
    out[k] *= mask_[k];
  }
  return out;
}

Tensor Dropout::backward(const Tensor& upstream) const {
  if (upstream.size() != mask_.size()) throw ShapeError("dropout backward: shape mismatch");
  Tensor d = upstream;
  for (std::size_t k = 0; k < d.size(); ++k) d[k] *= mask_[k];
  return d;
}

Tensor dropout(const Tensor& input, double p, Mode mode, Rng& rng) {
  Dropout layer(p);
  return layer.forward(input, mode, rng);
}

// --------------------------------------------------------------------- loss

Tensor softmax(const Tensor& logits) {
  require_finite(logits, "softmax");
  const double peak = *std::ranges::max_element(logits.values());
  Tensor p = logits;
  double total = 0.0;
  for (auto& v : p.values()) {
    v = std::exp(v - peak);
    total += v;
  }
  for (auto& v : p.values()) v /= total;
  return p;
}

LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label) {
  if (logits.rank() != 1) throw ShapeError("logits must be a vector");
  if (label >= logits.size()) {
    throw std::out_of_range("label " + std::to_string(label) + " outside " +
                            std::to_string(logits.size()) + " classes");
  }
  require_finite(logits, "softmax cross-entropy");
  const double peak = *std::ranges::max_element(logits.values());
  double total = 0.0;
  for (double v : logits.values()) total += std::exp(v - peak);
  const double log_z = peak + std::log(total);
  Tensor grad = logits;
  for (auto& v : grad.values()) v = std::exp(v - log_z);
  grad[label] -= 1.0;
  return {log_z - logits[label], std::move(grad)};
}

std::size_t argmax(const Tensor& v) {
  std::size_t best = 0;
  for (std::size_t k = 1; k < v.size(); ++k) {
    if (v[k] > v[best]) best = k;
  }
  return best;
}

}  // namespace kpff
