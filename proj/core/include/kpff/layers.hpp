#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kpff/rng.hpp"
#include "kpff/tensor.hpp"

namespace kpff {

enum class Activation { relu, sigmoid, leaky_relu, identity };

std::optional<Activation> parse_activation(const std::string& name);
std::string activation_name(Activation a);

double activate(Activation a, double pre) noexcept;
/// Derivative with respect to the pre-activation.
double activate_derivative(Activation a, double pre) noexcept;

/// A named, trainable tensor together with its gradient buffer.
struct ParamRef {
  std::string name;
  Tensor* value;
  Tensor* grad;
};

/// 2-D convolution over a [channels, H, W] map with a (2*dh+1) x (2*dw+1)
/// kernel, valid padding, stride 1, followed by an elementwise activation.
///
/// kernels: [out_channels, in_channels, kh, kw]; output position (x, y)
/// reads input rows x..x+kh-1 and columns y..y+kw-1 (cross-correlation).
class ConvLayer {
 public:
  ConvLayer(std::size_t in_channels, std::size_t out_channels, std::size_t kernel_h,
            std::size_t kernel_w, Activation activation = Activation::relu);

  void init_uniform(Rng& rng);

  std::size_t in_channels() const noexcept { return kernels_.extent(1); }
  std::size_t out_channels() const noexcept { return kernels_.extent(0); }
  std::size_t kernel_h() const noexcept { return kernels_.extent(2); }
  std::size_t kernel_w() const noexcept { return kernels_.extent(3); }
  Activation activation() const noexcept { return activation_; }

  Shape output_shape(const Shape& input) const;

  Tensor& kernels() noexcept { return kernels_; }
  const Tensor& kernels() const noexcept { return kernels_; }
  Tensor& bias() noexcept { return bias_; }
  const Tensor& bias() const noexcept { return bias_; }

  Tensor forward(const Tensor& input);
  Tensor backward(const Tensor& upstream);
  void zero_grads() noexcept;
  void append_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  Tensor kernels_;
  Tensor bias_;
  Tensor kernel_grad_;
  Tensor bias_grad_;
  Activation activation_;
  Tensor input_cache_;
  Tensor pre_cache_;
};

/// Fully connected layer: F(W x + b).
class DenseLayer {
 public:
  DenseLayer(std::size_t in, std::size_t out, Activation activation = Activation::identity);

  void init_uniform(Rng& rng);

  std::size_t in_dim() const noexcept { return weight_.extent(1); }
  std::size_t out_dim() const noexcept { return weight_.extent(0); }

  Tensor& weight() noexcept { return weight_; }
  const Tensor& weight() const noexcept { return weight_; }
  Tensor& bias() noexcept { return bias_; }
  const Tensor& bias() const noexcept { return bias_; }

  Tensor forward(const Tensor& input);
  Tensor backward(const Tensor& upstream);
  void zero_grads() noexcept;
  void append_params(const std::string& prefix, std::vector<ParamRef>& out);

 private:
  Tensor weight_;
  Tensor bias_;
  Tensor weight_grad_;
  Tensor bias_grad_;
  Activation activation_;
  Tensor input_cache_;
  Tensor pre_cache_;
};

/// 2x2 max pooling with stride 2; trailing odd rows/columns are dropped.
/// Ties resolve to the first maximum in row-major window order.
class MaxPool2 {
 public:
  static Shape output_shape(const Shape& input);

  Tensor forward(const Tensor& input);
  Tensor backward(const Tensor& upstream) const;

 private:
  Shape input_shape_;
  std::vector<std::size_t> argmax_;
};

/// Per-channel spatial mean of a [C, H, W] map.
Tensor global_average_pool(const Tensor& input);
/// Spreads each channel's gradient evenly over an input of shape `input_shape`.
Tensor global_average_pool_backward(const Tensor& upstream, const Shape& input_shape);

enum class Mode { train, eval };

/// Inverted dropout. The mask (0 or 1/(1-p) per unit) is kept for backward.
class Dropout {
 public:
  explicit Dropout(double p);

  double probability() const noexcept { return p_; }

  Tensor forward(const Tensor& input, Mode mode, Rng& rng);
  Tensor backward(const Tensor& upstream) const;

 private:
  double p_;
  std::vector<double> mask_;
};

/// Stateless form used by tests.
Tensor dropout(const Tensor& input, double p, Mode mode, Rng& rng);

struct LossAndGrad {
  double loss;
  Tensor grad;
};

/// -log softmax(logits)[label] and its gradient softmax - onehot(label).
LossAndGrad softmax_cross_entropy(const Tensor& logits, std::size_t label);
Tensor softmax(const Tensor& logits);

/// Index of the largest entry; ties go to the lowest index.
std::size_t argmax(const Tensor& v);

}  // namespace kpff
