#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpff/fusion.hpp"
#include "kpff/layers.hpp"
#include "kpff/rng.hpp"
#include "kpff/sample.hpp"

namespace kpff {

enum class FusionMethod { none, add, concat, kpff };

std::optional<FusionMethod> parse_fusion(const std::string& name);
std::string fusion_name(FusionMethod method);

struct ModelConfig {
  Shape input_shape;                          // [C, H, W]
  std::size_t classes = 4;
  std::vector<std::size_t> channels{8, 16};   // one conv block per entry
  std::size_t kernel = 3;                     // odd spatial extent
  Activation activation = Activation::relu;
  FusionMethod fusion = FusionMethod::kpff;
  bool kpff_frozen = false;
  double kpff_init_noise = 0.0;
  ProjectionPolicy projection;
  double dropout = 0.5;
};

/// Small CNN: a stack of conv blocks (conv + activation, then 2x2 max pool
/// when the map is at least 2x2). Each block's output is globally average
/// pooled into a tap vector. With fusion `none` only the last tap feeds the
/// classifier; otherwise all taps are projected to a common length (where
/// needed), fused, passed through dropout and a linear head.
class Model {
 public:
  /// Parameters are drawn from stream `Stream::init` of `seed` at `index`.
  Model(ModelConfig config, std::uint64_t seed, std::uint64_t index = 0);

  const ModelConfig& config() const noexcept { return config_; }
  std::size_t fused_dim() const noexcept { return fused_dim_; }
  std::size_t common_dim() const noexcept { return common_dim_; }
  const std::vector<std::size_t>& tap_dims() const noexcept { return tap_dims_; }

  /// Parameters the optimizer updates (KPFF weights excluded when frozen).
  std::vector<ParamRef> parameters();
  /// Every parameter, for checkpoints and gradient checks.
  std::vector<ParamRef> all_parameters();

  KpffLayer* kpff_layer() noexcept { return kpff_ ? &*kpff_ : nullptr; }

  Tensor forward(const Tensor& image, Mode mode, Rng& dropout_rng);
  /// Accumulates parameter gradients from dL/dlogits of the last forward.
  void backward(const Tensor& dlogits);
  void zero_grads() noexcept;

  struct BatchStats {
    double loss = 0.0;
    double accuracy = 0.0;
    std::size_t correct = 0;
  };

  /// Zeroes gradients, runs every sample, and leaves the batch-mean gradient
  /// in the parameter buffers.
  BatchStats forward_backward(std::span<const Sample* const> batch, Mode mode, Rng& dropout_rng);
  /// Forward only, eval mode.
  BatchStats evaluate(std::span<const Sample* const> batch);

 private:
  struct Block {
    ConvLayer conv;
    std::optional<MaxPool2> pool;
    Shape output_shape;
  };

  Tensor fuse(std::vector<Tensor> taps);
  std::vector<Tensor> fuse_backward(const Tensor& upstream);

  ModelConfig config_;
  std::vector<Block> blocks_;
  std::vector<std::size_t> tap_dims_;
  std::size_t common_dim_ = 0;
  std::size_t fused_dim_ = 0;
  std::vector<std::optional<Projection>> projections_;
  std::optional<KpffLayer> kpff_;
  Dropout dropout_;
  DenseLayer head_;
};

}  // namespace kpff
