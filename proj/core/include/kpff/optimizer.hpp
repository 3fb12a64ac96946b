#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kpff/layers.hpp"
#include "kpff/tensor.hpp"

namespace kpff {

enum class OptimizerKind { sgd, adam };

std::optional<OptimizerKind> parse_optimizer(const std::string& name);
std::string optimizer_name(OptimizerKind kind);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

/// SGD or Adam with coupled weight decay: the decay term wd * theta is added
/// to the gradient before the update (switching to the decoupled AdamW form
/// only means moving that term into the final parameter update).
class Optimizer {
 public:
  explicit Optimizer(OptimizerConfig config);

  const OptimizerConfig& config() const noexcept { return config_; }
  std::uint64_t steps() const noexcept { return step_; }

  /// Updates every `params[k].value` from `params[k].grad`. The parameter
  /// list must keep the same order and shapes across calls.
  void step(std::span<const ParamRef> params);

 private:
  OptimizerConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Tensor> first_moment_;
  std::vector<Tensor> second_moment_;
};

}  // namespace kpff
