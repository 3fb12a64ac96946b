#include "kpff/optimizer.hpp"

#include <cmath>
#include <stdexcept>

#include "kpff/fault.hpp"

namespace kpff {

std::optional<OptimizerKind> parse_optimizer(const std::string& name) {
  if (name == "adam") return OptimizerKind::adam;
  if (name == "sgd") return OptimizerKind::sgd;
  return std::nullopt;
}

std::string optimizer_name(OptimizerKind kind) {
  return kind == OptimizerKind::adam ? "adam" : "sgd";
}

Optimizer::Optimizer(OptimizerConfig config) : config_(config) {
  if (!(config_.learning_rate > 0.0)) throw std::invalid_argument("learning rate must be > 0");
  if (config_.weight_decay < 0.0) throw std::invalid_argument("weight decay must be >= 0");
}

void Optimizer::step(std::span<const ParamRef> params) {
  if (first_moment_.empty()) {
    for (const auto& p : params) {
      first_moment_.emplace_back(p.value->shape());
      second_moment_.emplace_back(p.value->shape());
    }
  }
  if (params.size() != first_moment_.size()) {
    throw ShapeError("optimizer: parameter count changed between steps");
  }
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_shape(*params[k].grad, params[k].value->shape(), "optimizer gradient " + params[k].name);
    require_shape(*params[k].value, first_moment_[k].shape(), "optimizer parameter " + params[k].name);
  }
  ++step_;

  const double lr = config_.learning_rate;
  const double wd = config_.weight_decay;
  const double b1 = config_.beta1;
  const double b2 = config_.beta2;
  const bool bias_correction = !fault_active(Fault::adam_no_bias_correction);
  const double t = static_cast<double>(step_);
  const double c1 = bias_correction ? 1.0 - std::pow(b1, t) : 1.0;
  const double c2 = bias_correction ? 1.0 - std::pow(b2, t) : 1.0;

  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].value->values();
    const auto grad = params[k].grad->values();
    if (config_.kind == OptimizerKind::sgd) {
      for (std::size_t i = 0; i < theta.size(); ++i) theta[i] -= lr * (grad[i] + wd * theta[i]);
    } else {
      auto m = first_moment_[k].values();
      auto v = second_moment_[k].values();
      for (std::size_t i = 0; i < theta.size(); ++i) {
        const double g = grad[i] + wd * theta[i];
        m[i] = b1 * m[i] + (1.0 - b1) * g;
        v[i] = b2 * v[i] + (1.0 - b2) * g * g;
        const double m_hat = m[i] / c1;
        const double v_hat = v[i] / c2;
        theta[i] -= lr * m_hat / (std::sqrt(v_hat) + config_.epsilon);
      }
    }
    require_finite(*params[k].value, "optimizer update of " + params[k].name);
  }
}

}  // namespace kpff
