#include "kpff/model.hpp"

#include <stdexcept>
#include <utility>

namespace kpff {

std::optional<FusionMethod> parse_fusion(const std::string& name) {
  if (name == "none") return FusionMethod::none;
  if (name == "add") return FusionMethod::add;
  if (name == "concat") return FusionMethod::concat;
  if (name == "kpff") return FusionMethod::kpff;
  return std::nullopt;
}

std::string fusion_name(FusionMethod method) {
  switch (method) {
    case FusionMethod::none: return "none";
    case FusionMethod::add: return "add";
    case FusionMethod::concat: return "concat";
    case FusionMethod::kpff: return "kpff";
  }
  return "none";
}

namespace {

struct Layout {
  std::vector<Shape> block_outputs;
  std::vector<bool> pooled;
  std::vector<std::size_t> tap_dims;
  std::size_t common_dim = 0;
  std::size_t fused_dim = 0;
};

Layout plan_layout(const ModelConfig& cfg) {
  if (cfg.input_shape.size() != 3) {
    throw ShapeError("model input must be [C,H,W], got " + shape_to_string(cfg.input_shape));
  }
  if (cfg.channels.empty()) throw std::invalid_argument("model needs at least one conv block");
  if (cfg.classes < 2) throw std::invalid_argument("model needs at least two classes");
  if (cfg.kernel % 2 == 0) throw std::invalid_argument("kernel size must be odd");

  Layout layout;
  Shape shape = cfg.input_shape;
  for (std::size_t b = 0; b < cfg.channels.size(); ++b) {
    if (shape[1] < cfg.kernel || shape[2] < cfg.kernel) {
      throw ShapeError("block " + std::to_string(b) + " input " + shape_to_string(shape) +
                       " is smaller than the kernel");
    }
    shape = {cfg.channels[b], shape[1] - cfg.kernel + 1, shape[2] - cfg.kernel + 1};
    const bool pool = shape[1] >= 2 && shape[2] >= 2;
    if (pool) shape = MaxPool2::output_shape(shape);
    layout.block_outputs.push_back(shape);
    layout.pooled.push_back(pool);
    layout.tap_dims.push_back(cfg.channels[b]);
  }

  const std::size_t n = layout.tap_dims.size();
  switch (cfg.fusion) {
    case FusionMethod::none:
      layout.common_dim = layout.tap_dims.back();
      layout.fused_dim = layout.tap_dims.back();
      break;
    case FusionMethod::add:
      layout.common_dim = common_dimension(layout.tap_dims, cfg.projection);
      layout.fused_dim = layout.common_dim;
      break;
    case FusionMethod::concat:
    case FusionMethod::kpff:
      layout.common_dim = common_dimension(layout.tap_dims, cfg.projection);
      layout.fused_dim = n * layout.common_dim;
      break;
  }
  return layout;
}

}  // namespace

Model::Model(ModelConfig config, std::uint64_t seed, std::uint64_t index)
    : config_(std::move(config)), dropout_(config_.dropout), head_(1, config_.classes) {
  const Layout layout = plan_layout(config_);
  tap_dims_ = layout.tap_dims;
  common_dim_ = layout.common_dim;
  fused_dim_ = layout.fused_dim;

  Rng init = Rng::stream(seed, Stream::init, index);

  std::size_t in_channels = config_.input_shape[0];
  for (std::size_t b = 0; b < config_.channels.size(); ++b) {
    Block block{ConvLayer(in_channels, config_.channels[b], config_.kernel, config_.kernel,
                          config_.activation),
                std::nullopt, layout.block_outputs[b]};
    if (layout.pooled[b]) block.pool.emplace();
    block.conv.init_uniform(init);
    blocks_.push_back(std::move(block));
    in_channels = config_.channels[b];
  }

  if (config_.fusion != FusionMethod::none) {
    for (std::size_t d : tap_dims_) {
      if (d == common_dim_) {
        projections_.emplace_back(std::nullopt);
      } else {
        Projection p(d, common_dim_);
        p.init_uniform(init);
        projections_.emplace_back(std::move(p));
      }
    }
  }
  if (config_.fusion == FusionMethod::kpff) {
    kpff_.emplace(tap_dims_.size());
    Rng noise = Rng::stream(seed, Stream::kpff_init, index);
    kpff_->perturb(noise, config_.kpff_init_noise);
  }

  head_ = DenseLayer(fused_dim_, config_.classes, Activation::identity);
  head_.init_uniform(init);
}

std::vector<ParamRef> Model::all_parameters() {
  std::vector<ParamRef> out;
  for (std::size_t b = 0; b < blocks_.size(); ++b) {
    blocks_[b].conv.append_params("block" + std::to_string(b) + ".conv", out);
  }
  for (std::size_t i = 0; i < projections_.size(); ++i) {
    if (!projections_[i]) continue;
    const std::string prefix = "proj" + std::to_string(i);
    out.push_back({prefix + ".weight", &projections_[i]->weight(), &projections_[i]->weight_grad()});
    out.push_back({prefix + ".bias", &projections_[i]->bias(), &projections_[i]->bias_grad()});
  }
  if (kpff_) out.push_back({"kpff.weights", &kpff_->weights(), &kpff_->weight_grads()});
  head_.append_params("head", out);
  return out;
}

std::vector<ParamRef> Model::parameters() {
  auto all = all_parameters();
  if (!config_.kpff_frozen) return all;
  std::erase_if(all, [](const ParamRef& p) { return p.name == "kpff.weights"; });
  return all;
}

Tensor Model::fuse(std::vector<Tensor> taps) {
  if (config_.fusion == FusionMethod::none) return std::move(taps.back());
  for (std::size_t i = 0; i < taps.size(); ++i) {
    if (projections_[i]) taps[i] = projections_[i]->forward(taps[i]);
  }
  FusionInputs inputs(std::move(taps));
  switch (config_.fusion) {
    case FusionMethod::add: return fuse_add(inputs);
    case FusionMethod::concat: return fuse_concat(inputs);
    case FusionMethod::kpff: return kpff_->forward(inputs);
    case FusionMethod::none: break;
  }
  throw std::logic_error("unreachable fusion method");
}

std::vector<Tensor> Model::fuse_backward(const Tensor& upstream) {
  const std::size_t n = tap_dims_.size();
  std::vector<Tensor> dtaps;
  if (config_.fusion == FusionMethod::none) {
    for (std::size_t i = 0; i + 1 < n; ++i) dtaps.emplace_back();
    dtaps.push_back(upstream);
    return dtaps;
  }

  const std::size_t r = common_dim_;
  switch (config_.fusion) {
    case FusionMethod::add:
      dtaps.assign(n, upstream);
      break;
    case FusionMethod::concat:
      for (std::size_t i = 0; i < n; ++i) {
        const auto src = upstream.values().subspan(i * r, r);
        dtaps.push_back(Tensor::vector(std::vector<double>(src.begin(), src.end())));
      }
      break;
    case FusionMethod::kpff:
      dtaps = kpff_->backward(upstream);
      break;
    case FusionMethod::none:
      break;
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (projections_[i]) dtaps[i] = projections_[i]->backward(dtaps[i]);
  }
  return dtaps;
}

Tensor Model::forward(const Tensor& image, Mode mode, Rng& dropout_rng) {
  require_shape(image, config_.input_shape, "model input");
  std::vector<Tensor> taps;
  taps.reserve(blocks_.size());
  Tensor h = image;
  for (auto& block : blocks_) {
    h = block.conv.forward(h);
    if (block.pool) h = block.pool->forward(h);
    taps.push_back(global_average_pool(h));
  }
  Tensor fused = fuse(std::move(taps));
  Tensor dropped = dropout_.forward(fused, mode, dropout_rng);
  return head_.forward(dropped);
}

void Model::backward(const Tensor& dlogits) {
  Tensor d = head_.backward(dlogits);
  d = dropout_.backward(d);
  std::vector<Tensor> dtaps = fuse_backward(d);

  Tensor dmap;  // gradient flowing into the output of the current block
  for (std::size_t b = blocks_.size(); b-- > 0;) {
    auto& block = blocks_[b];
    if (!dtaps[b].empty()) {
      Tensor from_tap = global_average_pool_backward(dtaps[b], block.output_shape);
      if (dmap.empty()) {
        dmap = std::move(from_tap);
      } else {
        add_into(dmap, from_tap);
      }
    }
    if (dmap.empty()) continue;  // nothing downstream depends on this block yet
    if (block.pool) dmap = block.pool->backward(dmap);
    dmap = block.conv.backward(dmap);
  }
}

void Model::zero_grads() noexcept {
  for (auto& p : all_parameters()) p.grad->fill(0.0);
}

Model::BatchStats Model::forward_backward(std::span<const Sample* const> batch, Mode mode,
                                          Rng& dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  zero_grads();
  BatchStats stats;
  double total = 0.0;
  for (const Sample* sample : batch) {
    const Tensor logits = forward(sample->image, mode, dropout_rng);
    LossAndGrad lg = softmax_cross_entropy(logits, sample->label);
    total += lg.loss;
    if (argmax(logits) == sample->label) ++stats.correct;
    backward(lg.grad);
  }
  const double inv = 1.0 / static_cast<double>(batch.size());
  for (auto& p : all_parameters()) {
    for (auto& g : p.grad->values()) g *= inv;
  }
  stats.loss = total / static_cast<double>(batch.size());
  stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(batch.size());
  return stats;
}

Model::BatchStats Model::evaluate(std::span<const Sample* const> batch) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  Rng unused(0);
  BatchStats stats;
  double total = 0.0;
  for (const Sample* sample : batch) {
    const Tensor logits = forward(sample->image, Mode::eval, unused);
    total += softmax_cross_entropy(logits, sample->label).loss;
    if (argmax(logits) == sample->label) ++stats.correct;
  }
  stats.loss = total / static_cast<double>(batch.size());
  stats.accuracy = static_cast<double>(stats.correct) / static_cast<double>(batch.size());
  return stats;
}

}  // namespace kpff
