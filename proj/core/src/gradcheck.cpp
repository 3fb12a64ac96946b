#include "kpff/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kpff/layers.hpp"
#include "kpff/model.hpp"
#include "kpff/optimizer.hpp"

namespace kpff {

double relative_error(double analytic, double numeric) noexcept {
  return std::abs(analytic - numeric) / std::max(kRelErrorFloor, std::abs(analytic) + std::abs(numeric));
}

GradCheckReport make_report(std::string name, double analytic, double numeric, double tolerance) {
  GradCheckReport r;
  r.name = std::move(name);
  r.analytic = analytic;
  r.numeric = numeric;
  r.relative_error = relative_error(analytic, numeric);
  r.tolerance = tolerance;
  const bool both_tiny = std::abs(analytic) < kAbsTolerance && std::abs(numeric) < kAbsTolerance;
  r.pass = both_tiny ? std::abs(analytic - numeric) < kAbsTolerance : r.relative_error < tolerance;
  return r;
}

double finite_diff_coordinate(const ScalarFn& f, const Tensor& theta, std::size_t k, double h) {
  const double step = h * std::max(1.0, std::abs(theta[k]));
  Tensor probe = theta;
  probe[k] = theta[k] + step;
  const double up = f(probe);
  probe[k] = theta[k] - step;
  const double down = f(probe);
  if (!std::isfinite(up) || !std::isfinite(down)) {
    throw NumericError("finite difference: function returned a non-finite value");
  }
  return (up - down) / (2.0 * step);
}

Tensor finite_diff_grad(const ScalarFn& f, const Tensor& theta, double h) {
  Tensor grad(theta.shape());
  for (std::size_t k = 0; k < theta.size(); ++k) grad[k] = finite_diff_coordinate(f, theta, k, h);
  return grad;
}

std::vector<std::size_t> sample_coordinates(std::size_t size, Rng& rng, std::size_t limit) {
  std::vector<std::size_t> out;
  if (size <= limit) {
    out.resize(size);
    for (std::size_t k = 0; k < size; ++k) out[k] = k;
    return out;
  }
  std::set<std::size_t> picked{0, size - 1};
  while (picked.size() < limit) picked.insert(static_cast<std::size_t>(rng.below(size)));
  return {picked.begin(), picked.end()};
}

std::vector<GradCheckReport> check_against_finite_differences(
    const std::string& name, Tensor& theta, const Tensor& analytic,
    const std::function<double()>& loss, double tolerance, Rng& rng, double h, std::size_t limit) {
  require_shape(analytic, theta.shape(), "gradient check " + name);
  std::vector<GradCheckReport> rows;
  for (std::size_t k : sample_coordinates(theta.size(), rng, limit)) {
    const double original = theta[k];
    const double step = h * std::max(1.0, std::abs(original));
    theta[k] = original + step;
    const double up = loss();
    theta[k] = original - step;
    const double down = loss();
    theta[k] = original;
    if (!std::isfinite(up) || !std::isfinite(down)) {
      throw NumericError("finite difference of " + name + ": non-finite loss");
    }
    const double numeric = (up - down) / (2.0 * step);
    rows.push_back(make_report(name + "[" + std::to_string(k) + "]", analytic[k], numeric, tolerance));
  }
  return rows;
}

KpffJacobians kpff_dense_jacobians(const KpffLayer& layer, const FusionInputs& inputs) {
  const std::size_t n = layer.count();
  if (inputs.count() != n) throw ShapeError("jacobian: layer/input count mismatch");
  const std::size_t r = inputs.dim();
  KpffJacobians j{Tensor({n * r, n * n}), Tensor({n * r, n * r})};
  for (std::size_t a = 0; a < n * r; ++a) {
    const std::size_t group = a / r;          // 0-based ceil(a/r) - 1
    const std::size_t offset = a - group * r;  // position inside the group
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t b = 0; b < n; ++b) {
        if (b == group) j.wrt_weights.at(a, i * n + b) = inputs[i][offset];
      }
    }
    for (std::size_t jj = 0; jj < n; ++jj) {
      for (std::size_t c = 0; c < r; ++c) {
        if (c == offset) j.wrt_inputs.at(a, jj * r + c) = layer.weights().at(jj, group);
      }
    }
  }
  return j;
}

Tensor transpose_times(const Tensor& jacobian, const Tensor& u) {
  if (jacobian.rank() != 2 || u.size() != jacobian.extent(0)) {
    throw ShapeError("transpose_times: dimension mismatch");
  }
  const std::size_t rows = jacobian.extent(0), cols = jacobian.extent(1);
  Tensor out({cols});
  for (std::size_t col = 0; col < cols; ++col) {
    double acc = 0.0;
    for (std::size_t a = 0; a < rows; ++a) acc += u[a] * jacobian.at(a, col);
    out[col] = acc;
  }
  return out;
}

namespace {

Tensor random_tensor(const Shape& shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(lo, hi);
  return t;
}

std::string kpff_tag(std::size_t n, std::size_t r) {
  return "kpff[n=" + std::to_string(n) + ",r=" + std::to_string(r) + "]";
}

// Smooth loss on a layer output: sum c*out + 0.5*sum out^2, upstream c + out.
double smooth_loss(const Tensor& out, const Tensor& c) {
  double acc = 0.0;
  for (std::size_t k = 0; k < out.size(); ++k) acc += c[k] * out[k] + 0.5 * out[k] * out[k];
  return acc;
}

Tensor smooth_loss_grad(const Tensor& out, const Tensor& c) {
  Tensor g = out;
  for (std::size_t k = 0; k < g.size(); ++k) g[k] += c[k];
  return g;
}

void append(std::vector<GradCheckReport>& dst, std::vector<GradCheckReport> src) {
  dst.insert(dst.end(), std::make_move_iterator(src.begin()), std::make_move_iterator(src.end()));
}

}  // namespace

KpffInstance random_kpff_instance(std::size_t n, std::size_t r, Rng& rng) {
  KpffLayer layer(random_tensor({n, n}, rng));
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(random_tensor({r}, rng));
  Tensor linear = random_tensor({n * r}, rng);
  return {std::move(layer), FusionInputs(std::move(xs)), std::move(linear)};
}

double kpff_instance_loss(KpffLayer& layer, const FusionInputs& inputs, const Tensor& linear) {
  return smooth_loss(layer.forward(inputs), linear);
}

std::vector<GradCheckReport> check_kpff_finite_differences(std::size_t n, std::size_t r,
                                                           std::uint64_t seed, double tolerance) {
  Rng rng = Rng::stream(seed, Stream::test, n * 1000 + r);
  KpffInstance inst = random_kpff_instance(n, r, rng);
  const Tensor y = inst.layer.forward(inst.inputs);
  inst.layer.zero_grads();
  const std::vector<Tensor> dx = inst.layer.backward(smooth_loss_grad(y, inst.linear));
  const Tensor dw = inst.layer.weight_grads();

  const std::string tag = kpff_tag(n, r);
  std::vector<GradCheckReport> rows;

  Tensor& w = inst.layer.weights();
  append(rows, check_against_finite_differences(
                   tag + ".w", w, dw,
                   [&] { return kpff_instance_loss(inst.layer, inst.inputs, inst.linear); },
                   tolerance, rng));

  for (std::size_t j = 0; j < n; ++j) {
    Tensor xj = inst.inputs[j];
    auto loss = [&] {
      std::vector<Tensor> xs = inst.inputs.vectors();
      xs[j] = xj;
      return kpff_instance_loss(inst.layer, FusionInputs(std::move(xs)), inst.linear);
    };
    append(rows, check_against_finite_differences(tag + ".x" + std::to_string(j), xj, dx[j], loss,
                                                  tolerance, rng));
  }
  return rows;
}

std::vector<GradCheckReport> check_kpff_jacobian_oracle(std::size_t n, std::size_t r,
                                                        std::uint64_t seed, double tolerance) {
  Rng rng = Rng::stream(seed, Stream::test, 500000 + n * 1000 + r);
  KpffInstance inst = random_kpff_instance(n, r, rng);
  const Tensor upstream = random_tensor({n * r}, rng);
  inst.layer.forward(inst.inputs);
  inst.layer.zero_grads();
  const std::vector<Tensor> dx = inst.layer.backward(upstream);
  const Tensor& dw = inst.layer.weight_grads();

  const KpffJacobians jac = kpff_dense_jacobians(inst.layer, inst.inputs);
  const Tensor oracle_w = transpose_times(jac.wrt_weights, upstream);
  const Tensor oracle_x = transpose_times(jac.wrt_inputs, upstream);

  const std::string tag = kpff_tag(n, r) + ".jacobian";
  std::vector<GradCheckReport> rows;
  for (std::size_t k = 0; k < n * n; ++k) {
    rows.push_back(make_report(tag + ".w[" + std::to_string(k) + "]", dw[k], oracle_w[k], tolerance));
  }
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t c = 0; c < r; ++c) {
      rows.push_back(make_report(tag + ".x" + std::to_string(j) + "[" + std::to_string(c) + "]",
                                 dx[j][c], oracle_x[j * r + c], tolerance));
    }
  }
  return rows;
}

std::vector<GradCheckReport> check_layers(std::uint64_t seed, double tolerance) {
  Rng rng = Rng::stream(seed, Stream::test, 900001);
  std::vector<GradCheckReport> rows;

  // Convolution with each smooth-ish activation.
  for (Activation act : {Activation::sigmoid, Activation::leaky_relu, Activation::relu, Activation::identity}) {
    ConvLayer conv(2, 3, 3, 3, act);
    conv.init_uniform(rng);
    Tensor input = random_tensor({2, 6, 5}, rng);
    Tensor out = conv.forward(input);
    const Tensor c = random_tensor(out.shape(), rng);
    conv.zero_grads();
    std::vector<ParamRef> params;
    conv.append_params("conv." + activation_name(act), params);
    const Tensor dinput = conv.backward(smooth_loss_grad(out, c));
    auto loss = [&] { return smooth_loss(conv.forward(input), c); };
    for (auto& p : params) append(rows, check_against_finite_differences(p.name, *p.value, Tensor(*p.grad), loss, tolerance, rng));
    append(rows, check_against_finite_differences("conv." + activation_name(act) + ".input", input, dinput, loss, tolerance, rng));
  }

  // Dense layer.
  for (Activation act : {Activation::identity, Activation::sigmoid, Activation::relu}) {
    DenseLayer dense(7, 4, act);
    dense.init_uniform(rng);
    Tensor input = random_tensor({7}, rng);
    const Tensor out = dense.forward(input);
    const Tensor c = random_tensor(out.shape(), rng);
    std::vector<ParamRef> params;
    dense.append_params("dense." + activation_name(act), params);
    const Tensor dinput = dense.backward(smooth_loss_grad(out, c));
    auto loss = [&] { return smooth_loss(dense.forward(input), c); };
    for (auto& p : params) append(rows, check_against_finite_differences(p.name, *p.value, Tensor(*p.grad), loss, tolerance, rng));
    append(rows, check_against_finite_differences("dense." + activation_name(act) + ".input", input, dinput, loss, tolerance, rng));
  }

  // Projection.
  {
    Projection proj(6, 3);
    proj.init_uniform(rng);
    Tensor input = random_tensor({6}, rng);
    const Tensor out = proj.forward(input);
    const Tensor c = random_tensor(out.shape(), rng);
    const Tensor dinput = proj.backward(smooth_loss_grad(out, c));
    auto loss = [&] { return smooth_loss(proj.forward(input), c); };
    const Tensor dw = proj.weight_grad();
    const Tensor db = proj.bias_grad();
    append(rows, check_against_finite_differences("projection.weight", proj.weight(), dw, loss, tolerance, rng));
    append(rows, check_against_finite_differences("projection.bias", proj.bias(), db, loss, tolerance, rng));
    append(rows, check_against_finite_differences("projection.input", input, dinput, loss, tolerance, rng));
  }

  // Max pool (random inputs have no ties) and global average pool.
  {
    MaxPool2 pool;
    Tensor input = random_tensor({2, 5, 4}, rng);
    const Tensor out = pool.forward(input);
    const Tensor c = random_tensor(out.shape(), rng);
    const Tensor dinput = pool.backward(smooth_loss_grad(out, c));
    auto loss = [&] {
      MaxPool2 fresh;
      return smooth_loss(fresh.forward(input), c);
    };
    append(rows, check_against_finite_differences("maxpool.input", input, dinput, loss, tolerance, rng));
  }
  {
    Tensor input = random_tensor({3, 4, 3}, rng);
    const Tensor out = global_average_pool(input);
    const Tensor c = random_tensor(out.shape(), rng);
    const Tensor dinput = global_average_pool_backward(smooth_loss_grad(out, c), input.shape());
    auto loss = [&] { return smooth_loss(global_average_pool(input), c); };
    append(rows, check_against_finite_differences("global_avg_pool.input", input, dinput, loss, tolerance, rng));
  }

  // Dropout with a fixed mask (same seed for every evaluation).
  {
    Tensor input = random_tensor({20}, rng);
    const std::uint64_t mask_seed = rng.next_u64();
    Dropout drop(0.5);
    Rng mask_rng(mask_seed);
    const Tensor out = drop.forward(input, Mode::train, mask_rng);
    const Tensor c = random_tensor(out.shape(), rng);
    const Tensor dinput = drop.backward(smooth_loss_grad(out, c));
    auto loss = [&] {
      Rng again(mask_seed);
      return smooth_loss(dropout(input, 0.5, Mode::train, again), c);
    };
    append(rows, check_against_finite_differences("dropout.input", input, dinput, loss, tolerance, rng));
  }

  // Softmax cross-entropy on 10-class logits.
  {
    Tensor logits = random_tensor({10}, rng, -3.0, 3.0);
    const std::size_t label = static_cast<std::size_t>(rng.below(10));
    const Tensor grad = softmax_cross_entropy(logits, label).grad;
    auto loss = [&] { return softmax_cross_entropy(logits, label).loss; };
    append(rows, check_against_finite_differences("softmax_xent.logits", logits, grad, loss, tolerance, rng));
  }
  return rows;
}

std::vector<GradCheckReport> check_toy_model(std::uint64_t seed, double tolerance) {
  ModelConfig cfg;
  cfg.input_shape = {1, 8, 8};
  cfg.classes = 3;
  cfg.channels = {4, 6};
  cfg.fusion = FusionMethod::kpff;
  cfg.kpff_init_noise = 0.5;
  cfg.activation = Activation::relu;
  Model model(cfg, seed, 0);

  Rng rng = Rng::stream(seed, Stream::test, 777);
  std::vector<Sample> samples;
  for (std::size_t s = 0; s < 2; ++s) {
    samples.push_back({random_tensor(cfg.input_shape, rng, 0.0, 1.0), s % cfg.classes});
  }
  std::vector<const Sample*> batch;
  for (const auto& s : samples) batch.push_back(&s);

  Rng unused(0);
  model.forward_backward(batch, Mode::eval, unused);
  std::vector<GradCheckReport> rows;
  auto loss = [&] { return model.evaluate(batch).loss; };
  for (auto& p : model.all_parameters()) {
    const Tensor analytic = *p.grad;
    append(rows, check_against_finite_differences("model." + p.name, *p.value, analytic, loss, tolerance, rng));
  }
  return rows;
}

std::vector<GradCheckReport> check_optimizers() {
  std::vector<GradCheckReport> rows;
  constexpr double kTol = 1e-9;

  // First Adam step on a constant gradient moves by lr * |g| / (|g| + eps).
  {
    OptimizerConfig cfg{OptimizerKind::adam, 1e-3, 0.0};
    Optimizer opt(cfg);
    Tensor theta = Tensor::vector({0.5, -2.0, 3.0});
    Tensor grad = Tensor::vector({0.3, -1.5, 4e-3});
    const Tensor before = theta;
    opt.step(std::vector<ParamRef>{{"theta", &theta, &grad}});
    for (std::size_t k = 0; k < theta.size(); ++k) {
      const double moved = std::abs(theta[k] - before[k]);
      const double g = std::abs(grad[k]);
      rows.push_back(make_report("optimizer.adam.first_step[" + std::to_string(k) + "]", moved,
                                 cfg.learning_rate * g / (g + cfg.epsilon), kTol));
    }
  }

  // Several Adam steps with coupled weight decay against a scalar recurrence.
  {
    OptimizerConfig cfg{OptimizerKind::adam, 1e-2, 5e-2};
    Optimizer opt(cfg);
    Tensor theta = Tensor::vector({1.0});
    Tensor grad({1});
    double ref = 1.0, m = 0.0, v = 0.0;
    const double grads[] = {0.7, -0.2, 0.05, 1.3, -0.9};
    for (int t = 1; t <= 5; ++t) {
      grad[0] = grads[t - 1];
      opt.step(std::vector<ParamRef>{{"theta", &theta, &grad}});
      const double g = grads[t - 1] + cfg.weight_decay * ref;
      m = 0.9 * m + 0.1 * g;
      v = 0.999 * v + 0.001 * g * g;
      const double mh = m / (1.0 - std::pow(0.9, t));
      const double vh = v / (1.0 - std::pow(0.999, t));
      ref -= cfg.learning_rate * mh / (std::sqrt(vh) + cfg.epsilon);
      rows.push_back(make_report("optimizer.adam.trajectory[" + std::to_string(t) + "]", theta[0], ref, kTol));
    }
  }

  // One SGD step: theta <- theta - lr * (g + wd * theta).
  {
    OptimizerConfig cfg{OptimizerKind::sgd, 0.1, 0.5};
    Optimizer opt(cfg);
    Tensor theta = Tensor::vector({1.0});
    Tensor grad = Tensor::vector({1.0});
    opt.step(std::vector<ParamRef>{{"theta", &theta, &grad}});
    rows.push_back(make_report("optimizer.sgd.step", theta[0], 1.0 - 0.1 * (1.0 + 0.5), kTol));
  }
  return rows;
}

std::vector<GradCheckReport> run_gradcheck_suite(const GradCheckOptions& options) {
  std::vector<std::pair<std::size_t, std::size_t>> shapes;
  if (options.n > 0 && options.r > 0) {
    shapes.emplace_back(options.n, options.r);
  } else {
    for (std::size_t n : {1, 2, 3, 4}) {
      for (std::size_t r : {1, 3, 5, 8}) shapes.emplace_back(n, r);
    }
  }
  std::vector<GradCheckReport> rows;
  for (auto [n, r] : shapes) {
    append(rows, check_kpff_finite_differences(n, r, options.seed, options.tolerance));
    append(rows, check_kpff_jacobian_oracle(n, r, options.seed, 1e-15));
  }
  append(rows, check_layers(options.seed, options.tolerance));
  append(rows, check_toy_model(options.seed, options.model_tolerance));
  append(rows, check_optimizers());
  return rows;
}

}  // namespace kpff
