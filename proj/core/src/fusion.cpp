#include "kpff/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <utility>

#include "kpff/fault.hpp"

namespace kpff {

FusionInputs::FusionInputs(std::vector<Tensor> xs) : xs_(std::move(xs)) {
  if (xs_.empty()) throw ShapeError("fusion needs at least one input");
  const std::size_t r = xs_.front().size();
  for (std::size_t i = 0; i < xs_.size(); ++i) {
    if (xs_[i].rank() != 1) {
      throw ShapeError("fusion input " + std::to_string(i) + " is not a vector: " +
                       shape_to_string(xs_[i].shape()));
    }
    if (xs_[i].size() != r) {
      throw ShapeError("fusion input " + std::to_string(i) + " has length " +
                       std::to_string(xs_[i].size()) + ", expected " + std::to_string(r));
    }
  }
}

namespace {

Tensor as_matrix(const Tensor& t) {
  if (t.rank() == 1) return t.reshaped({t.size(), 1});
  if (t.rank() == 2) return t;
  throw ShapeError("kron expects rank-1 or rank-2 operands, got " + shape_to_string(t.shape()));
}

}  // namespace

Tensor kron(const Tensor& a_in, const Tensor& b_in) {
  const Tensor a = as_matrix(a_in);
  const Tensor b = as_matrix(b_in);
  const std::size_t m = a.extent(0), n = a.extent(1);
  const std::size_t p = b.extent(0), q = b.extent(1);
  Tensor out({m * p, n * q});
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < n; ++j) {
      const double s = a.at(i, j);
      for (std::size_t k = 0; k < p; ++k) {
        for (std::size_t l = 0; l < q; ++l) {
          out.at(i * p + k, j * q + l) = s * b.at(k, l);
        }
      }
    }
  }
  return out;
}

Tensor unit_vector(std::size_t index, std::size_t n) {
  if (index < 1 || index > n) {
    throw std::out_of_range("unit_vector: index " + std::to_string(index) + " outside 1.." +
                            std::to_string(n));
  }
  Tensor e({n});
  e[index - 1] = 1.0;
  return e;
}

Tensor fuse_add(const FusionInputs& inputs) {
  Tensor y({inputs.dim()});
  for (const auto& x : inputs.vectors()) add_into(y, x);
  require_finite(y, "fuse_add");
  return y;
}

Tensor fuse_concat(const FusionInputs& inputs) { return fuse_concat(inputs, nullptr); }

Tensor fuse_concat(const FusionInputs& inputs, OpCounter* counter) {
  const std::size_t r = inputs.dim();
  Tensor y({inputs.count() * r});
  auto out = y.values();
  for (std::size_t i = 0; i < inputs.count(); ++i) {
    std::ranges::copy(inputs[i].values(), out.begin() + static_cast<std::ptrdiff_t>(i * r));
  }
  if (counter) counter->copies += inputs.count() * r;
  return y;
}

KpffLayer::KpffLayer(std::size_t n) : n_(n), weights_(identity(n)), grad_({n, n}) {}

KpffLayer::KpffLayer(Tensor weights) : n_(0), weights_(std::move(weights)) {
  if (weights_.rank() != 2 || weights_.extent(0) != weights_.extent(1)) {
    throw ShapeError("kpff weights must be square n x n, got " + shape_to_string(weights_.shape()));
  }
  n_ = weights_.extent(0);
  grad_ = Tensor({n_, n_});
}

KpffLayer KpffLayer::from_vectors(const std::vector<Tensor>& ws) {
  const std::size_t n = ws.size();
  if (n == 0) throw ShapeError("kpff needs at least one weight vector");
  Tensor w({n, n});
  for (std::size_t i = 0; i < n; ++i) {
    if (ws[i].rank() != 1 || ws[i].size() != n) {
      throw ShapeError("kpff weight vector " + std::to_string(i) + " must have length " +
                       std::to_string(n) + ", got " + shape_to_string(ws[i].shape()));
    }
    for (std::size_t b = 0; b < n; ++b) w.at(i, b) = ws[i][b];
  }
  return KpffLayer(std::move(w));
}

KpffLayer KpffLayer::add_configuration(std::size_t n) {
  Tensor w({n, n});
  for (std::size_t i = 0; i < n; ++i) w.at(i, 0) = 1.0;
  return KpffLayer(std::move(w));
}

Tensor KpffLayer::weight_vector(std::size_t i) const {
  std::vector<double> row(n_);
  for (std::size_t b = 0; b < n_; ++b) row[b] = weights_.at(i, b);
  return Tensor::vector(std::move(row));
}

void KpffLayer::perturb(Rng& rng, double sigma) {
  if (sigma == 0.0) return;
  for (auto& w : weights_.values()) w += sigma * rng.normal();
}

Tensor KpffLayer::forward(const FusionInputs& inputs, OpCounter* counter) {
  if (inputs.count() != n_) {
    throw ShapeError("kpff layer has " + std::to_string(n_) + " weight vectors but got " +
                     std::to_string(inputs.count()) + " inputs");
  }
  const std::size_t r = inputs.dim();
  Tensor y({n_ * r});
  for (std::size_t k = 0; k < n_; ++k) {
    double* block = y.values().data() + k * r;
    for (std::size_t i = 0; i < n_; ++i) {
      const double w = weights_.at(i, k);
      const auto x = inputs[i].values();
      for (std::size_t c = 0; c < r; ++c) block[c] += w * x[c];
      if (counter) counter->multiply_adds += r;
    }
  }
  require_finite(y, "kpff forward");
  cache_ = inputs;
  return y;
}

std::vector<Tensor> KpffLayer::backward(const Tensor& upstream) {
  if (!cache_) throw std::logic_error("kpff backward called before forward");
  const FusionInputs& xs = *cache_;
  const std::size_t r = xs.dim();
  if (upstream.rank() != 1 || upstream.size() != n_ * r) {
    throw ShapeError("kpff backward: upstream must have length " + std::to_string(n_ * r) +
                     ", got " + shape_to_string(upstream.shape()));
  }
  const auto g = upstream.values();

  // Weight gradient: block b of the upstream dotted with x_i.
  const bool shift_block = fault_active(Fault::kpff_w_block_offset);
  for (std::size_t i = 0; i < n_; ++i) {
    const auto x = xs[i].values();
    for (std::size_t b = 0; b < n_; ++b) {
      const std::size_t block = shift_block ? (b + 1) % n_ : b;
      double acc = 0.0;
      for (std::size_t c = 0; c < r; ++c) acc += g[block * r + c] * x[c];
      grad_.at(i, b) += acc;
    }
  }

  // Input gradient: w_j weights the c-th entry of every block.
  const bool transpose = fault_active(Fault::kpff_x_transposed);
  std::vector<Tensor> dx;
  dx.reserve(n_);
  for (std::size_t j = 0; j < n_; ++j) {
    Tensor d({r});
    for (std::size_t c = 0; c < r; ++c) {
      double acc = 0.0;
      for (std::size_t k = 0; k < n_; ++k) {
        acc += g[k * r + c] * (transpose ? weights_.at(k, j) : weights_.at(j, k));
      }
      d[c] = acc;
    }
    dx.push_back(std::move(d));
  }
  return dx;
}

void KpffLayer::zero_grads() noexcept { grad_.fill(0.0); }

Projection::Projection(std::size_t in, std::size_t out)
    : weight_({out, in}), bias_({out}), weight_grad_({out, in}), bias_grad_({out}) {}

Projection::Projection(Tensor weight, Tensor bias)
    : weight_(std::move(weight)), bias_(std::move(bias)) {
  if (weight_.rank() != 2) throw ShapeError("projection weight must be a matrix");
  require_shape(bias_, {weight_.extent(0)}, "projection bias");
  weight_grad_ = Tensor(weight_.shape());
  bias_grad_ = Tensor(bias_.shape());
}

void Projection::init_uniform(Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in_dim()));
  for (auto& w : weight_.values()) w = rng.uniform(-bound, bound);
  for (auto& b : bias_.values()) b = rng.uniform(-bound, bound);
}

Tensor Projection::apply(const Tensor& x) const {
  if (x.rank() != 1 || x.size() != in_dim()) {
    throw ShapeError("projection expects length " + std::to_string(in_dim()) + ", got " +
                     shape_to_string(x.shape()));
  }
  return elementwise_add(matvec(weight_, x), bias_);
}

Tensor Projection::forward(const Tensor& x) {
  Tensor y = apply(x);
  cache_ = x;
  return y;
}

Tensor Projection::backward(const Tensor& upstream) {
  if (!cache_) throw std::logic_error("projection backward called before forward");
  require_shape(upstream, {out_dim()}, "projection backward");
  const Tensor& x = *cache_;
  Tensor dx({in_dim()});
  for (std::size_t o = 0; o < out_dim(); ++o) {
    const double g = upstream[o];
    bias_grad_[o] += g;
    for (std::size_t i = 0; i < in_dim(); ++i) {
      weight_grad_.at(o, i) += g * x[i];
      dx[i] += g * weight_.at(o, i);
    }
  }
  return dx;
}

void Projection::zero_grads() noexcept {
  weight_grad_.fill(0.0);
  bias_grad_.fill(0.0);
}

Tensor project(const Projection& p, const Tensor& x) { return p.apply(x); }

std::optional<ProjectionPolicy> ProjectionPolicy::parse(const std::string& text) {
  if (text == "smallest") return ProjectionPolicy{Kind::smallest, 0};
  if (text == "largest") return ProjectionPolicy{Kind::largest, 0};
  try {
    std::size_t used = 0;
    const unsigned long v = std::stoul(text, &used);
    if (used == text.size() && v > 0) return ProjectionPolicy{Kind::fixed, v};
  } catch (const std::exception&) {
  }
  return std::nullopt;
}

std::string ProjectionPolicy::to_string() const {
  switch (kind) {
    case Kind::smallest: return "smallest";
    case Kind::largest: return "largest";
    case Kind::fixed: return std::to_string(fixed_dim);
  }
  return "smallest";
}

std::size_t common_dimension(const std::vector<std::size_t>& dims, const ProjectionPolicy& policy) {
  if (dims.empty()) throw ShapeError("no input dimensions to reconcile");
  switch (policy.kind) {
    case ProjectionPolicy::Kind::smallest: return *std::ranges::min_element(dims);
    case ProjectionPolicy::Kind::largest: return *std::ranges::max_element(dims);
    case ProjectionPolicy::Kind::fixed: return policy.fixed_dim;
  }
  return dims.front();
}

}  // namespace kpff
