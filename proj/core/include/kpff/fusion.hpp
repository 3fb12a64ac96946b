#pragma once

// Feature fusion: Kronecker product, the Add/Concat baselines, and the
// Kronecker-product fusion layer (KPFF) that generalizes both.
//
// Indexing is 0-based throughout. For n inputs of common length r the fused
// vector y has n*r entries split into n blocks; block k is the slice
// [k*r, (k+1)*r). With the learnable weights stored as an n x n matrix W
// whose row i is w_i:
//
//   y[k*r + c]      = sum_i W[i][k] * x_i[c]
//   dL/dW[i][b]     = sum_{c<r} g[b*r + c] * x_i[c]
//   dL/dx_j[c]      = sum_{k<n} g[k*r + c] * W[j][k]
//
// where g = dL/dy is the upstream gradient.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "kpff/rng.hpp"
#include "kpff/tensor.hpp"

namespace kpff {

/// n >= 1 rank-1 feature vectors of a common length r >= 1.
class FusionInputs {
 public:
  explicit FusionInputs(std::vector<Tensor> xs);

  std::size_t count() const noexcept { return xs_.size(); }
  std::size_t dim() const noexcept { return xs_.front().size(); }
  const Tensor& operator[](std::size_t i) const { return xs_[i]; }
  const std::vector<Tensor>& vectors() const noexcept { return xs_; }

 private:
  std::vector<Tensor> xs_;
};

/// Kronecker product of two matrices; rank-1 operands are promoted to
/// column matrices. Result is (m*p) x (n*q) with block (i,j) = a[i,j] * b.
Tensor kron(const Tensor& a, const Tensor& b);

/// e_index with a 1-based index, matching the usual e_1..e_n notation.
Tensor unit_vector(std::size_t index, std::size_t n);

Tensor fuse_add(const FusionInputs& inputs);
Tensor fuse_concat(const FusionInputs& inputs);

/// Arithmetic tally filled in by instrumented calls.
struct OpCounter {
  std::uint64_t multiply_adds = 0;
  std::uint64_t copies = 0;
};

/// Concat with an optional element-copy tally.
Tensor fuse_concat(const FusionInputs& inputs, OpCounter* counter);

/// Learnable Kronecker-product fusion: y = sum_i w_i (x) x_i.
///
/// Weights live in an n x n matrix (row i is w_i) so the optimizer treats
/// them as one parameter. `backward` accumulates into the weight gradient;
/// call `zero_grads` between steps.
class KpffLayer {
 public:
  /// Initialized to the Concat configuration w_i = e_i.
  explicit KpffLayer(std::size_t n);
  /// Row i of `weights` is w_i; must be n x n.
  explicit KpffLayer(Tensor weights);
  /// Builds from a list of n vectors of length n.
  static KpffLayer from_vectors(const std::vector<Tensor>& ws);
  /// w_i = e_1 for every i (the Add configuration, zero-padded).
  static KpffLayer add_configuration(std::size_t n);

  std::size_t count() const noexcept { return n_; }

  Tensor& weights() noexcept { return weights_; }
  const Tensor& weights() const noexcept { return weights_; }
  Tensor& weight_grads() noexcept { return grad_; }
  const Tensor& weight_grads() const noexcept { return grad_; }
  /// w_i as a length-n vector (0-based i).
  Tensor weight_vector(std::size_t i) const;

  /// Adds zero-mean Gaussian noise of standard deviation `sigma`.
  void perturb(Rng& rng, double sigma);

  Tensor forward(const FusionInputs& inputs, OpCounter* counter = nullptr);
  /// Returns dL/dx_j for every input and accumulates dL/dW.
  std::vector<Tensor> backward(const Tensor& upstream);

  void zero_grads() noexcept;
  bool has_cache() const noexcept { return cache_.has_value(); }
  void clear_cache() noexcept { cache_.reset(); }
  const std::optional<FusionInputs>& cache() const noexcept { return cache_; }

 private:
  std::size_t n_;
  Tensor weights_;
  Tensor grad_;
  std::optional<FusionInputs> cache_;
};

/// Affine map W x + b that brings an input of length `in` to the common
/// fusion length `out`.
class Projection {
 public:
  Projection(std::size_t in, std::size_t out);
  Projection(Tensor weight, Tensor bias);

  std::size_t in_dim() const noexcept { return weight_.extent(1); }
  std::size_t out_dim() const noexcept { return weight_.extent(0); }

  /// Uniform in [-1/sqrt(in), 1/sqrt(in)] for weights and bias.
  void init_uniform(Rng& rng);

  Tensor& weight() noexcept { return weight_; }
  const Tensor& weight() const noexcept { return weight_; }
  Tensor& bias() noexcept { return bias_; }
  const Tensor& bias() const noexcept { return bias_; }
  Tensor& weight_grad() noexcept { return weight_grad_; }
  Tensor& bias_grad() noexcept { return bias_grad_; }

  /// Pure application; no caching.
  Tensor apply(const Tensor& x) const;
  Tensor forward(const Tensor& x);
  Tensor backward(const Tensor& upstream);
  void zero_grads() noexcept;

 private:
  Tensor weight_;
  Tensor bias_;
  Tensor weight_grad_;
  Tensor bias_grad_;
  std::optional<Tensor> cache_;
};

Tensor project(const Projection& p, const Tensor& x);

/// How the common fusion length r is chosen from mismatched input lengths.
struct ProjectionPolicy {
  enum class Kind { smallest, largest, fixed };
  Kind kind = Kind::smallest;
  std::size_t fixed_dim = 0;

  static std::optional<ProjectionPolicy> parse(const std::string& text);
  std::string to_string() const;
  friend bool operator==(const ProjectionPolicy&, const ProjectionPolicy&) = default;
};

std::size_t common_dimension(const std::vector<std::size_t>& dims, const ProjectionPolicy& policy);

}  // namespace kpff
