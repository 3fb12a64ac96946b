#pragma once

// Finite-difference and dense-Jacobian oracles. These deliberately share no
// arithmetic with the backward passes they validate.

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kpff/fusion.hpp"
#include "kpff/rng.hpp"
#include "kpff/tensor.hpp"

namespace kpff {

/// Relative-error denominator floor.
inline constexpr double kRelErrorFloor = 1e-12;
/// Both sides below this magnitude compare absolutely.
inline constexpr double kAbsTolerance = 1e-9;
/// Default relative step; the actual step for coordinate k is h * max(1, |theta_k|).
inline constexpr double kDefaultStep = 1e-6;
/// Cap on coordinates sampled per parameter tensor.
inline constexpr std::size_t kMaxSampledCoordinates = 200;

struct GradCheckReport {
  std::string name;
  double analytic = 0.0;
  double numeric = 0.0;
  double relative_error = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

/// |a - n| / max(1e-12, |a| + |n|).
double relative_error(double analytic, double numeric) noexcept;
GradCheckReport make_report(std::string name, double analytic, double numeric, double tolerance);

using ScalarFn = std::function<double(const Tensor&)>;

/// Central difference along coordinate k with step h * max(1, |theta_k|).
double finite_diff_coordinate(const ScalarFn& f, const Tensor& theta, std::size_t k,
                              double h = kDefaultStep);
/// Full central-difference gradient. Throws NumericError if f is non-finite.
Tensor finite_diff_grad(const ScalarFn& f, const Tensor& theta, double h = kDefaultStep);

/// Up to `limit` distinct coordinates of a tensor with `size` entries,
/// always including the first and last, in ascending order.
std::vector<std::size_t> sample_coordinates(std::size_t size, Rng& rng,
                                            std::size_t limit = kMaxSampledCoordinates);

/// Compares `analytic` against finite differences of `loss` taken by
/// perturbing `theta` in place (restored afterwards).
std::vector<GradCheckReport> check_against_finite_differences(
    const std::string& name, Tensor& theta, const Tensor& analytic,
    const std::function<double()>& loss, double tolerance, Rng& rng,
    double h = kDefaultStep, std::size_t limit = kMaxSampledCoordinates);

struct KpffJacobians {
  Tensor wrt_weights;  // (n*r) x (n*n); column i*n + b is dy/dW[i][b]
  Tensor wrt_inputs;   // (n*r) x (n*r); column j*r + c is dy/dx_j[c]
};

/// Dense Jacobians of y = sum_i w_i (x) x_i, filled entry by entry from the
/// case formulas (block of row a is a / r, offset a % r).
KpffJacobians kpff_dense_jacobians(const KpffLayer& layer, const FusionInputs& inputs);

/// J^T u, summing rows in ascending order.
Tensor transpose_times(const Tensor& jacobian, const Tensor& u);

// --- check batteries --------------------------------------------------------

/// A random KPFF instance (weights, inputs, smooth loss coefficients).
struct KpffInstance {
  KpffLayer layer;
  FusionInputs inputs;
  Tensor linear;  // loss L(y) = sum_a linear[a]*y[a] + 0.5*sum_a y[a]^2
};

KpffInstance random_kpff_instance(std::size_t n, std::size_t r, Rng& rng);
double kpff_instance_loss(KpffLayer& layer, const FusionInputs& inputs, const Tensor& linear);

/// Analytic weight and input gradients versus finite differences.
std::vector<GradCheckReport> check_kpff_finite_differences(std::size_t n, std::size_t r,
                                                           std::uint64_t seed, double tolerance);
/// Analytic gradients versus J^T upstream from the dense Jacobians.
std::vector<GradCheckReport> check_kpff_jacobian_oracle(std::size_t n, std::size_t r,
                                                        std::uint64_t seed, double tolerance);

std::vector<GradCheckReport> check_layers(std::uint64_t seed, double tolerance);
/// Toy CNN (2 conv blocks, projection, KPFF, head) on 8x8 inputs.
std::vector<GradCheckReport> check_toy_model(std::uint64_t seed, double tolerance);
/// Adam and SGD updates against closed-form steps.
std::vector<GradCheckReport> check_optimizers();

struct GradCheckOptions {
  std::uint64_t seed = 7;
  double tolerance = 1e-6;
  double model_tolerance = 1e-5;
  /// When both are nonzero only this KPFF shape is checked instead of the grid.
  std::size_t n = 0;
  std::size_t r = 0;
};

std::vector<GradCheckReport> run_gradcheck_suite(const GradCheckOptions& options);

}  // namespace kpff
