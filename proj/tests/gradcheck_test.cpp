#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>

#include "kpff/fault.hpp"
#include "kpff/gradcheck.hpp"

namespace kpff {
namespace {

bool all_pass(const std::vector<GradCheckReport>& reports) {
  for (const auto& r : reports) {
    if (!r.pass) return false;
  }
  return !reports.empty();
}

TEST(FiniteDiff, CubicAndQuadratic) {
  const ScalarFn cube = [](const Tensor& t) { return t[0] * t[0] * t[0]; };
  EXPECT_NEAR(finite_diff_coordinate(cube, Tensor::vector({2.0}), 0), 12.0, 1e-6);
  const ScalarFn quad = [](const Tensor& t) { return 3 * t[0] * t[0] + t[0] * t[1]; };
  const Tensor g = finite_diff_grad(quad, Tensor::vector({1.0, -2.0}));
  EXPECT_NEAR(g[0], 4.0, 1e-7);
  EXPECT_NEAR(g[1], 1.0, 1e-7);
}

TEST(FiniteDiff, NonFiniteLossThrows) {
  const ScalarFn bad = [](const Tensor& t) { return std::log(t[0]); };
  EXPECT_THROW(finite_diff_grad(bad, Tensor::vector({0.0})), NumericError);
}

TEST(RelativeError, FloorAndSymmetry) {
  EXPECT_EQ(relative_error(0.0, 0.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 3.0), 0.5);
  EXPECT_EQ(relative_error(1.0, 3.0), relative_error(3.0, 1.0));
  EXPECT_TRUE(make_report("tiny", 1e-11, -1e-11, 1e-6).pass);
  EXPECT_FALSE(make_report("big", 1.0, 1.1, 1e-6).pass);
}

TEST(SampleCoordinates, IncludesEndsAndCaps) {
  Rng rng(1);
  const auto all = sample_coordinates(5, rng);
  EXPECT_EQ(all, (std::vector<std::size_t>{0, 1, 2, 3, 4}));
  const auto some = sample_coordinates(1000, rng, 20);
  ASSERT_EQ(some.size(), 20u);
  EXPECT_EQ(some.front(), 0u);
  EXPECT_EQ(some.back(), 999u);
  EXPECT_TRUE(std::is_sorted(some.begin(), some.end()));
  EXPECT_TRUE(std::adjacent_find(some.begin(), some.end()) == some.end());
}

TEST(KpffJacobians, SparsityPattern) {
  for (std::size_t n = 1; n <= 4; ++n) {
    for (std::size_t r = 1; r <= 5; ++r) {
      Rng rng(n * 10 + r);
      const KpffInstance inst = random_kpff_instance(n, r, rng);
      const KpffJacobians jac = kpff_dense_jacobians(inst.layer, inst.inputs);
      ASSERT_EQ(jac.wrt_weights.shape(), (Shape{n * r, n * n}));
      ASSERT_EQ(jac.wrt_inputs.shape(), (Shape{n * r, n * r}));
      // Output (k, c) depends on W[i][k] and x_i[c] for every i: n nonzeros per row.
      std::size_t nz_w = 0, nz_x = 0;
      for (double v : jac.wrt_weights.values()) nz_w += v != 0.0;
      for (double v : jac.wrt_inputs.values()) nz_x += v != 0.0;
      EXPECT_EQ(nz_w, n * n * r);
      EXPECT_EQ(nz_x, n * n * r);
    }
  }
}

TEST(KpffJacobians, SingleInputIsScaledIdentity) {
  KpffLayer layer(Tensor::matrix({{2.5}}));
  const FusionInputs xs(std::vector<Tensor>{Tensor::vector({1, -1, 4})});
  const KpffJacobians jac = kpff_dense_jacobians(layer, xs);
  EXPECT_EQ(jac.wrt_inputs, scale(identity(3), 2.5));
  EXPECT_EQ(jac.wrt_weights, Tensor({3, 1}, {1, -1, 4}));
}

TEST(GradCheck, KpffGridPasses) {
  for (std::size_t n : {1, 2, 3, 4}) {
    for (std::size_t r : {1, 3, 5, 8}) {
      EXPECT_TRUE(all_pass(check_kpff_finite_differences(n, r, 7, 1e-6))) << n << "," << r;
      EXPECT_TRUE(all_pass(check_kpff_jacobian_oracle(n, r, 7, 1e-15))) << n << "," << r;
    }
  }
}

TEST(GradCheck, LayersModelAndOptimizersPass) {
  EXPECT_TRUE(all_pass(check_layers(7, 1e-6)));
  EXPECT_TRUE(all_pass(check_toy_model(7, 1e-5)));
  EXPECT_TRUE(all_pass(check_optimizers()));
}

TEST(GradCheck, FaultsAreDetected) {
  if (!kTestHooksCompiled) GTEST_SKIP() << "hooks not compiled";
  {
    ScopedFault f(Fault::kpff_w_block_offset);
    EXPECT_FALSE(all_pass(check_kpff_jacobian_oracle(3, 4, 7, 1e-15)));
  }
  {
    ScopedFault f(Fault::kpff_x_transposed);
    EXPECT_FALSE(all_pass(check_kpff_finite_differences(3, 4, 7, 1e-6)));
  }
  {
    ScopedFault f(Fault::adam_no_bias_correction);
    EXPECT_FALSE(all_pass(check_optimizers()));
  }
}

TEST(GradCheck, SuiteRespectsShapeSelection) {
  GradCheckOptions opts;
  opts.n = 2;
  opts.r = 3;
  const auto reports = run_gradcheck_suite(opts);
  EXPECT_TRUE(all_pass(reports));
  for (const auto& r : reports) {
    if (r.name.rfind("kpff[", 0) == 0) {
      EXPECT_NE(r.name.find("n=2"), std::string::npos) << r.name;
    }
  }
}

}  // namespace
}  // namespace kpff
