#include <gtest/gtest.h>

#include <cmath>

#include "kpff/fault.hpp"
#include "kpff/fusion.hpp"
#include "kpff/gradcheck.hpp"
#include "kpff/rng.hpp"

namespace kpff {
namespace {

// Direct block expansion: block (i, j) of the result is a[i][j] * b.
// Works on raw row-major storage so it shares nothing with kron().
std::vector<std::vector<double>> naive_kron(const std::vector<std::vector<double>>& a,
                                            const std::vector<std::vector<double>>& b) {
  const std::size_t m = a.size(), n = a[0].size(), p = b.size(), q = b[0].size();
  std::vector<std::vector<double>> out(m * p, std::vector<double>(n * q, 0.0));
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j)
      for (std::size_t k = 0; k < p; ++k)
        for (std::size_t l = 0; l < q; ++l) out[i * p + k][j * q + l] = a[i][j] * b[k][l];
  return out;
}

std::vector<std::vector<double>> column(const Tensor& v) {
  std::vector<std::vector<double>> out;
  for (double x : v.values()) out.push_back({x});
  return out;
}

Tensor random_tensor(const Shape& shape, Rng& rng) {
  Tensor t(shape);
  for (auto& v : t.values()) v = rng.uniform(-2.0, 2.0);
  return t;
}

FusionInputs random_inputs(std::size_t n, std::size_t r, Rng& rng) {
  std::vector<Tensor> xs;
  for (std::size_t i = 0; i < n; ++i) xs.push_back(random_tensor({r}, rng));
  return FusionInputs(std::move(xs));
}

FusionInputs inputs(std::initializer_list<Tensor> xs) { return FusionInputs(std::vector<Tensor>(xs)); }

// Sum_i kron(w_i, x_i) via the naive expansion, accumulated in input order.
std::vector<double> oracle_kpff(const KpffLayer& layer, const FusionInputs& xs) {
  std::vector<double> y(layer.count() * xs.dim(), 0.0);
  for (std::size_t i = 0; i < layer.count(); ++i) {
    const auto block = naive_kron(column(layer.weight_vector(i)), column(xs[i]));
    for (std::size_t a = 0; a < y.size(); ++a) y[a] += block[a][0];
  }
  return y;
}

TEST(Kron, UnitScalarIsIdentity) {
  const Tensor b = Tensor::matrix({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(kron(Tensor::matrix({{1}}), b), b);
}

TEST(Kron, UnitVectorPlacesBlock) {
  EXPECT_EQ(kron(unit_vector(1, 2), Tensor::vector({5, 6})), Tensor::vector({5, 6, 0, 0}).reshaped({4, 1}));
}

TEST(Kron, TwoByTwoMatchesBlockExpansion) {
  // Frozen from the block-expansion oracle.
  const Tensor expected = Tensor::matrix(
      {{0, 5, 0, 10}, {6, 7, 12, 14}, {0, 15, 0, 20}, {18, 21, 24, 28}});
  EXPECT_EQ(kron(Tensor::matrix({{1, 2}, {3, 4}}), Tensor::matrix({{0, 5}, {6, 7}})), expected);
  const auto naive = naive_kron({{1, 2}, {3, 4}}, {{0, 5}, {6, 7}});
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(expected.at(i, j), naive[i][j]);
}

TEST(Kron, ShapeLaw) {
  Rng rng(1);
  for (std::size_t m = 1; m <= 4; ++m)
    for (std::size_t n = 1; n <= 4; ++n)
      for (std::size_t p = 1; p <= 4; ++p)
        for (std::size_t q = 1; q <= 4; ++q) {
          const Tensor k = kron(random_tensor({m, n}, rng), random_tensor({p, q}, rng));
          ASSERT_EQ(k.shape(), (Shape{m * p, n * q}));
        }
}

TEST(Kron, Bilinear) {
  Rng rng(2);
  for (int trial = 0; trial < 40; ++trial) {
    const Tensor a = random_tensor({2, 3}, rng), a2 = random_tensor({2, 3}, rng);
    const Tensor b = random_tensor({3, 2}, rng), b2 = random_tensor({3, 2}, rng);
    const double alpha = rng.uniform(-3, 3);
    auto close = [](const Tensor& x, const Tensor& y) {
      for (std::size_t k = 0; k < x.size(); ++k) {
        if (std::abs(x[k] - y[k]) > 1e-12 * std::max(1.0, std::abs(x[k]))) return false;
      }
      return true;
    };
    EXPECT_TRUE(close(kron(scale(a, alpha), b), scale(kron(a, b), alpha)));
    EXPECT_TRUE(close(kron(a, scale(b, alpha)), scale(kron(a, b), alpha)));
    EXPECT_TRUE(close(kron(elementwise_add(a, a2), b), elementwise_add(kron(a, b), kron(a2, b))));
    EXPECT_TRUE(close(kron(a, elementwise_add(b, b2)), elementwise_add(kron(a, b), kron(a, b2))));
  }
}

TEST(UnitVector, Definition) {
  EXPECT_EQ(unit_vector(1, 3), Tensor::vector({1, 0, 0}));
  EXPECT_EQ(unit_vector(3, 3), Tensor::vector({0, 0, 1}));
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t i = 1; i <= n; ++i) {
      const Tensor e = unit_vector(i, n);
      double sum = 0.0;
      for (double v : e.values()) sum += v;
      ASSERT_EQ(sum, 1.0);
    }
  }
  EXPECT_THROW(unit_vector(0, 3), std::out_of_range);
  EXPECT_THROW(unit_vector(4, 3), std::out_of_range);
}

TEST(FusionInputs, RejectsRaggedOrEmpty) {
  EXPECT_THROW(FusionInputs({}), ShapeError);
  EXPECT_THROW(inputs({Tensor::vector({1, 2}), Tensor::vector({1, 2, 3})}), ShapeError);
  EXPECT_THROW(FusionInputs({zeros({2, 2})}), ShapeError);
}

TEST(FuseAdd, Examples) {
  EXPECT_EQ(fuse_add(inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})})), Tensor::vector({4, 6}));
  const Tensor x = Tensor::vector({0.25, -3});
  EXPECT_EQ(fuse_add(inputs({x})), x);
  Rng rng(3);
  const FusionInputs xs = random_inputs(3, 5, rng);
  const Tensor y = fuse_add(xs);
  for (std::size_t c = 0; c < 5; ++c) {
    double expected = 0.0;
    for (std::size_t i = 0; i < 3; ++i) expected += xs[i][c];
    EXPECT_EQ(y[c], expected);
  }
}

TEST(FuseConcat, Examples) {
  const Tensor a = Tensor::vector({1, 2}), b = Tensor::vector({3, 4});
  EXPECT_EQ(fuse_concat(inputs({a, b})), Tensor::vector({1, 2, 3, 4}));
  EXPECT_EQ(fuse_concat(inputs({a})), a);
  EXPECT_EQ(fuse_concat(inputs({b, a})), Tensor::vector({3, 4, 1, 2}));
}

TEST(KpffForward, ConcatConfigurationIsConcat) {
  KpffLayer layer = KpffLayer::from_vectors({unit_vector(1, 2), unit_vector(2, 2)});
  const FusionInputs xs = inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})});
  const Tensor y = layer.forward(xs);
  EXPECT_EQ(y, Tensor::vector({1, 2, 3, 4}));
  EXPECT_EQ(y, fuse_concat(xs));
}

TEST(KpffForward, AddConfigurationIsZeroPaddedAdd) {
  KpffLayer layer = KpffLayer::from_vectors({unit_vector(1, 2), unit_vector(1, 2)});
  EXPECT_EQ(layer.forward(inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})})),
            Tensor::vector({4, 6, 0, 0}));
}

TEST(KpffForward, GeneralWeightsMatchOracle) {
  KpffLayer layer = KpffLayer::from_vectors({Tensor::vector({1, 1}), Tensor::vector({2, 0})});
  const FusionInputs xs = inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})});
  EXPECT_EQ(layer.forward(xs), Tensor::vector({7, 10, 1, 2}));
  EXPECT_EQ(layer.forward(xs).data(), oracle_kpff(layer, xs));
}

TEST(KpffForward, DefaultInitIsConcat) {
  Rng rng(4);
  const FusionInputs xs = random_inputs(4, 3, rng);
  KpffLayer layer(4);
  EXPECT_EQ(layer.forward(xs), fuse_concat(xs));
}

TEST(KpffForward, RejectsCountMismatch) {
  KpffLayer layer(3);
  EXPECT_THROW(layer.forward(inputs({Tensor::vector({1}), Tensor::vector({2})})), ShapeError);
  EXPECT_THROW(KpffLayer::from_vectors({Tensor::vector({1, 0}), Tensor::vector({1})}), ShapeError);
}

TEST(KpffForward, OracleEquivalenceAllSmallShapes) {
  Rng rng(5);
  for (std::size_t n = 1; n <= 8; ++n) {
    for (std::size_t r = 1; r <= 8; ++r) {
      KpffLayer layer(random_tensor({n, n}, rng));
      const FusionInputs xs = random_inputs(n, r, rng);
      const Tensor y = layer.forward(xs);
      const auto expected = oracle_kpff(layer, xs);
      for (std::size_t a = 0; a < y.size(); ++a) ASSERT_NEAR(y[a], expected[a], 1e-15) << n << "," << r;
    }
  }
}

TEST(KpffForward, DegenerationProperties) {
  Rng rng(6);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 1 + rng.below(6), r = 1 + rng.below(9);
    const FusionInputs xs = random_inputs(n, r, rng);
    KpffLayer concat_layer(n);
    ASSERT_EQ(concat_layer.forward(xs), fuse_concat(xs));
    KpffLayer add_layer = KpffLayer::add_configuration(n);
    const Tensor y = add_layer.forward(xs);
    const Tensor sum = fuse_add(xs);
    for (std::size_t c = 0; c < r; ++c) ASSERT_EQ(y[c], sum[c]);
    for (std::size_t a = r; a < n * r; ++a) ASSERT_EQ(y[a], 0.0);
  }
}

TEST(KpffForward, CountsSquaredMultiplyAdds) {
  Rng rng(7);
  for (std::size_t n : {1, 2, 5}) {
    for (std::size_t r : {1, 4, 9}) {
      KpffLayer layer(n);
      OpCounter counter;
      const FusionInputs xs = random_inputs(n, r, rng);
      layer.forward(xs, &counter);
      EXPECT_EQ(counter.multiply_adds, n * n * r);
      fuse_concat(xs, &counter);
      EXPECT_EQ(counter.copies, n * r);
    }
  }
}

TEST(KpffBackward, OnesUpstreamGivesInputSums) {
  KpffLayer layer = KpffLayer::from_vectors({Tensor::vector({0.3, -1}), Tensor::vector({2, 0.5})});
  const FusionInputs xs = inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})});
  layer.forward(xs);
  layer.backward(Tensor::vector({1, 1, 1, 1}));
  // Frozen from central differences of sum(y): 3 for w_1 and 7 for w_2.
  EXPECT_EQ(layer.weight_grads(), Tensor::matrix({{3, 3}, {7, 7}}));
}

TEST(KpffBackward, OnesUpstreamMatchesFiniteDifferences) {
  KpffLayer layer = KpffLayer::from_vectors({Tensor::vector({0.3, -1}), Tensor::vector({2, 0.5})});
  const FusionInputs xs = inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})});
  auto loss = [&](const Tensor& w) {
    KpffLayer probe(w);
    const Tensor y = probe.forward(xs);
    double s = 0.0;
    for (double v : y.values()) s += v;
    return s;
  };
  const Tensor numeric = finite_diff_grad(loss, layer.weights());
  for (std::size_t k = 0; k < 4; ++k) EXPECT_NEAR(numeric[k], k < 2 ? 3.0 : 7.0, 1e-8);
}

TEST(KpffBackward, ZeroUpstreamGivesZeroGradients) {
  Rng rng(8);
  KpffLayer layer(random_tensor({3, 3}, rng));
  layer.forward(random_inputs(3, 4, rng));
  const auto dx = layer.backward(zeros({12}));
  for (const auto& d : dx) EXPECT_EQ(d, zeros({4}));
  EXPECT_EQ(layer.weight_grads(), zeros({3, 3}));
}

TEST(KpffBackward, MatchesDenseJacobians) {
  Rng rng(9);
  for (int trial = 0; trial < 20; ++trial) {
    KpffLayer layer(random_tensor({3, 3}, rng));
    const FusionInputs xs = random_inputs(3, 4, rng);
    const Tensor g = random_tensor({12}, rng);
    layer.forward(xs);
    const auto dx = layer.backward(g);
    const KpffJacobians jac = kpff_dense_jacobians(layer, xs);
    const Tensor dw = transpose_times(jac.wrt_weights, g);
    const Tensor dxs = transpose_times(jac.wrt_inputs, g);
    for (std::size_t k = 0; k < 9; ++k) ASSERT_NEAR(layer.weight_grads()[k], dw[k], 1e-15);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < 4; ++c) ASSERT_NEAR(dx[j][c], dxs[j * 4 + c], 1e-15);
  }
}

TEST(KpffBackward, BoundaryBlocksUseTheirOwnWeights) {
  // Upstream nonzero only in the first block, then only in the last block.
  KpffLayer layer = KpffLayer::from_vectors(
      {Tensor::vector({1, 2, 3}), Tensor::vector({4, 5, 6}), Tensor::vector({7, 8, 9})});
  const FusionInputs xs = inputs({Tensor::vector({1, 10}), Tensor::vector({100, 1000}), Tensor::vector({2, 3})});
  layer.forward(xs);
  auto dx = layer.backward(Tensor::vector({1, 0, 0, 0, 0, 0}));
  EXPECT_EQ(dx[1], Tensor::vector({4, 0}));                 // w_2 entry for block 0
  EXPECT_EQ(layer.weight_grads().at(1, 0), 100.0);           // x_2[0]
  EXPECT_EQ(layer.weight_grads().at(1, 2), 0.0);
  layer.zero_grads();
  dx = layer.backward(Tensor::vector({0, 0, 0, 0, 0, 1}));
  EXPECT_EQ(dx[2], Tensor::vector({0, 9}));                 // w_3 entry for block 2
  EXPECT_EQ(layer.weight_grads().at(0, 2), 10.0);            // x_1[1]
  EXPECT_EQ(layer.weight_grads().at(0, 0), 0.0);
}

TEST(KpffBackward, AccumulatesUntilZeroed) {
  Rng rng(10);
  KpffLayer layer(random_tensor({2, 2}, rng));
  layer.forward(random_inputs(2, 3, rng));
  const Tensor g = random_tensor({6}, rng);
  layer.backward(g);
  const Tensor once = layer.weight_grads();
  layer.backward(g);
  for (std::size_t k = 0; k < 4; ++k) EXPECT_DOUBLE_EQ(layer.weight_grads()[k], 2.0 * once[k]);
  layer.zero_grads();
  EXPECT_EQ(layer.weight_grads(), zeros({2, 2}));
}

TEST(KpffBackward, LinearInUpstream) {
  Rng rng(11);
  for (int trial = 0; trial < 20; ++trial) {
    KpffLayer layer(random_tensor({3, 3}, rng));
    layer.forward(random_inputs(3, 5, rng));
    const Tensor g = random_tensor({15}, rng);
    const double alpha = rng.uniform(-4, 4);
    const auto dx = layer.backward(g);
    const Tensor dw = layer.weight_grads();
    layer.zero_grads();
    const auto dx_scaled = layer.backward(scale(g, alpha));
    for (std::size_t k = 0; k < 9; ++k) {
      EXPECT_NEAR(layer.weight_grads()[k], alpha * dw[k], 1e-12 * std::max(1.0, std::abs(alpha * dw[k])));
    }
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t c = 0; c < 5; ++c) EXPECT_NEAR(dx_scaled[j][c], alpha * dx[j][c], 1e-12 * std::max(1.0, std::abs(alpha * dx[j][c])));
  }
}

TEST(KpffBackward, Errors) {
  KpffLayer layer(2);
  EXPECT_THROW(layer.backward(zeros({4})), std::logic_error);
  layer.forward(inputs({Tensor::vector({1, 2}), Tensor::vector({3, 4})}));
  EXPECT_TRUE(layer.has_cache());
  EXPECT_THROW(layer.backward(zeros({3})), ShapeError);
  layer.clear_cache();
  EXPECT_FALSE(layer.has_cache());
}

TEST(KpffBackward, InjectedFaultsChangeGradients) {
  if (!kTestHooksCompiled) GTEST_SKIP() << "hooks not compiled";
  Rng rng(12);
  KpffLayer layer(random_tensor({3, 3}, rng));
  layer.forward(random_inputs(3, 2, rng));
  const Tensor g = random_tensor({6}, rng);
  const auto dx = layer.backward(g);
  const Tensor dw = layer.weight_grads();
  {
    ScopedFault fault(Fault::kpff_w_block_offset);
    layer.zero_grads();
    layer.backward(g);
    EXPECT_NE(layer.weight_grads(), dw);
  }
  {
    ScopedFault fault(Fault::kpff_x_transposed);
    EXPECT_NE(layer.backward(g), dx);
  }
}

TEST(Projection, Examples) {
  Projection id(identity(3), zeros({3}));
  const Tensor x = Tensor::vector({1, -2, 3});
  EXPECT_EQ(project(id, x), x);
  const Tensor b = Tensor::vector({0.5, 7});
  Projection zero(zeros({2, 3}), b);
  EXPECT_EQ(project(zero, x), b);
  Rng rng(13);
  Projection p(5, 2);
  p.init_uniform(rng);
  const Tensor v = random_tensor({5}, rng);
  EXPECT_EQ(project(p, v), elementwise_add(matvec(p.weight(), v), p.bias()));
  EXPECT_THROW(project(p, x), ShapeError);
}

TEST(Projection, CommonDimensionPolicy) {
  EXPECT_EQ(common_dimension({8, 16, 12}, {}), 8u);
  EXPECT_EQ(common_dimension({8, 16, 12}, {ProjectionPolicy::Kind::largest, 0}), 16u);
  EXPECT_EQ(common_dimension({8, 16}, *ProjectionPolicy::parse("10")), 10u);
  EXPECT_FALSE(ProjectionPolicy::parse("bogus"));
}

}  // namespace
}  // namespace kpff
