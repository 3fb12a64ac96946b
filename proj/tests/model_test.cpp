#include <gtest/gtest.h>

#include <filesystem>

#include "kpff/checkpoint.hpp"
#include "kpff/dataset.hpp"
#include "kpff/model.hpp"
#include "kpff/optimizer.hpp"

namespace kpff {
namespace {

ModelConfig toy_config(FusionMethod fusion, bool frozen = false) {
  ModelConfig cfg;
  cfg.input_shape = {1, 12, 12};
  cfg.classes = 4;
  cfg.channels = {4, 6};
  cfg.fusion = fusion;
  cfg.kpff_frozen = frozen;
  cfg.dropout = 0.5;
  return cfg;
}

std::vector<const Sample*> pointers(const Dataset& ds) {
  std::vector<const Sample*> out;
  for (const auto& s : ds.samples) out.push_back(&s);
  return out;
}

std::vector<double> train_losses(ModelConfig cfg, const Dataset& ds, int steps) {
  Model model(std::move(cfg), 11);
  Optimizer opt({OptimizerKind::adam, 3e-3});
  Rng drop = Rng::stream(11, Stream::dropout);
  const auto batch = pointers(ds);
  std::vector<double> losses;
  for (int s = 0; s < steps; ++s) {
    losses.push_back(model.forward_backward(batch, Mode::train, drop).loss);
    opt.step(model.parameters());
  }
  losses.push_back(model.evaluate(batch).loss);
  return losses;
}

TEST(Model, LayoutPerFusion) {
  EXPECT_EQ(Model(toy_config(FusionMethod::none), 1).fused_dim(), 6u);
  EXPECT_EQ(Model(toy_config(FusionMethod::add), 1).fused_dim(), 4u);
  EXPECT_EQ(Model(toy_config(FusionMethod::concat), 1).fused_dim(), 8u);
  Model kpff(toy_config(FusionMethod::kpff), 1);
  EXPECT_EQ(kpff.fused_dim(), 8u);
  EXPECT_EQ(kpff.tap_dims(), (std::vector<std::size_t>{4, 6}));
  ASSERT_NE(kpff.kpff_layer(), nullptr);
  EXPECT_EQ(kpff.kpff_layer()->weights(), identity(2));
}

TEST(Model, ParameterNames) {
  Model model(toy_config(FusionMethod::kpff), 1);
  std::vector<std::string> names;
  for (const auto& p : model.all_parameters()) names.push_back(p.name);
  EXPECT_EQ(names, (std::vector<std::string>{"block0.conv.kernels", "block0.conv.bias",
                                             "block1.conv.kernels", "block1.conv.bias",
                                             "proj1.weight", "proj1.bias", "kpff.weights",
                                             "head.weight", "head.bias"}));
  Model frozen(toy_config(FusionMethod::kpff, true), 1);
  for (const auto& p : frozen.parameters()) EXPECT_NE(p.name, "kpff.weights");
}

TEST(Model, RejectsBadConfigs) {
  auto cfg = toy_config(FusionMethod::concat);
  cfg.input_shape = {1, 2, 2};
  EXPECT_THROW(Model(cfg, 1), ShapeError);
  cfg = toy_config(FusionMethod::concat);
  cfg.kernel = 4;
  EXPECT_THROW(Model(cfg, 1), std::invalid_argument);
  Model model(toy_config(FusionMethod::concat), 1);
  Rng rng(0);
  EXPECT_THROW(model.forward(zeros({1, 8, 8}), Mode::eval, rng), ShapeError);
}

TEST(Model, FrozenKpffTrainsExactlyLikeConcat) {
  const Dataset ds = generate_synthetic(3, 12, 5);
  const auto concat = train_losses(toy_config(FusionMethod::concat), ds, 8);
  const auto frozen = train_losses(toy_config(FusionMethod::kpff, true), ds, 8);
  EXPECT_EQ(concat, frozen);
  const auto trainable = train_losses(toy_config(FusionMethod::kpff), ds, 8);
  EXPECT_EQ(trainable.front(), concat.front());
}

TEST(Model, DuplicatedBatchHasSameMeanGradient) {
  const Dataset ds = generate_synthetic(1, 12, 6);
  Model a(toy_config(FusionMethod::kpff), 3), b(toy_config(FusionMethod::kpff), 3);
  Rng ra(0), rb(0);
  std::vector<const Sample*> once = pointers(ds);
  std::vector<const Sample*> twice = once;
  twice.insert(twice.end(), once.begin(), once.end());
  const auto sa = a.forward_backward(once, Mode::eval, ra);
  const auto sb = b.forward_backward(twice, Mode::eval, rb);
  EXPECT_NEAR(sa.loss, sb.loss, 1e-15);
  EXPECT_EQ(sb.correct, 2 * sa.correct);
  const auto pa = a.all_parameters(), pb = b.all_parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) {
    for (std::size_t i = 0; i < pa[k].grad->size(); ++i) {
      EXPECT_NEAR((*pa[k].grad)[i], (*pb[k].grad)[i], 1e-14) << pa[k].name;
    }
  }
}

TEST(Model, SameSeedSameModel) {
  Model a(toy_config(FusionMethod::add), 9, 2), b(toy_config(FusionMethod::add), 9, 2);
  Model c(toy_config(FusionMethod::add), 9, 3);
  const auto pa = a.all_parameters(), pb = b.all_parameters(), pc = c.all_parameters();
  bool differs = false;
  for (std::size_t k = 0; k < pa.size(); ++k) {
    EXPECT_EQ(*pa[k].value, *pb[k].value);
    differs |= *pa[k].value != *pc[k].value;
  }
  EXPECT_TRUE(differs);
}

TEST(Model, InitNoiseOnlyTouchesKpffWeights) {
  auto noisy_cfg = toy_config(FusionMethod::kpff);
  noisy_cfg.kpff_init_noise = 0.1;
  Model plain(toy_config(FusionMethod::kpff), 4), noisy(noisy_cfg, 4);
  const auto pp = plain.all_parameters(), pn = noisy.all_parameters();
  for (std::size_t k = 0; k < pp.size(); ++k) {
    if (pp[k].name == "kpff.weights") {
      EXPECT_NE(*pp[k].value, *pn[k].value);
    } else {
      EXPECT_EQ(*pp[k].value, *pn[k].value) << pp[k].name;
    }
  }
}

TEST(Checkpoint, EncodeDecodeRoundTrip) {
  const std::vector<NamedTensor> records{{"a", Tensor::vector({1.5, -0.0, 1e-300})},
                                         {"b.c", Tensor({2, 1, 1, 3}, {1, 2, 3, 4, 5, 6})}};
  const auto bytes = encode_checkpoint(records);
  ASSERT_GE(bytes.size(), 8u);
  EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "KPFF");
  EXPECT_EQ(bytes[4], 1);
  EXPECT_EQ(decode_checkpoint(bytes), records);
}

TEST(Checkpoint, RejectsCorruptInput) {
  auto bytes = encode_checkpoint(std::vector<NamedTensor>{{"a", Tensor::vector({1, 2})}});
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  EXPECT_THROW(decode_checkpoint(bad_magic), CheckpointError);
  auto truncated = bytes;
  truncated.pop_back();
  EXPECT_THROW(decode_checkpoint(truncated), CheckpointError);
  auto bad_version = bytes;
  bad_version[4] = 9;
  EXPECT_THROW(decode_checkpoint(bad_version), CheckpointError);
  EXPECT_THROW(load_checkpoint("/nonexistent/model.ckpt"), CheckpointError);
}

TEST(Checkpoint, SaveLoadRestoresModel) {
  const auto dir = std::filesystem::temp_directory_path() / "kpff_model_test";
  std::filesystem::create_directories(dir);
  const auto path = dir / "m.ckpt";
  Model a(toy_config(FusionMethod::kpff), 1), b(toy_config(FusionMethod::kpff), 2);
  a.kpff_layer()->weights().at(0, 1) = 0.25;
  save_checkpoint(path, a.all_parameters());
  restore_parameters(load_checkpoint(path), b.all_parameters());
  const auto pa = a.all_parameters(), pb = b.all_parameters();
  for (std::size_t k = 0; k < pa.size(); ++k) EXPECT_EQ(*pa[k].value, *pb[k].value);

  Model none(toy_config(FusionMethod::none), 1);
  EXPECT_THROW(restore_parameters(load_checkpoint(path), none.all_parameters()), ShapeError);
  Model concat(toy_config(FusionMethod::concat), 1);
  save_checkpoint(path, concat.all_parameters());
  EXPECT_THROW(restore_parameters(load_checkpoint(path), a.all_parameters()), CheckpointError);
  std::filesystem::remove_all(dir);
}

}  // namespace
}  // namespace kpff
