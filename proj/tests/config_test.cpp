#include <gtest/gtest.h>

#include "kpff/config.hpp"

namespace kpff {
namespace {

TEST(Config, DefaultsMatchReferenceSetup) {
  const RunConfig c;
  EXPECT_EQ(c.learning_rate, 1e-4);
  EXPECT_EQ(c.weight_decay, 5e-4);
  EXPECT_EQ(c.batch_size, 50u);
  EXPECT_EQ(c.epochs, 200u);
  EXPECT_EQ(c.validation_interval, 10u);
  EXPECT_EQ(c.dropout, 0.5);
  EXPECT_EQ(c.folds, 5u);
  EXPECT_EQ(c.optimizer, OptimizerKind::adam);
  EXPECT_NO_THROW(validate_config(c));
}

TEST(Config, SerializeParseRoundTrip) {
  RunConfig c;
  c.seed = 123456789012345ULL;
  c.methods = {{FusionMethod::concat}, {FusionMethod::kpff, true}};
  c.learning_rate = 0.1 + 0.2;
  c.channels = {3, 5, 7};
  c.projection = {ProjectionPolicy::Kind::fixed, 6};
  c.activation = Activation::leaky_relu;
  c.kpff_init_noise = 0.01;
  c.data = "/tmp/some dir";
  const RunConfig back = parse_config(serialize_config(c));
  EXPECT_EQ(back, c);
  EXPECT_EQ(config_hash(back), config_hash(c));
  EXPECT_EQ(config_hash(c).size(), 16u);
  EXPECT_NE(config_hash(c), config_hash(RunConfig{}));
}

TEST(Config, CommentsBlankLinesAndBase) {
  RunConfig base;
  base.epochs = 7;
  const RunConfig c = parse_config("# header\n\n  seed = 9   # trailing\nmethods = none, kpff-frozen\n", base);
  EXPECT_EQ(c.seed, 9u);
  EXPECT_EQ(c.epochs, 7u);
  EXPECT_EQ(c.methods, (std::vector<MethodSpec>{{FusionMethod::none}, {FusionMethod::kpff, true}}));
}

TEST(Config, Errors) {
  EXPECT_THROW(parse_config("colour = red\n"), ConfigError);
  EXPECT_THROW(parse_config("seed\n"), ConfigError);
  EXPECT_THROW(parse_config("seed = -1\n"), ConfigError);
  EXPECT_THROW(parse_config("lr = fast\n"), ConfigError);
  EXPECT_THROW(parse_config("methods = add,bilinear\n"), ConfigError);
  EXPECT_THROW(parse_config("kpff_frozen = maybe\n"), ConfigError);
  try {
    parse_config("seed = 1\nepochs = x\n");
    FAIL();
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
  EXPECT_THROW(load_config_file("/nonexistent.cfg"), ConfigError);
}

TEST(Config, ValidationRanges) {
  auto invalid = [](auto mutate) {
    RunConfig c;
    mutate(c);
    return [c] { validate_config(c); };
  };
  EXPECT_THROW(invalid([](RunConfig& c) { c.learning_rate = 0; })(), ConfigError);
  EXPECT_THROW(invalid([](RunConfig& c) { c.dropout = 1.0; })(), ConfigError);
  EXPECT_THROW(invalid([](RunConfig& c) { c.kernel = 4; })(), ConfigError);
  EXPECT_THROW(invalid([](RunConfig& c) { c.folds = 1; })(), ConfigError);
  EXPECT_THROW(invalid([](RunConfig& c) { c.channels.clear(); })(), ConfigError);
  EXPECT_THROW(invalid([](RunConfig& c) { c.methods.clear(); })(), ConfigError);
}

TEST(Config, LaterSettingsWin) {
  RunConfig c = parse_config("seed = 1\nseed = 2\n");
  EXPECT_EQ(c.seed, 2u);
  apply_setting(c, "seed", "3");
  EXPECT_EQ(c.seed, 3u);
}

TEST(MethodSpec, Names) {
  for (const char* name : {"none", "add", "concat", "kpff", "kpff-frozen"}) {
    ASSERT_TRUE(MethodSpec::parse(name));
    EXPECT_EQ(MethodSpec::parse(name)->name(), name);
  }
  EXPECT_FALSE(MethodSpec::parse("concat-frozen"));
}

TEST(FormatDouble, RoundTrips) {
  for (double v : {0.1, 1e-4, 1.0 / 3.0, 2.2250738585072014e-308, 1.7976931348623157e308}) {
    EXPECT_EQ(std::stod(format_double(v)), v);
  }
}

}  // namespace
}  // namespace kpff
