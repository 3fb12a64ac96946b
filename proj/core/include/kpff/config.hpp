#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "kpff/fusion.hpp"
#include "kpff/layers.hpp"
#include "kpff/model.hpp"
#include "kpff/optimizer.hpp"

namespace kpff {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A fusion variant under comparison. `frozen` only applies to kpff and keeps
/// the fusion weights at their initial (Concat) configuration.
struct MethodSpec {
  FusionMethod fusion = FusionMethod::none;
  bool frozen = false;

  /// "none", "add", "concat", "kpff" or "kpff-frozen".
  static std::optional<MethodSpec> parse(std::string_view name);
  std::string name() const;
  friend bool operator==(const MethodSpec&, const MethodSpec&) = default;
};

/// Everything a run depends on. Defaults mirror the reference training
/// setup: Adam, lr 1e-4, weight decay 5e-4, batch 50, 200 epochs,
/// validation every 10 epochs, dropout 0.5, five folds.
struct RunConfig {
  std::uint64_t seed = 42;
  FusionMethod fusion = FusionMethod::kpff;  // used by `train`
  std::vector<MethodSpec> methods{{FusionMethod::none}, {FusionMethod::add},
                                  {FusionMethod::concat}, {FusionMethod::kpff}};
  OptimizerKind optimizer = OptimizerKind::adam;
  double learning_rate = 1e-4;
  double weight_decay = 5e-4;
  std::size_t batch_size = 50;
  std::size_t epochs = 200;
  std::size_t validation_interval = 10;
  double dropout = 0.5;
  std::vector<std::size_t> channels{8, 16};
  std::size_t kernel = 3;
  Activation activation = Activation::relu;
  ProjectionPolicy projection;
  double kpff_init_noise = 0.0;
  bool kpff_frozen = false;
  std::size_t folds = 5;
  /// "synthetic" or a directory in the `root/<class>/*.pgm|*.ppm` layout.
  std::string data = "synthetic";
  std::size_t synthetic_per_class = 25;
  std::size_t synthetic_size = 16;

  friend bool operator==(const RunConfig&, const RunConfig&) = default;
};

/// Sets one `key = value` entry; throws ConfigError on unknown keys or
/// malformed values.
void apply_setting(RunConfig& config, std::string_view key, std::string_view value);

/// Applies `key = value` lines (with `#` comments and blank lines) on top of
/// `base`.
RunConfig parse_config(std::string_view text, RunConfig base = {});
RunConfig load_config_file(const std::string& path, RunConfig base = {});

/// Canonical text form; `parse_config(serialize_config(c)) == c`.
std::string serialize_config(const RunConfig& config);

/// 16 hex digits of FNV-1a over the canonical text.
std::string config_hash(const RunConfig& config);

/// Range checks on numeric fields; throws ConfigError.
void validate_config(const RunConfig& config);

/// %.17g, which round-trips every double.
std::string format_double(double value);

}  // namespace kpff
