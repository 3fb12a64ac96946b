#include "kpff/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace kpff {

std::optional<MethodSpec> MethodSpec::parse(std::string_view name) {
  if (name == "kpff-frozen") return MethodSpec{FusionMethod::kpff, true};
  if (auto f = parse_fusion(std::string(name))) return MethodSpec{*f, false};
  return std::nullopt;
}

std::string MethodSpec::name() const {
  return frozen && fusion == FusionMethod::kpff ? "kpff-frozen" : fusion_name(fusion);
}

std::string format_double(double value) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  return buf;
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string_view> split_list(std::string_view s) {
  std::vector<std::string_view> out;
  while (true) {
    const auto comma = s.find(',');
    out.push_back(trim(s.substr(0, comma)));
    if (comma == std::string_view::npos) break;
    s.remove_prefix(comma + 1);
  }
  return out;
}

[[noreturn]] void bad_value(std::string_view key, std::string_view value) {
  throw ConfigError("invalid value '" + std::string(value) + "' for '" + std::string(key) + "'");
}

std::uint64_t parse_u64(std::string_view key, std::string_view value) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

double parse_f64(std::string_view key, std::string_view value) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(value.data(), value.data() + value.size(), out);
  if (ec != std::errc{} || ptr != value.data() + value.size()) bad_value(key, value);
  return out;
}

bool parse_bool(std::string_view key, std::string_view value) {
  if (value == "true" || value == "1") return true;
  if (value == "false" || value == "0") return false;
  bad_value(key, value);
}

template <typename T>
std::string join(const std::vector<T>& items, auto&& fmt) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += ',';
    out += fmt(items[i]);
  }
  return out;
}

}  // namespace

void apply_setting(RunConfig& c, std::string_view key, std::string_view raw) {
  const std::string_view value = trim(raw);
  if (key == "seed") {
    c.seed = parse_u64(key, value);
  } else if (key == "fusion") {
    auto f = parse_fusion(std::string(value));
    if (!f) bad_value(key, value);
    c.fusion = *f;
  } else if (key == "methods") {
    std::vector<MethodSpec> methods;
    for (auto item : split_list(value)) {
      auto m = MethodSpec::parse(item);
      if (!m) bad_value(key, value);
      methods.push_back(*m);
    }
    c.methods = std::move(methods);
  } else if (key == "optimizer") {
    auto o = parse_optimizer(std::string(value));
    if (!o) bad_value(key, value);
    c.optimizer = *o;
  } else if (key == "lr") {
    c.learning_rate = parse_f64(key, value);
  } else if (key == "weight_decay") {
    c.weight_decay = parse_f64(key, value);
  } else if (key == "batch_size") {
    c.batch_size = parse_u64(key, value);
  } else if (key == "epochs") {
    c.epochs = parse_u64(key, value);
  } else if (key == "val_interval") {
    c.validation_interval = parse_u64(key, value);
  } else if (key == "dropout") {
    c.dropout = parse_f64(key, value);
  } else if (key == "channels") {
    std::vector<std::size_t> channels;
    for (auto item : split_list(value)) channels.push_back(parse_u64(key, item));
    c.channels = std::move(channels);
  } else if (key == "kernel") {
    c.kernel = parse_u64(key, value);
  } else if (key == "activation") {
    auto a = parse_activation(std::string(value));
    if (!a) bad_value(key, value);
    c.activation = *a;
  } else if (key == "projection") {
    auto p = ProjectionPolicy::parse(std::string(value));
    if (!p) bad_value(key, value);
    c.projection = *p;
  } else if (key == "kpff_init_noise") {
    c.kpff_init_noise = parse_f64(key, value);
  } else if (key == "kpff_frozen") {
    c.kpff_frozen = parse_bool(key, value);
  } else if (key == "folds") {
    c.folds = parse_u64(key, value);
  } else if (key == "data") {
    if (value.empty()) bad_value(key, value);
    c.data = std::string(value);
  } else if (key == "synthetic_per_class") {
    c.synthetic_per_class = parse_u64(key, value);
  } else if (key == "synthetic_size") {
    c.synthetic_size = parse_u64(key, value);
  } else {
    throw ConfigError("unknown config key '" + std::string(key) + "'");
  }
}

RunConfig parse_config(std::string_view text, RunConfig base) {
  std::size_t line_no = 0;
  while (!text.empty()) {
    const auto nl = text.find('\n');
    std::string_view line = text.substr(0, nl);
    text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);
    ++line_no;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("line " + std::to_string(line_no) + ": expected 'key = value'");
    }
    try {
      apply_setting(base, trim(line.substr(0, eq)), line.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError("line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return base;
}

RunConfig load_config_file(const std::string& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str(), std::move(base));
}

std::string serialize_config(const RunConfig& c) {
  std::string out;
  auto line = [&](std::string_view key, const std::string& value) {
    out += key;
    out += " = ";
    out += value;
    out += '\n';
  };
  line("seed", std::to_string(c.seed));
  line("fusion", fusion_name(c.fusion));
  line("methods", join(c.methods, [](const MethodSpec& m) { return m.name(); }));
  line("optimizer", optimizer_name(c.optimizer));
  line("lr", format_double(c.learning_rate));
  line("weight_decay", format_double(c.weight_decay));
  line("batch_size", std::to_string(c.batch_size));
  line("epochs", std::to_string(c.epochs));
  line("val_interval", std::to_string(c.validation_interval));
  line("dropout", format_double(c.dropout));
  line("channels", join(c.channels, [](std::size_t v) { return std::to_string(v); }));
  line("kernel", std::to_string(c.kernel));
  line("activation", activation_name(c.activation));
  line("projection", c.projection.to_string());
  line("kpff_init_noise", format_double(c.kpff_init_noise));
  line("kpff_frozen", c.kpff_frozen ? "true" : "false");
  line("folds", std::to_string(c.folds));
  line("data", c.data);
  line("synthetic_per_class", std::to_string(c.synthetic_per_class));
  line("synthetic_size", std::to_string(c.synthetic_size));
  return out;
}

std::string config_hash(const RunConfig& config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : serialize_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

void validate_config(const RunConfig& c) {
  if (!(c.learning_rate > 0.0)) throw ConfigError("lr must be > 0");
  if (!(c.weight_decay >= 0.0)) throw ConfigError("weight_decay must be >= 0");
  if (c.batch_size == 0) throw ConfigError("batch_size must be >= 1");
  if (c.epochs == 0) throw ConfigError("epochs must be >= 1");
  if (c.validation_interval == 0) throw ConfigError("val_interval must be >= 1");
  if (!(c.dropout >= 0.0 && c.dropout < 1.0)) throw ConfigError("dropout must be in [0, 1)");
  if (c.channels.empty()) throw ConfigError("channels must list at least one block");
  for (auto ch : c.channels) {
    if (ch == 0) throw ConfigError("channel counts must be >= 1");
  }
  if (c.kernel == 0 || c.kernel % 2 == 0) throw ConfigError("kernel must be odd");
  if (!(c.kpff_init_noise >= 0.0)) throw ConfigError("kpff_init_noise must be >= 0");
  if (c.folds < 2) throw ConfigError("folds must be >= 2");
  if (c.methods.empty()) throw ConfigError("methods must not be empty");
  if (c.synthetic_per_class == 0) throw ConfigError("synthetic_per_class must be >= 1");
  if (c.synthetic_size < 8) throw ConfigError("synthetic_size must be >= 8");
}

}  // namespace kpff
