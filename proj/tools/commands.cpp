#include "commands.hpp"

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "kpff/checkpoint.hpp"
#include "kpff/config.hpp"
#include "kpff/experiment.hpp"
#include "kpff/fault.hpp"
#include "kpff/fusion.hpp"
#include "kpff/gradcheck.hpp"

namespace kpff::cli {

namespace fs = std::filesystem;

namespace {

/// Raised for bad flags or configs; maps to exit code 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Flags shared by the experiment subcommands. Precedence, lowest first:
// built-in defaults, --config file, --set entries, dedicated flags.
struct CommonFlags {
  std::string config_path;
  std::vector<std::string> sets;
  std::string seed;
  std::string methods;
  std::string epochs;
  std::string fusion;
  std::string data;
  std::string out_dir = ".";

  void attach(CLI::App& cmd, bool with_methods) {
    cmd.add_option("--config", config_path, "key = value config file");
    cmd.add_option("--set", sets, "override one config entry, key=value (repeatable)");
    cmd.add_option("--seed", seed, "master seed (u64)");
    if (with_methods) cmd.add_option("--methods", methods, "comma-separated fusion methods");
    cmd.add_option("--epochs", epochs, "training epochs");
    cmd.add_option("--fusion", fusion, "fusion method for train");
    cmd.add_option("--data", data, "'synthetic' or an image directory");
    cmd.add_option("--out", out_dir, "output directory");
  }

  RunConfig resolve() const {
    try {
      RunConfig cfg;
      if (!config_path.empty()) cfg = load_config_file(config_path, cfg);
      for (const auto& s : sets) {
        const auto eq = s.find('=');
        if (eq == std::string::npos) throw ConfigError("--set expects key=value, got '" + s + "'");
        apply_setting(cfg, s.substr(0, eq), s.substr(eq + 1));
      }
      if (!seed.empty()) apply_setting(cfg, "seed", seed);
      if (!methods.empty()) apply_setting(cfg, "methods", methods);
      if (!epochs.empty()) apply_setting(cfg, "epochs", epochs);
      if (!fusion.empty()) apply_setting(cfg, "fusion", fusion);
      if (!data.empty()) apply_setting(cfg, "data", data);
      validate_config(cfg);
      return cfg;
    } catch (const ConfigError& e) {
      throw UsageError(e.what());
    }
  }
};

void install_fault(const std::string& name) {
  if (name.empty()) return;
  if (!kTestHooksCompiled) throw UsageError("--inject-bug is only available in test builds");
  const auto fault = parse_fault(name);
  if (!fault) throw UsageError("unknown --inject-bug variant '" + name + "' (kpff-w, kpff-x, adam-bias)");
  set_fault(*fault);
}

// ------------------------------------------------------------------ gradcheck

struct GradcheckFlags {
  std::size_t n = 0;
  std::size_t r = 0;
  std::uint64_t seed = 7;
  double tolerance = 1e-6;
  double model_tolerance = 1e-5;
  std::string inject;
  std::string out_dir;
  bool verbose = false;
};

std::string group_of(const std::string& name) {
  // "kpff[n=2,r=3].x1[4]" -> "kpff[n=2,r=3].x1"; strip the trailing index.
  const auto bracket = name.rfind('[');
  return bracket == std::string::npos ? name : name.substr(0, bracket);
}

int cmd_gradcheck(const GradcheckFlags& flags, std::ostream& out) {
  if ((flags.n == 0) != (flags.r == 0)) throw UsageError("--n and --r must be given together");
  install_fault(flags.inject);

  GradCheckOptions opts;
  opts.seed = flags.seed;
  opts.tolerance = flags.tolerance;
  opts.model_tolerance = flags.model_tolerance;
  opts.n = flags.n;
  opts.r = flags.r;
  const auto rows = run_gradcheck_suite(opts);
  set_fault(Fault::none);

  struct Group {
    std::string name;
    std::size_t count = 0;
    std::size_t failures = 0;
    double worst = 0.0;
  };
  std::vector<Group> groups;
  for (const auto& row : rows) {
    const std::string g = group_of(row.name);
    if (groups.empty() || groups.back().name != g) groups.push_back({g});
    auto& grp = groups.back();
    ++grp.count;
    grp.worst = std::max(grp.worst, row.relative_error);
    if (!row.pass) ++grp.failures;
  }

  out << std::left << std::setw(44) << "check" << std::right << std::setw(8) << "coords" << std::setw(14)
      << "max rel err" << std::setw(8) << "status" << "\n";
  std::size_t failures = 0;
  for (const auto& g : groups) {
    failures += g.failures;
    std::ostringstream err;
    err << std::scientific << std::setprecision(2) << g.worst;
    out << std::left << std::setw(44) << g.name << std::right << std::setw(8) << g.count << std::setw(14)
        << err.str() << std::setw(8) << (g.failures ? "FAIL" : "ok") << "\n";
  }
  if (flags.verbose || failures > 0) {
    out << "\n" << (flags.verbose ? "all rows" : "failing rows") << ":\n";
    for (const auto& row : rows) {
      if (!flags.verbose && row.pass) continue;
      out << "  " << row.name << " analytic=" << format_double(row.analytic)
          << " numeric=" << format_double(row.numeric) << " rel=" << row.relative_error
          << (row.pass ? " ok" : " FAIL") << "\n";
    }
  }
  out << rows.size() << " coordinates checked, " << failures << " failed\n";

  if (!flags.out_dir.empty()) {
    fs::create_directories(flags.out_dir);
    std::string csv = "name,analytic,numeric,relative_error,tolerance,pass\n";
    for (const auto& row : rows) {
      csv += row.name + "," + format_double(row.analytic) + "," + format_double(row.numeric) + "," +
             format_double(row.relative_error) + "," + format_double(row.tolerance) + "," +
             (row.pass ? "1" : "0") + "\n";
    }
    write_text_file(fs::path(flags.out_dir) / "gradcheck.csv", csv);
  }
  return failures == 0 ? kExitOk : kExitCheckFailed;
}

// ---------------------------------------------------------------- crossval

int cmd_crossval(const CommonFlags& flags, std::ostream& out) {
  const RunConfig cfg = flags.resolve();
  const auto t0 = std::chrono::steady_clock::now();
  const Dataset dataset = load_dataset(cfg);
  const CrossValReport report = run_crossval(cfg, dataset);
  const double seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  write_crossval_outputs(flags.out_dir, report);
  out << format_comparison_table(report);
  out << report.folds.size() << " training runs, config " << report.config_hash << ", seed " << cfg.seed
      << ", wall-clock " << std::fixed << std::setprecision(1) << seconds << " s\n";
  out << "wrote report.csv, curves.csv, summary.json, folds.txt, config.txt to " << flags.out_dir << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- train

int cmd_train(const CommonFlags& flags, std::size_t holdout, std::ostream& out) {
  RunConfig cfg = flags.resolve();
  const MethodSpec method{cfg.fusion, cfg.kpff_frozen};
  cfg.methods = {method};
  const Dataset dataset = load_dataset(cfg);
  if (holdout >= cfg.folds) throw UsageError("--holdout-fold must be < folds");

  CrossValReport report;
  report.config = cfg;
  report.config_hash = config_hash(cfg);
  report.plan = make_folds(dataset, cfg.folds, cfg.seed);
  std::optional<Model> model;
  report.folds.push_back(train_fold(cfg, dataset, report.plan, holdout, method, &model));
  report.summaries.push_back(summarize(method.name(), report.folds));

  write_crossval_outputs(flags.out_dir, report);
  const fs::path ckpt = fs::path(flags.out_dir) / "model.ckpt";
  save_checkpoint(ckpt, model->all_parameters());

  const auto& f = report.folds.front();
  out << "method " << f.method << ", holdout fold " << holdout << ": final accuracy " << std::fixed
      << std::setprecision(2) << 100.0 * f.final_accuracy << "%, best " << 100.0 * f.best_accuracy
      << "% at epoch " << f.best_epoch << "\n";
  out << "checkpoint " << ckpt.string() << "\n";
  return kExitOk;
}

// ------------------------------------------------------------------- bench

std::vector<std::size_t> parse_size_list(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const unsigned long v = std::stoul(item, &used);
      if (used != item.size() || v == 0) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::exception&) {
      throw UsageError("invalid size list '" + text + "'");
    }
  }
  if (out.empty()) throw UsageError("empty size list");
  return out;
}

int cmd_bench(BenchOptions opts, const std::string& ns, const std::string& rs, const std::string& out_dir,
              std::ostream& out) {
  if (opts.iterations < 100) throw UsageError("--iterations must be >= 100");
  if (!ns.empty()) opts.ns = parse_size_list(ns);
  if (!rs.empty()) opts.rs = parse_size_list(rs);
  const auto rows = run_bench(opts);

  out << std::setw(4) << "n" << std::setw(7) << "r" << std::setw(12) << "add ns" << std::setw(12) << "concat ns"
      << std::setw(12) << "kpff fw ns" << std::setw(12) << "kpff bw ns" << std::setw(12) << "kpff MACs"
      << std::setw(10) << "n^2 r" << std::setw(12) << "kpff/concat" << "\n";
  bool counts_ok = true;
  for (const auto& b : rows) {
    const std::uint64_t expected = b.n * b.n * b.r;
    counts_ok = counts_ok && b.kpff_multiply_adds == expected;
    out << std::setw(4) << b.n << std::setw(7) << b.r << std::fixed << std::setprecision(0) << std::setw(12)
        << b.add_ns << std::setw(12) << b.concat_ns << std::setw(12) << b.kpff_forward_ns << std::setw(12)
        << b.kpff_backward_ns << std::setw(12) << b.kpff_multiply_adds << std::setw(10) << expected
        << std::setprecision(2) << std::setw(12) << b.kpff_concat_ratio << "\n";
  }
  out << "median of " << opts.iterations << " timed calls after " << opts.warmup << " warmup calls\n";
  if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "bench.csv", format_bench_timing_csv(rows));
    write_text_file(fs::path(out_dir) / "bench_counts.csv", format_bench_counts_csv(rows));
  }
  return counts_ok ? kExitOk : kExitCheckFailed;
}

// -------------------------------------------------------------------- fuse

std::vector<std::vector<double>> read_csv_rows(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("cannot read " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.find_first_not_of(" \t") == std::string::npos) continue;
    std::vector<double> row;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) {
      try {
        std::size_t used = 0;
        const double v = std::stod(cell, &used);
        if (cell.find_first_not_of(" \t", used) != std::string::npos) throw std::invalid_argument(cell);
        row.push_back(v);
      } catch (const std::exception&) {
        throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": not a number: '" + cell + "'");
      }
    }
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw std::invalid_argument(path + ":" + std::to_string(line_no) + ": ragged row (" +
                                  std::to_string(row.size()) + " values, expected " +
                                  std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw std::invalid_argument(path + ": no rows");
  return rows;
}

int cmd_fuse(const std::string& inputs_path, const std::string& weights_path, const std::string& method,
             const std::string& out_dir, const std::string& output_path, std::ostream& out) {
  const auto fusion = parse_fusion(method);
  if (!fusion || *fusion == FusionMethod::none) throw UsageError("--method must be add, concat or kpff");

  std::vector<Tensor> xs;
  for (auto& row : read_csv_rows(inputs_path)) xs.push_back(Tensor::vector(std::move(row)));
  const FusionInputs inputs(std::move(xs));

  Tensor fused;
  switch (*fusion) {
    case FusionMethod::add: fused = fuse_add(inputs); break;
    case FusionMethod::concat: fused = fuse_concat(inputs); break;
    case FusionMethod::kpff: {
      KpffLayer layer(inputs.count());
      if (!weights_path.empty()) {
        std::vector<Tensor> ws;
        for (auto& row : read_csv_rows(weights_path)) ws.push_back(Tensor::vector(std::move(row)));
        if (ws.size() != inputs.count()) {
          throw std::invalid_argument("weights file has " + std::to_string(ws.size()) + " rows but there are " +
                                      std::to_string(inputs.count()) + " inputs");
        }
        layer = KpffLayer::from_vectors(ws);
      }
      fused = layer.forward(inputs);
      break;
    }
    case FusionMethod::none: break;
  }

  std::string line;
  for (std::size_t k = 0; k < fused.size(); ++k) {
    if (k) line += ',';
    line += format_double(fused[k]);
  }
  line += '\n';
  out << line;
  if (!output_path.empty()) {
    write_text_file(output_path, line);
  } else if (!out_dir.empty()) {
    fs::create_directories(out_dir);
    write_text_file(fs::path(out_dir) / "fused.csv", line);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Kronecker-product feature fusion: gradient checks, training and cross-validation", "kpff"};
  app.require_subcommand(1);
  app.set_version_flag("--version", version_stamp());

  GradcheckFlags gc;
  auto* gradcheck = app.add_subcommand("gradcheck", "finite-difference and Jacobian gradient checks");
  gradcheck->add_option("--n", gc.n, "number of fused inputs for the KPFF check (default: grid)");
  gradcheck->add_option("--r", gc.r, "common input length for the KPFF check (default: grid)");
  gradcheck->add_option("--seed", gc.seed, "seed for random instances");
  gradcheck->add_option("--tol", gc.tolerance, "relative tolerance for layer checks");
  gradcheck->add_option("--model-tol", gc.model_tolerance, "relative tolerance for the toy model");
  gradcheck->add_option("--inject-bug", gc.inject, "test builds: kpff-w, kpff-x or adam-bias");
  gradcheck->add_option("--out", gc.out_dir, "write gradcheck.csv here");
  gradcheck->add_flag("--verbose", gc.verbose, "print every checked coordinate");

  CommonFlags train_flags;
  std::size_t holdout = 0;
  auto* train = app.add_subcommand("train", "train one model, holding out one fold for validation");
  train_flags.attach(*train, false);
  train->add_option("--holdout-fold", holdout, "fold used for validation");

  CommonFlags cv_flags;
  auto* crossval = app.add_subcommand("crossval", "k-fold cross-validation across fusion methods");
  cv_flags.attach(*crossval, true);

  BenchOptions bench_opts;
  std::string bench_ns, bench_rs, bench_out;
  auto* bench = app.add_subcommand("bench", "time fusion operations over an (n, r) grid");
  bench->add_option("--iterations", bench_opts.iterations, "timed calls per cell (>= 100)");
  bench->add_option("--warmup", bench_opts.warmup, "untimed warmup calls per cell");
  bench->add_option("--seed", bench_opts.seed, "seed for random inputs");
  bench->add_option("--n", bench_ns, "comma-separated input counts");
  bench->add_option("--r", bench_rs, "comma-separated input lengths");
  bench->add_option("--out", bench_out, "write bench.csv and bench_counts.csv here");

  std::string fuse_inputs, fuse_weights, fuse_method = "kpff", fuse_out, fuse_output;
  auto* fuse = app.add_subcommand("fuse", "fuse feature vectors from a CSV file");
  fuse->add_option("--inputs", fuse_inputs, "CSV, one feature vector per row")->required();
  fuse->add_option("--weights", fuse_weights, "CSV of KPFF weight vectors, one per row");
  fuse->add_option("--method", fuse_method, "add, concat or kpff");
  fuse->add_option("--out", fuse_out, "write fused.csv into this directory");
  fuse->add_option("--output", fuse_output, "write the fused row to this file");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForVersion&) {
    out << version_stamp() << "\n";
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "kpff: " << e.what() << "\n";
    if (app.get_subcommands().empty()) err << app.help();
    return kExitUsage;
  }

  try {
    if (*gradcheck) return cmd_gradcheck(gc, out);
    if (*train) return cmd_train(train_flags, holdout, out);
    if (*crossval) return cmd_crossval(cv_flags, out);
    if (*bench) return cmd_bench(bench_opts, bench_ns, bench_rs, bench_out, out);
    if (*fuse) return cmd_fuse(fuse_inputs, fuse_weights, fuse_method, fuse_out, fuse_output, out);
  } catch (const UsageError& e) {
    set_fault(Fault::none);
    err << "kpff: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    set_fault(Fault::none);
    err << "kpff: " << e.what() << "\n";
    return kExitCheckFailed;
  }
  return kExitUsage;
}

}  // namespace kpff::cli
