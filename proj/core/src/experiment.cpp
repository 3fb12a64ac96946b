#include "kpff/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <optional>
#include <sstream>

#include <json.hpp>

#include "kpff/optimizer.hpp"

#ifndef KPFF_VERSION
#define KPFF_VERSION "0.0.0"
#endif

namespace kpff {

std::string version_stamp() { return std::string("kpff ") + KPFF_VERSION; }

Dataset load_dataset(const RunConfig& config) {
  Dataset ds = config.data == "synthetic"
                   ? generate_synthetic(config.synthetic_per_class, config.synthetic_size, config.seed)
                   : load_image_dir(config.data);
  ds.validate();
  return ds;
}

ModelConfig model_config_for(const RunConfig& config, const Dataset& dataset, const MethodSpec& method) {
  ModelConfig mc;
  mc.input_shape = dataset.image_shape();
  mc.classes = dataset.class_count();
  mc.channels = config.channels;
  mc.kernel = config.kernel;
  mc.activation = config.activation;
  mc.fusion = method.fusion;
  mc.kpff_frozen = method.frozen;
  mc.kpff_init_noise = config.kpff_init_noise;
  mc.projection = config.projection;
  mc.dropout = config.dropout;
  return mc;
}

namespace {

std::vector<const Sample*> gather(const Dataset& ds, const std::vector<std::size_t>& idx) {
  std::vector<const Sample*> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(&ds.samples[i]);
  return out;
}

}  // namespace

FoldResult train_fold(const RunConfig& config, const Dataset& dataset, const FoldPlan& plan,
                      std::size_t fold, const MethodSpec& method, std::optional<Model>* trained) {
  Model model(model_config_for(config, dataset, method), config.seed, fold);
  Optimizer optimizer({config.optimizer, config.learning_rate, config.weight_decay});
  Rng dropout_rng = Rng::stream(config.seed, Stream::dropout, fold);
  Rng shuffle_rng = Rng::stream(config.seed, Stream::shuffle, fold);

  std::vector<std::size_t> order = plan.training_indices(fold);
  const std::vector<const Sample*> validation = gather(dataset, plan.folds.at(fold));
  const std::size_t batch_size = std::min(config.batch_size, order.size());

  FoldResult result;
  result.method = method.name();
  result.fold = fold;
  result.best_accuracy = -1.0;

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    double loss_sum = 0.0;
    for (std::size_t start = 0; start < order.size(); start += batch_size) {
      const std::size_t stop = std::min(order.size(), start + batch_size);
      std::vector<const Sample*> batch;
      for (std::size_t k = start; k < stop; ++k) batch.push_back(&dataset.samples[order[k]]);
      const auto stats = model.forward_backward(batch, Mode::train, dropout_rng);
      optimizer.step(model.parameters());
      loss_sum += stats.loss * static_cast<double>(batch.size());
    }
    const double train_loss = loss_sum / static_cast<double>(order.size());

    if (epoch % config.validation_interval == 0 || epoch == config.epochs) {
      const auto val = model.evaluate(validation);
      result.curve.push_back({epoch, train_loss, val.loss, val.accuracy});
      if (val.accuracy > result.best_accuracy) {
        result.best_accuracy = val.accuracy;
        result.best_epoch = epoch;
      }
    }
    result.final_train_loss = train_loss;
  }
  result.final_accuracy = result.curve.back().val_accuracy;
  result.final_loss = result.curve.back().val_loss;
  if (trained) trained->emplace(std::move(model));
  return result;
}

double mean(const std::vector<double>& xs) {
  if (xs.empty()) return 0.0;
  double acc = 0.0;
  for (double x : xs) acc += x;
  return acc / static_cast<double>(xs.size());
}

double sample_stddev(const std::vector<double>& xs) {
  if (xs.size() < 2) return 0.0;
  const double m = mean(xs);
  double acc = 0.0;
  for (double x : xs) acc += (x - m) * (x - m);
  return std::sqrt(acc / static_cast<double>(xs.size() - 1));
}

MethodSummary summarize(const std::string& method, const std::vector<FoldResult>& folds) {
  MethodSummary s;
  s.method = method;
  std::vector<double> best, losses;
  for (const auto& f : folds) {
    if (f.method != method) continue;
    s.fold_accuracies.push_back(f.final_accuracy);
    best.push_back(f.best_accuracy);
    losses.push_back(f.final_loss);
  }
  s.mean_accuracy = mean(s.fold_accuracies);
  s.std_accuracy = sample_stddev(s.fold_accuracies);
  s.mean_best_accuracy = mean(best);
  s.std_best_accuracy = sample_stddev(best);
  s.mean_loss = mean(losses);
  return s;
}

CrossValReport run_crossval(const RunConfig& config, const Dataset& dataset) {
  validate_config(config);
  CrossValReport report;
  report.config = config;
  report.config_hash = config_hash(config);
  report.plan = make_folds(dataset, config.folds, config.seed);
  for (const auto& method : config.methods) {
    for (std::size_t f = 0; f < config.folds; ++f) {
      report.folds.push_back(train_fold(config, dataset, report.plan, f, method));
    }
    report.summaries.push_back(summarize(method.name(), report.folds));
  }
  return report;
}

std::string format_report_csv(const CrossValReport& report) {
  std::string out =
      "method,fold,seed,config_hash,final_accuracy,final_loss,best_accuracy,best_epoch,final_train_loss\n";
  for (const auto& f : report.folds) {
    out += f.method + "," + std::to_string(f.fold) + "," + std::to_string(report.config.seed) + "," +
           report.config_hash + "," + format_double(f.final_accuracy) + "," +
           format_double(f.final_loss) + "," + format_double(f.best_accuracy) + "," +
           std::to_string(f.best_epoch) + "," + format_double(f.final_train_loss) + "\n";
  }
  return out;
}

std::string format_curves_csv(const CrossValReport& report) {
  std::string out = "method,fold,epoch,train_loss,val_loss,val_accuracy\n";
  for (const auto& f : report.folds) {
    for (const auto& p : f.curve) {
      out += f.method + "," + std::to_string(f.fold) + "," + std::to_string(p.epoch) + "," +
             format_double(p.train_loss) + "," + format_double(p.val_loss) + "," +
             format_double(p.val_accuracy) + "\n";
    }
  }
  return out;
}

std::string format_summary_json(const CrossValReport& report) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["version"] = version_stamp();
  j["seed"] = report.config.seed;
  j["config_hash"] = report.config_hash;
  ordered_json cfg = ordered_json::object();
  {
    std::istringstream lines(serialize_config(report.config));
    std::string line;
    while (std::getline(lines, line)) {
      const auto eq = line.find(" = ");
      cfg[line.substr(0, eq)] = line.substr(eq + 3);
    }
  }
  j["config"] = cfg;
  j["folds"] = report.plan.k;
  ordered_json methods = ordered_json::array();
  for (const auto& s : report.summaries) {
    ordered_json m;
    m["method"] = s.method;
    m["fold_accuracies"] = s.fold_accuracies;
    m["mean_accuracy"] = s.mean_accuracy;
    m["std_accuracy"] = s.std_accuracy;
    m["mean_best_accuracy"] = s.mean_best_accuracy;
    m["std_best_accuracy"] = s.std_best_accuracy;
    m["mean_final_loss"] = s.mean_loss;
    ordered_json folds = ordered_json::array();
    for (const auto& f : report.folds) {
      if (f.method != s.method) continue;
      ordered_json fr;
      fr["fold"] = f.fold;
      fr["final_accuracy"] = f.final_accuracy;
      fr["final_loss"] = f.final_loss;
      fr["best_accuracy"] = f.best_accuracy;
      fr["best_epoch"] = f.best_epoch;
      ordered_json curve = ordered_json::array();
      for (const auto& p : f.curve) {
        curve.push_back({{"epoch", p.epoch},
                         {"train_loss", p.train_loss},
                         {"val_loss", p.val_loss},
                         {"val_accuracy", p.val_accuracy}});
      }
      fr["curve"] = std::move(curve);
      folds.push_back(std::move(fr));
    }
    m["per_fold"] = std::move(folds);
    methods.push_back(std::move(m));
  }
  j["methods"] = std::move(methods);
  return j.dump(2) + "\n";
}

std::string format_comparison_table(const CrossValReport& report) {
  std::ostringstream os;
  os << report.plan.k << "-fold cross-validation accuracy (final epoch)\n";
  os << std::left << std::setw(14) << "method";
  for (std::size_t f = 0; f < report.plan.k; ++f) os << std::right << std::setw(9) << ("fold" + std::to_string(f));
  os << std::right << std::setw(20) << "mean +- std" << std::setw(12) << "best-val" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto& s : report.summaries) {
    os << std::left << std::setw(14) << s.method << std::right;
    for (double a : s.fold_accuracies) os << std::setw(8) << 100.0 * a << "%";
    std::ostringstream cell;
    cell << std::fixed << std::setprecision(2) << 100.0 * s.mean_accuracy << " +- " << 100.0 * s.std_accuracy;
    os << std::setw(20) << cell.str() << std::setw(11) << 100.0 * s.mean_best_accuracy << "%\n";
  }
  return os.str();
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

void write_crossval_outputs(const std::filesystem::path& dir, const CrossValReport& report) {
  std::filesystem::create_directories(dir);
  write_text_file(dir / "report.csv", format_report_csv(report));
  write_text_file(dir / "curves.csv", format_curves_csv(report));
  write_text_file(dir / "summary.json", format_summary_json(report));
  write_fold_plan(dir / "folds.txt", report.plan);
  write_text_file(dir / "config.txt", "# config_hash=" + report.config_hash + "\n" + serialize_config(report.config));
}

}  // namespace kpff
