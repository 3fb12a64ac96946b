#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kpff/config.hpp"
#include "kpff/dataset.hpp"
#include "kpff/folds.hpp"
#include "kpff/model.hpp"

namespace kpff {

/// "kpff <version>".
std::string version_stamp();

struct CurvePoint {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double val_accuracy = 0.0;
};

struct FoldResult {
  std::string method;
  std::size_t fold = 0;
  std::vector<CurvePoint> curve;  // one point per validation
  double final_accuracy = 0.0;
  double final_loss = 0.0;
  double best_accuracy = 0.0;
  std::size_t best_epoch = 0;
  double final_train_loss = 0.0;
};

struct MethodSummary {
  std::string method;
  std::vector<double> fold_accuracies;
  double mean_accuracy = 0.0;
  double std_accuracy = 0.0;  // sample standard deviation (n - 1)
  double mean_best_accuracy = 0.0;
  double std_best_accuracy = 0.0;
  double mean_loss = 0.0;
};

struct CrossValReport {
  RunConfig config;
  std::string config_hash;
  FoldPlan plan;
  std::vector<FoldResult> folds;  // method-major, fold order within a method
  std::vector<MethodSummary> summaries;
};

/// Synthetic data or an image directory, per `config.data`.
Dataset load_dataset(const RunConfig& config);

ModelConfig model_config_for(const RunConfig& config, const Dataset& dataset, const MethodSpec& method);

/// Trains on every fold but `fold` and validates on `fold`. Randomness for
/// initialization, dropout and shuffling comes from streams indexed by the
/// fold number only, so every method sees the same draws. If `trained` is
/// non-null the final model is moved into it.
FoldResult train_fold(const RunConfig& config, const Dataset& dataset, const FoldPlan& plan,
                      std::size_t fold, const MethodSpec& method, std::optional<Model>* trained = nullptr);

MethodSummary summarize(const std::string& method, const std::vector<FoldResult>& folds);

/// k-fold cross-validation of every method in `config.methods` over one
/// shared fold plan.
CrossValReport run_crossval(const RunConfig& config, const Dataset& dataset);

double mean(const std::vector<double>& xs);
double sample_stddev(const std::vector<double>& xs);

// Report serializers. All are pure functions of the report, so identical
// configs give byte-identical files.
std::string format_report_csv(const CrossValReport& report);
std::string format_curves_csv(const CrossValReport& report);
std::string format_summary_json(const CrossValReport& report);
std::string format_comparison_table(const CrossValReport& report);

/// report.csv, curves.csv, summary.json, folds.txt, config.txt under `dir`.
void write_crossval_outputs(const std::filesystem::path& dir, const CrossValReport& report);

void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace kpff
