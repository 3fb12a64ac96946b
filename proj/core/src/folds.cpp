#include "kpff/folds.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

#include "kpff/rng.hpp"

namespace kpff {

std::vector<std::size_t> FoldPlan::training_indices(std::size_t f) const {
  std::vector<std::size_t> out;
  for (std::size_t g = 0; g < folds.size(); ++g) {
    if (g != f) out.insert(out.end(), folds[g].begin(), folds[g].end());
  }
  std::ranges::sort(out);
  return out;
}

FoldPlan make_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed) {
  if (k < 2) throw std::invalid_argument("need at least 2 folds");
  std::vector<std::vector<std::size_t>> by_class(dataset.class_count());
  for (std::size_t i = 0; i < dataset.size(); ++i) {
    const std::size_t label = dataset.samples[i].label;
    if (label >= by_class.size()) throw std::invalid_argument("sample label outside class list");
    by_class[label].push_back(i);
  }

  FoldPlan plan;
  plan.k = k;
  plan.seed = seed;
  plan.folds.resize(k);
  Rng rng = Rng::stream(seed, Stream::folds);
  for (std::size_t c = 0; c < by_class.size(); ++c) {
    auto& members = by_class[c];
    if (members.size() < k) {
      throw std::invalid_argument("class '" + dataset.class_names[c] + "' has " +
                                  std::to_string(members.size()) + " samples, fewer than " +
                                  std::to_string(k) + " folds");
    }
    rng.shuffle(members);
    for (std::size_t j = 0; j < members.size(); ++j) plan.folds[j % k].push_back(members[j]);
  }
  for (auto& fold : plan.folds) std::ranges::sort(fold);
  return plan;
}

std::string format_fold_plan(const FoldPlan& plan) {
  std::string out = "# k=" + std::to_string(plan.k) + " seed=" + std::to_string(plan.seed) + "\n";
  for (std::size_t f = 0; f < plan.folds.size(); ++f) {
    out += "fold " + std::to_string(f) + ":";
    for (std::size_t idx : plan.folds[f]) out += " " + std::to_string(idx);
    out += "\n";
  }
  return out;
}

void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << format_fold_plan(plan);
}

}  // namespace kpff
