#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kpff/dataset.hpp"

namespace kpff {

/// Stratified partition of sample indices into k folds.
struct FoldPlan {
  std::size_t k = 5;
  std::uint64_t seed = 0;
  std::vector<std::vector<std::size_t>> folds;  // each sorted ascending

  /// Indices outside fold `f`, sorted ascending.
  std::vector<std::size_t> training_indices(std::size_t f) const;
};

/// Per class: shuffle that class's indices, then deal them round-robin to
/// folds 0..k-1 (leftovers land in the lowest-numbered folds). Throws if a
/// class has fewer than k samples.
FoldPlan make_folds(const Dataset& dataset, std::size_t k, std::uint64_t seed);

/// Text form: a `# k=<k> seed=<seed>` line, then one line per fold with
/// `fold <f>:` followed by space-separated indices.
std::string format_fold_plan(const FoldPlan& plan);
void write_fold_plan(const std::filesystem::path& path, const FoldPlan& plan);

}  // namespace kpff
