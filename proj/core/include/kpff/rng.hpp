#pragma once

#include <cstdint>
#include <span>
#include <vector>

namespace kpff {

/// Consumers of randomness. Each gets an independent stream so that, e.g.,
/// enabling dropout never shifts the parameter initialization.
enum class Stream : std::uint64_t {
  init = 1,
  dropout = 2,
  shuffle = 3,
  folds = 4,
  data = 5,
  kpff_init = 6,
  test = 7,
};

/// SplitMix64 counter generator. Output depends only on the seed and the
/// number of draws, on every platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) noexcept : state_(seed) {}

  /// Stream `id`, sub-index `index` (typically the fold number) of `seed`.
  static Rng stream(std::uint64_t seed, Stream id, std::uint64_t index = 0) noexcept;

  std::uint64_t next_u64() noexcept;
  /// Uniform in [0, 1) with 53 bits of resolution.
  double uniform() noexcept;
  double uniform(double lo, double hi) noexcept { return lo + (hi - lo) * uniform(); }
  /// Uniform integer in [0, bound). `bound` must be > 0.
  std::uint64_t below(std::uint64_t bound) noexcept;
  /// Standard normal via Box-Muller (no cached second variate).
  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const std::size_t j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }
  template <typename T>
  void shuffle(std::vector<T>& items) noexcept {
    shuffle(std::span<T>(items));
  }

 private:
  std::uint64_t state_;
};

std::uint64_t mix64(std::uint64_t z) noexcept;

}  // namespace kpff
