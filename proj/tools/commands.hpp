#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace kpff::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitCheckFailed = 1;
inline constexpr int kExitUsage = 2;

/// Entry point shared by `main` and the tests. `args` excludes argv[0].
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

struct BenchOptions {
  std::vector<std::size_t> ns{2, 4, 8, 16};
  std::vector<std::size_t> rs{64, 256, 1024, 4096};
  std::size_t iterations = 100;
  std::size_t warmup = 10;
  std::uint64_t seed = 42;
};

struct BenchRow {
  std::size_t n = 0;
  std::size_t r = 0;
  double add_ns = 0.0;
  double concat_ns = 0.0;
  double kpff_forward_ns = 0.0;
  double kpff_backward_ns = 0.0;
  std::uint64_t kpff_multiply_adds = 0;  // instrumented forward count
  std::uint64_t concat_copies = 0;
  double kpff_concat_ratio = 0.0;        // forward time / concat time
};

/// Median wall time per call for each operation on an (n, r) grid.
std::vector<BenchRow> run_bench(const BenchOptions& options);
std::string format_bench_timing_csv(const std::vector<BenchRow>& rows);
/// Operation counts only; independent of timing noise.
std::string format_bench_counts_csv(const std::vector<BenchRow>& rows);

}  // namespace kpff::cli
