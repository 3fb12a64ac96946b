#include <algorithm>
#include <chrono>

#include "commands.hpp"
#include "kpff/config.hpp"
#include "kpff/fusion.hpp"
#include "kpff/rng.hpp"

namespace kpff::cli {

namespace {

template <typename Fn>
double median_ns(std::size_t warmup, std::size_t iterations, Fn&& fn) {
  for (std::size_t i = 0; i < warmup; ++i) fn();
  std::vector<double> samples;
  samples.reserve(iterations);
  for (std::size_t i = 0; i < iterations; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    samples.push_back(std::chrono::duration<double, std::nano>(t1 - t0).count());
  }
  std::ranges::nth_element(samples, samples.begin() + static_cast<std::ptrdiff_t>(samples.size() / 2));
  return samples[samples.size() / 2];
}

volatile double g_sink = 0.0;

}  // namespace

std::vector<BenchRow> run_bench(const BenchOptions& options) {
  std::vector<BenchRow> rows;
  Rng rng = Rng::stream(options.seed, Stream::test, 4242);
  for (std::size_t n : options.ns) {
    for (std::size_t r : options.rs) {
      std::vector<Tensor> xs;
      for (std::size_t i = 0; i < n; ++i) {
        Tensor x({r});
        for (auto& v : x.values()) v = rng.uniform(-1.0, 1.0);
        xs.push_back(std::move(x));
      }
      const FusionInputs inputs(std::move(xs));
      KpffLayer layer(n);
      layer.perturb(rng, 0.1);
      Tensor upstream({n * r});
      for (auto& v : upstream.values()) v = rng.uniform(-1.0, 1.0);

      BenchRow row;
      row.n = n;
      row.r = r;
      OpCounter counter;
      layer.forward(inputs, &counter);
      row.kpff_multiply_adds = counter.multiply_adds;
      fuse_concat(inputs, &counter);
      row.concat_copies = counter.copies;

      row.add_ns = median_ns(options.warmup, options.iterations, [&] { g_sink = fuse_add(inputs)[0]; });
      row.concat_ns = median_ns(options.warmup, options.iterations, [&] { g_sink = fuse_concat(inputs)[0]; });
      row.kpff_forward_ns =
          median_ns(options.warmup, options.iterations, [&] { g_sink = layer.forward(inputs)[0]; });
      row.kpff_backward_ns = median_ns(options.warmup, options.iterations, [&] {
        layer.zero_grads();
        g_sink = layer.backward(upstream)[0][0];
      });
      row.kpff_concat_ratio = row.kpff_forward_ns / std::max(1.0, row.concat_ns);
      rows.push_back(row);
    }
  }
  return rows;
}

std::string format_bench_timing_csv(const std::vector<BenchRow>& rows) {
  std::string out =
      "n,r,add_median_ns,concat_median_ns,kpff_forward_median_ns,kpff_backward_median_ns,"
      "kpff_multiply_adds,concat_copies,kpff_concat_time_ratio\n";
  for (const auto& b : rows) {
    out += std::to_string(b.n) + "," + std::to_string(b.r) + "," + format_double(b.add_ns) + "," +
           format_double(b.concat_ns) + "," + format_double(b.kpff_forward_ns) + "," +
           format_double(b.kpff_backward_ns) + "," + std::to_string(b.kpff_multiply_adds) + "," +
           std::to_string(b.concat_copies) + "," + format_double(b.kpff_concat_ratio) + "\n";
  }
  return out;
}

std::string format_bench_counts_csv(const std::vector<BenchRow>& rows) {
  std::string out = "n,r,kpff_multiply_adds,n2r,concat_copies\n";
  for (const auto& b : rows) {
    out += std::to_string(b.n) + "," + std::to_string(b.r) + "," + std::to_string(b.kpff_multiply_adds) +
           "," + std::to_string(b.n * b.n * b.r) + "," + std::to_string(b.concat_copies) + "\n";
  }
  return out;
}

}  // namespace kpff::cli
