#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace bmamba::cli {

struct BenchConfig {
  std::vector<long> lengths{1024, 4096, 16384, 65536};
  int repeats = 5;
  int warmup = 2;
  long channels = 8;
  long state = 8;
  std::uint64_t seed = 1;
  double gate_tolerance = 1e-5;  // single-precision fft vs naive, absolute
};

struct BenchRow {
  long length = 0;
  double naive_ns = 0.0;  // medians
  double fft_ns = 0.0;
  double scan_ns = 0.0;
  double max_deviation = 0.0;  // fft vs naive in float32
};

/// Throws bmamba::Error naming the length if the correctness gate fails.
std::vector<BenchRow> run_scaling_bench(const BenchConfig& config);

std::string bench_csv(std::span<const BenchRow> rows);

/// Least-squares slope of log(y) against log(x).
double loglog_slope(std::span<const double> x, std::span<const double> y);

}  // namespace bmamba::cli
