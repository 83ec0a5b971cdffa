#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace bmamba::metrics {

struct MetricsReport {
  int classes = 0;
  std::size_t samples = 0;
  std::vector<std::size_t> support;    // true-class counts
  std::vector<double> class_accuracy;  // correct_c / support_c (0 for empty classes)
  std::vector<double> class_precision;
  std::vector<double> class_f1;        // 2PR/(P+R), 0 when P+R = 0
  std::vector<std::vector<std::size_t>> confusion;  // [truth][prediction]
  double weighted_accuracy = 0.0;      // total correct / N
  double weighted_f1 = 0.0;            // sum_c support_c / N * F1_c
  std::size_t parameter_count = 0;
  double seconds = 0.0;
};

/// Single-pass tally. Throws ConfigError for empty input, length mismatch or
/// out-of-range labels.
MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, int classes);

}  // namespace bmamba::metrics
