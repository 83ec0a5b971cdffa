#include "bmamba/metrics.hpp"

#include "bmamba/errors.hpp"

namespace bmamba::metrics {

MetricsReport compute_metrics(std::span<const int> truth, std::span<const int> predicted, int classes) {
  if (truth.empty()) throw ConfigError("cannot evaluate an empty dataset");
  if (truth.size() != predicted.size()) throw ConfigError("truth and prediction counts differ");
  if (classes < 1) throw ConfigError("class count must be positive");
  const auto K = static_cast<std::size_t>(classes);

  MetricsReport r;
  r.classes = classes;
  r.samples = truth.size();
  r.confusion.assign(K, std::vector<std::size_t>(K, 0));
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] >= classes || predicted[i] < 0 || predicted[i] >= classes) {
      throw ConfigError("label out of range in metrics");
    }
    ++r.confusion[static_cast<std::size_t>(truth[i])][static_cast<std::size_t>(predicted[i])];
  }

  r.support.assign(K, 0);
  r.class_accuracy.assign(K, 0.0);
  r.class_precision.assign(K, 0.0);
  r.class_f1.assign(K, 0.0);
  std::size_t correct = 0;
  const double n = static_cast<double>(r.samples);
  for (std::size_t c = 0; c < K; ++c) {
    std::size_t predicted_c = 0;
    for (std::size_t t = 0; t < K; ++t) {
      r.support[c] += r.confusion[c][t];
      predicted_c += r.confusion[t][c];
    }
    const std::size_t tp = r.confusion[c][c];
    correct += tp;
    const double recall = r.support[c] ? static_cast<double>(tp) / static_cast<double>(r.support[c]) : 0.0;
    const double precision = predicted_c ? static_cast<double>(tp) / static_cast<double>(predicted_c) : 0.0;
    r.class_accuracy[c] = recall;
    r.class_precision[c] = precision;
    r.class_f1[c] = precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
    r.weighted_f1 += static_cast<double>(r.support[c]) / n * r.class_f1[c];
  }
  r.weighted_accuracy = static_cast<double>(correct) / n;
  return r;
}

}  // namespace bmamba::metrics
