#include "bmamba/report.hpp"

#include <cstdio>
#include <string>

#include "bmamba/config.hpp"

namespace bmamba::report {

using config::format_double;

std::string history_csv(std::span<const train::EpochRecord> history) {
  std::string out = "epoch,L_norm,L_emo,L,W-Acc,W-F1\n";
  for (const auto& r : history) {
    out += std::to_string(r.epoch) + ',' + format_double(r.norm) + ',' + format_double(r.emotion) + ',' +
           format_double(r.total) + ',' + format_double(r.weighted_accuracy) + ',' + format_double(r.weighted_f1) +
           '\n';
  }
  return out;
}

std::string metrics_csv(const metrics::MetricsReport& r) {
  std::string out = "metric,value\n";
  auto row = [&](const std::string& key, const std::string& value) { out += key + ',' + value + '\n'; };
  row("samples", std::to_string(r.samples));
  row("classes", std::to_string(r.classes));
  row("W-Acc", format_double(r.weighted_accuracy));
  row("W-F1", format_double(r.weighted_f1));
  row("parameters", std::to_string(r.parameter_count));
  for (std::size_t c = 0; c < r.support.size(); ++c) {
    const std::string p = "class" + std::to_string(c) + '_';
    row(p + "support", std::to_string(r.support[c]));
    row(p + "accuracy", format_double(r.class_accuracy[c]));
    row(p + "precision", format_double(r.class_precision[c]));
    row(p + "f1", format_double(r.class_f1[c]));
  }
  return out;
}

std::string confusion_csv(const metrics::MetricsReport& r) {
  std::string out = "truth";
  for (std::size_t c = 0; c < r.confusion.size(); ++c) out += ",pred" + std::to_string(c);
  out += '\n';
  for (std::size_t t = 0; t < r.confusion.size(); ++t) {
    out += std::to_string(t);
    for (auto n : r.confusion[t]) out += ',' + std::to_string(n);
    out += '\n';
  }
  return out;
}

std::string metrics_table(const metrics::MetricsReport& r) {
  std::string out;
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-8s %9s %9s %9s %9s\n", "class", "support", "accuracy", "precision", "f1");
  out += buf;
  for (std::size_t c = 0; c < r.support.size(); ++c) {
    std::snprintf(buf, sizeof buf, "%-8zu %9zu %9.4f %9.4f %9.4f\n", c, r.support[c], r.class_accuracy[c],
                  r.class_precision[c], r.class_f1[c]);
    out += buf;
  }
  std::snprintf(buf, sizeof buf, "%-8s %9zu %9.4f %9s %9.4f\n", "weighted", r.samples, r.weighted_accuracy, "",
                r.weighted_f1);
  out += buf;
  std::snprintf(buf, sizeof buf, "parameters: %zu\n", r.parameter_count);
  out += buf;
  return out;
}

}  // namespace bmamba::report
