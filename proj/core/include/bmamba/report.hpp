#pragma once

// CSV and text renderings of training history and metrics. Numbers use the
// shortest round-trip form so equal values always print the same bytes.

#include <span>
#include <string>

#include "bmamba/metrics.hpp"
#include "bmamba/train.hpp"

namespace bmamba::report {

/// Header: epoch,L_norm,L_emo,L,W-Acc,W-F1
std::string history_csv(std::span<const train::EpochRecord> history);

/// Header: metric,value. Summary rows followed by per-class rows
/// (class<k>_support, class<k>_accuracy, class<k>_precision, class<k>_f1).
/// Wall-clock time is left out so reruns are byte-identical.
std::string metrics_csv(const metrics::MetricsReport& r);

/// Header: truth,pred0,pred1,...
std::string confusion_csv(const metrics::MetricsReport& r);

/// Aligned human-readable table, including the parameter count.
std::string metrics_table(const metrics::MetricsReport& r);

}  // namespace bmamba::report
