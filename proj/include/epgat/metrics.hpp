// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <span>

namespace epgat::metrics {

/// Binary confusion counts with class 1 (up) as the positive class.
struct ConfusionCounts {
  std::uint64_t tp = 0;
  std::uint64_t tn = 0;
  std::uint64_t fp = 0;
  std::uint64_t fn = 0;

  std::uint64_t total() const { return tp + tn + fp + fn; }
  ConfusionCounts& operator+=(const ConfusionCounts& o);
  bool operator==(const ConfusionCounts&) const = default;
};

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred);

double accuracy(const ConfusionCounts& c);
/// 0 when tp = fp = fn = 0.
double f1(const ConfusionCounts& c);
/// 0 when any factor of the denominator is zero.
double mcc(const ConfusionCounts& c);

struct MetricsRecord {
  double acc = 0.0;
  double mcc = 0.0;
  double f1 = 0.0;
  std::uint64_t n = 0;
  bool mcc_degenerate = false;
  bool f1_degenerate = false;
  ConfusionCounts counts;
};

/// All three metrics from one pooled confusion matrix.
MetricsRecord score(const ConfusionCounts& c);

/// {acc, mcc, mcc_x100, f1, n, degenerate_flags, confusion, pooling}
nlohmann::json to_json(const MetricsRecord& m);
MetricsRecord metrics_from_json(const nlohmann::json& j);

}  // namespace epgat::metrics
