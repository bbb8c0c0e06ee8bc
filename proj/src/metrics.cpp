// SPDX-License-Identifier: Apache-2.0
#include "epgat/metrics.hpp"

#include "epgat/errors.hpp"

#include <cmath>

namespace epgat::metrics {

ConfusionCounts& ConfusionCounts::operator+=(const ConfusionCounts& o) {
  tp += o.tp;
  tn += o.tn;
  fp += o.fp;
  fn += o.fn;
  return *this;
}

ConfusionCounts confusion(std::span<const int> y_true, std::span<const int> y_pred) {
  if (y_true.size() != y_pred.size()) {
    throw DataError("confusion: length mismatch " + std::to_string(y_true.size()) + " vs " +
                    std::to_string(y_pred.size()));
  }
  ConfusionCounts c;
  for (std::size_t i = 0; i < y_true.size(); ++i) {
    const int t = y_true[i];
    const int p = y_pred[i];
    if ((t != 0 && t != 1) || (p != 0 && p != 1)) {
      throw DataError("confusion: non-binary entry at position " + std::to_string(i));
    }
    if (t == 1 && p == 1) ++c.tp;
    if (t == 0 && p == 0) ++c.tn;
    if (t == 0 && p == 1) ++c.fp;
    if (t == 1 && p == 0) ++c.fn;
  }
  return c;
}

namespace {

void require_nonempty(const ConfusionCounts& c) {
  if (c.total() == 0) throw DataError("metrics need at least one scored pair");
}

}  // namespace

double accuracy(const ConfusionCounts& c) {
  require_nonempty(c);
  return static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
}

double f1(const ConfusionCounts& c) {
  require_nonempty(c);
  const auto denom = 2 * c.tp + c.fp + c.fn;
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(c.tp) / static_cast<double>(denom);
}

double mcc(const ConfusionCounts& c) {
  require_nonempty(c);
  const double tp = static_cast<double>(c.tp);
  const double tn = static_cast<double>(c.tn);
  const double fp = static_cast<double>(c.fp);
  const double fn = static_cast<double>(c.fn);
  const double a = tp + fp;
  const double b = tp + fn;
  const double d = tn + fp;
  const double e = tn + fn;
  if (a == 0.0 || b == 0.0 || d == 0.0 || e == 0.0) return 0.0;
  return (tp * tn - fp * fn) / std::sqrt(a * b * d * e);
}

MetricsRecord score(const ConfusionCounts& c) {
  MetricsRecord m;
  m.acc = accuracy(c);
  m.f1 = f1(c);
  m.mcc = mcc(c);
  m.n = c.total();
  m.f1_degenerate = (2 * c.tp + c.fp + c.fn) == 0;
  m.mcc_degenerate = c.tp + c.fp == 0 || c.tp + c.fn == 0 || c.tn + c.fp == 0 || c.tn + c.fn == 0;
  m.counts = c;
  return m;
}

nlohmann::json to_json(const MetricsRecord& m) {
  return {
      {"acc", m.acc},
      {"mcc", m.mcc},
      {"mcc_x100", m.mcc * 100.0},
      {"f1", m.f1},
      {"n", m.n},
      {"degenerate_flags", {{"mcc", m.mcc_degenerate}, {"f1", m.f1_degenerate}}},
      {"confusion", {{"tp", m.counts.tp}, {"tn", m.counts.tn}, {"fp", m.counts.fp}, {"fn", m.counts.fn}}},
      {"pooling", "micro"},
  };
}

MetricsRecord metrics_from_json(const nlohmann::json& j) {
  MetricsRecord m;
  m.acc = j.at("acc").get<double>();
  m.mcc = j.at("mcc").get<double>();
  m.f1 = j.at("f1").get<double>();
  m.n = j.at("n").get<std::uint64_t>();
  if (j.contains("degenerate_flags")) {
    m.mcc_degenerate = j["degenerate_flags"].value("mcc", false);
    m.f1_degenerate = j["degenerate_flags"].value("f1", false);
  }
  if (j.contains("confusion")) {
    const auto& c = j["confusion"];
    m.counts = {c.at("tp").get<std::uint64_t>(), c.at("tn").get<std::uint64_t>(),
                c.at("fp").get<std::uint64_t>(), c.at("fn").get<std::uint64_t>()};
  }
  return m;
}

}  // namespace epgat::metrics
