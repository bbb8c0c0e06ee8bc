// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/linalg.hpp"

#include <array>
#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace epgat::data {

/// Raw CSV columns in file order (after the date).
inline constexpr std::array<std::string_view, 5> kRawColumns = {"open", "high", "low",
                                                                 "adj_close", "volume"};

/// Indicator selection used when none is configured.
std::vector<std::string> default_indicators();

/// Aligned per-stock, per-day indicator series.
///
/// `values` is laid out stock-major: index (stock, day, channel) lives at
/// `(stock * days() + day) * channels() + channel`. `adj_close` keeps the raw
/// adjusted close for labelling and is never rescaled, so labels stay valid
/// whatever channels are selected.
struct IndicatorPanel {
  std::vector<std::string> tickers;
  std::vector<std::string> dates;
  std::vector<std::string> channels;
  std::vector<double> values;
  Matrix adj_close;  // stocks x days
  std::map<std::string, std::string> sectors;

  std::size_t stocks() const { return tickers.size(); }
  std::size_t days() const { return dates.size(); }
  std::size_t width() const { return channels.size(); }

  double& at(std::size_t stock, std::size_t day, std::size_t channel) {
    return values[(stock * days() + day) * width() + channel];
  }
  double at(std::size_t stock, std::size_t day, std::size_t channel) const {
    return values[(stock * days() + day) * width() + channel];
  }
};

struct ManifestEntry {
  std::string ticker;
  std::filesystem::path path;
  std::optional<std::string> sector;
};

/// Reads a manifest: one `ticker,path[,sector]` per line, `#` comments and
/// an optional `ticker,path,sector` header. Relative paths resolve against
/// the manifest's directory.
std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest);

/// Loads every stock listed in the manifest and aligns them on the
/// intersection of their trading calendars. `min_days` is the smallest
/// acceptable aligned calendar (lag window + forecast steps).
IndicatorPanel load_panel(const std::filesystem::path& manifest, std::size_t min_days = 2);

/// Projects the panel onto the named raw columns in the given order.
IndicatorPanel select_indicators(const IndicatorPanel& panel, std::span<const std::string> names);

struct SplitRatios {
  std::size_t train = 457;
  std::size_t validation = 63;
  std::size_t test = 261;
};

/// Chronological partition of sample time indices.
struct DatasetSplits {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
  std::vector<std::size_t> test;
};

/// Calendar indices t for which a full window and forecast horizon exist.
std::vector<std::size_t> usable_time_indices(std::size_t days, std::size_t lag_window,
                                             std::size_t forecast_steps);

/// Splits `usable` into contiguous train/validation/test blocks. Block sizes
/// are floor(n * ratio / sum) with the remainder handed out left to right.
DatasetSplits split_periods(std::span<const std::size_t> usable, SplitRatios ratios);

DatasetSplits split_periods(const IndicatorPanel& panel, SplitRatios ratios, std::size_t lag_window,
                            std::size_t forecast_steps);

struct ChannelStats {
  double mean = 0.0;
  double stddev = 1.0;  // population; replaced by 1 when zero
};

struct NormalizedPanel {
  IndicatorPanel panel;
  std::vector<ChannelStats> stats;  // stocks x channels, row-major
  std::vector<std::string> warnings;

  const ChannelStats& stat(std::size_t stock, std::size_t channel) const {
    return stats[stock * panel.width() + channel];
  }
};

/// Per-(stock, channel) z-score using statistics from the calendar days
/// listed in `splits.train` only.
NormalizedPanel normalize(const IndicatorPanel& panel, const DatasetSplits& splits);

/// Features and one-hot trend labels for one time step.
struct WindowSample {
  std::size_t t = 0;
  Matrix features;     // stocks x (lag_window * channels), oldest day first
  LabelMatrix labels;  // stocks x (forecast_steps * classes)
};

/// Label for step j is class 1 when adj_close(t+j) > adj_close(t+j-1), class 0
/// otherwise (ties count as down). Only two trend classes are supported.
WindowSample build_sample(const IndicatorPanel& panel, std::size_t t, std::size_t lag_window,
                          std::size_t forecast_steps, std::size_t classes = 2);

/// Writes the panel as long-format CSV: ticker,date,<channels...>.
void dump_panel_csv(const IndicatorPanel& panel, const std::filesystem::path& out);

}  // namespace epgat::data
