// SPDX-License-Identifier: Apache-2.0
#include "epgat/market_data.hpp"

#include "epgat/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>
#include <unordered_map>

namespace epgat::data {

namespace {

std::string trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return std::string(s.substr(first, last - first + 1));
}

std::vector<std::string> split_fields(std::string_view line) {
  std::vector<std::string> fields;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    if (comma == std::string_view::npos) {
      fields.push_back(trim(line.substr(start)));
      break;
    }
    fields.push_back(trim(line.substr(start, comma - start)));
    start = comma + 1;
  }
  return fields;
}

bool is_blank_or_comment(const std::string& line) {
  const auto t = trim(line);
  return t.empty() || t.front() == '#';
}

bool parse_double(const std::string& field, double& out) {
  const char* first = field.data();
  const char* last = field.data() + field.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

bool is_iso_date(const std::string& s) {
  if (s.size() != 10 || s[4] != '-' || s[7] != '-') return false;
  for (std::size_t i : {0, 1, 2, 3, 5, 6, 8, 9}) {
    if (s[i] < '0' || s[i] > '9') return false;
  }
  const int month = std::stoi(s.substr(5, 2));
  const int day = std::stoi(s.substr(8, 2));
  return month >= 1 && month <= 12 && day >= 1 && day <= 31;
}

struct StockSeries {
  std::map<std::string, std::array<double, kRawColumns.size()>> rows;
};

StockSeries read_stock_csv(const std::string& ticker, const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw DataError("cannot open data file for ticker '" + ticker + "': " + path.string());
  }
  StockSeries series;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line);
    if (!header_seen) {
      static const std::vector<std::string> expected = {"date", "open", "high", "low", "adj_close",
                                                        "volume"};
      if (fields != expected) {
        throw DataError(path.string() + ":" + std::to_string(line_no) +
                        ": expected header date,open,high,low,adj_close,volume");
      }
      header_seen = true;
      continue;
    }
    if (fields.size() != kRawColumns.size() + 1 || !is_iso_date(fields[0])) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": unparsable row");
    }
    std::array<double, kRawColumns.size()> row{};
    for (std::size_t c = 0; c < row.size(); ++c) {
      if (!parse_double(fields[c + 1], row[c])) {
        throw DataError(path.string() + ":" + std::to_string(line_no) + ": bad value in column '" +
                        std::string(kRawColumns[c]) + "'");
      }
    }
    if (!series.rows.emplace(fields[0], row).second) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": duplicate date " +
                      fields[0]);
    }
  }
  if (!header_seen) throw DataError(path.string() + ": empty file");
  return series;
}

}  // namespace

std::vector<std::string> default_indicators() { return {"open", "high", "low", "adj_close"}; }

std::vector<ManifestEntry> read_manifest(const std::filesystem::path& manifest) {
  std::ifstream in(manifest);
  if (!in) throw DataError("cannot open manifest: " + manifest.string());
  const auto base = manifest.parent_path();
  std::vector<ManifestEntry> entries;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (is_blank_or_comment(line)) continue;
    const auto fields = split_fields(line);
    if (fields.size() >= 2 && fields[0] == "ticker" && fields[1] == "path") continue;
    if (fields.size() < 2 || fields.size() > 3 || fields[0].empty() || fields[1].empty()) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) +
                      ": expected ticker,path[,sector]");
    }
    if (!seen.insert(fields[0]).second) {
      throw DataError(manifest.string() + ":" + std::to_string(line_no) + ": duplicate ticker " +
                      fields[0]);
    }
    ManifestEntry entry{fields[0], fields[1], std::nullopt};
    if (entry.path.is_relative()) entry.path = base / entry.path;
    if (fields.size() == 3 && !fields[2].empty()) entry.sector = fields[2];
    entries.push_back(std::move(entry));
  }
  return entries;
}

IndicatorPanel load_panel(const std::filesystem::path& manifest, std::size_t min_days) {
  const auto entries = read_manifest(manifest);
  if (entries.size() < 2) {
    throw DataError("manifest must list at least 2 stocks, found " +
                    std::to_string(entries.size()));
  }
  std::vector<StockSeries> series;
  series.reserve(entries.size());
  for (const auto& e : entries) series.push_back(read_stock_csv(e.ticker, e.path));

  std::vector<std::string> calendar;
  for (const auto& [date, row] : series.front().rows) {
    const bool everywhere = std::all_of(series.begin() + 1, series.end(), [&](const StockSeries& s) {
      return s.rows.count(date) > 0;
    });
    if (everywhere) calendar.push_back(date);
  }
  if (calendar.size() < min_days) {
    throw InsufficientDataError("aligned calendar has " + std::to_string(calendar.size()) +
                                " days, need at least " + std::to_string(min_days));
  }

  IndicatorPanel panel;
  panel.dates = calendar;
  panel.channels.assign(kRawColumns.begin(), kRawColumns.end());
  panel.values.resize(entries.size() * calendar.size() * kRawColumns.size());
  panel.adj_close.resize(static_cast<Index>(entries.size()), static_cast<Index>(calendar.size()));
  for (std::size_t s = 0; s < entries.size(); ++s) {
    panel.tickers.push_back(entries[s].ticker);
    if (entries[s].sector) panel.sectors[entries[s].ticker] = *entries[s].sector;
    for (std::size_t d = 0; d < calendar.size(); ++d) {
      const auto& row = series[s].rows.at(calendar[d]);
      for (std::size_t c = 0; c < row.size(); ++c) panel.at(s, d, c) = row[c];
      panel.adj_close(static_cast<Index>(s), static_cast<Index>(d)) = row[3];
    }
  }
  return panel;
}

IndicatorPanel select_indicators(const IndicatorPanel& panel, std::span<const std::string> names) {
  if (names.empty()) throw ConfigError("indicator selection is empty");
  std::vector<std::size_t> source;
  for (const auto& name : names) {
    const auto it = std::find(panel.channels.begin(), panel.channels.end(), name);
    if (it == panel.channels.end()) {
      throw ConfigError("unknown indicator '" + name +
                        "' (expected one of open, high, low, adj_close, volume)");
    }
    source.push_back(static_cast<std::size_t>(it - panel.channels.begin()));
  }
  IndicatorPanel out;
  out.tickers = panel.tickers;
  out.dates = panel.dates;
  out.channels.assign(names.begin(), names.end());
  out.adj_close = panel.adj_close;
  out.sectors = panel.sectors;
  out.values.resize(panel.stocks() * panel.days() * names.size());
  for (std::size_t s = 0; s < panel.stocks(); ++s) {
    for (std::size_t d = 0; d < panel.days(); ++d) {
      for (std::size_t c = 0; c < source.size(); ++c) out.at(s, d, c) = panel.at(s, d, source[c]);
    }
  }
  return out;
}

std::vector<std::size_t> usable_time_indices(std::size_t days, std::size_t lag_window,
                                             std::size_t forecast_steps) {
  std::vector<std::size_t> out;
  if (lag_window == 0) return out;
  for (std::size_t t = lag_window - 1; t + forecast_steps < days; ++t) out.push_back(t);
  return out;
}

DatasetSplits split_periods(std::span<const std::size_t> usable, SplitRatios ratios) {
  const std::array<std::size_t, 3> parts = {ratios.train, ratios.validation, ratios.test};
  if (parts[0] == 0 || parts[1] == 0 || parts[2] == 0) {
    throw ConfigError("split ratios must be positive");
  }
  const std::size_t n = usable.size();
  const std::size_t total = parts[0] + parts[1] + parts[2];
  std::array<std::size_t, 3> sizes{};
  std::size_t assigned = 0;
  for (std::size_t i = 0; i < 3; ++i) {
    sizes[i] = n * parts[i] / total;
    assigned += sizes[i];
  }
  for (std::size_t i = 0; assigned < n; i = (i + 1) % 3, ++assigned) ++sizes[i];
  if (sizes[0] == 0 || sizes[1] == 0 || sizes[2] == 0) {
    throw InsufficientDataError("only " + std::to_string(n) +
                                " usable samples; cannot form non-empty train/validation/test "
                                "blocks for ratios " +
                                std::to_string(parts[0]) + ":" + std::to_string(parts[1]) + ":" +
                                std::to_string(parts[2]));
  }
  DatasetSplits splits;
  splits.train.assign(usable.begin(), usable.begin() + static_cast<std::ptrdiff_t>(sizes[0]));
  splits.validation.assign(usable.begin() + static_cast<std::ptrdiff_t>(sizes[0]),
                           usable.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]));
  splits.test.assign(usable.begin() + static_cast<std::ptrdiff_t>(sizes[0] + sizes[1]),
                     usable.end());
  return splits;
}

DatasetSplits split_periods(const IndicatorPanel& panel, SplitRatios ratios,
                            std::size_t lag_window, std::size_t forecast_steps) {
  const auto usable = usable_time_indices(panel.days(), lag_window, forecast_steps);
  return split_periods(usable, ratios);
}

NormalizedPanel normalize(const IndicatorPanel& panel, const DatasetSplits& splits) {
  if (splits.train.size() < 2) {
    throw InsufficientDataError("normalization needs at least 2 training days");
  }
  for (auto d : splits.train) {
    if (d >= panel.days()) throw BoundsError("train index " + std::to_string(d) + " out of range");
  }
  NormalizedPanel out{panel, {}, {}};
  out.stats.resize(panel.stocks() * panel.width());
  const double count = static_cast<double>(splits.train.size());
  for (std::size_t s = 0; s < panel.stocks(); ++s) {
    for (std::size_t c = 0; c < panel.width(); ++c) {
      double mean = 0.0;
      for (auto d : splits.train) mean += panel.at(s, d, c);
      mean /= count;
      double var = 0.0;
      for (auto d : splits.train) {
        const double dev = panel.at(s, d, c) - mean;
        var += dev * dev;
      }
      double stddev = std::sqrt(var / count);
      if (!(stddev > 0.0)) {
        out.warnings.push_back("zero variance on train split for " + panel.tickers[s] + "/" +
                               panel.channels[c] + "; using divisor 1");
        stddev = 1.0;
      }
      out.stats[s * panel.width() + c] = {mean, stddev};
      for (std::size_t d = 0; d < panel.days(); ++d) {
        out.panel.at(s, d, c) = (panel.at(s, d, c) - mean) / stddev;
      }
    }
  }
  return out;
}

WindowSample build_sample(const IndicatorPanel& panel, std::size_t t, std::size_t lag_window,
                          std::size_t forecast_steps, std::size_t classes) {
  if (classes != 2) throw ConfigError("only two trend classes (down, up) are supported");
  if (lag_window == 0 || forecast_steps == 0) {
    throw ConfigError("lag window and forecast steps must be positive");
  }
  if (t + 1 < lag_window || t + forecast_steps >= panel.days()) {
    throw BoundsError("time index " + std::to_string(t) + " outside [" +
                      std::to_string(lag_window - 1) + ", " +
                      std::to_string(static_cast<long long>(panel.days()) - 1 -
                                     static_cast<long long>(forecast_steps)) +
                      "]");
  }
  const auto stocks = static_cast<Index>(panel.stocks());
  const auto width = panel.width();
  WindowSample sample;
  sample.t = t;
  sample.features.resize(stocks, static_cast<Index>(lag_window * width));
  sample.labels = LabelMatrix::Zero(stocks, static_cast<Index>(forecast_steps * classes));
  for (Index s = 0; s < stocks; ++s) {
    const auto stock = static_cast<std::size_t>(s);
    for (std::size_t lag = 0; lag < lag_window; ++lag) {
      const std::size_t day = t + 1 - lag_window + lag;
      for (std::size_t c = 0; c < width; ++c) {
        sample.features(s, static_cast<Index>(lag * width + c)) = panel.at(stock, day, c);
      }
    }
    for (std::size_t j = 0; j < forecast_steps; ++j) {
      const auto day = static_cast<Index>(t + j + 1);
      const int cls = panel.adj_close(s, day) > panel.adj_close(s, day - 1) ? 1 : 0;
      sample.labels(s, static_cast<Index>(j * classes) + cls) = 1;
    }
  }
  return sample;
}

void dump_panel_csv(const IndicatorPanel& panel, const std::filesystem::path& out) {
  std::ofstream os(out);
  if (!os) throw IoError("cannot write " + out.string());
  os << "ticker,date";
  for (const auto& c : panel.channels) os << ',' << c;
  os << '\n';
  os.precision(17);
  for (std::size_t s = 0; s < panel.stocks(); ++s) {
    for (std::size_t d = 0; d < panel.days(); ++d) {
      os << panel.tickers[s] << ',' << panel.dates[d];
      for (std::size_t c = 0; c < panel.width(); ++c) os << ',' << panel.at(s, d, c);
      os << '\n';
    }
  }
}

}  // namespace epgat::data
