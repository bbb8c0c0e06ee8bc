// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/market_data.hpp"
#include "epgat/model.hpp"
#include "epgat/synthetic.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace epgat::experiment {

enum class Mode { train, eval, ablate, sweep, graphgen, synth, report };

std::string to_string(Mode mode);
Mode parse_mode(const std::string& text);

struct DataOptions {
  std::vector<std::string> indicators = data::default_indicators();
  data::SplitRatios ratios;
};

struct SweepOptions {
  std::string axis = "tau";  // tau | k | s | h | L
  std::vector<double> grid;
};

struct ExperimentSpec {
  std::optional<Mode> mode;
  std::filesystem::path manifest;
  std::filesystem::path out = "runs";
  std::filesystem::path checkpoint;
  std::vector<std::uint64_t> seeds = {0};
  bool allow_out_of_range = false;
  model::ModelConfig model;
  DataOptions data;
  SweepOptions sweep;
  synth::SyntheticSpec synth;
  std::optional<std::size_t> graph_time;  // graphgen: calendar index, default last usable
  bool graph_dense = false;
};

using Override = std::pair<std::string, std::string>;

/// Applies one `key=value` (dotted `section.key`). Unknown keys and
/// malformed values raise ConfigError.
void apply_setting(ExperimentSpec& spec, const std::string& key, const std::string& value);

/// Parses a config file body: `[section]` headers, `key = value` lines,
/// `#`/`;` comments. Keys may also be written fully dotted.
void apply_config_text(ExperimentSpec& spec, const std::string& text, const std::string& origin);

/// File values first, then overrides in order; ranges checked at the end.
ExperimentSpec parse_spec(const std::optional<std::filesystem::path>& config_file,
                          const std::vector<Override>& overrides);

/// Search-space ranges for tuned hyperparameters (skipped when
/// allow_out_of_range) plus structural validation of the model config.
void validate(const ExperimentSpec& spec);

/// Requires the fields a mode needs (mode itself, manifest, seeds, grid).
void require_complete(const ExperimentSpec& spec);

/// Every key with its resolved value, in config-file syntax.
std::string resolved_text(const ExperimentSpec& spec);

void write_resolved(const ExperimentSpec& spec, const std::filesystem::path& path);

/// Documented key list for `--help` and the README.
std::vector<std::pair<std::string, std::string>> documented_keys();

}  // namespace epgat::experiment
