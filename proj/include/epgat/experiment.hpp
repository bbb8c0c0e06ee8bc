// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/experiment_config.hpp"
#include "epgat/market_data.hpp"
#include "epgat/metrics.hpp"
#include "epgat/model.hpp"
#include "epgat/trainer.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

namespace epgat::experiment {

/// Progress lines (one per run plus periodic epochs) go here; null silences.
void set_log_stream(std::ostream* stream);

/// Model-ready samples for one configuration.
struct Dataset {
  data::IndicatorPanel panel;  // normalized, selected indicators
  data::DatasetSplits splits;
  std::vector<train::Example> train;
  std::vector<train::Example> validation;
  std::vector<train::Example> test;
  std::vector<std::string> warnings;
};

/// Selection, split, train-only normalization, windowing and graph
/// construction (energy graph per time step, or the static sector graph).
Dataset build_dataset(const data::IndicatorPanel& raw, const model::ModelConfig& config,
                      const DataOptions& options);

struct RunRecord {
  std::string group;
  std::uint64_t seed = 0;
  int best_epoch = 0;
  metrics::MetricsRecord validation;
  metrics::MetricsRecord test;
  std::size_t parameters = 0;
};

nlohmann::json to_json(const RunRecord& r);
RunRecord run_from_json(const nlohmann::json& j);

/// Trains one seed on a prepared dataset. When `run_dir` is non-empty,
/// writes history.jsonl, metrics.json and model.epgt into it.
RunRecord train_once(const Dataset& dataset, model::ModelConfig config, std::uint64_t seed,
                     const std::string& group, const std::filesystem::path& run_dir);

/// `train` subcommand: every configured seed, each in out/seed_<seed>/.
std::vector<RunRecord> run_train(const ExperimentSpec& spec);

/// `eval` subcommand: scores a checkpoint on the test split.
metrics::MetricsRecord run_eval(const ExperimentSpec& spec, const std::filesystem::path& checkpoint);

struct AblationVariant {
  std::string name;
  model::GraphSource graph;
  bool parallel;
};

/// EP-GAT (energy, on), M1 (energy, off), M2 (sector, off), M3 (sector, on).
std::vector<AblationVariant> ablation_variants();

struct AblationResult {
  AblationVariant variant;
  std::vector<RunRecord> runs;
  std::size_t parameters = 0;
};

/// Trains all four variants with the same seeds and configuration except the
/// two toggled axes. Writes out/<variant>/seed_<s>/ plus ablation.txt and
/// ablation.json.
std::vector<AblationResult> run_ablation(const ExperimentSpec& spec);

struct SweepRow {
  double value = 0.0;
  std::uint64_t seed = 0;
  double acc = 0.0;
  double mcc = 0.0;
  double f1 = 0.0;
};

struct SummaryRow {
  double value = 0.0;
  std::size_t runs = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double mcc_mean = 0.0, mcc_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
};

/// Mean and population standard deviation per grid value, in grid order.
std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows);

std::vector<SweepRow> read_sweep_csv(const std::filesystem::path& path);

/// One training per grid value and seed (test metrics). Writes sweep.csv
/// (`axis_value,seed,acc,mcc,f1`) and sweep_summary.csv.
std::vector<SweepRow> run_sweep(const ExperimentSpec& spec);

/// Writes edges for one time step of the energy graph (or the sector graph).
/// Returns the edge count.
std::size_t run_graphgen(const ExperimentSpec& spec);

struct ReportGroup {
  std::string group;
  std::size_t runs = 0;
  double acc_mean = 0.0, acc_std = 0.0;
  double mcc_mean = 0.0, mcc_std = 0.0;
  double f1_mean = 0.0, f1_std = 0.0;
};

struct Report {
  std::vector<ReportGroup> groups;
  std::string text;
  nlohmann::json json;
};

/// Aggregates every metrics.json under `dir` by group as mean +/- population
/// std of the test metrics, and writes report.txt and report.json.
Report report(const std::filesystem::path& dir);

/// Mean and population standard deviation.
std::pair<double, double> mean_std(const std::vector<double>& xs);

}  // namespace epgat::experiment
