// SPDX-License-Identifier: Apache-2.0
#include "epgat/experiment.hpp"

#include "epgat/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <sstream>

namespace epgat::experiment {

namespace fs = std::filesystem;

namespace {

std::ostream* g_log = nullptr;

void log_line(const std::string& line) {
  if (g_log != nullptr) *g_log << line << std::endl;
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

// Six decimals, shared by text and JSON report output.
double round6(double x) { return std::round(x * 1e6) / 1e6; }

std::string fixed(double x, int digits) {
  std::ostringstream os;
  os << std::fixed << std::setprecision(digits) << x;
  return os.str();
}

std::ofstream open_out(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

void write_json(const fs::path& path, const nlohmann::json& j) {
  auto os = open_out(path);
  os << j.dump(2) << "\n";
}

std::string seed_dir(std::uint64_t seed) { return "seed_" + std::to_string(seed); }

std::string join_seeds(const std::vector<std::uint64_t>& seeds) {
  std::string s;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(seeds[i]);
  }
  return s;
}

data::IndicatorPanel load_raw(const ExperimentSpec& spec) {
  return data::load_panel(spec.manifest, 2);
}

void set_axis(model::ModelConfig& config, const std::string& axis, double value) {
  auto as_int = [&](const char* name) {
    if (value != std::floor(value)) {
      throw ConfigError(std::string("sweep value for ") + name + " must be an integer, got " + fmt(value));
    }
    return static_cast<int>(value);
  };
  if (axis == "tau") {
    config.lag_window = as_int("tau");
  } else if (axis == "k") {
    config.scaling = value;
  } else if (axis == "s") {
    config.threshold = value;
  } else if (axis == "h") {
    config.heads = as_int("h");
  } else if (axis == "L") {
    config.blocks = as_int("L");
  } else {
    throw ConfigError("unknown sweep axis '" + axis + "'");
  }
}

}  // namespace

void set_log_stream(std::ostream* stream) { g_log = stream; }

Dataset build_dataset(const data::IndicatorPanel& raw, const model::ModelConfig& config,
                      const DataOptions& options) {
  config.validate();
  if (options.indicators.size() != static_cast<std::size_t>(config.indicators)) {
    throw ConfigError("model expects " + std::to_string(config.indicators) + " indicators, " +
                      std::to_string(options.indicators.size()) + " selected");
  }
  Matrix sector_graph;
  if (config.graph == model::GraphSource::sector) {
    sector_graph = graph::sector_adjacency(raw.sectors, raw.tickers);
  }
  const auto selected = data::select_indicators(raw, options.indicators);
  Dataset out;
  out.splits = data::split_periods(selected, options.ratios, static_cast<std::size_t>(config.lag_window),
                                   static_cast<std::size_t>(config.forecast_steps));
  auto normalized = data::normalize(selected, out.splits);
  out.panel = std::move(normalized.panel);
  out.warnings = std::move(normalized.warnings);

  auto make = [&](std::size_t t) {
    auto sample = data::build_sample(out.panel, t, static_cast<std::size_t>(config.lag_window),
                                     static_cast<std::size_t>(config.forecast_steps),
                                     static_cast<std::size_t>(config.trend_classes));
    train::Example ex;
    ex.graph = config.graph == model::GraphSource::energy
                   ? graph::energy_snapshot(t, std::move(sample.features), config.scaling,
                                            config.lag_window, config.threshold)
                   : graph::static_snapshot(t, std::move(sample.features), sector_graph);
    ex.labels = std::move(sample.labels);
    return ex;
  };
  for (std::size_t t : out.splits.train) out.train.push_back(make(t));
  for (std::size_t t : out.splits.validation) out.validation.push_back(make(t));
  for (std::size_t t : out.splits.test) out.test.push_back(make(t));
  return out;
}

nlohmann::json to_json(const RunRecord& r) {
  return {{"group", r.group},
          {"seed", r.seed},
          {"best_epoch", r.best_epoch},
          {"parameters", r.parameters},
          {"validation", metrics::to_json(r.validation)},
          {"test", metrics::to_json(r.test)}};
}

RunRecord run_from_json(const nlohmann::json& j) {
  try {
    RunRecord r;
    r.group = j.at("group").get<std::string>();
    r.seed = j.at("seed").get<std::uint64_t>();
    r.best_epoch = j.at("best_epoch").get<int>();
    r.parameters = j.at("parameters").get<std::size_t>();
    r.validation = metrics::metrics_from_json(j.at("validation"));
    r.test = metrics::metrics_from_json(j.at("test"));
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed run record: ") + e.what());
  }
}

RunRecord train_once(const Dataset& dataset, model::ModelConfig config, std::uint64_t seed,
                     const std::string& group, const fs::path& run_dir) {
  config.seed = seed;
  std::ofstream history;
  if (!run_dir.empty()) history = open_out(run_dir / "history.jsonl");
  const int stride = std::max(1, config.epochs / 10);
  const auto observer = [&](const train::EpochRecord& rec) {
    if (history.is_open()) history << train::to_json(rec).dump() << "\n";
    if (rec.epoch % stride == 0 || rec.epoch == config.epochs) {
      std::string line = "  [" + group + " seed " + std::to_string(seed) + "] epoch " +
                         std::to_string(rec.epoch) + " loss " + fixed(rec.train_loss, 5);
      if (rec.validation) line += " val_acc " + fixed(rec.validation->acc, 4);
      log_line(line);
    }
  };
  const auto result = train::train(dataset.train, dataset.validation, config, observer);

  RunRecord record;
  record.group = group;
  record.seed = seed;
  record.best_epoch = result.best_epoch;
  record.parameters = model::parameter_count(result.params);
  record.validation = train::evaluate(result.params, config, dataset.validation);
  record.test = train::evaluate(result.params, config, dataset.test);
  if (!run_dir.empty()) {
    model::save_model(result.params, config, run_dir / "model.epgt");
    write_json(run_dir / "metrics.json", to_json(record));
  }
  log_line("[" + group + " seed " + std::to_string(seed) + "] best epoch " +
           std::to_string(record.best_epoch) + " val_acc " + fixed(record.validation.acc, 4) +
           " test_acc " + fixed(record.test.acc, 4));
  return record;
}

std::vector<RunRecord> run_train(const ExperimentSpec& spec) {
  require_complete(spec);
  write_resolved(spec, spec.out / "resolved.cfg");
  const auto raw = load_raw(spec);
  const auto dataset = build_dataset(raw, spec.model, spec.data);
  for (const auto& w : dataset.warnings) log_line("warning: " + w);
  std::vector<RunRecord> runs;
  for (std::uint64_t seed : spec.seeds) {
    runs.push_back(train_once(dataset, spec.model, seed, "train", spec.out / seed_dir(seed)));
  }
  return runs;
}

metrics::MetricsRecord run_eval(const ExperimentSpec& spec, const fs::path& checkpoint) {
  write_resolved(spec, spec.out / "resolved.cfg");
  const auto ckpt = model::load_model(checkpoint);
  const auto raw = load_raw(spec);
  const auto dataset = build_dataset(raw, ckpt.config, spec.data);
  const auto m = train::evaluate(ckpt.params, ckpt.config, dataset.test);
  write_json(spec.out / "eval.json", {{"checkpoint", checkpoint.string()}, {"test", metrics::to_json(m)}});
  return m;
}

std::vector<AblationVariant> ablation_variants() {
  return {{"EP-GAT", model::GraphSource::energy, true},
          {"M1", model::GraphSource::energy, false},
          {"M2", model::GraphSource::sector, false},
          {"M3", model::GraphSource::sector, true}};
}

std::vector<AblationResult> run_ablation(const ExperimentSpec& spec) {
  require_complete(spec);
  write_resolved(spec, spec.out / "resolved.cfg");
  const auto raw = load_raw(spec);

  // Every dataset is built before any training so a missing sector map fails early.
  std::map<model::GraphSource, Dataset> datasets;
  for (const auto& v : ablation_variants()) {
    if (datasets.count(v.graph)) continue;
    auto config = spec.model;
    config.graph = v.graph;
    datasets.emplace(v.graph, build_dataset(raw, config, spec.data));
  }

  std::vector<AblationResult> results;
  for (const auto& v : ablation_variants()) {
    auto config = spec.model;
    config.graph = v.graph;
    config.parallel_attention = v.parallel;
    AblationResult r{v, {}, model::parameter_count(model::init_model(config))};
    for (std::uint64_t seed : spec.seeds) {
      r.runs.push_back(train_once(datasets.at(v.graph), config, seed, v.name,
                                  spec.out / v.name / seed_dir(seed)));
    }
    results.push_back(std::move(r));
  }

  std::ostringstream text;
  text << "seeds: " << join_seeds(spec.seeds) << "\n";
  text << std::left << std::setw(8) << "variant" << std::setw(8) << "graph" << std::setw(10) << "parallel"
       << std::setw(8) << "params" << std::setw(20) << "val_acc" << std::setw(20) << "test_acc"
       << std::setw(20) << "test_mcc" << "test_f1\n";
  nlohmann::json j = {{"seeds", spec.seeds}, {"variants", nlohmann::json::array()}};
  for (const auto& r : results) {
    std::vector<double> va, ta, tm, tf;
    for (const auto& run : r.runs) {
      va.push_back(run.validation.acc);
      ta.push_back(run.test.acc);
      tm.push_back(run.test.mcc);
      tf.push_back(run.test.f1);
    }
    auto cell = [](const std::vector<double>& xs) {
      const auto [m, s] = mean_std(xs);
      return fixed(m, 4) + " +/- " + fixed(s, 4);
    };
    const std::string graph_name = r.variant.graph == model::GraphSource::energy ? "energy" : "sector";
    text << std::left << std::setw(8) << r.variant.name << std::setw(8) << graph_name << std::setw(10)
         << (r.variant.parallel ? "on" : "off") << std::setw(8) << r.parameters << std::setw(20) << cell(va)
         << std::setw(20) << cell(ta) << std::setw(20) << cell(tm) << cell(tf) << "\n";
    nlohmann::json runs = nlohmann::json::array();
    for (const auto& run : r.runs) runs.push_back(to_json(run));
    j["variants"].push_back({{"name", r.variant.name},
                             {"graph", graph_name},
                             {"parallel", r.variant.parallel},
                             {"parameters", r.parameters},
                             {"runs", runs}});
  }
  auto os = open_out(spec.out / "ablation.txt");
  os << text.str();
  write_json(spec.out / "ablation.json", j);
  log_line(text.str());
  return results;
}

std::pair<double, double> mean_std(const std::vector<double>& xs) {
  if (xs.empty()) return {0.0, 0.0};
  double mean = 0.0;
  for (double x : xs) mean += x;
  mean /= static_cast<double>(xs.size());
  double var = 0.0;
  for (double x : xs) var += (x - mean) * (x - mean);
  var /= static_cast<double>(xs.size());
  return {mean, std::sqrt(var)};
}

std::vector<SummaryRow> summarize(const std::vector<SweepRow>& rows) {
  std::vector<double> order;
  for (const auto& r : rows) {
    if (std::find(order.begin(), order.end(), r.value) == order.end()) order.push_back(r.value);
  }
  std::vector<SummaryRow> out;
  for (double value : order) {
    std::vector<double> acc, mcc, f1;
    for (const auto& r : rows) {
      if (r.value != value) continue;
      acc.push_back(r.acc);
      mcc.push_back(r.mcc);
      f1.push_back(r.f1);
    }
    SummaryRow s;
    s.value = value;
    s.runs = acc.size();
    std::tie(s.acc_mean, s.acc_std) = mean_std(acc);
    std::tie(s.mcc_mean, s.mcc_std) = mean_std(mcc);
    std::tie(s.f1_mean, s.f1_std) = mean_std(f1);
    out.push_back(s);
  }
  return out;
}

std::vector<SweepRow> read_sweep_csv(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != "axis_value,seed,acc,mcc,f1") {
    throw FormatError(path.string() + ": expected header axis_value,seed,acc,mcc,f1", 0);
  }
  std::vector<SweepRow> rows;
  std::size_t line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    std::vector<std::string> cells;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    if (cells.size() != 5) {
      throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected 5 fields", line_no);
    }
    SweepRow r;
    auto parse = [&](const std::string& text, auto& dst) {
      const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), dst);
      if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": bad number '" + text + "'",
                          line_no);
      }
    };
    parse(cells[0], r.value);
    parse(cells[1], r.seed);
    parse(cells[2], r.acc);
    parse(cells[3], r.mcc);
    parse(cells[4], r.f1);
    rows.push_back(r);
  }
  return rows;
}

namespace {

void write_summary_csv(const std::vector<SummaryRow>& summary, const fs::path& path) {
  auto os = open_out(path);
  os << "axis_value,runs,acc_mean,acc_std,mcc_mean,mcc_std,f1_mean,f1_std\n";
  for (const auto& s : summary) {
    os << fmt(s.value) << "," << s.runs << "," << fmt(s.acc_mean) << "," << fmt(s.acc_std) << ","
       << fmt(s.mcc_mean) << "," << fmt(s.mcc_std) << "," << fmt(s.f1_mean) << "," << fmt(s.f1_std) << "\n";
  }
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentSpec& spec) {
  require_complete(spec);
  // Range check every grid point up front.
  std::vector<model::ModelConfig> configs;
  for (double value : spec.sweep.grid) {
    ExperimentSpec point = spec;
    set_axis(point.model, spec.sweep.axis, value);
    validate(point);
    configs.push_back(point.model);
  }
  write_resolved(spec, spec.out / "resolved.cfg");
  const auto raw = load_raw(spec);

  std::vector<SweepRow> rows;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const double value = spec.sweep.grid[i];
    const auto dataset = build_dataset(raw, configs[i], spec.data);
    const std::string group = spec.sweep.axis + "=" + fmt(value);
    for (std::uint64_t seed : spec.seeds) {
      const auto run = train_once(dataset, configs[i], seed, group,
                                  spec.out / (spec.sweep.axis + "_" + fmt(value)) / seed_dir(seed));
      rows.push_back({value, seed, run.test.acc, run.test.mcc, run.test.f1});
    }
  }
  {
    auto os = open_out(spec.out / "sweep.csv");
    os << "axis_value,seed,acc,mcc,f1\n";
    for (const auto& r : rows) {
      os << fmt(r.value) << "," << r.seed << "," << fmt(r.acc) << "," << fmt(r.mcc) << "," << fmt(r.f1) << "\n";
    }
  }
  write_summary_csv(summarize(rows), spec.out / "sweep_summary.csv");
  return rows;
}

std::size_t run_graphgen(const ExperimentSpec& spec) {
  require_complete(spec);
  write_resolved(spec, spec.out / "resolved.cfg");
  const auto raw = load_raw(spec);
  const auto& config = spec.model;
  const auto selected = data::select_indicators(raw, spec.data.indicators);
  const auto splits = data::split_periods(selected, spec.data.ratios, static_cast<std::size_t>(config.lag_window),
                                          static_cast<std::size_t>(config.forecast_steps));
  const auto normalized = data::normalize(selected, splits);
  const auto usable = data::usable_time_indices(selected.days(), static_cast<std::size_t>(config.lag_window),
                                                static_cast<std::size_t>(config.forecast_steps));
  const std::size_t t = spec.graph_time.value_or(usable.back());
  const auto sample = data::build_sample(normalized.panel, t, static_cast<std::size_t>(config.lag_window),
                                         static_cast<std::size_t>(config.forecast_steps),
                                         static_cast<std::size_t>(config.trend_classes));
  Matrix adjacency;
  if (config.graph == model::GraphSource::energy) {
    adjacency = graph::energy_snapshot(t, sample.features, config.scaling, config.lag_window, config.threshold)
                    .adjacency;
  } else {
    adjacency = graph::sector_adjacency(raw.sectors, raw.tickers);
  }
  const std::string stem = "graph_t" + std::to_string(t);
  const auto count = graph::export_edges(adjacency, raw.tickers, spec.out / (stem + ".tsv"));
  if (spec.graph_dense) graph::export_dense_csv(adjacency, raw.tickers, spec.out / (stem + ".csv"));
  log_line("t=" + std::to_string(t) + " (" + normalized.panel.dates[t] + "): " + std::to_string(count) + " edges");
  return count;
}

Report report(const fs::path& dir) {
  if (!fs::is_directory(dir)) throw DataError("report: not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& entry : fs::recursive_directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().filename() == "metrics.json") files.push_back(entry.path());
  }
  if (files.empty()) throw DataError("report: no metrics.json under " + dir.string());
  std::sort(files.begin(), files.end());

  std::vector<std::string> order;
  std::map<std::string, std::vector<RunRecord>> by_group;
  for (const auto& f : files) {
    std::ifstream in(f);
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DataError(f.string() + ": " + e.what());
    }
    auto run = run_from_json(j);
    if (!by_group.count(run.group)) order.push_back(run.group);
    by_group[run.group].push_back(std::move(run));
  }

  Report rep;
  rep.json = {{"std", "population"}, {"groups", nlohmann::json::array()}};
  std::ostringstream text;
  text << std::left << std::setw(16) << "group" << std::setw(6) << "runs" << std::setw(24) << "acc"
       << std::setw(24) << "mcc" << "f1\n";
  for (const auto& name : order) {
    const auto& runs = by_group[name];
    std::vector<double> acc, mcc, f1;
    for (const auto& r : runs) {
      acc.push_back(r.test.acc);
      mcc.push_back(r.test.mcc);
      f1.push_back(r.test.f1);
    }
    ReportGroup g;
    g.group = name;
    g.runs = runs.size();
    auto set = [](const std::vector<double>& xs, double& m, double& s) {
      const auto ms = mean_std(xs);
      m = round6(ms.first);
      s = round6(ms.second);
    };
    set(acc, g.acc_mean, g.acc_std);
    set(mcc, g.mcc_mean, g.mcc_std);
    set(f1, g.f1_mean, g.f1_std);
    auto cell = [](double m, double s) { return fmt(m) + " +/- " + fmt(s); };
    text << std::left << std::setw(16) << g.group << std::setw(6) << g.runs << std::setw(24)
         << cell(g.acc_mean, g.acc_std) << std::setw(24) << cell(g.mcc_mean, g.mcc_std)
         << cell(g.f1_mean, g.f1_std) << "\n";
    rep.json["groups"].push_back({{"group", g.group},
                                  {"runs", g.runs},
                                  {"acc_mean", g.acc_mean},
                                  {"acc_std", g.acc_std},
                                  {"mcc_mean", g.mcc_mean},
                                  {"mcc_std", g.mcc_std},
                                  {"f1_mean", g.f1_mean},
                                  {"f1_std", g.f1_std}});
    rep.groups.push_back(g);
  }
  text << "(test split; mean +/- population std over seeds)\n";
  rep.text = text.str();
  {
    auto os = open_out(dir / "report.txt");
    os << rep.text;
  }
  write_json(dir / "report.json", rep.json);
  return rep;
}

}  // namespace epgat::experiment
