// SPDX-License-Identifier: Apache-2.0
#include "epgat/experiment_config.hpp"

#include "epgat/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cctype>
#include <fstream>
#include <sstream>

namespace epgat::experiment {

namespace {

std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, sep)) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

long long to_int(const std::string& key, const std::string& v) {
  long long out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected an integer, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_u64(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

std::size_t to_size(const std::string& key, const std::string& v) {
  return static_cast<std::size_t>(to_u64(key, v));
}

int to_int32(const std::string& key, const std::string& v) {
  const auto x = to_int(key, v);
  if (x < -2147483647LL || x > 2147483647LL) throw ConfigError("key '" + key + "': out of range");
  return static_cast<int>(x);
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "on" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "off" || v == "no") return false;
  throw ConfigError("key '" + key + "': expected a boolean, got '" + v + "'");
}

std::string fmt(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

template <class T>
void check_range(const std::string& key, T value, T lo, T hi) {
  if (value < lo || value > hi) {
    std::ostringstream os;
    os << key << "=" << value << " is outside the permitted range [" << lo << ", " << hi << "]";
    throw ConfigError(os.str());
  }
}

}  // namespace

std::string to_string(Mode mode) {
  switch (mode) {
    case Mode::train: return "train";
    case Mode::eval: return "eval";
    case Mode::ablate: return "ablate";
    case Mode::sweep: return "sweep";
    case Mode::graphgen: return "graphgen";
    case Mode::synth: return "synth";
    case Mode::report: return "report";
  }
  return "train";
}

Mode parse_mode(const std::string& text) {
  for (Mode m : {Mode::train, Mode::eval, Mode::ablate, Mode::sweep, Mode::graphgen, Mode::synth,
                 Mode::report}) {
    if (to_string(m) == text) return m;
  }
  throw ConfigError("unknown mode '" + text + "'");
}

void apply_setting(ExperimentSpec& spec, const std::string& raw_key, const std::string& raw_value) {
  const std::string key = trim(raw_key);
  const std::string v = trim(raw_value);
  auto& m = spec.model;
  if (key == "run.mode") {
    spec.mode = parse_mode(v);
  } else if (key == "run.out") {
    spec.out = v;
  } else if (key == "run.checkpoint") {
    spec.checkpoint = v;
  } else if (key == "run.seeds") {
    spec.seeds.clear();
    for (const auto& s : split(v, ',')) spec.seeds.push_back(to_u64(key, s));
  } else if (key == "run.seed") {
    spec.seeds = {to_u64(key, v)};
  } else if (key == "run.allow_out_of_range") {
    spec.allow_out_of_range = to_bool(key, v);
  } else if (key == "data.manifest") {
    spec.manifest = v;
  } else if (key == "data.indicators") {
    spec.data.indicators = split(v, ',');
    m.indicators = static_cast<int>(spec.data.indicators.size());
  } else if (key == "data.split") {
    const auto parts = split(v, ':');
    if (parts.size() != 3) throw ConfigError("key 'data.split': expected train:validation:test");
    spec.data.ratios = {to_size(key, parts[0]), to_size(key, parts[1]), to_size(key, parts[2])};
  } else if (key == "graph.k") {
    m.scaling = to_double(key, v);
  } else if (key == "graph.s") {
    m.threshold = to_double(key, v);
  } else if (key == "graph.source") {
    if (v == "energy") {
      m.graph = model::GraphSource::energy;
    } else if (v == "sector") {
      m.graph = model::GraphSource::sector;
    } else {
      throw ConfigError("key 'graph.source': expected energy or sector, got '" + v + "'");
    }
  } else if (key == "graph.t") {
    spec.graph_time = to_size(key, v);
  } else if (key == "graph.dense") {
    spec.graph_dense = to_bool(key, v);
  } else if (key == "model.tau") {
    m.lag_window = to_int32(key, v);
  } else if (key == "model.hidden") {
    m.hidden = to_int32(key, v);
  } else if (key == "model.heads") {
    m.heads = to_int32(key, v);
  } else if (key == "model.layers") {
    m.blocks = to_int32(key, v);
  } else if (key == "model.parallel") {
    m.parallel_attention = to_bool(key, v);
  } else if (key == "model.forecast_steps") {
    m.forecast_steps = to_int32(key, v);
  } else if (key == "model.trends") {
    m.trend_classes = to_int32(key, v);
  } else if (key == "train.lr") {
    m.learning_rate = to_double(key, v);
  } else if (key == "train.wd") {
    m.weight_decay = to_double(key, v);
  } else if (key == "train.epochs") {
    m.epochs = to_int32(key, v);
  } else if (key == "train.grad_clip") {
    m.grad_clip = to_double(key, v);
  } else if (key == "sweep.axis") {
    if (v != "tau" && v != "k" && v != "s" && v != "h" && v != "L") {
      throw ConfigError("key 'sweep.axis': expected one of tau, k, s, h, L, got '" + v + "'");
    }
    spec.sweep.axis = v;
  } else if (key == "sweep.grid") {
    spec.sweep.grid.clear();
    for (const auto& g : split(v, ',')) spec.sweep.grid.push_back(to_double(key, g));
  } else if (key == "synth.stocks") {
    spec.synth.stocks = to_size(key, v);
  } else if (key == "synth.days") {
    spec.synth.days = to_size(key, v);
  } else if (key == "synth.indicators") {
    spec.synth.indicators = to_size(key, v);
  } else if (key == "synth.seed") {
    spec.synth.seed = to_u64(key, v);
  } else if (key == "synth.rule") {
    spec.synth.rule = v;
  } else if (key == "synth.window") {
    spec.synth.rule_window = to_size(key, v);
  } else if (key == "synth.sectors") {
    spec.synth.sectors = to_size(key, v);
  } else {
    throw ConfigError("unknown key '" + key + "'");
  }
}

void apply_config_text(ExperimentSpec& spec, const std::string& text, const std::string& origin) {
  std::istringstream in(text);
  std::string line;
  std::string section;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    // A comment marker preceded by whitespace ends the line.
    for (std::size_t i = 1; i < line.size(); ++i) {
      if ((line[i] == '#' || line[i] == ';') && std::isspace(static_cast<unsigned char>(line[i - 1]))) {
        line.erase(i);
        break;
      }
    }
    const auto t = trim(line);
    if (t.empty() || t.front() == '#' || t.front() == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']') throw ConfigError(origin + ":" + std::to_string(line_no) + ": bad section");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected key = value");
    }
    std::string key = trim(t.substr(0, eq));
    if (key.find('.') == std::string::npos && !section.empty()) key = section + "." + key;
    try {
      apply_setting(spec, key, t.substr(eq + 1));
    } catch (const ConfigError& e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

ExperimentSpec parse_spec(const std::optional<std::filesystem::path>& config_file,
                          const std::vector<Override>& overrides) {
  ExperimentSpec spec;
  if (config_file) {
    std::ifstream in(*config_file);
    if (!in) throw ConfigError("cannot read config file " + config_file->string());
    std::stringstream buf;
    buf << in.rdbuf();
    apply_config_text(spec, buf.str(), config_file->string());
  }
  for (const auto& [key, value] : overrides) apply_setting(spec, key, value);
  validate(spec);
  return spec;
}

void validate(const ExperimentSpec& spec) {
  const auto& m = spec.model;
  if (!spec.allow_out_of_range) {
    check_range("tau", m.lag_window, 7, 27);
    check_range("k", m.scaling, 0.02, 2.0);
    check_range("s", m.threshold, 0.25, 0.85);
    check_range("heads", m.heads, 2, 30);
    check_range("layers", m.blocks, 2, 6);
    check_range("lr", m.learning_rate, 1e-4, 2e-3);
    check_range("wd", m.weight_decay, 1e-4, 1e-3);
  }
  if (static_cast<std::size_t>(m.indicators) != spec.data.indicators.size()) {
    throw ConfigError("indicator count does not match data.indicators");
  }
  m.validate();
}

void require_complete(const ExperimentSpec& spec) {
  if (!spec.mode) throw ConfigError("no mode given (train, eval, ablate, sweep, graphgen, synth, report)");
  const Mode mode = *spec.mode;
  const bool needs_data = mode == Mode::train || mode == Mode::eval || mode == Mode::ablate ||
                          mode == Mode::sweep || mode == Mode::graphgen;
  if (needs_data && spec.manifest.empty()) throw ConfigError("data.manifest is required");
  if ((mode == Mode::train || mode == Mode::ablate || mode == Mode::sweep) && spec.seeds.empty()) {
    throw ConfigError("seed list must not be empty");
  }
  if (mode == Mode::sweep && spec.sweep.grid.empty()) throw ConfigError("sweep grid is empty");
  if (mode == Mode::eval && spec.checkpoint.empty()) throw ConfigError("run.checkpoint is required");
}

std::string resolved_text(const ExperimentSpec& spec) {
  const auto& m = spec.model;
  std::ostringstream os;
  auto join_seeds = [&] {
    std::string s;
    for (std::size_t i = 0; i < spec.seeds.size(); ++i) {
      if (i) s += ",";
      s += std::to_string(spec.seeds[i]);
    }
    return s;
  };
  os << "[run]\n";
  if (spec.mode) os << "mode = " << to_string(*spec.mode) << "\n";
  os << "out = " << spec.out.string() << "\n";
  if (!spec.checkpoint.empty()) os << "checkpoint = " << spec.checkpoint.string() << "\n";
  os << "seeds = " << join_seeds() << "\n";
  os << "allow_out_of_range = " << (spec.allow_out_of_range ? "true" : "false") << "\n";
  os << "\n[data]\n";
  if (!spec.manifest.empty()) os << "manifest = " << spec.manifest.string() << "\n";
  os << "indicators = ";
  for (std::size_t i = 0; i < spec.data.indicators.size(); ++i) {
    os << (i ? "," : "") << spec.data.indicators[i];
  }
  os << "\nsplit = " << spec.data.ratios.train << ":" << spec.data.ratios.validation << ":"
     << spec.data.ratios.test << "\n";
  os << "\n[graph]\n";
  os << "k = " << fmt(m.scaling) << "\n";
  os << "s = " << fmt(m.threshold) << "\n";
  os << "source = " << (m.graph == model::GraphSource::energy ? "energy" : "sector") << "\n";
  if (spec.graph_time) os << "t = " << *spec.graph_time << "\n";
  os << "dense = " << (spec.graph_dense ? "true" : "false") << "\n";
  os << "\n[model]\n";
  os << "tau = " << m.lag_window << "\n";
  os << "hidden = " << m.hidden << "\n";
  os << "heads = " << m.heads << "\n";
  os << "layers = " << m.blocks << "\n";
  os << "parallel = " << (m.parallel_attention ? "true" : "false") << "\n";
  os << "forecast_steps = " << m.forecast_steps << "\n";
  os << "trends = " << m.trend_classes << "\n";
  os << "\n[train]\n";
  os << "lr = " << fmt(m.learning_rate) << "\n";
  os << "wd = " << fmt(m.weight_decay) << "\n";
  os << "epochs = " << m.epochs << "\n";
  os << "grad_clip = " << fmt(m.grad_clip) << "\n";
  os << "\n[sweep]\n";
  os << "axis = " << spec.sweep.axis << "\n";
  if (!spec.sweep.grid.empty()) {
    os << "grid = ";
    for (std::size_t i = 0; i < spec.sweep.grid.size(); ++i) os << (i ? "," : "") << fmt(spec.sweep.grid[i]);
    os << "\n";
  }
  os << "\n[synth]\n";
  os << "stocks = " << spec.synth.stocks << "\n";
  os << "days = " << spec.synth.days << "\n";
  os << "indicators = " << spec.synth.indicators << "\n";
  os << "seed = " << spec.synth.seed << "\n";
  os << "rule = " << spec.synth.rule << "\n";
  os << "window = " << spec.synth.rule_window << "\n";
  os << "sectors = " << spec.synth.sectors << "\n";
  return os.str();
}

void write_resolved(const ExperimentSpec& spec, const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream os(path);
  if (!os) throw IoError("cannot write " + path.string());
  os << "# fully resolved experiment; feed back with --config to reproduce\n" << resolved_text(spec);
}

std::vector<std::pair<std::string, std::string>> documented_keys() {
  return {
      {"run.mode", "train | eval | ablate | sweep | graphgen | synth | report"},
      {"run.out", "output directory (default runs)"},
      {"run.checkpoint", "model file for eval"},
      {"run.seeds", "comma-separated seed list (default 0)"},
      {"run.seed", "single seed; replaces the list"},
      {"run.allow_out_of_range", "skip hyperparameter range checks (default false)"},
      {"data.manifest", "manifest CSV: ticker,path[,sector]"},
      {"data.indicators", "comma list from open,high,low,adj_close,volume (default open,high,low,adj_close)"},
      {"data.split", "train:validation:test ratios (default 457:63:261)"},
      {"graph.k", "Boltzmann scaling factor, [0.02, 2] (default 0.5)"},
      {"graph.s", "sparsification threshold, [0.25, 0.85] (default 0.55)"},
      {"graph.source", "energy | sector (default energy)"},
      {"graph.t", "graphgen: calendar index to export (default last usable)"},
      {"graph.dense", "graphgen: also write the dense CSV (default false)"},
      {"model.tau", "lag window and temperature, [7, 27] (default 20)"},
      {"model.hidden", "hidden width d (default 16)"},
      {"model.heads", "attention heads, [2, 30], must divide 2*hidden (default 4)"},
      {"model.layers", "parallel attention blocks, [2, 6] (default 2)"},
      {"model.parallel", "parallel attention on/off (default true)"},
      {"model.forecast_steps", "forecast steps (default 1)"},
      {"model.trends", "trend classes; only 2 is supported"},
      {"train.lr", "AdamW learning rate, [1e-4, 2e-3] (default 1e-3)"},
      {"train.wd", "AdamW weight decay, [1e-4, 1e-3] (default 1e-4)"},
      {"train.epochs", "epochs (default 800)"},
      {"train.grad_clip", "global gradient-norm clip, 0 = off (default 0)"},
      {"sweep.axis", "tau | k | s | h | L (default tau)"},
      {"sweep.grid", "comma-separated values"},
      {"synth.stocks", "synthetic stock count (default 20)"},
      {"synth.days", "synthetic trading days (default 600)"},
      {"synth.indicators", "indicator count the data is meant for, 4 or 5 (default 4)"},
      {"synth.seed", "generator seed (default 0)"},
      {"synth.rule", "energy-pair | own-gap (default energy-pair)"},
      {"synth.window", "window the level schedule is designed for (default 14)"},
      {"synth.sectors", "sector count written to the manifest (default 4)"},
  };
}

}  // namespace epgat::experiment
