// SPDX-License-Identifier: Apache-2.0
// epgat: train, evaluate, ablate, sweep, export graphs, generate synthetic
// data and summarize runs.

#include "epgat/errors.hpp"
#include "epgat/experiment.hpp"
#include "epgat/experiment_config.hpp"
#include "epgat/synthetic.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>
#include <vector>

namespace {

using epgat::experiment::Override;

struct FlagValues {
  std::string config;
  std::vector<std::pair<const char*, std::string>> values;  // config key, raw text
  std::vector<std::string> sets;

  std::string& slot(const char* key) {
    values.emplace_back(key, std::string());
    return values.back().second;
  }
};

// Flags shared by every subcommand. Storage is reserved up front so option
// bindings stay valid.
void add_common(CLI::App* cmd, FlagValues& f) {
  f.values.reserve(32);
  cmd->add_option("--config", f.config, "key=value config file")->check(CLI::ExistingFile);
  cmd->add_option("--out", f.slot("run.out"), "output directory");
  cmd->add_option("--manifest", f.slot("data.manifest"), "dataset manifest (ticker,path[,sector])");
  cmd->add_option("--seed", f.slot("run.seed"), "single seed");
  cmd->add_option("--seeds", f.slot("run.seeds"), "comma-separated seeds");
  cmd->add_option("--tau", f.slot("model.tau"), "lag window");
  cmd->add_option("--k", f.slot("graph.k"), "Boltzmann scaling factor");
  cmd->add_option("--s", f.slot("graph.s"), "sparsification threshold");
  cmd->add_option("--heads", f.slot("model.heads"), "attention heads");
  cmd->add_option("--layers", f.slot("model.layers"), "parallel attention blocks");
  cmd->add_option("--lr", f.slot("train.lr"), "learning rate");
  cmd->add_option("--wd", f.slot("train.wd"), "weight decay");
  cmd->add_option("--epochs", f.slot("train.epochs"), "training epochs");
  cmd->add_option("--set", f.sets, "any config key as section.key=value (repeatable)");
}

std::vector<Override> collect(const FlagValues& f, const std::string& mode) {
  std::vector<Override> out{{"run.mode", mode}};
  for (const auto& s : f.sets) {
    const auto eq = s.find('=');
    if (eq == std::string::npos) throw epgat::ConfigError("--set expects key=value, got '" + s + "'");
    out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
  }
  for (const auto& [key, value] : f.values) {
    if (!value.empty()) out.emplace_back(key, value);
  }
  return out;
}

int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const epgat::NumericError*>(&e)) return 3;
  if (dynamic_cast<const epgat::DataError*>(&e) || dynamic_cast<const epgat::IoError*>(&e) ||
      dynamic_cast<const epgat::FormatError*>(&e)) {
    return 2;
  }
  return 1;
}

std::string keys_help() {
  std::string s = "Config keys (file sections [run] [data] [graph] [model] [train] [sweep] [synth]):\n";
  for (const auto& [key, doc] : epgat::experiment::documented_keys()) s += "  " + key + ": " + doc + "\n";
  return s;
}

}  // namespace

int main(int argc, char** argv) {
  namespace ex = epgat::experiment;
  CLI::App app{"EP-GAT stock trend experiments"};
  app.footer(keys_help());
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    FlagValues flags;
    CLI::App* cmd = nullptr;
  };
  std::vector<Sub> subs;
  subs.reserve(7);
  subs.push_back({"train", "train every seed and write checkpoints, history and metrics", {}});
  subs.push_back({"eval", "score a checkpoint on the test split", {}});
  subs.push_back({"ablate", "train EP-GAT and the M1-M3 variants with shared seeds", {}});
  subs.push_back({"sweep", "train over a grid of one hyperparameter", {}});
  subs.push_back({"graphgen", "export the stock graph of one time step as TSV", {}});
  subs.push_back({"synth", "write a planted-rule synthetic dataset", {}});
  subs.push_back({"report", "aggregate metrics.json files under a directory", {}});
  for (auto& s : subs) {
    s.cmd = app.add_subcommand(s.name, s.help);
    add_common(s.cmd, s.flags);
  }
  auto& eval_flags = subs[1].flags;
  subs[1].cmd->add_option("--checkpoint", eval_flags.slot("run.checkpoint"), "model.epgt to evaluate");
  auto& sweep_flags = subs[3].flags;
  subs[3].cmd->add_option("--axis", sweep_flags.slot("sweep.axis"), "tau | k | s | h | L");
  subs[3].cmd->add_option("--grid", sweep_flags.slot("sweep.grid"), "comma-separated values");
  auto& graph_flags = subs[4].flags;
  subs[4].cmd->add_option("--t", graph_flags.slot("graph.t"), "calendar index (default last usable)");
  subs[4].cmd->add_option("--source", graph_flags.slot("graph.source"), "energy | sector");
  bool dense = false;
  subs[4].cmd->add_flag("--dense", dense, "also write the dense matrix CSV");
  auto& synth_flags = subs[5].flags;
  subs[5].cmd->add_option("--stocks", synth_flags.slot("synth.stocks"), "stock count");
  subs[5].cmd->add_option("--days", synth_flags.slot("synth.days"), "trading days");
  subs[5].cmd->add_option("--indicators", synth_flags.slot("synth.indicators"), "4 or 5");
  subs[5].cmd->add_option("--rule", synth_flags.slot("synth.rule"), "energy-pair | own-gap");
  subs[5].cmd->add_option("--synth-seed", synth_flags.slot("synth.seed"), "generator seed");
  std::string report_dir;
  subs[6].cmd->add_option("dir", report_dir, "run directory (default: --out)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  ex::set_log_stream(&std::cerr);
  try {
    for (auto& s : subs) {
      if (!s.cmd->parsed()) continue;
      std::optional<std::filesystem::path> config;
      if (!s.flags.config.empty()) config = s.flags.config;
      auto overrides = collect(s.flags, s.name);
      if (dense) overrides.emplace_back("graph.dense", "true");
      const auto spec = ex::parse_spec(config, overrides);
      ex::require_complete(spec);
      switch (*spec.mode) {
        case ex::Mode::train: {
          const auto runs = ex::run_train(spec);
          for (const auto& r : runs) std::cout << ex::to_json(r).dump() << "\n";
          break;
        }
        case ex::Mode::eval: {
          const auto m = ex::run_eval(spec, spec.checkpoint);
          std::cout << epgat::metrics::to_json(m).dump(2) << "\n";
          break;
        }
        case ex::Mode::ablate: {
          ex::run_ablation(spec);
          std::cout << (spec.out / "ablation.txt").string() << "\n";
          break;
        }
        case ex::Mode::sweep: {
          const auto rows = ex::run_sweep(spec);
          std::cout << rows.size() << " rows in " << (spec.out / "sweep.csv").string() << "\n";
          break;
        }
        case ex::Mode::graphgen: {
          const auto edges = ex::run_graphgen(spec);
          std::cout << edges << " edges\n";
          break;
        }
        case ex::Mode::synth: {
          ex::write_resolved(spec, spec.out / "resolved.cfg");
          std::cout << epgat::synth::gen_synthetic(spec.synth, spec.out).string() << "\n";
          break;
        }
        case ex::Mode::report: {
          const auto rep = ex::report(report_dir.empty() ? spec.out : std::filesystem::path(report_dir));
          std::cout << rep.text;
          break;
        }
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return exit_code_for(e);
  }
  return 0;
}
