// SPDX-License-Identifier: Apache-2.0
#include "epgat/synthetic.hpp"

#include "epgat/errors.hpp"
#include "epgat/linalg.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <numeric>

namespace epgat::synth {

namespace {

// Latent units: the level schedule has unit variance over the training days.
constexpr double kPriceScale = 5.0;  // price units per latent unit
constexpr double kGapStd = 0.15;
constexpr double kMicroStep = 0.02;
constexpr std::size_t kSyncTail = 6;  // days a leaving pair stays linked so mates land together

// Values are rounded to what the CSV stores so the rule computed from the
// files is bit-identical to the rule used while generating.
double round4(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 4);
  double out = 0.0;
  std::from_chars(buf, res.ptr, out);
  return out;
}

std::string fmt4(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x, std::chars_format::fixed, 4);
  return std::string(buf, res.ptr);
}

long long floor_div(long long a, long long b) {
  const long long q = a / b;
  return (a % b != 0 && (a < 0) != (b < 0)) ? q - 1 : q;
}

struct Schedule {
  std::size_t pairs = 0;
  std::size_t active = 0;      // ranks
  std::size_t block = 1;       // days per rotation step
  long long origin = 0;        // first usable day
  std::vector<double> levels;  // per slot; mean 0 and variance 1 over a rotation

  std::size_t crowd() const { return pairs - active; }
  long long offset(std::size_t t) const { return static_cast<long long>(t) - origin; }
  // Slot of pair p on day t: [0, crowd) crowd, then ranks 1..active.
  std::size_t slot(std::size_t p, std::size_t t) const {
    const long long b = floor_div(offset(t), static_cast<long long>(block));
    const long long P = static_cast<long long>(pairs);
    return static_cast<std::size_t>(((static_cast<long long>(p) + b) % P + P) % P);
  }
  bool is_linked(std::size_t p, std::size_t t) const {
    const std::size_t s = slot(p, t);
    if (s >= crowd()) return true;
    const long long into = offset(t) - floor_div(offset(t), static_cast<long long>(block)) *
                                           static_cast<long long>(block);
    return s == 0 && active > 0 && into < static_cast<long long>(kSyncTail);
  }
  double level(std::size_t p, std::size_t t) const { return levels[slot(p, t)]; }
};

std::vector<double> standardized(std::vector<double> v) {
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  var /= static_cast<double>(v.size());
  const double sd = var > 0.0 ? std::sqrt(var) : 1.0;
  for (double& x : v) x = (x - mean) / sd;
  return v;
}

// Smallest gap between distinct squared levels (the crowd counts once).
double min_square_gap(const std::vector<double>& levels, std::size_t crowd) {
  std::vector<double> sq;
  for (std::size_t i = (crowd > 0 ? crowd - 1 : 0); i < levels.size(); ++i) sq.push_back(levels[i] * levels[i]);
  std::sort(sq.begin(), sq.end());
  double gap = std::numeric_limits<double>::infinity();
  for (std::size_t i = 1; i < sq.size(); ++i) gap = std::min(gap, sq[i] - sq[i - 1]);
  return gap;
}

// Crowd slots at 0 and rank k at +-sqrt(k), standardized over the rotation.
// Signs maximize the smallest separation of the standardized squares
// (exhaustive up to 12 ranks, alternating beyond).
std::vector<double> slot_levels(std::size_t pairs, std::size_t active) {
  auto build = [&](std::uint64_t signs) {
    std::vector<double> raw(pairs, 0.0);
    for (std::size_t k = 1; k <= active; ++k) {
      const double mag = std::sqrt(static_cast<double>(k));
      raw[pairs - active + k - 1] = ((signs >> (k - 1)) & 1U) != 0 ? -mag : mag;
    }
    return standardized(std::move(raw));
  };
  if (active > 12) {
    std::uint64_t alternating = 0;
    for (std::size_t k = 2; k <= std::min<std::size_t>(active, 64); k += 2) alternating |= 1ULL << (k - 1);
    return build(alternating);
  }
  std::vector<double> best = build(0);
  double best_gap = min_square_gap(best, pairs - active);
  for (std::uint64_t signs = 1; signs < (1ULL << active); ++signs) {
    auto cand = build(signs);
    const double gap = min_square_gap(cand, pairs - active);
    if (gap > best_gap + 1e-12) {
      best = std::move(cand);
      best_gap = gap;
    }
  }
  return best;
}

// One rotation of the schedule spans the training days of the default split.
Schedule make_schedule(const SyntheticSpec& spec) {
  Schedule sch;
  sch.pairs = spec.stocks / 2;
  sch.active = (sch.pairs + 1) / 2;
  sch.origin = static_cast<long long>(spec.rule_window) - 1;
  sch.levels = slot_levels(sch.pairs, sch.active);
  std::vector<std::size_t> usable(spec.days - spec.rule_window);
  std::iota(usable.begin(), usable.end(), spec.rule_window - 1);
  std::size_t train_days = usable.size();
  try {
    train_days = data::split_periods(usable, data::SplitRatios{}).train.size();
  } catch (const Error&) {
    // Too short for the default split; rotate over all usable days.
  }
  sch.block = std::max<std::size_t>(1, train_days / sch.pairs);
  return sch;
}

struct Pairing {
  std::vector<std::size_t> mate;
  std::vector<std::size_t> pair_of;  // kNoMate for the single stock
};

Pairing make_pairing(const SyntheticSpec& spec, Rng& rng) {
  std::vector<std::size_t> order(spec.stocks);
  std::iota(order.begin(), order.end(), 0);
  std::shuffle(order.begin(), order.end(), rng);
  Pairing out{std::vector<std::size_t>(spec.stocks, kNoMate), std::vector<std::size_t>(spec.stocks, kNoMate)};
  for (std::size_t p = 0; p + 1 < order.size(); p += 2) {
    out.mate[order[p]] = order[p + 1];
    out.mate[order[p + 1]] = order[p];
    out.pair_of[order[p]] = out.pair_of[order[p + 1]] = p / 2;
  }
  return out;
}

bool linking_rule(const SyntheticSpec& spec) { return spec.rule == "energy-pair"; }

std::vector<std::vector<bool>> links(const SyntheticSpec& spec, const Pairing& pairing, const Schedule& sch) {
  std::vector<std::vector<bool>> out(spec.stocks, std::vector<bool>(spec.days, false));
  if (!linking_rule(spec)) return out;
  for (std::size_t s = 0; s < spec.stocks; ++s) {
    if (pairing.pair_of[s] == kNoMate) continue;
    for (std::size_t t = 0; t < spec.days; ++t) out[s][t] = sch.is_linked(pairing.pair_of[s], t);
  }
  return out;
}

}  // namespace

void validate(const SyntheticSpec& spec) {
  if (spec.stocks < 2) throw ConfigError("synthetic data needs at least 2 stocks");
  if (spec.rule_window < 1) throw ConfigError("rule window must be positive");
  if (spec.days < spec.rule_window + 1 + 10) {
    throw ConfigError("synthetic days must be at least rule_window + 11 (" +
                      std::to_string(spec.rule_window + 11) + ")");
  }
  if (spec.indicators < 4 || spec.indicators > 5) throw ConfigError("synthetic indicators must be 4 or 5");
  if (spec.rule != "energy-pair" && spec.rule != "own-gap") {
    throw ConfigError("unknown synthetic rule '" + spec.rule + "' (energy-pair, own-gap)");
  }
  if (spec.sectors < 1) throw ConfigError("sector count must be positive");
}

std::vector<std::size_t> mates(const SyntheticSpec& spec) {
  validate(spec);
  auto rng = make_rng(spec.seed, 0x5eed);
  return make_pairing(spec, rng).mate;
}

std::vector<std::vector<bool>> link_schedule(const SyntheticSpec& spec) {
  validate(spec);
  auto rng = make_rng(spec.seed, 0x5eed);
  const auto pairing = make_pairing(spec, rng);
  return links(spec, pairing, make_schedule(spec));
}

std::filesystem::path gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir) {
  validate(spec);
  std::filesystem::create_directories(dir);
  auto rng = make_rng(spec.seed, 0x5eed);
  const auto pairing = make_pairing(spec, rng);
  const auto sch = make_schedule(spec);
  const auto linked = links(spec, pairing, sch);
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_real_distribution<double> unit(0.0, 1.0);

  const std::size_t n = spec.stocks;
  const std::size_t days = spec.days;
  auto target = [&](std::size_t s, std::size_t t) {
    return pairing.pair_of[s] == kNoMate || sch.pairs == 0 ? 0.0 : sch.level(pairing.pair_of[s], t);
  };
  std::vector<double> base(n);
  for (auto& b : base) b = 60.0 + 80.0 * unit(rng);

  std::vector<double> latent(n);
  std::vector<std::vector<double>> close(n, std::vector<double>(days));
  std::vector<std::vector<double>> open(n, std::vector<double>(days));
  std::vector<std::vector<double>> high(n, std::vector<double>(days));
  std::vector<std::vector<double>> low(n, std::vector<double>(days));
  std::vector<std::vector<double>> volume(n, std::vector<double>(days));
  for (std::size_t s = 0; s < n; ++s) {
    latent[s] = target(s, 0);
    close[s][0] = round4(base[s] + kPriceScale * latent[s]);
  }

  std::vector<double> gap(n);
  std::vector<double> shared_volume(sch.pairs);
  for (std::size_t t = 0; t < days; ++t) {
    for (std::size_t s = 0; s < n; ++s) {
      const double c = close[s][t];
      const double o = round4(c + kPriceScale * kGapStd * normal(rng));
      open[s][t] = o;
      gap[s] = o - c;
      // The gap enters open, high and low with weights +1, +1, -2 (or +1, -2, +1).
      if (gap[s] >= 0.0) {
        high[s][t] = o;
        low[s][t] = round4(c - 2.0 * gap[s]);
      } else {
        low[s][t] = o;
        high[s][t] = round4(c - 2.0 * gap[s]);
      }
    }
    for (auto& v : shared_volume) v = std::round(1e6 * std::exp(0.25 * normal(rng)));
    for (std::size_t s = 0; s < n; ++s) {
      volume[s][t] = pairing.pair_of[s] == kNoMate ? std::round(1e6 * std::exp(0.25 * normal(rng)))
                                                    : shared_volume[pairing.pair_of[s]];
    }
    if (t + 1 == days) break;
    for (std::size_t s = 0; s < n; ++s) {
      const double score = linked[s][t] ? gap[s] + gap[pairing.mate[s]] : gap[s];
      const double dir = score > 0.0 ? 1.0 : -1.0;
      // Moves toward the scheduled level land on it; moves away are small.
      latent[s] += dir * (kMicroStep + std::max(0.0, dir * (target(s, t + 1) - latent[s])));
      close[s][t + 1] = round4(base[s] + kPriceScale * latent[s]);
    }
  }

  const auto manifest = dir / "manifest.csv";
  std::ofstream man(manifest);
  if (!man) throw IoError("cannot write " + manifest.string());
  man << "# synthetic dataset: stocks=" << n << " days=" << days << " seed=" << spec.seed
      << " rule=" << spec.rule << " rule_window=" << spec.rule_window << " indicators=" << spec.indicators
      << "\n"
      << "# gap(t) = open(t) - adj_close(t). Mates share a latent level schedule; while a pair is\n"
      << "# at an active rank (separated window energy) both move with sign(gap_i + gap_j), otherwise\n"
      << "# each stock moves with sign(gap_i). adj_close(t+1) > adj_close(t) iff the score is > 0.\n"
      << "# pairs:";
  for (std::size_t s = 0; s < n; ++s) {
    if (pairing.mate[s] != kNoMate && s < pairing.mate[s]) man << ' ' << s << '-' << pairing.mate[s];
  }
  man << "\nticker,path,sector\n";
  for (std::size_t s = 0; s < n; ++s) {
    char name[32];
    std::snprintf(name, sizeof name, "SYN%03zu", s);
    const std::string file = std::string(name) + ".csv";
    man << name << ',' << file << ",SECTOR" << (s % spec.sectors) << '\n';
    std::ofstream os(dir / file);
    if (!os) throw IoError("cannot write " + (dir / file).string());
    os << "date,open,high,low,adj_close,volume\n";
    for (std::size_t t = 0; t < days; ++t) {
      // 28-day months, 336-day years from 2000-01-01.
      const int ordinal = static_cast<int>(t);
      const int year = 2000 + ordinal / 336;
      const int month = 1 + (ordinal % 336) / 28;
      const int day = 1 + ordinal % 28;
      char date[32];
      std::snprintf(date, sizeof date, "%04d-%02d-%02d", year, month, day);
      os << date << ',' << fmt4(open[s][t]) << ',' << fmt4(high[s][t]) << ',' << fmt4(low[s][t])
         << ',' << fmt4(close[s][t]) << ',' << static_cast<long long>(volume[s][t]) << '\n';
    }
  }
  return manifest;
}

std::vector<std::vector<double>> rule_scores(const data::IndicatorPanel& raw, const SyntheticSpec& spec) {
  validate(spec);
  if (raw.stocks() != spec.stocks || raw.days() != spec.days) {
    throw ShapeError("panel is " + std::to_string(raw.stocks()) + "x" + std::to_string(raw.days()) +
                     ", spec expects " + std::to_string(spec.stocks) + "x" + std::to_string(spec.days));
  }
  const auto open_it = std::find(raw.channels.begin(), raw.channels.end(), "open");
  if (open_it == raw.channels.end()) throw ConfigError("rule_scores needs the open channel");
  const auto open_c = static_cast<std::size_t>(open_it - raw.channels.begin());
  const auto mate = mates(spec);
  const auto linked = link_schedule(spec);
  const std::size_t n = raw.stocks();
  auto gap = [&](std::size_t s, std::size_t t) {
    return raw.at(s, t, open_c) - raw.adj_close(static_cast<Index>(s), static_cast<Index>(t));
  };
  std::vector<std::vector<double>> out(n, std::vector<double>(raw.days()));
  for (std::size_t s = 0; s < n; ++s) {
    for (std::size_t t = 0; t < raw.days(); ++t) {
      out[s][t] = linked[s][t] ? gap(s, t) + gap(mate[s], t) : gap(s, t);
    }
  }
  return out;
}

}  // namespace epgat::synth
