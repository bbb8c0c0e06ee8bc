// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/market_data.hpp"

#include <cstdint>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

namespace epgat::synth {

/// Planted rules understood by the generator.
///
/// `energy-pair`: stocks are matched into fixed pairs (seeded; an odd stock
/// out stays single). Each pair follows a shared latent level schedule that
/// rotates through "crowd" slots (level 0) and active ranks whose levels have
/// evenly spaced squares, so over a `rule_window` the active pairs sit at
/// well separated window energies and each active stock's nearest-energy
/// neighbor is its mate. With gap_i(t) = open_i(t) - adj_close_i(t):
///
///   active pair (i, j):  r_i(t) = r_j(t) = gap_i(t) + gap_j(t)
///   otherwise:           r_i(t) = gap_i(t)
///
/// and adj_close rises on day t+1 iff r_i(t) > 0. `own-gap` never links
/// mates. open/high/low are placed so that the gap enters the four price
/// channels with weights summing to zero.
struct SyntheticSpec {
  std::size_t stocks = 20;
  std::size_t days = 600;
  std::size_t indicators = 4;  // 4 (OHLC) or 5 (with volume); volume is shared by mates
  std::uint64_t seed = 0;
  std::string rule = "energy-pair";
  std::size_t rule_window = 14;
  std::size_t sectors = 4;
};

void validate(const SyntheticSpec& spec);

inline constexpr std::size_t kNoMate = std::numeric_limits<std::size_t>::max();

/// Mate of every stock (kNoMate for the odd one out).
std::vector<std::size_t> mates(const SyntheticSpec& spec);

/// linked[s][t]: stock s is in an active pair on day t under the rule.
std::vector<std::vector<bool>> link_schedule(const SyntheticSpec& spec);

/// Writes one CSV per stock plus `manifest.csv` (with sectors and a comment
/// header documenting the rule) into `dir`. Returns the manifest path.
std::filesystem::path gen_synthetic(const SyntheticSpec& spec, const std::filesystem::path& dir);

/// Planted-rule score r_i(t) for every stock and day, recomputed from the
/// raw panel (which must keep the open channel) and the spec.
std::vector<std::vector<double>> rule_scores(const data::IndicatorPanel& raw, const SyntheticSpec& spec);

}  // namespace epgat::synth
