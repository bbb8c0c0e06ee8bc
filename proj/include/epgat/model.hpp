// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/autodiff.hpp"
#include "epgat/energy_graph.hpp"
#include "epgat/gnn_blocks.hpp"
#include "epgat/linalg.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace epgat::model {

enum class GraphSource : std::uint8_t { energy = 0, sector = 1 };

struct ModelConfig {
  int lag_window = 20;        // tau; also the graph temperature
  double scaling = 0.5;       // k
  double threshold = 0.55;    // s
  int indicators = 4;         // F
  int forecast_steps = 1;     // phi
  int trend_classes = 2;      // alpha
  int hidden = 16;            // d
  int heads = 4;              // h
  int blocks = 2;             // L
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  int epochs = 800;
  std::uint64_t seed = 0;
  bool parallel_attention = true;
  GraphSource graph = GraphSource::energy;
  double grad_clip = 0.0;  // global-norm clip; 0 disables

  Index input_width() const { return static_cast<Index>(lag_window) * indicators; }
  Index output_width() const { return static_cast<Index>(forecast_steps) * trend_classes; }

  /// Structural checks (positivity, divisibility). Search-space ranges are
  /// enforced by the experiment layer.
  void validate() const;
};

template <class T>
struct ModelT {
  T w_in;          // (lag * F) x d
  T input_slopes;  // 1 x d
  std::vector<gnn::BlockT<T>> blocks;
  T w_out;         // d x (phi * alpha)
};

using ModelParams = ModelT<Matrix>;
using ModelVars = ModelT<ad::Value>;

template <class F, class L, class... R>
void visit_model(F&& f, L& lead, R&... rest) {
  f(std::string("w_in"), lead.w_in, rest.w_in...);
  f(std::string("input_slopes"), lead.input_slopes, rest.input_slopes...);
  (gnn::detail::sync_size(lead.blocks, rest.blocks), ...);
  for (std::size_t i = 0; i < lead.blocks.size(); ++i) {
    gnn::visit_tensors("blocks." + std::to_string(i) + ".", f, lead.blocks[i], rest.blocks[i]...);
  }
  f(std::string("w_out"), lead.w_out, rest.w_out...);
}

/// Seeded initialization. The input projection, each block and the output
/// projection draw from separate streams, so variants that differ only in
/// parallel attention share all common initial values.
ModelParams init_model(const ModelConfig& config);

std::size_t parameter_count(const ModelParams& params);

ModelVars bind(ad::Tape& tape, const ModelParams& params);

/// Logits (stocks x phi*alpha) recorded on the tape:
/// H_0 = H'_0 = PReLU(X W_in), L blocks, logits = H'_L W_out.
ad::Value forward(const ModelVars& vars, const graph::GraphSnapshot& sample, const ModelConfig& config);

/// Tape-free convenience wrapper.
Matrix forward(const ModelParams& params, const graph::GraphSnapshot& sample,
               const ModelConfig& config);

/// Mean cross entropy over stocks and forecast steps.
ad::Value loss(const ad::Value& logits, const LabelMatrix& labels, const ModelConfig& config);

struct Prediction {
  LabelMatrix classes;   // stocks x phi
  Matrix probabilities;  // stocks x phi*alpha
};

/// Argmax per class block; ties resolve to the lower class (down).
Prediction predict(const Matrix& logits, int trend_classes);
Prediction predict(const ModelParams& params, const graph::GraphSnapshot& sample,
                   const ModelConfig& config);

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Binary checkpoint: "EPGT", u32 version, config block, u32 tensor count,
/// then every tensor as u32 rows, u32 cols and row-major f64 values. All
/// integers and doubles little-endian.
std::vector<unsigned char> encode_checkpoint(const ModelParams& params, const ModelConfig& config);

struct Checkpoint {
  ModelParams params;
  ModelConfig config;
};

Checkpoint decode_checkpoint(const std::vector<unsigned char>& bytes);

void save_model(const ModelParams& params, const ModelConfig& config,
                const std::filesystem::path& path);
Checkpoint load_model(const std::filesystem::path& path);

}  // namespace epgat::model
