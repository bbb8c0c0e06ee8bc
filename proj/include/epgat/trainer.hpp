// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/energy_graph.hpp"
#include "epgat/metrics.hpp"
#include "epgat/model.hpp"

#include <functional>
#include <optional>
#include <span>
#include <vector>

namespace epgat::train {

/// One time step: graph input plus its trend labels.
struct Example {
  graph::GraphSnapshot graph;
  LabelMatrix labels;
};

struct EpochRecord {
  int epoch = 0;
  double train_loss = 0.0;
  std::optional<metrics::MetricsRecord> validation;
};

nlohmann::json to_json(const EpochRecord& r);

struct TrainResult {
  model::ModelParams params;  // best validation ACC (final params without validation data)
  std::vector<EpochRecord> history;
  int best_epoch = 0;
  int epochs_run = 0;
  std::size_t optimizer_steps = 0;
};

using EpochObserver = std::function<void(const EpochRecord&)>;
/// Returning true ends training after the current epoch.
using StopRule = std::function<bool(const EpochRecord&)>;

/// Single-example loss and gradients.
struct LossAndGrad {
  double loss = 0.0;
  model::ModelParams grads;
};

LossAndGrad loss_and_grad(const model::ModelParams& params, const Example& example,
                          const model::ModelConfig& config);

/// AdamW over the training time steps in chronological order, one update per
/// time step (all stocks at once). The epoch loss is the mean over those
/// steps. After every epoch the validation split is scored and the
/// parameters with the best validation ACC are retained; ties keep the
/// earlier epoch. Raises NumericError on a non-finite loss or gradient.
TrainResult train(std::span<const Example> train_set, std::span<const Example> validation_set,
                  const model::ModelConfig& config, const EpochObserver& observer = {},
                  const StopRule& stop = {});

/// Micro-pooled metrics: one confusion matrix over every stock, step and
/// example.
metrics::MetricsRecord evaluate(const model::ModelParams& params, const model::ModelConfig& config,
                                std::span<const Example> examples);

}  // namespace epgat::train
