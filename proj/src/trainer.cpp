// SPDX-License-Identifier: Apache-2.0
#include "epgat/trainer.hpp"

#include "epgat/errors.hpp"
#include "epgat/optimizer.hpp"

#include <cmath>

namespace epgat::train {

nlohmann::json to_json(const EpochRecord& r) {
  nlohmann::json j = {{"epoch", r.epoch}, {"train_loss", r.train_loss}};
  if (r.validation) {
    j["val_acc"] = r.validation->acc;
    j["val_mcc"] = r.validation->mcc;
    j["val_f1"] = r.validation->f1;
  } else {
    j["val_acc"] = nullptr;
    j["val_mcc"] = nullptr;
    j["val_f1"] = nullptr;
  }
  return j;
}

LossAndGrad loss_and_grad(const model::ModelParams& params, const Example& example,
                          const model::ModelConfig& config) {
  ad::Tape tape;
  const auto vars = model::bind(tape, params);
  const ad::Value logits = model::forward(vars, example.graph, config);
  const ad::Value objective = model::loss(logits, example.labels, config);
  tape.backward(objective);
  LossAndGrad out;
  out.loss = objective.data()(0, 0);
  model::visit_model([](const std::string&, const ad::Value& v, Matrix& g) { g = v.grad(); }, vars,
                     out.grads);
  return out;
}

namespace {

void clip_global_norm(model::ModelParams& grads, double max_norm) {
  double sq = 0.0;
  model::visit_model([&](const std::string&, const Matrix& g) { sq += g.squaredNorm(); }, grads);
  const double norm = std::sqrt(sq);
  if (norm <= max_norm || norm == 0.0) return;
  const double factor = max_norm / norm;
  model::visit_model([&](const std::string&, Matrix& g) { g *= factor; }, grads);
}

}  // namespace

TrainResult train(std::span<const Example> train_set, std::span<const Example> validation_set,
                  const model::ModelConfig& config, const EpochObserver& observer,
                  const StopRule& stop) {
  if (train_set.empty()) throw InsufficientDataError("training needs at least one sample");
  config.validate();
  TrainResult result;
  model::ModelParams params = model::init_model(config);
  auto state = optim::make_state(params);
  std::optional<double> best_acc;
  result.params = params;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    double total = 0.0;
    for (const auto& example : train_set) {
      auto step = loss_and_grad(params, example, config);
      if (!std::isfinite(step.loss)) {
        throw NumericError("training diverged at epoch " + std::to_string(epoch) +
                           " (non-finite loss); last finite epoch " + std::to_string(epoch - 1));
      }
      if (config.grad_clip > 0.0) clip_global_norm(step.grads, config.grad_clip);
      optim::adamw_step(params, step.grads, state, config.learning_rate, config.weight_decay);
      ++result.optimizer_steps;
      total += step.loss;
    }
    EpochRecord record;
    record.epoch = epoch;
    record.train_loss = total / static_cast<double>(train_set.size());
    if (!validation_set.empty()) {
      record.validation = evaluate(params, config, validation_set);
      if (!best_acc || record.validation->acc > *best_acc) {
        best_acc = record.validation->acc;
        result.params = params;
        result.best_epoch = epoch;
      }
    }
    result.history.push_back(record);
    result.epochs_run = epoch;
    if (observer) observer(record);
    if (stop && stop(record)) break;
  }
  if (validation_set.empty()) {
    result.params = params;
    result.best_epoch = result.epochs_run;
  }
  return result;
}

metrics::MetricsRecord evaluate(const model::ModelParams& params, const model::ModelConfig& config,
                                std::span<const Example> examples) {
  if (examples.empty()) throw DataError("evaluate: no samples");
  metrics::ConfusionCounts pooled;
  std::vector<int> truth;
  std::vector<int> guess;
  for (const auto& ex : examples) {
    const auto pred = model::predict(params, ex.graph, config);
    truth.clear();
    guess.clear();
    const Index classes = config.trend_classes;
    for (Index i = 0; i < pred.classes.rows(); ++i) {
      for (Index b = 0; b < pred.classes.cols(); ++b) {
        Index label = 0;
        for (Index c = 0; c < classes; ++c) {
          if (ex.labels(i, b * classes + c) == 1) label = c;
        }
        truth.push_back(static_cast<int>(label));
        guess.push_back(pred.classes(i, b));
      }
    }
    pooled += metrics::confusion(truth, guess);
  }
  return metrics::score(pooled);
}

}  // namespace epgat::train
