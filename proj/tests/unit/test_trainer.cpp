// SPDX-License-Identifier: Apache-2.0
#include "epgat/errors.hpp"
#include "epgat/trainer.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace epgat;

namespace {

model::ModelConfig small(int epochs) {
  model::ModelConfig c;
  c.lag_window = 4;
  c.indicators = 2;
  c.hidden = 6;
  c.heads = 2;
  c.blocks = 2;
  c.threshold = 0.3;
  c.epochs = epochs;
  return c;
}

std::vector<train::Example> examples(const model::ModelConfig& c, std::size_t count, std::uint64_t seed) {
  auto rng = make_rng(seed, 40);
  std::vector<train::Example> out;
  for (std::size_t t = 0; t < count; ++t) {
    const Matrix x = oracle::random_matrix(6, c.input_width(), rng);
    train::Example ex;
    ex.graph = graph::energy_snapshot(t, x, c.scaling, c.lag_window, c.threshold);
    // Learnable target: up when the most recent first channel is positive.
    ex.labels = LabelMatrix::Zero(6, 2);
    for (Index i = 0; i < 6; ++i) ex.labels(i, x(i, c.input_width() - 2) > 0 ? 1 : 0) = 1;
    out.push_back(std::move(ex));
  }
  return out;
}

}  // namespace

TEST_CASE("training is deterministic for a fixed seed", "[trainer]") {
  const auto c = small(5);
  const auto tr = examples(c, 12, 1);
  const auto va = examples(c, 4, 2);
  const auto a = train::train(tr, va, c);
  const auto b = train::train(tr, va, c);
  REQUIRE(a.history.size() == 5);
  for (std::size_t i = 0; i < a.history.size(); ++i) {
    CHECK(train::to_json(a.history[i]).dump() == train::to_json(b.history[i]).dump());
  }
  CHECK(model::encode_checkpoint(a.params, c) == model::encode_checkpoint(b.params, c));
  CHECK(a.optimizer_steps == 5 * 12);
}

TEST_CASE("best validation accuracy is retained", "[trainer]") {
  const auto c = small(12);
  const auto tr = examples(c, 16, 3);
  const auto va = examples(c, 6, 4);
  const auto r = train::train(tr, va, c);
  double best = -1.0;
  int best_epoch = 0;
  for (const auto& rec : r.history) {
    if (rec.validation->acc > best) {
      best = rec.validation->acc;
      best_epoch = rec.epoch;
    }
  }
  CHECK(r.best_epoch == best_epoch);
  CHECK(train::evaluate(r.params, c, va).acc == best);
}

TEST_CASE("loss on one repeated sample is essentially non-increasing", "[trainer]") {
  auto c = small(50);
  c.learning_rate = 1e-3;
  c.weight_decay = 1e-4;
  const auto tr = examples(c, 1, 5);
  const auto r = train::train(tr, {}, c);
  int rises = 0;
  for (std::size_t i = 1; i < r.history.size(); ++i) {
    if (r.history[i].train_loss > r.history[i - 1].train_loss) ++rises;
  }
  CHECK(rises <= 5);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  CHECK(r.best_epoch == 50);
}

TEST_CASE("stop rule ends training early", "[trainer]") {
  const auto c = small(30);
  const auto tr = examples(c, 4, 6);
  const auto va = examples(c, 2, 7);
  const auto r = train::train(tr, va, c, {}, [](const train::EpochRecord& rec) { return rec.epoch == 3; });
  CHECK(r.epochs_run == 3);
  CHECK(r.history.size() == 3);
}

TEST_CASE("observer sees every epoch", "[trainer]") {
  const auto c = small(4);
  const auto tr = examples(c, 3, 8);
  std::vector<int> seen;
  train::train(tr, {}, c, [&](const train::EpochRecord& rec) { seen.push_back(rec.epoch); });
  CHECK(seen == std::vector<int>{1, 2, 3, 4});
}

TEST_CASE("divergence and empty input are reported", "[trainer]") {
  const auto c = small(3);
  CHECK_THROWS_AS(train::train({}, {}, c), InsufficientDataError);
  auto tr = examples(c, 2, 9);
  tr[1].graph.features(0, 0) = INFINITY;
  CHECK_THROWS_AS(train::train(tr, {}, c), NumericError);
}

TEST_CASE("evaluate pools every stock and step", "[trainer]") {
  const auto c = small(1);
  const auto ex = examples(c, 5, 10);
  const auto params = model::init_model(c);
  const auto pooled = train::evaluate(params, c, ex);
  CHECK(pooled.n == 5 * 6);
  metrics::ConfusionCounts sum;
  for (const auto& e : ex) sum += train::evaluate(params, c, std::span(&e, 1)).counts;
  CHECK(sum == pooled.counts);
  CHECK_THROWS_AS(train::evaluate(params, c, {}), DataError);
}

TEST_CASE("history JSON carries the documented fields", "[trainer]") {
  train::EpochRecord rec;
  rec.epoch = 2;
  rec.train_loss = 0.5;
  const auto j = train::to_json(rec);
  CHECK(j.at("epoch") == 2);
  CHECK(j.at("val_acc").is_null());
  rec.validation = metrics::score({1, 1, 0, 0});
  CHECK(train::to_json(rec).at("val_acc") == 1.0);
  CHECK(train::to_json(rec).contains("val_mcc"));
  CHECK(train::to_json(rec).contains("val_f1"));
}
