// SPDX-License-Identifier: Apache-2.0
#include "epgat/errors.hpp"
#include "epgat/optimizer.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace epgat;
using Catch::Matchers::WithinRel;

namespace {

model::ModelConfig small() {
  model::ModelConfig c;
  c.lag_window = 3;
  c.indicators = 2;
  c.hidden = 4;
  c.heads = 2;
  c.blocks = 2;
  return c;
}

model::ModelParams zeros_like(const model::ModelParams& p) {
  model::ModelParams g;
  model::visit_model([](const std::string&, const Matrix& m, Matrix& z) { z = Matrix::Zero(m.rows(), m.cols()); },
                     p, g);
  return g;
}

}  // namespace

TEST_CASE("zero gradient without decay leaves parameters unchanged", "[optimizer]") {
  auto params = model::init_model(small());
  const auto before = model::encode_checkpoint(params, small());
  auto state = optim::make_state(params);
  for (int i = 0; i < 3; ++i) optim::adamw_step(params, zeros_like(params), state, 1e-3, 0.0);
  CHECK(model::encode_checkpoint(params, small()) == before);
  CHECK(state.step == 3);
}

TEST_CASE("zero gradient with decay scales parameters by 1 - lr * wd", "[optimizer]") {
  auto params = model::init_model(small());
  const auto original = params;
  auto state = optim::make_state(params);
  optim::adamw_step(params, zeros_like(params), state, 2e-3, 5e-4);
  const double factor = 1.0 - 2e-3 * 5e-4;
  model::visit_model([&](const std::string&, const Matrix& now, const Matrix& then) {
    CHECK(now == then * factor);
  }, params, original);
}

TEST_CASE("a constant gradient settles to steps of lr in the direction of -sign(g)", "[optimizer]") {
  Matrix theta = Matrix::Zero(1, 3);
  Matrix g(1, 3);
  g << 0.3, -2.0, 1e-3;
  Matrix m = Matrix::Zero(1, 3);
  Matrix v = Matrix::Zero(1, 3);
  const optim::AdamWConstants c;
  const double lr = 1e-3;
  for (std::uint64_t step = 1; step <= 200; ++step) {
    const Matrix before = theta;
    optim::adamw_update(theta, g, m, v, step, lr, 0.0, c);
    for (Index j = 0; j < 3; ++j) {
      // Bias correction makes m_hat = g and v_hat = g^2 exactly for a constant gradient.
      const double expect = -lr * g(0, j) / (std::abs(g(0, j)) + c.epsilon);
      CHECK_THAT(theta(0, j) - before(0, j), WithinRel(expect, 1e-9));
    }
  }
}

TEST_CASE("one step matches the hand-written update", "[optimizer]") {
  Matrix theta(1, 2);
  theta << 0.5, -1.0;
  Matrix g(1, 2);
  g << 0.2, 0.4;
  Matrix m(1, 2);
  m << 0.01, -0.02;
  Matrix v(1, 2);
  v << 1e-3, 2e-3;
  const optim::AdamWConstants c;
  const double lr = 1e-2, wd = 1e-1;
  Matrix expect(1, 2);
  for (Index j = 0; j < 2; ++j) {
    const double decayed = theta(0, j) * (1 - lr * wd);
    const double m1 = 0.9 * m(0, j) + 0.1 * g(0, j);
    const double v1 = 0.999 * v(0, j) + 0.001 * g(0, j) * g(0, j);
    const double mh = m1 / (1 - std::pow(0.9, 3));
    const double vh = v1 / (1 - std::pow(0.999, 3));
    expect(0, j) = decayed - lr * mh / (std::sqrt(vh) + 1e-8);
  }
  optim::adamw_update(theta, g, m, v, 3, lr, wd, c);
  CHECK(std::abs(theta(0, 0) - expect(0, 0)) < 1e-15);
  CHECK(std::abs(theta(0, 1) - expect(0, 1)) < 1e-15);
}

TEST_CASE("non-finite gradients abort before any update and name the tensor", "[optimizer]") {
  auto params = model::init_model(small());
  const auto before = model::encode_checkpoint(params, small());
  auto state = optim::make_state(params);
  auto grads = zeros_like(params);
  grads.w_in.setOnes();
  grads.blocks[1].w_skip(0, 0) = NAN;
  CHECK_THROWS_WITH(optim::adamw_step(params, grads, state, 1e-3, 1e-4),
                    Catch::Matchers::ContainsSubstring("blocks.1.w_skip"));
  CHECK(model::encode_checkpoint(params, small()) == before);
  CHECK(state.step == 0);
}
