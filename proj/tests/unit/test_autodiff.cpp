// SPDX-License-Identifier: Apache-2.0
#include "epgat/autodiff.hpp"
#include "epgat/errors.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace epgat;
using Catch::Matchers::WithinAbs;

namespace {

const double kSteps[] = {1e-5, 1e-6};

ad::Value weighted_sum(const ad::Value& v, const Matrix& w) {
  return ad::sum(ad::mul(v, v.tape().constant(w)));
}

Matrix away_from_zero(Matrix m) {
  for (Index i = 0; i < m.size(); ++i) {
    double& x = m.data()[i];
    x = (x < 0 ? -1.0 : 1.0) * (0.05 + std::abs(x));
  }
  return m;
}

}  // namespace

TEST_CASE("linear and quadratic gradients", "[autodiff]") {
  ad::Tape tape;
  Matrix x0(2, 3);
  x0 << 1, -2, 3, 0.5, 0, -1;
  const auto x = tape.variable(x0);
  tape.backward(ad::sum(x));
  CHECK(x.grad() == Matrix::Ones(2, 3));

  tape.zero_grad();
  tape.backward(ad::sum(ad::mul(x, x)));
  CHECK(x.grad() == 2.0 * x0);
}

TEST_CASE("softmax identities", "[autodiff]") {
  ad::Tape tape;
  const auto flat = ad::row_softmax(tape.constant(Matrix::Constant(1, 4, 3.0)));
  for (Index j = 0; j < 4; ++j) CHECK(flat.data()(0, j) == 0.25);

  auto rng = make_rng(1, 0);
  const Matrix x = oracle::random_matrix(3, 5, rng);
  const Matrix a = ad::row_softmax(tape.constant(x)).data();
  const Matrix b = ad::row_softmax(tape.constant((x.array() + 7.5).matrix())).data();
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-15);
  CHECK((ad::softmax_rows(x) - a).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("cross entropy of uniform binary logits is ln 2", "[autodiff]") {
  ad::Tape tape;
  LabelMatrix y(3, 2);
  y << 1, 0, 0, 1, 1, 0;
  const auto loss = ad::cross_entropy_with_logits(tape.constant(Matrix::Zero(3, 2)), y, 2);
  CHECK_THAT(loss.data()(0, 0), WithinAbs(std::log(2.0), 1e-15));

  LabelMatrix bad(3, 2);
  bad << 1, 1, 0, 1, 1, 0;
  CHECK_THROWS_AS(ad::cross_entropy_with_logits(tape.constant(Matrix::Zero(3, 2)), bad, 2), LabelError);
}

TEST_CASE("cross entropy matches a hand-rolled oracle", "[autodiff]") {
  auto rng = make_rng(2, 0);
  ad::Tape tape;
  const Matrix x = oracle::random_matrix(4, 2, rng, -3, 3);
  const auto y = oracle::random_labels(4, 1, 2, rng);
  const double got = ad::cross_entropy_with_logits(tape.constant(x), y, 2).data()(0, 0);
  CHECK_THAT(got, WithinAbs(oracle::cross_entropy(x, y, 2), 1e-12));
}

TEST_CASE("concat_cols routes each column gradient to one input", "[autodiff]") {
  ad::Tape tape;
  const auto a = tape.variable(Matrix::Zero(2, 2));
  const auto b = tape.variable(Matrix::Zero(2, 1));
  const ad::Value parts[] = {a, b};
  Matrix w(2, 3);
  w << 1, 2, 3, 4, 5, 6;
  tape.backward(weighted_sum(ad::concat_cols(parts), w));
  CHECK(a.grad() == w.leftCols(2));
  CHECK(b.grad() == w.rightCols(1));
}

TEST_CASE("masked softmax ignores masked positions", "[autodiff]") {
  ad::Tape tape;
  Matrix x(2, 3);
  x << 1, 2, 3, 4, 5, 6;
  Mask m(2, 3);
  m << true, false, true, false, true, false;
  const auto v = tape.variable(x);
  const auto p = ad::masked_row_softmax(v, m);
  CHECK(p.data()(0, 1) == 0.0);
  CHECK(p.data()(1, 1) == 1.0);
  CHECK_THAT(p.data()(0, 0), WithinAbs(1.0 / (1.0 + std::exp(2.0)), 1e-15));
  auto rng = make_rng(4, 0);
  tape.backward(weighted_sum(p, oracle::random_matrix(2, 3, rng)));
  CHECK(v.grad()(0, 1) == 0.0);
  CHECK(v.grad()(1, 0) == 0.0);

  Mask empty = Mask::Constant(2, 3, false);
  empty(0, 0) = true;
  CHECK_THROWS_AS(ad::masked_row_softmax(v, empty), DegenerateNeighborhoodError);
}

TEST_CASE("tape contract violations raise", "[autodiff]") {
  ad::Tape t1;
  ad::Tape t2;
  const auto a = t1.variable(Matrix::Ones(2, 2));
  const auto b = t2.variable(Matrix::Ones(2, 2));
  CHECK_THROWS_AS(ad::add(a, b), Error);
  CHECK_THROWS_AS(ad::matmul(a, t1.variable(Matrix::Ones(3, 1))), ShapeError);
  CHECK_THROWS_AS(t1.backward(a), ShapeError);
  const auto s = ad::sum(a);
  t1.backward(s);
  CHECK_THROWS_AS(t1.backward(s), Error);
  t1.zero_grad();
  t1.backward(s);
  CHECK(a.grad() == Matrix::Ones(2, 2));
}

TEST_CASE("constants receive no gradient", "[autodiff]") {
  ad::Tape tape;
  const auto c = tape.constant(Matrix::Ones(2, 2));
  const auto v = tape.variable(Matrix::Ones(2, 2));
  tape.backward(ad::sum(ad::mul(c, v)));
  CHECK(c.grad() == Matrix::Zero(2, 2));
  CHECK(v.grad() == Matrix::Ones(2, 2));
}

TEST_CASE("grad_check passes an exact quadratic at tight tolerance", "[autodiff][gradcheck]") {
  auto rng = make_rng(6, 0);
  const std::vector<Matrix> params = {oracle::random_matrix(3, 4, rng)};
  const auto report = ad::grad_check(
      [](ad::Tape&, std::span<const ad::Value> v) { return ad::sum(ad::mul(v[0], v[0])); }, params, 1e-5,
      1e-6);
  CHECK(report.passed);
  CHECK(report.coordinates == 12);
}

TEST_CASE("grad_check flags a wrong backward rule", "[autodiff][gradcheck]") {
  auto rng = make_rng(7, 0);
  const std::vector<Matrix> params = {oracle::random_matrix(2, 2, rng)};
  const auto broken = [](ad::Tape& tape, std::span<const ad::Value> v) {
    const ad::Value ins[] = {v[0]};
    const auto doubled = tape.record(2.0 * v[0].data(), ins, [x = v[0]](ad::Tape& t, const Matrix& g, const Matrix&) {
      t.accumulate(x, 3.0 * g);
    });
    return ad::sum(doubled);
  };
  const auto report = ad::grad_check(broken, params, kSteps, 1e-4, 1e-6);
  CHECK_FALSE(report.passed);
  CHECK_THAT(report.analytic, WithinAbs(3.0, 1e-12));
  CHECK_THAT(report.numeric, WithinAbs(2.0, 1e-6));
}

TEST_CASE("grad_check rejects non-deterministic functions", "[autodiff][gradcheck]") {
  int calls = 0;
  const std::vector<Matrix> params = {Matrix::Ones(1, 1)};
  const auto drifting = [&](ad::Tape&, std::span<const ad::Value> v) {
    return ad::scale(ad::sum(v[0]), 1.0 + 1e-3 * ++calls);
  };
  CHECK_THROWS_AS(ad::grad_check(drifting, params, 1e-5, 1e-4), DeterminismError);
}

TEST_CASE("masked softmax with cross-entropy passes the finite-difference check", "[autodiff][gradcheck]") {
  auto rng = make_rng(8, 0);
  Mask m(3, 3);
  m << true, true, false, false, true, true, true, false, true;
  const auto y = oracle::random_labels(3, 1, 3, rng);
  const std::vector<Matrix> params = {oracle::random_matrix(3, 3, rng)};
  const auto report = ad::grad_check(
      [&](ad::Tape& tape, std::span<const ad::Value> v) {
        const auto p = ad::masked_row_softmax(v[0], m);
        const auto eps = tape.constant(Matrix::Constant(3, 3, 1e-3));
        return ad::cross_entropy_with_logits(ad::log(ad::add(p, eps)), y, 3);
      },
      params, kSteps, 1e-4, 1e-6);
  CHECK(report.passed);
}

TEST_CASE("every primitive passes the finite-difference check on random shapes", "[autodiff][gradcheck]") {
  double worst = 0.0;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    auto rng = make_rng(seed, 10);
    std::uniform_int_distribution<Index> dim(1, 4);
    const Index r = dim(rng), c = dim(rng), k = dim(rng);
    auto rnd = [&](Index rows, Index cols) { return oracle::random_matrix(rows, cols, rng); };
    const Matrix w_rc = rnd(r, c), w_rk = rnd(r, k), w_cr = rnd(c, r), w_pair = rnd(r * k, c);
    const Matrix w_cat = rnd(r, c + k);
    Mask mask = Mask::Constant(r, c, true);
    mask(0, 0) = c == 1;
    const auto labels = oracle::random_labels(r, 2, c, rng);
    const std::vector<std::pair<ad::ScalarFunction, std::vector<Matrix>>> cases = {
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::matmul(v[0], v[1]), w_rk); },
         {rnd(r, c), rnd(c, k)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::sub(v[0], v[1]), w_rc); },
         {rnd(r, c), rnd(r, c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::scale_by(v[0], v[1]), w_rc); },
         {rnd(r, c), rnd(1, 1)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) {
           const ad::Value parts[] = {v[0], v[1]};
           return weighted_sum(ad::concat_cols(parts), w_cat);
         },
         {rnd(r, c), rnd(r, k)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::slice_cols(v[0], c, k), w_rk); },
         {rnd(r, c + k)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::transpose(v[0]), w_cr); },
         {rnd(r, c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::row_softmax(v[0]), w_rc); },
         {rnd(r, c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) {
           return weighted_sum(ad::masked_row_softmax(v[0], mask), w_rc);
         },
         {rnd(r, c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::leaky_relu(v[0], 0.2), w_rc); },
         {away_from_zero(rnd(r, c))}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::prelu(v[0], v[1]), w_rc); },
         {away_from_zero(rnd(r, c)), rnd(1, c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::log(v[0]), w_rc); },
         {oracle::random_matrix(r, c, rng, 0.5, 2.0)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) {
           return ad::cross_entropy_with_logits(v[0], labels, c);
         },
         {rnd(r, 2 * c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) {
           return weighted_sum(ad::pairwise_sum(v[0], v[1]), w_pair);
         },
         {rnd(r, c), rnd(k, c)}},
        {[&](ad::Tape&, std::span<const ad::Value> v) { return weighted_sum(ad::reshape(v[0], c, r), w_cr); },
         {rnd(r, c)}},
    };
    for (const auto& [f, params] : cases) {
      const auto report = ad::grad_check(f, params, kSteps, 1e-4, 1e-6);
      worst = std::max(worst, report.max_relative_error);
    }
  }
  CHECK(worst <= 1e-4);
}
