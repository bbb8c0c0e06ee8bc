// SPDX-License-Identifier: Apache-2.0
#include "epgat/energy_graph.hpp"
#include "epgat/errors.hpp"

#include "oracles.hpp"

#include <catch_amalgamated.hpp>

#include <cmath>

using namespace epgat;
using Catch::Matchers::WithinAbs;

TEST_CASE("stock energy is the sum of squared window entries", "[energy_graph]") {
  const std::vector<double> zero(6, 0.0);
  CHECK(graph::stock_energy(zero) == 0.0);
  const std::vector<double> v = {1.0, 2.0, 2.0};
  CHECK(graph::stock_energy(v) == 9.0);
  const std::vector<double> bad = {1.0, NAN};
  CHECK_THROWS_AS(graph::stock_energy(bad), NumericError);
}

TEST_CASE("two-stock kernel matches the hand value", "[energy_graph]") {
  // Energies 0 and 1, k * tau = 1/ln 2: off-diagonal weight exp(-ln 2) = 1/2.
  Matrix x(2, 1);
  x << 0.0, 1.0;
  const Matrix a = graph::boltzmann_adjacency(x, 1.0 / std::log(2.0), 1);
  CHECK_THAT(a(0, 0), WithinAbs(2.0 / 3.0, 1e-15));
  CHECK_THAT(a(0, 1), WithinAbs(1.0 / 3.0, 1e-15));
  CHECK_THAT(a(1, 0), WithinAbs(1.0 / 3.0, 1e-15));
}

TEST_CASE("equal energies give a uniform kernel", "[energy_graph]") {
  Matrix x(4, 3);
  x << 1, 0, 0, 0, 1, 0, 0, 0, -1, 0, 1, 0;
  const Matrix a = graph::boltzmann_adjacency(x, 0.3, 3);
  for (Index i = 0; i < 4; ++i) {
    for (Index j = 0; j < 4; ++j) CHECK(a(i, j) == 0.25);
  }
}

TEST_CASE("kernel agrees with the brute-force oracle", "[energy_graph]") {
  auto rng = make_rng(3, 0);
  for (int trial = 0; trial < 100; ++trial) {
    const Index n = 2 + trial % 9;
    const Matrix x = oracle::random_matrix(n, 12, rng, -1.0, 1.0);
    const Matrix a = graph::boltzmann_adjacency(x, 0.2 + 0.01 * trial, 4);
    const Matrix expect = oracle::adjacency(x, 0.2 + 0.01 * trial, 4);
    CHECK((a - expect).cwiseAbs().maxCoeff() < 1e-13);
    CHECK(((a.rowwise().sum().array() - 1.0).abs() < 1e-12).all());
    for (Index i = 0; i < n; ++i) CHECK(a(i, i) == a.row(i).maxCoeff());
  }
}

TEST_CASE("kernel rejects invalid parameters", "[energy_graph]") {
  const Matrix x = Matrix::Ones(3, 2);
  CHECK_THROWS_AS(graph::boltzmann_adjacency(x, 0.0, 5), ConfigError);
  CHECK_THROWS_AS(graph::boltzmann_adjacency(x, 1.0, 0), ConfigError);
  CHECK_THROWS_AS(graph::boltzmann_adjacency(Matrix::Ones(1, 2), 1.0, 1), ShapeError);
}

TEST_CASE("sparsify keeps entries at or above the threshold", "[energy_graph]") {
  Matrix a(3, 3);
  a << 0.6, 0.3, 0.1,  //
      0.2, 0.5, 0.3,   //
      0.34, 0.33, 0.33;
  const auto s = graph::sparsify(a, 0.5);
  Matrix expect(3, 3);
  expect << 0.6, 0, 0, 0, 0.5, 0, 0, 0, 0;
  CHECK(s.dense == expect);
  CHECK(s.edge_count() == 2);
  REQUIRE(s.isolated.size() == 1);
  CHECK(s.isolated[0] == 2);
  CHECK(s.warnings.empty());

  const auto edges = s.edges();
  REQUIRE(edges.size() == 2);
  CHECK(edges[1].src == 1);
  CHECK(edges[1].dst == 1);
  CHECK(edges[1].weight == 0.5);

  CHECK(graph::sparsify(a, 0.9).warnings.size() == 1);
  CHECK(graph::sparsify(a, 0.0).dense == a);
}

TEST_CASE("sector graph is block diagonal and row-normalized", "[energy_graph]") {
  const std::map<std::string, std::string> sectors = {{"A", "x"}, {"B", "y"}, {"C", "x"}, {"D", "x"}};
  const std::vector<std::string> tickers = {"A", "B", "C", "D"};
  const Matrix a = graph::sector_adjacency(sectors, tickers);
  const double t = 1.0 / 3.0;
  Matrix expect(4, 4);
  expect << t, 0, t, t,  //
      0, 1, 0, 0,        //
      t, 0, t, t,        //
      t, 0, t, t;
  CHECK((a - expect).cwiseAbs().maxCoeff() < 1e-15);
  const std::vector<std::string> unknown = {"A", "Z"};
  CHECK_THROWS_AS(graph::sector_adjacency(sectors, unknown), ConfigError);
}

TEST_CASE("edge export writes one line per nonzero entry", "[energy_graph]") {
  oracle::TempDir dir("graph_export");
  Matrix a(2, 2);
  a << 0.75, 0.25, 0.0, 1.0;
  const std::vector<std::string> tickers = {"AAA", "BBB"};
  CHECK(graph::export_edges(a, tickers, dir.path() / "e.tsv") == 3);
  CHECK(oracle::read_file(dir.path() / "e.tsv") ==
        "src\tdst\tweight\nAAA\tAAA\t0.75\nAAA\tBBB\t0.25\nBBB\tBBB\t1\n");
  graph::export_dense_csv(a, tickers, dir.path() / "d.csv");
  CHECK(oracle::read_file(dir.path() / "d.csv") == "ticker,AAA,BBB\nAAA,0.75,0.25\nBBB,0,1\n");
}

TEST_CASE("energy snapshot carries the sparsified graph", "[energy_graph]") {
  auto rng = make_rng(8, 0);
  const Matrix x = oracle::random_matrix(6, 8, rng);
  const auto snap = graph::energy_snapshot(42, x, 0.5, 4, 0.4);
  CHECK(snap.t == 42);
  CHECK(snap.features == x);
  CHECK(snap.adjacency == graph::sparsify(graph::boltzmann_adjacency(x, 0.5, 4), 0.4).dense);
  CHECK(snap.lag_window == 4);
}
