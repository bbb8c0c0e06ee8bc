// SPDX-License-Identifier: Apache-2.0
#include "epgat/energy_graph.hpp"

#include "epgat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

namespace epgat::graph {

double stock_energy(std::span<const double> window) {
  double energy = 0.0;
  for (double x : window) {
    if (!std::isfinite(x)) throw NumericError("stock_energy: non-finite feature");
    energy += x * x;
  }
  return energy;
}

std::vector<double> stock_energies(const Matrix& features) {
  std::vector<double> energies(static_cast<std::size_t>(features.rows()));
  for (Index i = 0; i < features.rows(); ++i) {
    energies[static_cast<std::size_t>(i)] =
        stock_energy({features.row(i).data(), static_cast<std::size_t>(features.cols())});
  }
  return energies;
}

Matrix boltzmann_adjacency(const Matrix& features, double scaling, int lag_window) {
  if (!(scaling > 0.0)) throw ConfigError("scaling factor k must be positive");
  if (lag_window < 1) throw ConfigError("lag window must be at least 1");
  const Index n = features.rows();
  if (n < 2) throw ShapeError("boltzmann_adjacency needs at least 2 stocks");
  const auto energies = stock_energies(features);
  const double temperature = scaling * static_cast<double>(lag_window);
  Matrix adj(n, n);
  std::vector<double> terms(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    // The exponent is -|dE|/(k*tau) <= 0 with the maximum 0 at o = i, so the
    // row is already max-shifted: the sum is at least 1 and never underflows.
    for (Index j = 0; j < n; ++j) {
      const double gap = std::abs(energies[static_cast<std::size_t>(i)] -
                                  energies[static_cast<std::size_t>(j)]);
      adj(i, j) = std::exp(-gap / temperature);
      terms[static_cast<std::size_t>(j)] = adj(i, j);
    }
    // Summing in sorted order makes the normalizer independent of stock order.
    std::sort(terms.begin(), terms.end());
    double total = 0.0;
    for (double x : terms) total += x;
    adj.row(i) /= total;
  }
  return adj;
}

std::vector<Edge> SparseAdjacency::edges() const {
  std::vector<Edge> out;
  for (Index i = 0; i < dense.rows(); ++i) {
    for (Index j = 0; j < dense.cols(); ++j) {
      if (dense(i, j) != 0.0) {
        out.push_back({static_cast<std::size_t>(i), static_cast<std::size_t>(j), dense(i, j)});
      }
    }
  }
  return out;
}

std::size_t SparseAdjacency::edge_count() const {
  return static_cast<std::size_t>((dense.array() != 0.0).count());
}

SparseAdjacency sparsify(const Matrix& adjacency, double threshold) {
  SparseAdjacency out;
  out.dense = (adjacency.array() >= threshold).select(adjacency, 0.0);
  if (threshold < 0.25 || threshold > 0.85) {
    out.warnings.push_back("threshold " + std::to_string(threshold) +
                           " outside the searched range [0.25, 0.85]");
  }
  for (Index i = 0; i < out.dense.rows(); ++i) {
    if ((out.dense.row(i).array() == 0.0).all()) out.isolated.push_back(static_cast<std::size_t>(i));
  }
  return out;
}

Matrix sector_adjacency(const std::map<std::string, std::string>& membership,
                        std::span<const std::string> tickers) {
  std::vector<std::string> sector;
  for (const auto& t : tickers) {
    const auto it = membership.find(t);
    if (it == membership.end()) throw ConfigError("ticker '" + t + "' has no sector");
    sector.push_back(it->second);
  }
  const auto n = static_cast<Index>(tickers.size());
  Matrix adj = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < n; ++j) {
      if (sector[static_cast<std::size_t>(i)] == sector[static_cast<std::size_t>(j)]) {
        adj(i, j) = 1.0;
      }
    }
    adj.row(i) /= adj.row(i).sum();
  }
  return adj;
}

std::size_t export_edges(const Matrix& adjacency, std::span<const std::string> tickers,
                         const std::filesystem::path& out) {
  if (static_cast<Index>(tickers.size()) != adjacency.rows() || adjacency.rows() != adjacency.cols()) {
    throw ShapeError("export_edges: adjacency " + shape_string(adjacency) + " vs " +
                     std::to_string(tickers.size()) + " tickers");
  }
  std::ofstream os(out);
  if (!os) throw IoError("cannot write edge list " + out.string());
  os.precision(17);
  os << "src\tdst\tweight\n";
  std::size_t lines = 0;
  for (Index i = 0; i < adjacency.rows(); ++i) {
    for (Index j = 0; j < adjacency.cols(); ++j) {
      const double w = adjacency(i, j);
      if (!std::isfinite(w)) throw NumericError("export_edges: non-finite weight");
      if (w == 0.0) continue;
      os << tickers[static_cast<std::size_t>(i)] << '\t' << tickers[static_cast<std::size_t>(j)]
         << '\t' << w << '\n';
      ++lines;
    }
  }
  if (!os) throw IoError("write failed for " + out.string());
  return lines;
}

void export_dense_csv(const Matrix& adjacency, std::span<const std::string> tickers,
                      const std::filesystem::path& out) {
  std::ofstream os(out);
  if (!os) throw IoError("cannot write " + out.string());
  os.precision(17);
  os << "ticker";
  for (const auto& t : tickers) os << ',' << t;
  os << '\n';
  for (Index i = 0; i < adjacency.rows(); ++i) {
    os << tickers[static_cast<std::size_t>(i)];
    for (Index j = 0; j < adjacency.cols(); ++j) os << ',' << adjacency(i, j);
    os << '\n';
  }
}

GraphSnapshot energy_snapshot(std::size_t t, Matrix features, double scaling, int lag_window,
                              double threshold) {
  auto sparse = sparsify(boltzmann_adjacency(features, scaling, lag_window), threshold);
  GraphSnapshot snap;
  snap.t = t;
  snap.features = std::move(features);
  snap.adjacency = std::move(sparse.dense);
  snap.isolated = std::move(sparse.isolated);
  snap.scaling = scaling;
  snap.lag_window = lag_window;
  snap.threshold = threshold;
  return snap;
}

GraphSnapshot static_snapshot(std::size_t t, Matrix features, const Matrix& adjacency) {
  GraphSnapshot snap;
  snap.t = t;
  snap.features = std::move(features);
  snap.adjacency = adjacency;
  for (Index i = 0; i < adjacency.rows(); ++i) {
    if ((adjacency.row(i).array() == 0.0).all()) snap.isolated.push_back(static_cast<std::size_t>(i));
  }
  return snap;
}

}  // namespace epgat::graph
