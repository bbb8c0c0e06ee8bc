// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/linalg.hpp"

#include <cstddef>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

namespace epgat::graph {

/// Sum of squared window features of one stock.
double stock_energy(std::span<const double> window);

/// Energies of every row of a stocks x (lag * channels) feature matrix.
std::vector<double> stock_energies(const Matrix& features);

/// Row-normalized Boltzmann similarity of stock energies:
///
///   A(i, j) = exp(-|E_i - E_j| / (k * lag)) / sum_o exp(-|E_i - E_o| / (k * lag))
///
/// The lag window doubles as the system temperature. The row sum includes the
/// self term, so every diagonal entry is the maximum of its row.
Matrix boltzmann_adjacency(const Matrix& features, double scaling, int lag_window);

struct Edge {
  std::size_t src;
  std::size_t dst;
  double weight;
};

/// Thresholded adjacency with both dense and edge-list views.
struct SparseAdjacency {
  Matrix dense;
  std::vector<std::size_t> isolated;  // rows left without any entry
  std::vector<std::string> warnings;

  std::vector<Edge> edges() const;
  std::size_t edge_count() const;
};

/// Zeroes every entry below `threshold`; no renormalization afterwards.
SparseAdjacency sparsify(const Matrix& adjacency, double threshold);

/// Same-sector graph (self-loops included), row-normalized.
Matrix sector_adjacency(const std::map<std::string, std::string>& membership,
                        std::span<const std::string> tickers);

/// Writes `src\tdst\tweight` lines for every nonzero entry in row-major order
/// after a header line. Returns the number of edge lines.
std::size_t export_edges(const Matrix& adjacency, std::span<const std::string> tickers,
                         const std::filesystem::path& out);

/// Dense dump with a ticker header row and column.
void export_dense_csv(const Matrix& adjacency, std::span<const std::string> tickers,
                      const std::filesystem::path& out);

/// Model input for one time step.
struct GraphSnapshot {
  std::size_t t = 0;
  Matrix features;
  Matrix adjacency;  // sparsified
  std::vector<std::size_t> isolated;
  double scaling = 0.0;
  int lag_window = 0;
  double threshold = 0.0;
};

GraphSnapshot energy_snapshot(std::size_t t, Matrix features, double scaling, int lag_window,
                              double threshold);

/// Static graph snapshot; the pre-defined graph is used as is.
GraphSnapshot static_snapshot(std::size_t t, Matrix features, const Matrix& adjacency);

}  // namespace epgat::graph
