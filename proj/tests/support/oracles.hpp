// SPDX-License-Identifier: Apache-2.0
#pragma once

// Straight-line reference implementations used by the tests. They share no
// code with the library beyond the Matrix type.

#include "epgat/autodiff.hpp"
#include "epgat/energy_graph.hpp"
#include "epgat/linalg.hpp"
#include "epgat/model.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace epgat::oracle {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo = -1.0, double hi = 1.0);

/// Exhaustive Boltzmann kernel: energies by explicit loops, long double sums.
Matrix adjacency(const Matrix& features, double k, int tau);
Matrix threshold(const Matrix& a, double s);

struct Metrics {
  double acc, mcc, f1;
};
Metrics metrics(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn);

Matrix leaky(const Matrix& x, double slope);
Matrix prelu(const Matrix& x, const Matrix& slopes);

/// Per-node loop over the neighborhood {j : A(i,j) > 0} plus i.
Matrix gatv2(const Matrix& h, const Matrix& adj, const gnn::GatLayerParams& p, double slope = 0.2);
/// Per-head loop: softmax(q_i . k_j / sqrt(d')) over all j.
Matrix mha(const Matrix& m, const gnn::AttentionParams& p);
Matrix forward(const model::ModelParams& params, const Matrix& features, const Matrix& adj);

/// Mean over rows and blocks of -log softmax at the labelled class.
double cross_entropy(const Matrix& logits, const LabelMatrix& labels, Index classes);

/// Row permutation: out.row(i) = m.row(perm[i]); with both=true also columns.
Matrix permute(const Matrix& m, const std::vector<Index>& perm, bool both = false);
std::vector<Index> random_permutation(Index n, Rng& rng);

/// Random one-hot labels, `classes` wide per block.
LabelMatrix random_labels(Index rows, Index blocks, Index classes, Rng& rng);

/// Finite-difference check of the full model loss over every parameter.
ad::GradCheckReport model_grad_check(const model::ModelParams& params,
                                     const graph::GraphSnapshot& snapshot,
                                     const LabelMatrix& labels, const model::ModelConfig& config,
                                     std::span<const double> steps, double tol, double floor = 1e-8);

/// Unique scratch directory removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag);
  ~TempDir();
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, const std::string& text);

}  // namespace epgat::oracle
