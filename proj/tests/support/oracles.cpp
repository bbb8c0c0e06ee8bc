// SPDX-License-Identifier: Apache-2.0
#include "oracles.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>
#include <unistd.h>

namespace epgat::oracle {

Matrix random_matrix(Index rows, Index cols, Rng& rng, double lo, double hi) {
  std::uniform_real_distribution<double> dist(lo, hi);
  Matrix m(rows, cols);
  for (Index i = 0; i < rows; ++i) {
    for (Index j = 0; j < cols; ++j) m(i, j) = dist(rng);
  }
  return m;
}

Matrix adjacency(const Matrix& features, double k, int tau) {
  const Index n = features.rows();
  std::vector<long double> energy(static_cast<std::size_t>(n), 0.0L);
  for (Index i = 0; i < n; ++i) {
    for (Index c = 0; c < features.cols(); ++c) {
      const long double x = features(i, c);
      energy[static_cast<std::size_t>(i)] += x * x;
    }
  }
  const long double temp = static_cast<long double>(k) * tau;
  Matrix out(n, n);
  for (Index i = 0; i < n; ++i) {
    long double z = 0.0L;
    for (Index o = 0; o < n; ++o) {
      z += std::exp(-std::fabs(energy[static_cast<std::size_t>(i)] - energy[static_cast<std::size_t>(o)]) / temp);
    }
    for (Index j = 0; j < n; ++j) {
      const long double num =
          std::exp(-std::fabs(energy[static_cast<std::size_t>(i)] - energy[static_cast<std::size_t>(j)]) / temp);
      out(i, j) = static_cast<double>(num / z);
    }
  }
  return out;
}

Matrix threshold(const Matrix& a, double s) {
  Matrix out = a;
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (a(i, j) < s) out(i, j) = 0.0;
    }
  }
  return out;
}

Metrics metrics(std::uint64_t tp, std::uint64_t tn, std::uint64_t fp, std::uint64_t fn) {
  const long double TP = tp, TN = tn, FP = fp, FN = fn;
  Metrics m{};
  m.acc = static_cast<double>((TP + TN) / (TP + TN + FP + FN));
  const long double f1_den = 2 * TP + FP + FN;
  m.f1 = f1_den == 0 ? 0.0 : static_cast<double>(2 * TP / f1_den);
  const long double prod = (TP + FP) * (TP + FN) * (TN + FP) * (TN + FN);
  m.mcc = prod == 0 ? 0.0 : static_cast<double>((TP * TN - FP * FN) / std::sqrt(prod));
  return m;
}

Matrix leaky(const Matrix& x, double slope) {
  Matrix out = x;
  for (Index i = 0; i < x.size(); ++i) {
    if (x.data()[i] < 0.0) out.data()[i] = slope * x.data()[i];
  }
  return out;
}

Matrix prelu(const Matrix& x, const Matrix& slopes) {
  Matrix out = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (x(i, j) <= 0.0) out(i, j) = slopes(0, j) * x(i, j);
    }
  }
  return out;
}

Matrix gatv2(const Matrix& h, const Matrix& adj, const gnn::GatLayerParams& p, double slope) {
  const Index n = h.rows();
  const Index d = p.w_left.cols();
  const double beta = p.edge_scale(0, 0);
  Matrix out = Matrix::Zero(n, d);
  for (Index i = 0; i < n; ++i) {
    std::vector<Index> nbr;
    for (Index j = 0; j < n; ++j) {
      if (j == i || adj(i, j) > 0.0) nbr.push_back(j);
    }
    std::vector<double> logit;
    for (Index j : nbr) {
      double e = 0.0;
      for (Index c = 0; c < d; ++c) {
        double z = 0.0;
        for (Index r = 0; r < h.cols(); ++r) z += h(i, r) * p.w_left(r, c) + h(j, r) * p.w_right(r, c);
        e += p.attention(c, 0) * (z > 0.0 ? z : slope * z);
      }
      logit.push_back(e + beta * adj(i, j));
    }
    const double top = *std::max_element(logit.begin(), logit.end());
    double z = 0.0;
    for (double& e : logit) z += (e = std::exp(e - top));
    for (std::size_t a = 0; a < nbr.size(); ++a) {
      const Index j = nbr[a];
      for (Index c = 0; c < d; ++c) {
        double wh = 0.0;
        for (Index r = 0; r < h.cols(); ++r) wh += h(j, r) * p.w_right(r, c);
        out(i, c) += logit[a] / z * wh;
      }
    }
  }
  return out;
}

Matrix mha(const Matrix& m, const gnn::AttentionParams& p) {
  const Index n = m.rows();
  const auto heads = p.w_query.size();
  const Index dh = p.w_query.front().cols();
  Matrix cat(n, dh * static_cast<Index>(heads));
  for (std::size_t h = 0; h < heads; ++h) {
    const Matrix q = m * p.w_query[h];
    const Matrix k = m * p.w_key[h];
    const Matrix v = m * p.w_value[h];
    for (Index i = 0; i < n; ++i) {
      std::vector<double> w(static_cast<std::size_t>(n));
      double top = -INFINITY;
      for (Index j = 0; j < n; ++j) {
        double dot = 0.0;
        for (Index c = 0; c < dh; ++c) dot += q(i, c) * k(j, c);
        w[static_cast<std::size_t>(j)] = dot / std::sqrt(static_cast<double>(dh));
        top = std::max(top, w[static_cast<std::size_t>(j)]);
      }
      double z = 0.0;
      for (double& x : w) z += (x = std::exp(x - top));
      for (Index c = 0; c < dh; ++c) {
        double acc = 0.0;
        for (Index j = 0; j < n; ++j) acc += w[static_cast<std::size_t>(j)] / z * v(j, c);
        cat(i, static_cast<Index>(h) * dh + c) = acc;
      }
    }
  }
  return cat * p.w_out;
}

Matrix forward(const model::ModelParams& params, const Matrix& features, const Matrix& adj) {
  Matrix h = prelu(features * params.w_in, params.input_slopes);
  Matrix hp = h;
  for (const auto& b : params.blocks) {
    const Matrix prop = gatv2(h, adj, b.gat);
    const Matrix mixed = prop + h * b.w_skip;
    if (b.attention) {
      Matrix fused(h.rows(), 2 * h.cols());
      fused << hp, mixed;
      hp = prelu(mha(fused, *b.attention), b.slopes);
      h = prop;
    } else {
      h = prelu(mixed, b.slopes);
      hp = h;
    }
  }
  return hp * params.w_out;
}

double cross_entropy(const Matrix& logits, const LabelMatrix& labels, Index classes) {
  double total = 0.0;
  Index count = 0;
  for (Index i = 0; i < logits.rows(); ++i) {
    for (Index b = 0; b * classes < logits.cols(); ++b) {
      double z = 0.0;
      double picked = 0.0;
      for (Index c = 0; c < classes; ++c) {
        z += std::exp(logits(i, b * classes + c));
        if (labels(i, b * classes + c) == 1) picked = logits(i, b * classes + c);
      }
      total += std::log(z) - picked;
      ++count;
    }
  }
  return total / static_cast<double>(count);
}

Matrix permute(const Matrix& m, const std::vector<Index>& perm, bool both) {
  Matrix out(m.rows(), m.cols());
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      out(i, j) = m(perm[static_cast<std::size_t>(i)], both ? perm[static_cast<std::size_t>(j)] : j);
    }
  }
  return out;
}

std::vector<Index> random_permutation(Index n, Rng& rng) {
  std::vector<Index> p(static_cast<std::size_t>(n));
  std::iota(p.begin(), p.end(), Index{0});
  std::shuffle(p.begin(), p.end(), rng);
  return p;
}

LabelMatrix random_labels(Index rows, Index blocks, Index classes, Rng& rng) {
  std::uniform_int_distribution<Index> pick(0, classes - 1);
  LabelMatrix y = LabelMatrix::Zero(rows, blocks * classes);
  for (Index i = 0; i < rows; ++i) {
    for (Index b = 0; b < blocks; ++b) y(i, b * classes + pick(rng)) = 1;
  }
  return y;
}

ad::GradCheckReport model_grad_check(const model::ModelParams& params,
                                     const graph::GraphSnapshot& snapshot,
                                     const LabelMatrix& labels, const model::ModelConfig& config,
                                     std::span<const double> steps, double tol, double floor) {
  std::vector<Matrix> flat;
  model::visit_model([&](const std::string&, const Matrix& m) { flat.push_back(m); }, params);
  const ad::ScalarFunction f = [&](ad::Tape&, std::span<const ad::Value> values) {
    model::ModelVars vars;
    std::size_t next = 0;
    model::visit_model([&](const std::string&, const Matrix&, ad::Value& v) { v = values[next++]; },
                       params, vars);
    return model::loss(model::forward(vars, snapshot, config), labels, config);
  };
  return ad::grad_check(f, flat, steps, tol, floor);
}

TempDir::TempDir(const std::string& tag) {
  static std::atomic<int> counter{0};
  path_ = std::filesystem::temp_directory_path() /
          ("epgat_" + tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
  std::filesystem::remove_all(path_);
  std::filesystem::create_directories(path_);
}

TempDir::~TempDir() {
  std::error_code ec;
  std::filesystem::remove_all(path_, ec);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

}  // namespace epgat::oracle
