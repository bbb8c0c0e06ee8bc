// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/linalg.hpp"

#include <cstddef>
#include <deque>
#include <functional>
#include <span>
#include <vector>

namespace epgat::ad {

class Tape;

/// Handle to a dense matrix recorded on a Tape. Cheap to copy; valid while
/// its tape is alive.
class Value {
 public:
  Value() = default;

  bool valid() const { return tape_ != nullptr; }
  Tape& tape() const { return *tape_; }
  std::size_t id() const { return id_; }

  const Matrix& data() const;
  /// Accumulated gradient. Zero-filled when nothing flowed into this node.
  Matrix grad() const;
  Index rows() const { return data().rows(); }
  Index cols() const { return data().cols(); }

 private:
  friend class Tape;
  Value(Tape* tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape* tape_ = nullptr;
  std::size_t id_ = 0;
};

/// Ordered record of primitive applications. Nodes are appended in execution
/// order, so every node's inputs precede it and a reverse sweep is a valid
/// reverse topological order.
class Tape {
 public:
  /// Receives the node's output gradient and output value, and pushes
  /// contributions into its inputs through accumulate().
  using BackwardFn = std::function<void(Tape&, const Matrix& grad, const Matrix& out)>;

  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  /// Differentiable input.
  Value variable(Matrix data);
  /// Input that never receives a gradient.
  Value constant(Matrix data);

  /// Reverse sweep from a 1x1 value. One sweep per recording unless
  /// zero_grad() is called in between.
  void backward(const Value& loss);
  void zero_grad();

  std::size_t size() const { return nodes_.size(); }

  const Matrix& data(std::size_t id) const { return nodes_[id].data; }
  Matrix grad(std::size_t id) const;
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }

  /// Primitive plumbing: records an output computed from `inputs`.
  Value record(Matrix data, std::span<const Value> inputs, BackwardFn backward);
  /// Adds `contribution` to the gradient of `v` if it requires one.
  template <class Expr>
  void accumulate(const Value& v, const Expr& contribution) {
    auto& node = nodes_[v.id()];
    if (!node.requires_grad) return;
    if (node.grad.size() == 0) {
      node.grad = contribution;
    } else {
      node.grad += contribution;
    }
  }

 private:
  struct Node {
    Matrix data;
    Matrix grad;
    bool requires_grad = false;
    BackwardFn backward;
  };

  void check_owner(const Value& v) const;

  std::deque<Node> nodes_;
  bool swept_ = false;
};

// Primitives. Each checks shapes, computes the forward value, and records an
// analytic backward rule. Shape violations raise ShapeError.

Value matmul(const Value& a, const Value& b);
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value scale(const Value& a, double c);
/// s * a for a learnable 1x1 scalar s.
Value scale_by(const Value& a, const Value& s);
Value mul(const Value& a, const Value& b);
Value concat_cols(std::span<const Value> parts);
Value slice_cols(const Value& a, Index start, Index count);
Value transpose(const Value& a);
Value row_softmax(const Value& a);
/// Softmax over the positions where `valid` is true; masked positions get
/// probability 0 and no gradient. A row without valid positions raises
/// DegenerateNeighborhoodError.
Value masked_row_softmax(const Value& a, const Mask& valid);
Value leaky_relu(const Value& a, double slope);
/// Per-column learnable negative slope; `slopes` is 1 x cols.
Value prelu(const Value& a, const Value& slopes);
Value sum(const Value& a);
Value log(const Value& a);
/// Mean over rows and class blocks of -sum(target * log softmax(block)).
/// `targets` is one-hot within every block of `classes` columns.
Value cross_entropy_with_logits(const Value& logits, const LabelMatrix& targets, Index classes);
/// Row (i * b.rows() + j) equals a.row(i) + b.row(j).
Value pairwise_sum(const Value& a, const Value& b);
/// Row-major reinterpretation.
Value reshape(const Value& a, Index rows, Index cols);

/// Plain softmax used outside the tape (prediction, oracles).
Matrix softmax_rows(const Matrix& x);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t parameter = 0;
  Index row = 0;
  Index col = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  std::size_t coordinates = 0;
  bool passed = true;
};

/// f builds a 1x1 value on the given tape from the bound parameters.
using ScalarFunction = std::function<Value(Tape&, std::span<const Value>)>;

/// Central-difference check of every coordinate of every parameter. Relative
/// error is |a - n| / max(|a|, |n|, floor); `floor` sets the gradient
/// magnitude below which differences are judged against the floor instead,
/// roughly the finite-difference noise level.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const Matrix> params, double step,
                           double tol, double floor = 1e-8);

/// Same check with several step sizes: each coordinate keeps its smallest
/// error over the steps. Large steps can straddle the kink of a piecewise
/// linear unit and small ones amplify rounding, but a wrong analytic gradient
/// disagrees at every step.
GradCheckReport grad_check(const ScalarFunction& f, std::span<const Matrix> params,
                           std::span<const double> steps, double tol, double floor = 1e-8);

}  // namespace epgat::ad
