// SPDX-License-Identifier: Apache-2.0
#include "epgat/autodiff.hpp"

#include "epgat/errors.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace epgat::ad {

namespace {

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a) + " vs " +
                   shape_string(b));
}

void require_same_shape(const char* op, const Value& a, const Value& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail(op, a.data(), b.data());
}

}  // namespace

const Matrix& Value::data() const { return tape_->data(id_); }

Matrix Value::grad() const { return tape_->grad(id_); }

Matrix Tape::grad(std::size_t id) const {
  const auto& node = nodes_[id];
  if (node.grad.size() == 0) return Matrix::Zero(node.data.rows(), node.data.cols());
  return node.grad;
}

Value Tape::variable(Matrix data) {
  nodes_.push_back({std::move(data), Matrix(), true, nullptr});
  return Value(this, nodes_.size() - 1);
}

Value Tape::constant(Matrix data) {
  nodes_.push_back({std::move(data), Matrix(), false, nullptr});
  return Value(this, nodes_.size() - 1);
}

void Tape::check_owner(const Value& v) const {
  if (!v.valid() || &v.tape() != this || v.id() >= nodes_.size()) {
    throw Error("value does not belong to this tape");
  }
}

Value Tape::record(Matrix data, std::span<const Value> inputs, BackwardFn backward) {
  bool needs = false;
  for (const auto& in : inputs) {
    check_owner(in);
    needs = needs || nodes_[in.id()].requires_grad;
  }
  nodes_.push_back({std::move(data), Matrix(), needs, needs ? std::move(backward) : nullptr});
  return Value(this, nodes_.size() - 1);
}

void Tape::backward(const Value& loss) {
  check_owner(loss);
  if (loss.rows() != 1 || loss.cols() != 1) {
    throw ShapeError("backward: loss must be 1x1, got " + shape_string(loss.data()));
  }
  if (swept_) throw Error("backward: tape already swept; call zero_grad() first");
  swept_ = true;
  if (!nodes_[loss.id()].requires_grad) return;
  nodes_[loss.id()].grad = Matrix::Ones(1, 1);
  for (std::size_t i = loss.id() + 1; i-- > 0;) {
    auto& node = nodes_[i];
    if (node.backward && node.grad.size() != 0) node.backward(*this, node.grad, node.data);
  }
}

void Tape::zero_grad() {
  for (auto& node : nodes_) node.grad.resize(0, 0);
  swept_ = false;
}

Value matmul(const Value& a, const Value& b) {
  if (a.cols() != b.rows()) shape_fail("matmul", a.data(), b.data());
  Matrix out = a.data() * b.data();
  const Value ins[] = {a, b};
  return a.tape().record(std::move(out), ins, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a.id())) t.accumulate(a, g * b.data().transpose());
    if (t.requires_grad(b.id())) t.accumulate(b, a.data().transpose() * g);
  });
}

Value add(const Value& a, const Value& b) {
  require_same_shape("add", a, b);
  Matrix out = a.data() + b.data();
  const Value ins[] = {a, b};
  return a.tape().record(std::move(out), ins, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, g);
  });
}

Value sub(const Value& a, const Value& b) {
  require_same_shape("sub", a, b);
  Matrix out = a.data() - b.data();
  const Value ins[] = {a, b};
  return a.tape().record(std::move(out), ins, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g);
    t.accumulate(b, -g);
  });
}

Value scale(const Value& a, double c) {
  Matrix out = c * a.data();
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins,
                         [a, c](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, c * g); });
}

Value scale_by(const Value& a, const Value& s) {
  if (s.rows() != 1 || s.cols() != 1) shape_fail("scale_by", a.data(), s.data());
  Matrix out = s.data()(0, 0) * a.data();
  const Value ins[] = {a, s};
  return a.tape().record(std::move(out), ins, [a, s](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a.id())) t.accumulate(a, s.data()(0, 0) * g);
    if (t.requires_grad(s.id())) {
      t.accumulate(s, Matrix::Constant(1, 1, g.cwiseProduct(a.data()).sum()));
    }
  });
}

Value mul(const Value& a, const Value& b) {
  require_same_shape("mul", a, b);
  Matrix out = a.data().cwiseProduct(b.data());
  const Value ins[] = {a, b};
  return a.tape().record(std::move(out), ins, [a, b](Tape& t, const Matrix& g, const Matrix&) {
    if (t.requires_grad(a.id())) t.accumulate(a, g.cwiseProduct(b.data()));
    if (t.requires_grad(b.id())) t.accumulate(b, g.cwiseProduct(a.data()));
  });
}

Value concat_cols(std::span<const Value> parts) {
  if (parts.empty()) throw ShapeError("concat_cols: no inputs");
  const Index rows = parts.front().rows();
  Index cols = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) shape_fail("concat_cols", parts.front().data(), p.data());
    cols += p.cols();
  }
  Matrix out(rows, cols);
  Index offset = 0;
  for (const auto& p : parts) {
    out.middleCols(offset, p.cols()) = p.data();
    offset += p.cols();
  }
  std::vector<Value> inputs(parts.begin(), parts.end());
  return parts.front().tape().record(std::move(out), parts, [inputs](Tape& t, const Matrix& g, const Matrix&) {
    Index off = 0;
    for (const auto& p : inputs) {
      t.accumulate(p, g.middleCols(off, p.cols()));
      off += p.cols();
    }
  });
}

Value slice_cols(const Value& a, Index start, Index count) {
  if (start < 0 || count < 0 || start + count > a.cols()) {
    throw ShapeError("slice_cols: columns [" + std::to_string(start) + ", " +
                     std::to_string(start + count) + ") out of " + shape_string(a.data()));
  }
  Matrix out = a.data().middleCols(start, count);
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins, [a, start, count](Tape& t, const Matrix& g, const Matrix&) {
    Matrix full = Matrix::Zero(a.rows(), a.cols());
    full.middleCols(start, count) = g;
    t.accumulate(a, full);
  });
}

Value transpose(const Value& a) {
  Matrix out = a.data().transpose();
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins,
                         [a](Tape& t, const Matrix& g, const Matrix&) { t.accumulate(a, g.transpose()); });
}

Matrix softmax_rows(const Matrix& x) {
  Matrix y(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const double m = x.row(i).maxCoeff();
    y.row(i) = (x.row(i).array() - m).exp();
    y.row(i) /= y.row(i).sum();
  }
  return y;
}

namespace {

// dL/dx = y * (g - rowsum(g * y)); masked entries have y = 0 and get nothing.
Matrix softmax_backward(const Matrix& y, const Matrix& g) {
  const Eigen::VectorXd dot = g.cwiseProduct(y).rowwise().sum();
  return y.cwiseProduct(g - dot.replicate(1, g.cols()));
}

}  // namespace

Value row_softmax(const Value& a) {
  Matrix out = softmax_rows(a.data());
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins, [a](Tape& t, const Matrix& g, const Matrix& y) {
    t.accumulate(a, softmax_backward(y, g));
  });
}

Value masked_row_softmax(const Value& a, const Mask& valid) {
  if (valid.rows() != a.rows() || valid.cols() != a.cols()) {
    throw ShapeError("masked_row_softmax: mask " + shape_string(valid) + " vs input " +
                     shape_string(a.data()));
  }
  const Matrix& x = a.data();
  Matrix y = Matrix::Zero(x.rows(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    double m = -std::numeric_limits<double>::infinity();
    for (Index j = 0; j < x.cols(); ++j) {
      if (valid(i, j)) m = std::max(m, x(i, j));
    }
    if (m == -std::numeric_limits<double>::infinity()) {
      throw DegenerateNeighborhoodError("masked_row_softmax: row " + std::to_string(i) +
                                        " has no valid position");
    }
    double total = 0.0;
    for (Index j = 0; j < x.cols(); ++j) {
      if (valid(i, j)) {
        y(i, j) = std::exp(x(i, j) - m);
        total += y(i, j);
      }
    }
    y.row(i) /= total;
  }
  const Value ins[] = {a};
  return a.tape().record(std::move(y), ins, [a](Tape& t, const Matrix& g, const Matrix& out) {
    t.accumulate(a, softmax_backward(out, g));
  });
}

Value leaky_relu(const Value& a, double slope) {
  const Matrix& x = a.data();
  Matrix out = (x.array() > 0.0).select(x, slope * x);
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins, [a, slope](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix& xin = a.data();
    t.accumulate(a, (xin.array() > 0.0).select(g, slope * g));
  });
}

Value prelu(const Value& a, const Value& slopes) {
  if (slopes.rows() != 1 || slopes.cols() != a.cols()) shape_fail("prelu", a.data(), slopes.data());
  const Matrix& x = a.data();
  Matrix out = x;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index j = 0; j < x.cols(); ++j) {
      if (!(x(i, j) > 0.0)) out(i, j) = slopes.data()(0, j) * x(i, j);
    }
  }
  const Value ins[] = {a, slopes};
  return a.tape().record(std::move(out), ins, [a, slopes](Tape& t, const Matrix& g, const Matrix&) {
    const Matrix& xin = a.data();
    const Matrix& s = slopes.data();
    Matrix gx = g;
    Matrix gs = Matrix::Zero(1, s.cols());
    for (Index i = 0; i < xin.rows(); ++i) {
      for (Index j = 0; j < xin.cols(); ++j) {
        if (!(xin(i, j) > 0.0)) {
          gx(i, j) = s(0, j) * g(i, j);
          gs(0, j) += g(i, j) * xin(i, j);
        }
      }
    }
    if (t.requires_grad(a.id())) t.accumulate(a, gx);
    if (t.requires_grad(slopes.id())) t.accumulate(slopes, gs);
  });
}

Value sum(const Value& a) {
  Matrix out = Matrix::Constant(1, 1, a.data().sum());
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, Matrix::Constant(a.rows(), a.cols(), g(0, 0)));
  });
}

Value log(const Value& a) {
  Matrix out = a.data().array().log();
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, g.cwiseQuotient(a.data()));
  });
}

Value cross_entropy_with_logits(const Value& logits, const LabelMatrix& targets, Index classes) {
  if (targets.rows() != logits.rows() || targets.cols() != logits.cols()) {
    throw ShapeError("cross_entropy_with_logits: targets " + shape_string(targets) + " vs logits " +
                     shape_string(logits.data()));
  }
  if (classes < 1 || logits.cols() % classes != 0) {
    throw ShapeError("cross_entropy_with_logits: " + std::to_string(logits.cols()) +
                     " columns not divisible into blocks of " + std::to_string(classes));
  }
  const Index blocks = logits.cols() / classes;
  for (Index i = 0; i < targets.rows(); ++i) {
    for (Index b = 0; b < blocks; ++b) {
      int ones = 0;
      for (Index c = 0; c < classes; ++c) {
        const int v = targets(i, b * classes + c);
        if (v != 0 && v != 1) throw LabelError("label entries must be 0 or 1");
        ones += v;
      }
      if (ones != 1) {
        throw LabelError("label row " + std::to_string(i) + " block " + std::to_string(b) +
                         " is not one-hot");
      }
    }
  }
  const Matrix& x = logits.data();
  Matrix probs(x.rows(), x.cols());
  double total = 0.0;
  for (Index i = 0; i < x.rows(); ++i) {
    for (Index b = 0; b < blocks; ++b) {
      const auto block = x.row(i).segment(b * classes, classes);
      const double m = block.maxCoeff();
      const double lse = m + std::log((block.array() - m).exp().sum());
      for (Index c = 0; c < classes; ++c) {
        probs(i, b * classes + c) = std::exp(block(c) - lse);
        if (targets(i, b * classes + c) == 1) total -= block(c) - lse;
      }
    }
  }
  const double count = static_cast<double>(x.rows() * blocks);
  Matrix out = Matrix::Constant(1, 1, total / count);
  Matrix dlogits = (probs - targets.cast<double>()) / count;
  const Value ins[] = {logits};
  return logits.tape().record(
      std::move(out), ins,
      [logits, dlogits = std::move(dlogits)](Tape& t, const Matrix& g, const Matrix&) {
        t.accumulate(logits, g(0, 0) * dlogits);
      });
}

Value pairwise_sum(const Value& a, const Value& b) {
  if (a.cols() != b.cols()) shape_fail("pairwise_sum", a.data(), b.data());
  const Index n = a.rows();
  const Index m = b.rows();
  Matrix out(n * m, a.cols());
  for (Index i = 0; i < n; ++i) {
    for (Index j = 0; j < m; ++j) out.row(i * m + j) = a.data().row(i) + b.data().row(j);
  }
  const Value ins[] = {a, b};
  return a.tape().record(std::move(out), ins, [a, b, n, m](Tape& t, const Matrix& g, const Matrix&) {
    Matrix ga = Matrix::Zero(n, a.cols());
    Matrix gb = Matrix::Zero(m, b.cols());
    for (Index i = 0; i < n; ++i) {
      for (Index j = 0; j < m; ++j) {
        ga.row(i) += g.row(i * m + j);
        gb.row(j) += g.row(i * m + j);
      }
    }
    if (t.requires_grad(a.id())) t.accumulate(a, ga);
    if (t.requires_grad(b.id())) t.accumulate(b, gb);
  });
}

Value reshape(const Value& a, Index rows, Index cols) {
  if (rows * cols != a.data().size()) {
    throw ShapeError("reshape: cannot view " + shape_string(a.data()) + " as " +
                     shape_string(rows, cols));
  }
  Matrix out = Eigen::Map<const Matrix>(a.data().data(), rows, cols);
  const Value ins[] = {a};
  return a.tape().record(std::move(out), ins, [a](Tape& t, const Matrix& g, const Matrix&) {
    t.accumulate(a, Eigen::Map<const Matrix>(g.data(), a.rows(), a.cols()));
  });
}

namespace {

double evaluate(const ScalarFunction& f, std::span<const Matrix> params) {
  Tape tape;
  std::vector<Value> vars;
  vars.reserve(params.size());
  for (const auto& p : params) vars.push_back(tape.variable(p));
  const Value out = f(tape, vars);
  if (out.rows() != 1 || out.cols() != 1) {
    throw ShapeError("grad_check: function must return 1x1, got " + shape_string(out.data()));
  }
  return out.data()(0, 0);
}

}  // namespace

GradCheckReport grad_check(const ScalarFunction& f, std::span<const Matrix> params, double step,
                           double tol, double floor) {
  const double steps[] = {step};
  return grad_check(f, params, steps, tol, floor);
}

GradCheckReport grad_check(const ScalarFunction& f, std::span<const Matrix> params,
                           std::span<const double> steps, double tol, double floor) {
  if (steps.empty()) throw ConfigError("grad_check: no step sizes");
  for (double step : steps) {
    if (!(step > 0.0)) throw ConfigError("grad_check: step must be positive");
  }
  if (!(floor > 0.0)) throw ConfigError("grad_check: floor must be positive");
  std::vector<Matrix> analytic;
  double base = 0.0;
  {
    Tape tape;
    std::vector<Value> vars;
    for (const auto& p : params) vars.push_back(tape.variable(p));
    const Value out = f(tape, vars);
    if (out.rows() != 1 || out.cols() != 1) {
      throw ShapeError("grad_check: function must return 1x1, got " + shape_string(out.data()));
    }
    base = out.data()(0, 0);
    tape.backward(out);
    for (const auto& v : vars) analytic.push_back(v.grad());
  }
  if (evaluate(f, params) != base || evaluate(f, params) != base) {
    throw DeterminismError("grad_check: function is not deterministic");
  }

  GradCheckReport report;
  std::vector<Matrix> probe(params.begin(), params.end());
  for (std::size_t p = 0; p < probe.size(); ++p) {
    for (Index r = 0; r < probe[p].rows(); ++r) {
      for (Index c = 0; c < probe[p].cols(); ++c) {
        const double original = probe[p](r, c);
        const double a = analytic[p](r, c);
        double rel = std::numeric_limits<double>::infinity();
        double numeric = 0.0;
        for (double step : steps) {
          probe[p](r, c) = original + step;
          const double up = evaluate(f, probe);
          probe[p](r, c) = original - step;
          const double down = evaluate(f, probe);
          probe[p](r, c) = original;
          const double n = (up - down) / (2.0 * step);
          const double e = std::abs(a - n) / std::max({std::abs(a), std::abs(n), floor});
          if (e < rel) {
            rel = e;
            numeric = n;
          }
        }
        ++report.coordinates;
        if (report.coordinates == 1 || rel > report.max_relative_error) {
          report.max_relative_error = rel;
          report.parameter = p;
          report.row = r;
          report.col = c;
          report.analytic = a;
          report.numeric = numeric;
        }
      }
    }
  }
  report.passed = report.max_relative_error <= tol;
  return report;
}

}  // namespace epgat::ad
