// SPDX-License-Identifier: Apache-2.0
#include "epgat/optimizer.hpp"

#include "epgat/errors.hpp"

#include <cmath>

namespace epgat::optim {

OptimizerState make_state(const model::ModelParams& params, AdamWConstants constants) {
  OptimizerState state;
  state.constants = constants;
  model::visit_model(
      [](const std::string&, const Matrix& p, Matrix& m, Matrix& v) {
        m = Matrix::Zero(p.rows(), p.cols());
        v = Matrix::Zero(p.rows(), p.cols());
      },
      params, state.first_moment, state.second_moment);
  return state;
}

void adamw_update(Matrix& theta, const Matrix& grad, Matrix& m, Matrix& v, std::uint64_t step,
                  double lr, double wd, const AdamWConstants& c) {
  theta *= 1.0 - lr * wd;
  m = c.beta1 * m + (1.0 - c.beta1) * grad;
  v = c.beta2 * v + (1.0 - c.beta2) * grad.cwiseProduct(grad);
  const double t = static_cast<double>(step);
  const double bias1 = 1.0 - std::pow(c.beta1, t);
  const double bias2 = 1.0 - std::pow(c.beta2, t);
  theta.array() -= lr * (m.array() / bias1) / ((v.array() / bias2).sqrt() + c.epsilon);
}

void adamw_step(model::ModelParams& params, const model::ModelParams& grads, OptimizerState& state,
                double lr, double wd) {
  model::visit_model(
      [](const std::string& name, const Matrix& p, const Matrix& g) {
        if (g.rows() != p.rows() || g.cols() != p.cols()) {
          throw ShapeError("adamw_step: gradient for " + name + " is " + shape_string(g) +
                           ", parameter is " + shape_string(p));
        }
        if (!g.allFinite()) throw NumericError("non-finite gradient in parameter " + name);
      },
      params, grads);
  ++state.step;
  model::visit_model(
      [&](const std::string&, Matrix& p, const Matrix& g, Matrix& m, Matrix& v) {
        adamw_update(p, g, m, v, state.step, lr, wd, state.constants);
      },
      params, grads, state.first_moment, state.second_moment);
}

}  // namespace epgat::optim
