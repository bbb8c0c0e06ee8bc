// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "epgat/linalg.hpp"
#include "epgat/model.hpp"

#include <cstdint>

namespace epgat::optim {

struct AdamWConstants {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct OptimizerState {
  model::ModelParams first_moment;
  model::ModelParams second_moment;
  std::uint64_t step = 0;
  AdamWConstants constants;
};

/// Zero moments shaped like `params`.
OptimizerState make_state(const model::ModelParams& params, AdamWConstants constants = {});

/// One AdamW update of a single tensor at (1-based) step `step`:
///   theta <- theta * (1 - lr * wd)
///   m <- b1 m + (1 - b1) g,  v <- b2 v + (1 - b2) g^2
///   theta <- theta - lr * m_hat / (sqrt(v_hat) + eps)
void adamw_update(Matrix& theta, const Matrix& grad, Matrix& m, Matrix& v, std::uint64_t step,
                  double lr, double wd, const AdamWConstants& constants);

/// Updates every tensor. A non-finite gradient aborts before any tensor is
/// touched with a NumericError naming the parameter.
void adamw_step(model::ModelParams& params, const model::ModelParams& grads, OptimizerState& state,
                double lr, double wd);

}  // namespace epgat::optim
