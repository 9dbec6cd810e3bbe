#pragma once

#include <span>
#include <vector>

#include "ctxbias/matrix.hpp"

namespace ctxbias {

// Adadelta accumulators, one pair per parameter tensor.
//
//   E[g^2]  <- rho E[g^2]  + (1 - rho) g^2
//   dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
//   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
//   x       <- x + dx
struct AdadeltaState {
  double rho = 0.95;
  double eps = 1e-6;
  std::vector<Matrix> mean_sq_grad;
  std::vector<Matrix> mean_sq_update;

  AdadeltaState() = default;
  // Zero accumulators shaped like `params`.
  AdadeltaState(std::span<const Matrix* const> params, double rho = 0.95, double eps = 1e-6);

  friend bool operator==(const AdadeltaState&, const AdadeltaState&) = default;
};

void adadelta_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
                   AdadeltaState& state);

// params <- params - lr * grads. lr must be positive.
void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr);

}  // namespace ctxbias
