#include "ctxbias/optim.hpp"

#include <cmath>
#include <string>

#include "ctxbias/error.hpp"

namespace ctxbias {

namespace {

void check_aligned(std::span<Matrix* const> params, std::span<const Matrix> grads,
                   const char* op) {
  if (params.size() != grads.size()) {
    throw ShapeError(std::string(op) + ": " + std::to_string(params.size()) + " parameters but " +
                     std::to_string(grads.size()) + " gradients");
  }
  for (std::size_t i = 0; i < params.size(); ++i) require_same_shape(*params[i], grads[i], op);
}

}  // namespace

AdadeltaState::AdadeltaState(std::span<const Matrix* const> params, double rho_, double eps_)
    : rho(rho_), eps(eps_) {
  if (!(rho > 0.0 && rho < 1.0)) throw ParameterError("Adadelta: rho must lie in (0, 1)");
  if (!(eps > 0.0)) throw ParameterError("Adadelta: eps must be positive");
  for (const Matrix* p : params) {
    mean_sq_grad.emplace_back(p->rows(), p->cols());
    mean_sq_update.emplace_back(p->rows(), p->cols());
  }
}

void adadelta_step(std::span<Matrix* const> params, std::span<const Matrix> grads,
                   AdadeltaState& state) {
  check_aligned(params, grads, "adadelta_step");
  if (state.mean_sq_grad.size() != params.size() || state.mean_sq_update.size() != params.size()) {
    throw ShapeError("adadelta_step: optimizer state holds " +
                     std::to_string(state.mean_sq_grad.size()) + " tensors for " +
                     std::to_string(params.size()) + " parameters");
  }
  const double rho = state.rho;
  const double eps = state.eps;
  for (std::size_t k = 0; k < params.size(); ++k) {
    require_same_shape(*params[k], state.mean_sq_grad[k], "adadelta_step");
    require_same_shape(*params[k], state.mean_sq_update[k], "adadelta_step");
    auto x = params[k]->values();
    auto g = grads[k].values();
    auto eg2 = state.mean_sq_grad[k].values();
    auto edx2 = state.mean_sq_update[k].values();
    for (std::size_t i = 0; i < x.size(); ++i) {
      eg2[i] = rho * eg2[i] + (1.0 - rho) * g[i] * g[i];
      const double dx = -(std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps)) * g[i];
      edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
      x[i] += dx;
    }
  }
}

void sgd_step(std::span<Matrix* const> params, std::span<const Matrix> grads, double lr) {
  if (!(lr > 0.0)) throw ParameterError("sgd_step: learning rate must be positive");
  check_aligned(params, grads, "sgd_step");
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto x = params[k]->values();
    auto g = grads[k].values();
    for (std::size_t i = 0; i < x.size(); ++i) x[i] -= lr * g[i];
  }
}

}  // namespace ctxbias
