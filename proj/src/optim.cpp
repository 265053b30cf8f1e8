#include "dcnn/optim.hpp"

#include <cmath>

namespace dcnn::nn {
namespace {

template <typename Real>
void require_finite(std::span<Parameter<Real>* const> params) {
  for (const auto* p : params) {
    for (Real g : p->grad.data()) {
      if (!std::isfinite(g)) throw NumericError("non-finite gradient in '" + p->name + "'");
    }
  }
}

}  // namespace

template <typename Real>
void adadelta_update(BasicTensor<Real>& param, const BasicTensor<Real>& grad,
                     BasicTensor<Real>& sq_grad, BasicTensor<Real>& sq_update,
                     const AdadeltaConfig& config) {
  if (grad.shape() != param.shape() || sq_grad.shape() != param.shape() ||
      sq_update.shape() != param.shape()) {
    throw ShapeError("adadelta: parameter, gradient and accumulator shapes differ");
  }
  const Real rho = static_cast<Real>(config.rho);
  const Real eps = static_cast<Real>(config.eps);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const Real g = grad[i];
    sq_grad[i] = rho * sq_grad[i] + (Real(1) - rho) * g * g;
    const Real dx = -std::sqrt(sq_update[i] + eps) / std::sqrt(sq_grad[i] + eps) * g;
    sq_update[i] = rho * sq_update[i] + (Real(1) - rho) * dx * dx;
    param[i] += dx;
  }
}

template <typename Real>
void adadelta_step(std::span<Parameter<Real>* const> params, OptimizerState<Real>& state) {
  if (!(state.config.rho > 0 && state.config.rho < 1) || !(state.config.eps > 0)) {
    throw ParameterError("adadelta: need 0 < rho < 1 and eps > 0");
  }
  require_finite(params);
  if (state.sq_grad.empty()) {
    for (const auto* p : params) {
      state.sq_grad.emplace_back(p->value.shape());
      state.sq_update.emplace_back(p->value.shape());
    }
  }
  if (state.sq_grad.size() != params.size()) {
    throw ShapeError("adadelta: optimizer state tracks a different parameter set");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    adadelta_update(params[i]->value, params[i]->grad, state.sq_grad[i], state.sq_update[i],
                    state.config);
  }
}

template <typename Real>
void sgd_step(std::span<Parameter<Real>* const> params, double lr) {
  if (!(lr > 0)) throw ParameterError("sgd: learning rate must be > 0");
  require_finite(params);
  const Real step = static_cast<Real>(lr);
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) p->value[i] -= step * p->grad[i];
  }
}

#define DCNN_INSTANTIATE(Real)                                                        \
  template void adadelta_update(BasicTensor<Real>&, const BasicTensor<Real>&,         \
                                BasicTensor<Real>&, BasicTensor<Real>&,               \
                                const AdadeltaConfig&);                               \
  template void adadelta_step(std::span<Parameter<Real>* const>, OptimizerState<Real>&); \
  template void sgd_step(std::span<Parameter<Real>* const>, double);

DCNN_INSTANTIATE(float)
DCNN_INSTANTIATE(double)
#undef DCNN_INSTANTIATE

}  // namespace dcnn::nn
