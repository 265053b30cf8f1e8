#pragma once

#include <span>
#include <vector>

#include "dcnn/layers.hpp"

namespace dcnn::nn {

struct AdadeltaConfig {
  double rho = 0.95;
  double eps = 1e-6;
};

/// Per-parameter running averages of squared gradients and squared updates.
/// Accumulators are created as zeros on the first step.
template <typename Real>
struct OptimizerState {
  AdadeltaConfig config;
  std::vector<BasicTensor<Real>> sq_grad;
  std::vector<BasicTensor<Real>> sq_update;
};

/// One Adadelta update of a single tensor:
///   E[g^2]  <- rho E[g^2] + (1 - rho) g^2
///   dx      <- -sqrt(E[dx^2] + eps) / sqrt(E[g^2] + eps) * g
///   E[dx^2] <- rho E[dx^2] + (1 - rho) dx^2
///   x       <- x + dx
template <typename Real>
void adadelta_update(BasicTensor<Real>& param, const BasicTensor<Real>& grad,
                     BasicTensor<Real>& sq_grad, BasicTensor<Real>& sq_update,
                     const AdadeltaConfig& config);

/// Throws NumericError on non-finite gradients (before touching anything).
template <typename Real>
void adadelta_step(std::span<Parameter<Real>* const> params, OptimizerState<Real>& state);

/// x <- x - lr g. Throws ParameterError unless lr > 0.
template <typename Real>
void sgd_step(std::span<Parameter<Real>* const> params, double lr);

}  // namespace dcnn::nn
