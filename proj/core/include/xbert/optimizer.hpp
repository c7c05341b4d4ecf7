#pragma once

#include <cstdint>

#include "xbert/checkpoint.hpp"
#include "xbert/tensor.hpp"

namespace xbert {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 0.01;
  double grad_clip_norm = 1.0;
};

/// Linear warmup to `peak` over `warmup` steps, then linear decay reaching 0
/// at `total`. `step` is the zero-based index of the update being applied.
double scheduled_learning_rate(double peak, std::uint64_t step, std::uint64_t warmup, std::uint64_t total);

double global_norm(const ParameterSet<float>& grads);

/// One Adam update with decoupled weight decay (biases and layer norms
/// exempt) after clipping the gradients to the configured global norm.
/// Returns false and leaves everything untouched if the update would produce
/// a non-finite value.
bool adam_step(ParameterSet<float>& params, OptimizerState& state, ParameterSet<float>& grads, double lr,
               const AdamConfig& cfg);

}  // namespace xbert
