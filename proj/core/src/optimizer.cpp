#include "xbert/optimizer.hpp"

#include <cmath>

#include "xbert/model_config.hpp"

namespace xbert {

double scheduled_learning_rate(double peak, std::uint64_t step, std::uint64_t warmup, std::uint64_t total) {
  if (step >= total) return 0.0;
  if (step < warmup) return peak * static_cast<double>(step + 1) / static_cast<double>(warmup);
  return peak * static_cast<double>(total - step) / static_cast<double>(total - warmup);
}

double global_norm(const ParameterSet<float>& grads) {
  double sq = 0.0;
  for (const auto& [_, t] : grads)
    for (float g : t.data) sq += static_cast<double>(g) * g;
  return std::sqrt(sq);
}

bool adam_step(ParameterSet<float>& params, OptimizerState& state, ParameterSet<float>& grads, double lr,
               const AdamConfig& cfg) {
  const double norm = global_norm(grads);
  if (!std::isfinite(norm)) return false;
  const double clip = (cfg.grad_clip_norm > 0.0 && norm > cfg.grad_clip_norm) ? cfg.grad_clip_norm / norm : 1.0;

  const std::uint64_t t = state.step + 1;
  const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
  const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));

  ParameterSet<float> new_params = params;
  OptimizerState new_state = state;
  for (auto& [name, p] : new_params) {
    auto& m = new_state.first_moment.at(name).data;
    auto& v = new_state.second_moment.at(name).data;
    const auto& g = grads.at(name).data;
    const double decay = is_no_decay(name) ? 0.0 : cfg.weight_decay;
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      const double gi = static_cast<double>(g[i]) * clip;
      const double mi = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * gi;
      const double vi = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * gi * gi;
      const double update = (mi / c1) / (std::sqrt(vi / c2) + cfg.epsilon) + decay * p.data[i];
      const double next = p.data[i] - lr * update;
      if (!std::isfinite(next)) return false;
      m[i] = static_cast<float>(mi);
      v[i] = static_cast<float>(vi);
      p.data[i] = static_cast<float>(next);
    }
  }
  new_state.step = t;
  params = std::move(new_params);
  state = std::move(new_state);
  return true;
}

}  // namespace xbert
