#pragma once

#include <memory>

#include "xbert/batch.hpp"
#include "xbert/model_config.hpp"
#include "xbert/rng.hpp"
#include "xbert/tensor.hpp"

namespace xbert {

template <typename T>
struct Logits {
  Tensor<T> mlm;  // [batch, max_pred, vocab]
  Tensor<T> nsp;  // [batch, 2]
};

template <typename T>
struct LossValue {
  T total{};
  T mlm{};
  T nsp{};
};

template <typename T>
struct LossWithGrad {
  LossValue<T> value;
  Tensor<T> d_mlm;
  Tensor<T> d_nsp;
};

/// Post-layernorm BERT encoder with MLM and NSP heads.
///
/// A pass keeps the activations it needs so backward() can follow; one
/// object serves one forward/backward pair. Dropout is active only when
/// train_mode is set, cfg.dropout_prob > 0 and an RNG is supplied.
template <typename T>
class BertPass {
 public:
  BertPass();
  ~BertPass();
  BertPass(BertPass&&) noexcept;
  BertPass& operator=(BertPass&&) noexcept;

  Logits<T> forward(const ParameterSet<T>& params, const ModelConfig& cfg, const Batch& batch, bool train_mode,
                    Rng* dropout_rng = nullptr);

  /// Gradients of a scalar with respect to every parameter, given its
  /// gradients with respect to the two logit tensors.
  ParameterSet<T> backward(const Tensor<T>& d_mlm, const Tensor<T>& d_nsp);

 private:
  struct State;
  std::unique_ptr<State> s_;
};

template <typename T>
Logits<T> forward(const ParameterSet<T>& params, const ModelConfig& cfg, const Batch& batch, bool train_mode = false,
                  Rng* dropout_rng = nullptr) {
  return BertPass<T>().forward(params, cfg, batch, train_mode, dropout_rng);
}

/// Mean cross-entropy over real prediction slots plus mean NSP
/// cross-entropy. A batch without real slots has mlm = 0.
template <typename T>
LossWithGrad<T> loss(const Logits<T>& logits, const Batch& batch);

template <typename T>
struct TrainingSignal {
  LossValue<T> loss;
  ParameterSet<T> grads;
};

template <typename T>
TrainingSignal<T> loss_and_gradients(const ParameterSet<T>& params, const ModelConfig& cfg, const Batch& batch,
                                     bool train_mode, Rng* dropout_rng);

/// Deterministic truncated-normal initialization (see init_scratch).
template <typename T>
ParameterSet<T> init_parameters(const ModelConfig& cfg, std::uint64_t seed);

struct GradientCheckResult {
  double max_relative_error = 0.0;
  std::string worst_parameter;
  double worst_analytic = 0.0;
  double worst_numeric = 0.0;
  std::size_t checked_entries = 0;
};

/// Central finite differences against the analytic gradient of the total
/// loss, in double precision with dropout off. Up to `samples_per_tensor`
/// entries per tensor are probed (all entries when the tensor is smaller).
/// The relative error uses max(|a|, |n|, floor) as denominator.
GradientCheckResult gradient_check(ModelConfig cfg, std::uint64_t seed, double epsilon,
                                   std::size_t samples_per_tensor = 12, double floor = 1e-5);

/// A random batch consistent with the configuration, for tests and checks.
Batch random_batch(const ModelConfig& cfg, std::size_t batch_size, std::size_t seq_len, std::size_t max_predictions,
                   std::uint64_t seed);

}  // namespace xbert
