#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xbert/checkpoint.hpp"
#include "xbert/datagen.hpp"
#include "xbert/eval.hpp"
#include "xbert/optimizer.hpp"

namespace xbert {

struct TrainingConfig {
  std::uint64_t steps = 10000;
  std::size_t batch_size = 32;
  double learning_rate = 2e-5;
  std::uint64_t warmup_steps = 1000;
  AdamConfig adam;
  std::uint64_t seed = 0;
  /// Evaluate on the held-out set every this many steps; 0 disables.
  std::uint64_t eval_every = 0;

  void validate() const;
};

/// Peak rates used for the two kinds of pretraining cycles.
inline constexpr double kAdditionalPretrainingLr = 2e-5;
inline constexpr double kScratchPretrainingLr = 1e-4;
inline constexpr std::uint64_t kPretrainingSteps = 10000;

struct HistoryEntry {
  std::uint64_t step = 0;
  double total_loss = 0.0;
  double mlm_loss = 0.0;
  double nsp_loss = 0.0;
  std::optional<Metrics> eval;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<HistoryEntry> history;
  /// Set when training aborted on a non-finite value; `checkpoint` is then the
  /// last good state.
  std::optional<std::string> failure;
};

/// Fresh model: truncated normal (std 0.02) weights, zero biases, unit
/// layer-norm gains, zeroed optimizer state.
Checkpoint init_scratch(const ModelConfig& cfg, const Vocabulary& v, std::uint64_t seed);

/// Replaces the vocabulary of a trained checkpoint. Sizes and the special
/// tokens must match. Positional keeps embedding rows by index; aligned moves
/// rows of shared tokens to their new ids and draws fresh rows (MLM bias 0)
/// for the rest. Every other tensor is carried over unchanged and the
/// optimizer state is reset.
Checkpoint swap_vocabulary(const Checkpoint& ck, const Vocabulary& new_vocab, SwapPolicy policy, std::uint64_t seed);

using StepCallback = std::function<void(const HistoryEntry&)>;

/// Adam with warmup/linear decay, global-norm clipping and seeded batch
/// order (reshuffled at every pass over the data).
TrainResult train(const Checkpoint& start, std::span<const PretrainingInstance> data, const TrainingConfig& tcfg,
                  std::span<const PretrainingInstance> eval_data = {}, const StepCallback& on_step = {});

/// History as text: one "step total mlm nsp" line per entry, full precision.
std::string format_history(const std::vector<HistoryEntry>& history);

}  // namespace xbert
