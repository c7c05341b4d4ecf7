#pragma once

#include <span>
#include <string>

#include "xbert/checkpoint.hpp"
#include "xbert/datagen.hpp"

namespace xbert {

struct Metrics {
  double mlm_accuracy = 0.0;
  double nsp_accuracy = 0.0;
  double mlm_loss = 0.0;
  double nsp_loss = 0.0;
  std::uint64_t instance_count = 0;
  std::uint64_t masked_position_count = 0;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

/// Top-1 accuracies and mean losses with dropout off. Batches may be
/// evaluated on several threads; per-batch sums are reduced in batch order.
Metrics evaluate(const ParameterSet<float>& params, const ModelConfig& cfg, std::span<const PretrainingInstance> data,
                 std::size_t batch_size = 64, unsigned threads = 1);
Metrics evaluate(const Checkpoint& ck, std::span<const PretrainingInstance> data, std::size_t batch_size = 64,
                 unsigned threads = 1);

}  // namespace xbert
