#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "xbert/datagen.hpp"

namespace xbert {

/// Row-stacked instances. Prediction slots beyond an instance's masked count
/// hold position 0 / label 0 with weight 0.
struct Batch {
  std::size_t batch_size = 0;
  std::size_t seq_len = 0;
  std::size_t max_predictions = 0;
  std::vector<TokenId> token_ids;          // [batch, seq]
  std::vector<std::uint8_t> segment_ids;   // [batch, seq]
  std::vector<std::uint8_t> attention_mask;  // [batch, seq]
  std::vector<std::int32_t> masked_positions;  // [batch, max_pred]
  std::vector<TokenId> masked_labels;          // [batch, max_pred]
  std::vector<std::uint8_t> masked_weights;    // [batch, max_pred]
  std::vector<std::int32_t> nsp_labels;        // [batch], 1 = random next

  std::size_t real_predictions() const noexcept;
};

Batch make_batch(std::span<const PretrainingInstance* const> rows, std::size_t max_predictions);
Batch make_batch(std::span<const PretrainingInstance> rows, std::size_t max_predictions);

/// Largest masked count over the instances (at least 1).
std::size_t max_masked(std::span<const PretrainingInstance> rows);

}  // namespace xbert
