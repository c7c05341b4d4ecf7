#include "xbert/batch.hpp"

#include <algorithm>

#include "xbert/error.hpp"

namespace xbert {

std::size_t Batch::real_predictions() const noexcept {
  std::size_t n = 0;
  for (auto w : masked_weights) n += w;
  return n;
}

Batch make_batch(std::span<const PretrainingInstance* const> rows, std::size_t max_predictions) {
  if (rows.empty()) fail(ErrorCategory::kData, "empty batch");
  Batch b;
  b.batch_size = rows.size();
  b.seq_len = rows.front()->token_ids.size();
  b.max_predictions = max_predictions;
  b.token_ids.reserve(b.batch_size * b.seq_len);
  b.masked_positions.assign(b.batch_size * max_predictions, 0);
  b.masked_labels.assign(b.batch_size * max_predictions, 0);
  b.masked_weights.assign(b.batch_size * max_predictions, 0);
  for (std::size_t r = 0; r < rows.size(); ++r) {
    const auto& inst = *rows[r];
    if (inst.token_ids.size() != b.seq_len) fail(ErrorCategory::kData, "instances in a batch differ in length");
    if (inst.masked_positions.size() > max_predictions)
      fail(ErrorCategory::kData, "instance has more masked positions than the batch allows");
    b.token_ids.insert(b.token_ids.end(), inst.token_ids.begin(), inst.token_ids.end());
    b.segment_ids.insert(b.segment_ids.end(), inst.segment_ids.begin(), inst.segment_ids.end());
    b.attention_mask.insert(b.attention_mask.end(), inst.attention_mask.begin(), inst.attention_mask.end());
    for (std::size_t j = 0; j < inst.masked_positions.size(); ++j) {
      b.masked_positions[r * max_predictions + j] = inst.masked_positions[j];
      b.masked_labels[r * max_predictions + j] = inst.masked_labels[j];
      b.masked_weights[r * max_predictions + j] = 1;
    }
    b.nsp_labels.push_back(inst.is_random_next ? 1 : 0);
  }
  return b;
}

Batch make_batch(std::span<const PretrainingInstance> rows, std::size_t max_predictions) {
  std::vector<const PretrainingInstance*> ptrs;
  ptrs.reserve(rows.size());
  for (const auto& r : rows) ptrs.push_back(&r);
  return make_batch(std::span<const PretrainingInstance* const>(ptrs), max_predictions);
}

std::size_t max_masked(std::span<const PretrainingInstance> rows) {
  std::size_t m = 1;
  for (const auto& r : rows) m = std::max(m, r.masked_positions.size());
  return m;
}

}  // namespace xbert
