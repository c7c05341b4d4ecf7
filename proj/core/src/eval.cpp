#include "xbert/eval.hpp"

#include <cmath>

#include "xbert/batch.hpp"
#include "xbert/bert.hpp"
#include "xbert/parallel.hpp"

namespace xbert {
namespace {

struct Tally {
  std::uint64_t mlm_correct = 0;
  std::uint64_t masked = 0;
  std::uint64_t nsp_correct = 0;
  std::uint64_t instances = 0;
  double mlm_loss_sum = 0.0;
  double nsp_loss_sum = 0.0;
};

template <typename T>
std::size_t argmax(const T* row, std::size_t n) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (row[i] > row[best]) best = i;
  return best;
}

Tally evaluate_batch(const ParameterSet<float>& params, const ModelConfig& cfg, const Batch& batch) {
  const auto logits = forward(params, cfg, batch);
  const auto l = loss(logits, batch);
  Tally t;
  const std::size_t V = cfg.vocab_size;
  for (std::size_t m = 0; m < batch.batch_size * batch.max_predictions; ++m) {
    if (!batch.masked_weights[m]) continue;
    ++t.masked;
    if (argmax(logits.mlm.data.data() + m * V, V) == static_cast<std::size_t>(batch.masked_labels[m])) ++t.mlm_correct;
  }
  for (std::size_t b = 0; b < batch.batch_size; ++b) {
    ++t.instances;
    if (argmax(logits.nsp.data.data() + b * 2, 2) == static_cast<std::size_t>(batch.nsp_labels[b])) ++t.nsp_correct;
  }
  t.mlm_loss_sum = static_cast<double>(l.value.mlm) * static_cast<double>(t.masked);
  t.nsp_loss_sum = static_cast<double>(l.value.nsp) * static_cast<double>(t.instances);
  return t;
}

}  // namespace

Metrics evaluate(const ParameterSet<float>& params, const ModelConfig& cfg, std::span<const PretrainingInstance> data,
                 std::size_t batch_size, unsigned threads) {
  if (data.empty()) fail(ErrorCategory::kData, "evaluation set is empty");
  if (batch_size == 0) fail(ErrorCategory::kConfig, "batch size must be positive");
  const std::size_t max_pred = max_masked(data);
  const std::size_t n_batches = (data.size() + batch_size - 1) / batch_size;
  std::vector<Tally> tallies(n_batches);
  parallel_for(n_batches, threads, [&](std::size_t i) {
    const std::size_t first = i * batch_size;
    const std::size_t count = std::min(batch_size, data.size() - first);
    tallies[i] = evaluate_batch(params, cfg, make_batch(data.subspan(first, count), max_pred));
  });
  Tally sum;
  for (const auto& t : tallies) {
    sum.mlm_correct += t.mlm_correct;
    sum.masked += t.masked;
    sum.nsp_correct += t.nsp_correct;
    sum.instances += t.instances;
    sum.mlm_loss_sum += t.mlm_loss_sum;
    sum.nsp_loss_sum += t.nsp_loss_sum;
  }
  Metrics m;
  m.instance_count = sum.instances;
  m.masked_position_count = sum.masked;
  m.nsp_accuracy = static_cast<double>(sum.nsp_correct) / static_cast<double>(sum.instances);
  m.nsp_loss = sum.nsp_loss_sum / static_cast<double>(sum.instances);
  if (sum.masked > 0) {
    m.mlm_accuracy = static_cast<double>(sum.mlm_correct) / static_cast<double>(sum.masked);
    m.mlm_loss = sum.mlm_loss_sum / static_cast<double>(sum.masked);
  }
  return m;
}

Metrics evaluate(const Checkpoint& ck, std::span<const PretrainingInstance> data, std::size_t batch_size,
                 unsigned threads) {
  return evaluate(ck.params, ck.config, data, batch_size, threads);
}

}  // namespace xbert
