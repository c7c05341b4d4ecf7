#include "xbert/train.hpp"

#include <cmath>
#include <cstdio>

#include "xbert/batch.hpp"
#include "xbert/bert.hpp"
#include "xbert/error.hpp"

namespace xbert {

void TrainingConfig::validate() const {
  if (!(learning_rate > 0.0)) fail(ErrorCategory::kConfig, "learning rate must be positive");
  if (warmup_steps > steps) fail(ErrorCategory::kConfig, "warmup steps cannot exceed total steps");
  if (batch_size == 0) fail(ErrorCategory::kConfig, "batch size must be positive");
}

Checkpoint init_scratch(const ModelConfig& cfg, const Vocabulary& v, std::uint64_t seed) {
  cfg.validate();
  if (v.size() != cfg.vocab_size)
    fail(ErrorCategory::kConfig, "vocabulary has " + std::to_string(v.size()) + " tokens but the model expects " +
                                     std::to_string(cfg.vocab_size));
  Checkpoint ck;
  ck.config = cfg;
  ck.vocab = v;
  ck.params = init_parameters<float>(cfg, seed);
  ck.optimizer = fresh_optimizer_state(ck.params);
  ck.meta.regime = "scratch";
  ck.meta.seed = seed;
  return ck;
}

Checkpoint swap_vocabulary(const Checkpoint& ck, const Vocabulary& new_vocab, SwapPolicy policy, std::uint64_t seed) {
  if (new_vocab.size() != ck.vocab.size())
    fail(ErrorCategory::kConfig,
         "vocabulary size must stay fixed for additional pretraining: checkpoint has " + std::to_string(ck.vocab.size()) +
             " tokens, new vocabulary has " + std::to_string(new_vocab.size()));
  for (TokenId i = 0; i < kNumSpecial; ++i)
    if (new_vocab.token(i) != ck.vocab.token(i))
      fail(ErrorCategory::kConfig, "special token mismatch at id " + std::to_string(i));

  Checkpoint out;
  out.config = ck.config;
  out.vocab = new_vocab;
  out.params = ck.params;
  if (policy == SwapPolicy::kAligned) {
    const std::size_t H = ck.config.hidden_size;
    const auto& old_emb = ck.params.at(param_names::kTokenEmbeddings).data;
    const auto& old_bias = ck.params.at(param_names::kMlmOutputBias).data;
    auto& emb = out.params.at(param_names::kTokenEmbeddings).data;
    auto& bias = out.params.at(param_names::kMlmOutputBias).data;
    Rng rng = Rng::derive(seed, 0, 17);
    for (std::size_t id = 0; id < new_vocab.size(); ++id) {
      float* row = emb.data() + id * H;
      if (auto old = ck.vocab.find(new_vocab.token(static_cast<TokenId>(id)))) {
        const auto src = static_cast<std::size_t>(*old);
        std::copy_n(old_emb.data() + src * H, H, row);
        bias[id] = old_bias[src];
      } else {
        for (std::size_t j = 0; j < H; ++j) row[j] = static_cast<float>(truncated_normal(rng, 0.02));
        bias[id] = 0.0f;
      }
    }
  }
  out.optimizer = fresh_optimizer_state(out.params);
  out.meta.regime = ck.meta.regime;
  out.meta.parent_hash = ck.hash();
  out.meta.swap_policy = std::string(swap_policy_name(policy));
  out.meta.seed = seed;
  return out;
}

TrainResult train(const Checkpoint& start, std::span<const PretrainingInstance> data, const TrainingConfig& tcfg,
                  std::span<const PretrainingInstance> eval_data, const StepCallback& on_step) {
  tcfg.validate();
  start.validate();
  if (data.empty()) fail(ErrorCategory::kData, "no training instances");

  TrainResult result;
  result.checkpoint = start;
  result.checkpoint.meta.parent_hash = start.hash();
  result.checkpoint.meta.seed = tcfg.seed;
  Checkpoint& ck = result.checkpoint;
  const std::size_t max_pred = max_masked(data);

  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng batch_rng = Rng::derive(tcfg.seed, 0, 41);
  Rng dropout_rng = Rng::derive(tcfg.seed, 0, 43);
  batch_rng.shuffle(std::span<std::size_t>(order));
  std::size_t cursor = 0;

  std::vector<const PretrainingInstance*> rows(tcfg.batch_size);
  for (std::uint64_t step = 0; step < tcfg.steps; ++step) {
    for (auto& r : rows) {
      if (cursor == order.size()) {
        batch_rng.shuffle(std::span<std::size_t>(order));
        cursor = 0;
      }
      r = &data[order[cursor++]];
    }
    const Batch batch = make_batch(std::span<const PretrainingInstance* const>(rows), max_pred);

    TrainingSignal<float> signal;
    try {
      signal = loss_and_gradients(ck.params, ck.config, batch, true, &dropout_rng);
    } catch (const Error& e) {
      if (e.category() != ErrorCategory::kNumeric) throw;
      result.failure = "step " + std::to_string(step) + ": " + e.what();
      return result;
    }
    const double lr = scheduled_learning_rate(tcfg.learning_rate, step, tcfg.warmup_steps, tcfg.steps);
    if (!adam_step(ck.params, ck.optimizer, signal.grads, lr, tcfg.adam)) {
      result.failure = "step " + std::to_string(step) + ": update produced a non-finite value";
      return result;
    }

    HistoryEntry entry;
    entry.step = step + 1;
    entry.total_loss = signal.loss.total;
    entry.mlm_loss = signal.loss.mlm;
    entry.nsp_loss = signal.loss.nsp;
    if (tcfg.eval_every > 0 && !eval_data.empty() && (entry.step % tcfg.eval_every == 0 || entry.step == tcfg.steps))
      entry.eval = evaluate(ck, eval_data);
    if (on_step) on_step(entry);
    result.history.push_back(std::move(entry));
  }
  return result;
}

std::string format_history(const std::vector<HistoryEntry>& history) {
  std::string out;
  char buf[160];
  for (const auto& h : history) {
    std::snprintf(buf, sizeof buf, "%llu %.9g %.9g %.9g", static_cast<unsigned long long>(h.step), h.total_loss,
                  h.mlm_loss, h.nsp_loss);
    out += buf;
    if (h.eval) {
      std::snprintf(buf, sizeof buf, " eval_mlm_acc=%.6f eval_nsp_acc=%.6f", h.eval->mlm_accuracy, h.eval->nsp_accuracy);
      out += buf;
    }
    out.push_back('\n');
  }
  return out;
}

}  // namespace xbert
