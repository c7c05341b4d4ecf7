#include <benchmark/benchmark.h>

#include "xbert/bert.hpp"
#include "xbert/datagen.hpp"
#include "xbert/synthetic.hpp"
#include "xbert/wordpiece.hpp"

using namespace xbert;

namespace {

const CleanCorpus& corpus() {
  static const CleanCorpus c = [] {
    SyntheticSpec s;
    s.word_types = 2000;
    s.sentence_count = 5000;
    return gen_synthetic_corpus(s, 1);
  }();
  return c;
}

const Vocabulary& vocab() {
  static const Vocabulary v = [] {
    TokenizerConfig cfg;
    cfg.target_size = 1000;
    return train_vocab(corpus(), cfg);
  }();
  return v;
}

void BM_TrainVocab(benchmark::State& state) {
  TokenizerConfig cfg;
  cfg.target_size = static_cast<std::size_t>(state.range(0));
  for (auto _ : state) benchmark::DoNotOptimize(train_vocab(corpus(), cfg));
}
BENCHMARK(BM_TrainVocab)->Arg(500)->Arg(1000)->Unit(benchmark::kMillisecond);

void BM_Tokenize(benchmark::State& state) {
  const TokenizerConfig cfg;
  for (auto _ : state)
    for (const auto& s : corpus().sentences) benchmark::DoNotOptimize(tokenize(s, vocab(), cfg));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * corpus().size()));
}
BENCHMARK(BM_Tokenize)->Unit(benchmark::kMillisecond);

void BM_CreateInstances(benchmark::State& state) {
  const TokenizerConfig cfg;
  const auto docs = build_documents(corpus(), vocab(), cfg);
  DataGenParams p;
  p.dupe_factor = 1;
  for (auto _ : state) benchmark::DoNotOptimize(create_instances(docs, vocab().size(), p));
}
BENCHMARK(BM_CreateInstances)->Unit(benchmark::kMillisecond);

// Forward and backward of one training batch; the argument is the hidden size.
void BM_LossAndGradients(benchmark::State& state) {
  const auto H = static_cast<std::size_t>(state.range(0));
  const auto cfg = ModelConfig::make(2, H, H / 64 ? H / 64 : 2, 1000, 128, 0.1);
  const auto params = init_parameters<float>(cfg, 1);
  const auto batch = random_batch(cfg, 8, 128, 20, 2);
  Rng rng(3);
  for (auto _ : state) benchmark::DoNotOptimize(loss_and_gradients(params, cfg, batch, true, &rng));
  state.SetItemsProcessed(static_cast<std::int64_t>(state.iterations() * 8 * 128));
}
BENCHMARK(BM_LossAndGradients)->Arg(64)->Arg(128)->Arg(256)->Unit(benchmark::kMillisecond);

void BM_Forward(benchmark::State& state) {
  const auto cfg = ModelConfig::make(2, 128, 2, 1000, 128, 0.0);
  const auto params = init_parameters<float>(cfg, 1);
  const auto batch = random_batch(cfg, 8, 128, 20, 2);
  for (auto _ : state) benchmark::DoNotOptimize(forward(params, cfg, batch));
}
BENCHMARK(BM_Forward)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
