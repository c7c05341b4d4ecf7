#pragma once

#include <vector>

#include "xbert/datagen.hpp"
#include "xbert/synthetic.hpp"
#include "xbert/train.hpp"
#include "xbert/wordpiece.hpp"

namespace xbert::test {

struct ToyData {
  CleanCorpus corpus;
  Vocabulary vocab;
  std::vector<PretrainingInstance> instances;
};

/// A synthetic corpus, a vocabulary of `vocab_size` and its instances.
inline ToyData toy_data(std::size_t sentences, std::size_t vocab_size, std::uint64_t seed, std::size_t word_types = 60,
                        std::size_t max_seq = 32, std::size_t dupe = 1) {
  ToyData d;
  SyntheticSpec spec;
  spec.word_types = word_types;
  spec.sentence_count = sentences;
  d.corpus = gen_synthetic_corpus(spec, seed);
  TokenizerConfig tc;
  tc.target_size = vocab_size;
  tc.min_frequency = 1;
  d.vocab = train_vocab(d.corpus, tc);
  DataGenParams p;
  p.max_seq_length = max_seq;
  p.max_predictions_per_seq = 5;
  p.dupe_factor = dupe;
  p.seed = seed;
  for (auto& s : create_instances(build_documents(d.corpus, d.vocab, tc), d.vocab.size(), p))
    d.instances.insert(d.instances.end(), s.begin(), s.end());
  return d;
}

}  // namespace xbert::test
