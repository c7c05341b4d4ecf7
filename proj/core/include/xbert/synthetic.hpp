#pragma once

#include <cstdint>
#include <set>
#include <string>

#include "xbert/corpus.hpp"

namespace xbert {

/// Shape of a synthetic language.
///
/// Without a parent, a language is a random word stock with Zipf-ranked
/// frequencies and a sparse successor graph: each word has a few likely
/// successors, so masked words are predictable from their neighbours.
/// Documents are one walk over the graph cut into sentences, which makes
/// the true next sentence recognizable from the sentence boundary.
///
/// With a parent corpus, the child re-uses the parent's observed transition
/// statistics but relabels a fraction (1 - overlap) of the parent's word
/// types with fresh words: shared structure, partly shared vocabulary.
struct SyntheticSpec {
  std::size_t word_types = 200;  // ignored with a parent (inherited)
  std::size_t min_word_length = 3;
  std::size_t max_word_length = 8;
  std::size_t min_sentence_length = 4;
  std::size_t max_sentence_length = 10;
  std::size_t min_document_sentences = 3;
  std::size_t max_document_sentences = 6;
  std::size_t sentence_count = 1000;
  double overlap = 0.0;
  std::size_t successors = 3;
  double zipf_exponent = 1.0;
  /// Chance of jumping to a unigram draw instead of following the graph.
  double restart_prob = 0.1;
  std::string alphabet = "abcdefghijklmnopqrstuvwxyz";

  void validate(bool has_parent) const;
};

CleanCorpus gen_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed, const CleanCorpus* parent = nullptr);

/// Distinct whitespace-delimited words of a corpus.
std::set<std::string> word_stock(const CleanCorpus& c);

/// Fraction of the child's word types that also occur in the parent.
double type_overlap(const CleanCorpus& child, const CleanCorpus& parent);

}  // namespace xbert
