#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "xbert/corpus.hpp"
#include "xbert/vocab.hpp"

namespace xbert {

struct TokenizerConfig {
  std::size_t target_size = 30522;
  bool lowercase = true;
  std::uint64_t min_frequency = 2;
  std::size_t max_word_chars = 100;
};

/// Learns a vocabulary of exactly cfg.target_size tokens.
///
/// Layout: the five specials, then the alphabet (every character seen with
/// frequency >= min_frequency, then "##c" for every such character seen in a
/// word-internal position, each group in code point order), then merge
/// results in merge order, then padding with the most frequent whole words
/// not yet present. Each merge takes the adjacent symbol pair with the
/// highest corpus frequency; ties go to the lexicographically smaller pair.
Vocabulary train_vocab(const CleanCorpus& corpus, const TokenizerConfig& cfg);

/// Greedy longest-match WordPiece encoding of a cleaned sentence.
std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& v, const TokenizerConfig& cfg);

/// Encodes one already-normalized word, appending to `out`.
void tokenize_word(std::string_view word, const Vocabulary& v, std::size_t max_word_chars,
                   std::vector<TokenId>& out);

/// Lowercases ASCII letters; other code points are caseless in the supported
/// scripts.
std::string normalize(std::string_view text, bool lowercase);

/// Joins word pieces back into words ("##" pieces attach to the previous one).
std::vector<std::string> detokenize(const std::vector<TokenId>& ids, const Vocabulary& v);

}  // namespace xbert
