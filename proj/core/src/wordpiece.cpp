#include "xbert/wordpiece.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <unordered_map>
#include <unordered_set>

#include "xbert/error.hpp"
#include "xbert/utf8.hpp"

namespace xbert {
namespace {

using SymbolId = std::int32_t;
inline constexpr SymbolId kBlocked = -1;

struct PairHash {
  std::size_t operator()(const std::pair<SymbolId, SymbolId>& p) const noexcept {
    return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(static_cast<std::uint32_t>(p.first)) << 32) |
                                      static_cast<std::uint32_t>(p.second));
  }
};

class MergeTrainer {
 public:
  MergeTrainer(const std::map<std::string, std::uint64_t>& words, std::uint64_t min_frequency,
               const std::unordered_set<std::string>& alphabet)
      : min_frequency_(min_frequency) {
    for (const auto& [word, count] : words) {
      Word w;
      w.count = count;
      const auto chars = utf8::split_chars(word);
      for (std::size_t i = 0; i < chars.size(); ++i) {
        std::string sym = i == 0 ? chars[i] : std::string(kContinuation) + chars[i];
        w.symbols.push_back(alphabet.count(sym) ? intern(sym) : kBlocked);
      }
      words_.push_back(std::move(w));
    }
    for (std::size_t i = 0; i < words_.size(); ++i) add_pairs(i);
  }

  /// Applies the best merge; returns the merged string, or nothing when no
  /// pair reaches min_frequency.
  std::optional<std::string> step() {
    if (queue_.empty()) return std::nullopt;
    const Entry best = *queue_.begin();
    if (best.count < min_frequency_) return std::nullopt;
    const auto pair = best.pair;
    std::string merged = symbols_[static_cast<std::size_t>(pair.first)];
    const std::string& right = symbols_[static_cast<std::size_t>(pair.second)];
    merged += right.substr(kContinuation.size());
    const SymbolId merged_id = intern(merged);

    const auto where = std::move(occurrences_[pair]);
    std::vector<std::size_t> affected(where.begin(), where.end());
    std::sort(affected.begin(), affected.end());
    for (std::size_t wi : affected) {
      remove_pairs(wi);
      auto& syms = words_[wi].symbols;
      std::vector<SymbolId> next;
      next.reserve(syms.size());
      for (std::size_t i = 0; i < syms.size(); ++i) {
        if (i + 1 < syms.size() && syms[i] == pair.first && syms[i + 1] == pair.second) {
          next.push_back(merged_id);
          ++i;
        } else {
          next.push_back(syms[i]);
        }
      }
      syms = std::move(next);
      add_pairs(wi);
    }
    return merged;
  }

 private:
  struct Word {
    std::vector<SymbolId> symbols;
    std::uint64_t count = 0;
  };
  struct Entry {
    std::uint64_t count;
    std::pair<SymbolId, SymbolId> pair;
  };
  struct EntryOrder {
    const std::vector<std::string>* symbols;
    bool operator()(const Entry& a, const Entry& b) const {
      if (a.count != b.count) return a.count > b.count;
      const auto& s = *symbols;
      const auto& a1 = s[static_cast<std::size_t>(a.pair.first)];
      const auto& b1 = s[static_cast<std::size_t>(b.pair.first)];
      if (a1 != b1) return a1 < b1;
      return s[static_cast<std::size_t>(a.pair.second)] < s[static_cast<std::size_t>(b.pair.second)];
    }
  };

  SymbolId intern(const std::string& s) {
    auto [it, inserted] = symbol_ids_.emplace(s, static_cast<SymbolId>(symbols_.size()));
    if (inserted) symbols_.push_back(s);
    return it->second;
  }

  void adjust(std::pair<SymbolId, SymbolId> p, std::int64_t delta, std::size_t wi) {
    auto& count = counts_[p];
    if (count > 0) queue_.erase(Entry{count, p});
    count = static_cast<std::uint64_t>(static_cast<std::int64_t>(count) + delta);
    if (count > 0) {
      queue_.insert(Entry{count, p});
    } else {
      counts_.erase(p);
    }
    if (delta > 0) occurrences_[p].insert(wi);
  }

  void for_each_pair(std::size_t wi, auto&& fn) {
    const auto& syms = words_[wi].symbols;
    for (std::size_t i = 0; i + 1 < syms.size(); ++i)
      if (syms[i] != kBlocked && syms[i + 1] != kBlocked) fn(std::make_pair(syms[i], syms[i + 1]));
  }

  void add_pairs(std::size_t wi) {
    const auto c = static_cast<std::int64_t>(words_[wi].count);
    for_each_pair(wi, [&](auto p) { adjust(p, c, wi); });
  }

  void remove_pairs(std::size_t wi) {
    const auto c = static_cast<std::int64_t>(words_[wi].count);
    for_each_pair(wi, [&](auto p) {
      adjust(p, -c, wi);
      if (!counts_.count(p)) occurrences_.erase(p);
    });
  }

  std::uint64_t min_frequency_;
  std::vector<Word> words_;
  std::vector<std::string> symbols_;
  std::unordered_map<std::string, SymbolId> symbol_ids_;
  std::unordered_map<std::pair<SymbolId, SymbolId>, std::uint64_t, PairHash> counts_;
  std::unordered_map<std::pair<SymbolId, SymbolId>, std::unordered_set<std::size_t>, PairHash> occurrences_;
  std::set<Entry, EntryOrder> queue_{EntryOrder{&symbols_}};
};

template <typename Fn>
void for_each_word(std::string_view text, Fn&& fn) {
  std::size_t i = 0;
  while (i < text.size()) {
    while (i < text.size() && (text[i] == ' ' || text[i] == '\t')) ++i;
    std::size_t j = i;
    while (j < text.size() && text[j] != ' ' && text[j] != '\t') ++j;
    if (j > i) fn(text.substr(i, j - i));
    i = j;
  }
}

}  // namespace

std::string normalize(std::string_view text, bool lowercase) {
  std::string out(text);
  if (lowercase)
    for (char& c : out)
      if (c >= 'A' && c <= 'Z') c = static_cast<char>(c - 'A' + 'a');
  return out;
}

Vocabulary train_vocab(const CleanCorpus& corpus, const TokenizerConfig& cfg) {
  if (corpus.empty()) fail(ErrorCategory::kData, "cannot train a vocabulary on an empty corpus");
  if (cfg.target_size == 0 || cfg.min_frequency == 0 || cfg.max_word_chars == 0)
    fail(ErrorCategory::kConfig, "tokenizer target size, min frequency and max word chars must be positive");

  std::map<std::string, std::uint64_t> words;
  for (const auto& s : corpus.sentences) {
    const std::string norm = normalize(s, cfg.lowercase);
    for_each_word(norm, [&](std::string_view w) {
      if (utf8::length(w) <= cfg.max_word_chars) words[std::string(w)] += 1;
    });
  }
  if (words.empty()) fail(ErrorCategory::kData, "corpus has no usable words");

  std::map<char32_t, std::uint64_t> initial_freq;
  std::map<char32_t, std::uint64_t> inner_freq;
  for (const auto& [w, count] : words) {
    const auto cps = utf8::decode(w);
    for (std::size_t i = 0; i < cps.size(); ++i) {
      initial_freq[cps[i]] += count;
      if (i > 0) inner_freq[cps[i]] += count;
    }
  }

  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  std::unordered_set<std::string> present(tokens.begin(), tokens.end());
  std::unordered_set<std::string> alphabet;
  for (const auto& [cp, f] : initial_freq) {
    if (f < cfg.min_frequency) continue;
    std::string s;
    utf8::append(s, cp);
    tokens.push_back(s);
    alphabet.insert(s);
  }
  for (const auto& [cp, f] : inner_freq) {
    if (f < cfg.min_frequency) continue;
    std::string s(kContinuation);
    utf8::append(s, cp);
    tokens.push_back(s);
    alphabet.insert(s);
  }
  if (cfg.target_size <= tokens.size())
    fail(ErrorCategory::kConfig, "target size " + std::to_string(cfg.target_size) +
                                     " must exceed the specials plus alphabet (" + std::to_string(tokens.size()) + ")");
  present.insert(alphabet.begin(), alphabet.end());

  MergeTrainer trainer(words, cfg.min_frequency, alphabet);
  while (tokens.size() < cfg.target_size) {
    auto merged = trainer.step();
    if (!merged) break;
    if (present.insert(*merged).second) tokens.push_back(std::move(*merged));
  }

  if (tokens.size() < cfg.target_size) {
    std::vector<std::pair<std::string, std::uint64_t>> by_freq(words.begin(), words.end());
    std::stable_sort(by_freq.begin(), by_freq.end(), [](const auto& a, const auto& b) { return a.second > b.second; });
    for (auto& [w, f] : by_freq) {
      if (tokens.size() >= cfg.target_size) break;
      if (present.insert(w).second) tokens.push_back(w);
    }
  }
  if (tokens.size() < cfg.target_size)
    fail(ErrorCategory::kData, "target size " + std::to_string(cfg.target_size) + " unreachable: corpus supports only " +
                                   std::to_string(tokens.size()) + " tokens");
  return Vocabulary(std::move(tokens));
}

void tokenize_word(std::string_view word, const Vocabulary& v, std::size_t max_word_chars, std::vector<TokenId>& out) {
  // Byte offset of every code point boundary.
  std::vector<std::size_t> cuts;
  for (std::size_t i = 0; i < word.size(); ++i)
    if ((static_cast<unsigned char>(word[i]) & 0xC0) != 0x80) cuts.push_back(i);
  cuts.push_back(word.size());
  const std::size_t n = cuts.size() - 1;
  if (n == 0) return;
  if (n > max_word_chars) {
    out.push_back(kUnkId);
    return;
  }
  const std::size_t mark = out.size();
  std::string piece;
  std::size_t start = 0;
  while (start < n) {
    std::optional<TokenId> hit;
    std::size_t end = n;
    for (; end > start; --end) {
      piece.clear();
      if (start > 0) piece = kContinuation;
      piece.append(word.substr(cuts[start], cuts[end] - cuts[start]));
      if ((hit = v.find(piece))) break;
    }
    if (!hit) {
      out.resize(mark);
      out.push_back(kUnkId);
      return;
    }
    out.push_back(*hit);
    start = end;
  }
}

std::vector<TokenId> tokenize(std::string_view text, const Vocabulary& v, const TokenizerConfig& cfg) {
  std::vector<TokenId> out;
  const std::string norm = normalize(text, cfg.lowercase);
  for_each_word(norm, [&](std::string_view w) { tokenize_word(w, v, cfg.max_word_chars, out); });
  return out;
}

std::vector<std::string> detokenize(const std::vector<TokenId>& ids, const Vocabulary& v) {
  std::vector<std::string> words;
  for (TokenId id : ids) {
    const auto& t = v.token(id);
    if (t.starts_with(kContinuation) && t.size() > kContinuation.size() && !words.empty()) {
      words.back() += t.substr(kContinuation.size());
    } else {
      words.push_back(t);
    }
  }
  return words;
}

}  // namespace xbert
