#include "xbert/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <unordered_map>
#include <unordered_set>

#include "xbert/error.hpp"
#include "xbert/rng.hpp"

namespace xbert {

void SyntheticSpec::validate(bool has_parent) const {
  if (!(overlap >= 0.0 && overlap <= 1.0)) fail(ErrorCategory::kConfig, "overlap must be in [0, 1]");
  if (overlap > 0.0 && !has_parent) fail(ErrorCategory::kConfig, "overlap with a parent requested but no parent given");
  if (!has_parent && word_types == 0) fail(ErrorCategory::kConfig, "word_types must be positive");
  if (min_word_length == 0 || min_word_length > max_word_length) fail(ErrorCategory::kConfig, "bad word length range");
  if (min_sentence_length == 0 || min_sentence_length > max_sentence_length)
    fail(ErrorCategory::kConfig, "bad sentence length range");
  if (min_document_sentences == 0 || min_document_sentences > max_document_sentences)
    fail(ErrorCategory::kConfig, "bad document length range");
  if (successors == 0) fail(ErrorCategory::kConfig, "successors must be positive");
  if (!(restart_prob >= 0.0 && restart_prob <= 1.0)) fail(ErrorCategory::kConfig, "restart_prob must be in [0, 1]");
  if (alphabet.empty()) fail(ErrorCategory::kConfig, "alphabet must not be empty");
  for (char c : alphabet)
    if (!((c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z') || (c >= '0' && c <= '9')))
      fail(ErrorCategory::kConfig, "alphabet must be ASCII letters or digits");
}

namespace {

// Draws from a fixed discrete distribution by inverting its CDF.
class Discrete {
 public:
  Discrete() = default;
  explicit Discrete(const std::vector<double>& weights) {
    double acc = 0.0;
    for (double w : weights) cdf_.push_back(acc += w);
  }
  bool empty() const noexcept { return cdf_.empty() || cdf_.back() <= 0.0; }
  std::size_t sample(Rng& rng) const {
    const double u = rng.uniform() * cdf_.back();
    return static_cast<std::size_t>(std::upper_bound(cdf_.begin(), cdf_.end(), u) - cdf_.begin());
  }

 private:
  std::vector<double> cdf_;
};

std::vector<double> zipf_weights(std::size_t n, double exponent) {
  std::vector<double> w(n);
  for (std::size_t r = 0; r < n; ++r) w[r] = 1.0 / std::pow(static_cast<double>(r + 1), exponent);
  return w;
}

std::string random_word(const SyntheticSpec& spec, Rng& rng) {
  const auto len = static_cast<std::size_t>(
      rng.range(static_cast<std::int64_t>(spec.min_word_length), static_cast<std::int64_t>(spec.max_word_length)));
  std::string w;
  for (std::size_t i = 0; i < len; ++i) w.push_back(spec.alphabet[rng.below(spec.alphabet.size())]);
  return w;
}

// A word-level Markov chain with a start and a restart distribution.
struct Chain {
  std::vector<std::string> words;
  Discrete start;
  Discrete unigram;
  std::vector<std::vector<std::size_t>> next;
  std::vector<Discrete> next_dist;

  std::size_t step(std::size_t cur, double restart_prob, Rng& rng) const {
    if (next[cur].empty() || next_dist[cur].empty() || rng.bernoulli(restart_prob)) return unigram.sample(rng);
    return next[cur][next_dist[cur].sample(rng)];
  }
};

Chain fresh_chain(const SyntheticSpec& spec, Rng& rng) {
  Chain c;
  std::unordered_set<std::string> seen;
  std::size_t attempts = 0;
  while (c.words.size() < spec.word_types) {
    if (++attempts > spec.word_types * 1000)
      fail(ErrorCategory::kConfig, "cannot draw enough distinct words; widen the word length range");
    auto w = random_word(spec, rng);
    if (seen.insert(w).second) c.words.push_back(std::move(w));
  }
  const auto zipf = zipf_weights(spec.word_types, spec.zipf_exponent);
  c.start = Discrete(zipf);
  c.unigram = Discrete(zipf);
  const std::size_t k = std::min(spec.successors, spec.word_types);
  const auto succ_w = zipf_weights(k, 1.0);
  for (std::size_t i = 0; i < spec.word_types; ++i) {
    std::vector<std::size_t> succ;
    while (succ.size() < k) {
      const std::size_t j = c.unigram.sample(rng);
      if (std::find(succ.begin(), succ.end(), j) == succ.end()) succ.push_back(j);
    }
    c.next.push_back(std::move(succ));
    c.next_dist.emplace_back(succ_w);
  }
  return c;
}

std::vector<std::string> split_words(const std::string& s) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < s.size()) {
    while (i < s.size() && s[i] == ' ') ++i;
    std::size_t j = i;
    while (j < s.size() && s[j] != ' ') ++j;
    if (j > i) out.push_back(s.substr(i, j - i));
    i = j;
  }
  return out;
}

Chain relabeled_chain(const SyntheticSpec& spec, const CleanCorpus& parent, Rng& rng) {
  const auto stock = word_stock(parent);
  if (stock.empty()) fail(ErrorCategory::kData, "parent corpus has no words");
  Chain c;
  std::vector<std::string> parent_words(stock.begin(), stock.end());
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < parent_words.size(); ++i) index.emplace(parent_words[i], i);

  // Transition statistics of the parent, walking each document in order.
  const std::size_t n = parent_words.size();
  std::vector<double> start(n, 0.0), unigram(n, 0.0);
  std::vector<std::map<std::size_t, double>> trans(n);
  std::size_t prev = n;
  for (std::size_t s = 0; s < parent.size(); ++s) {
    const bool new_doc = s == 0 || parent.document[s] != parent.document[s - 1];
    if (new_doc) prev = n;
    for (const auto& w : split_words(parent.sentences[s])) {
      const std::size_t id = index.at(w);
      unigram[id] += 1.0;
      if (prev == n) {
        start[id] += 1.0;
      } else {
        trans[prev][id] += 1.0;
      }
      prev = id;
    }
  }
  c.start = Discrete(start);
  c.unigram = Discrete(unigram);
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<std::size_t> succ;
    std::vector<double> w;
    for (const auto& [j, count] : trans[i]) {
      succ.push_back(j);
      w.push_back(count);
    }
    c.next.push_back(std::move(succ));
    c.next_dist.emplace_back(w);
  }

  // Keep exactly round(overlap * n) parent words; rename the rest.
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  const auto keep = static_cast<std::size_t>(std::llround(spec.overlap * static_cast<double>(n)));
  std::vector<char> kept(n, 0);
  for (std::size_t i = 0; i < keep; ++i) kept[order[i]] = 1;
  std::unordered_set<std::string> taken(stock.begin(), stock.end());
  c.words = parent_words;
  std::size_t attempts = 0;
  for (std::size_t i = 0; i < n; ++i) {
    if (kept[i]) continue;
    std::string w;
    do {
      if (++attempts > n * 1000) fail(ErrorCategory::kConfig, "cannot draw enough fresh words; widen the word length range");
      w = random_word(spec, rng);
    } while (!taken.insert(w).second);
    c.words[i] = std::move(w);
  }
  if (c.start.empty()) c.start = c.unigram;
  return c;
}

}  // namespace

std::set<std::string> word_stock(const CleanCorpus& c) {
  std::set<std::string> out;
  for (const auto& s : c.sentences)
    for (auto& w : split_words(s)) out.insert(std::move(w));
  return out;
}

double type_overlap(const CleanCorpus& child, const CleanCorpus& parent) {
  const auto a = word_stock(child);
  const auto b = word_stock(parent);
  if (a.empty()) return 0.0;
  std::size_t shared = 0;
  for (const auto& w : a) shared += b.count(w);
  return static_cast<double>(shared) / static_cast<double>(a.size());
}

CleanCorpus gen_synthetic_corpus(const SyntheticSpec& spec, std::uint64_t seed, const CleanCorpus* parent) {
  spec.validate(parent != nullptr);
  Rng rng = Rng::derive(seed, 0, 53);
  const Chain chain = parent ? relabeled_chain(spec, *parent, rng) : fresh_chain(spec, rng);

  CleanCorpus out;
  while (out.size() < spec.sentence_count) {
    const auto n_sent = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(spec.min_document_sentences),
                                                           static_cast<std::int64_t>(spec.max_document_sentences)));
    std::size_t cur = chain.start.sample(rng);
    for (std::size_t s = 0; s < n_sent && out.size() < spec.sentence_count; ++s) {
      const auto len = static_cast<std::size_t>(rng.range(static_cast<std::int64_t>(spec.min_sentence_length),
                                                          static_cast<std::int64_t>(spec.max_sentence_length)));
      std::string sentence;
      for (std::size_t w = 0; w < len; ++w) {
        if (s > 0 || w > 0) cur = chain.step(cur, spec.restart_prob, rng);
        if (!sentence.empty()) sentence.push_back(' ');
        sentence += chain.words[cur];
      }
      out.add(std::move(sentence), "synthetic", s == 0);
    }
  }
  return out;
}

}  // namespace xbert
