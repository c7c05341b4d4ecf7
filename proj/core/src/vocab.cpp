#include "xbert/vocab.hpp"

#include "xbert/corpus.hpp"
#include "xbert/error.hpp"

namespace xbert {

Vocabulary::Vocabulary(std::vector<std::string> tokens) : tokens_(std::move(tokens)) {
  if (tokens_.size() < static_cast<std::size_t>(kNumSpecial))
    fail(ErrorCategory::kFormat, "vocabulary has " + std::to_string(tokens_.size()) + " tokens, fewer than the " +
                                     std::to_string(kNumSpecial) + " reserved ones");
  for (TokenId i = 0; i < kNumSpecial; ++i)
    if (tokens_[static_cast<std::size_t>(i)] != kSpecialTokens[static_cast<std::size_t>(i)])
      fail(ErrorCategory::kFormat, "vocabulary id " + std::to_string(i) + " must be " +
                                       std::string(kSpecialTokens[static_cast<std::size_t>(i)]) + ", found '" +
                                       tokens_[static_cast<std::size_t>(i)] + "'");
  index_.reserve(tokens_.size());
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    const auto& t = tokens_[i];
    if (t.empty()) fail(ErrorCategory::kFormat, "empty token at id " + std::to_string(i));
    if (t.find_first_of(" \t\r\n\v\f") != std::string::npos)
      fail(ErrorCategory::kFormat, "token at id " + std::to_string(i) + " contains whitespace");
    if (!index_.emplace(t, static_cast<TokenId>(i)).second)
      fail(ErrorCategory::kFormat, "duplicate token '" + t + "' at id " + std::to_string(i));
  }
}

std::optional<TokenId> Vocabulary::find(std::string_view token) const {
  auto it = index_.find(std::string(token));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::string format_vocab(const Vocabulary& v) {
  std::string out;
  for (const auto& t : v.tokens()) {
    out += t;
    out.push_back('\n');
  }
  return out;
}

Vocabulary parse_vocab(std::string_view text) {
  std::vector<std::string> tokens;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty())
      fail(ErrorCategory::kFormat, "empty line " + std::to_string(tokens.size() + 1) + " in vocabulary file");
    tokens.emplace_back(line);
    pos = nl + 1;
  }
  return Vocabulary(std::move(tokens));
}

void save_vocab(const Vocabulary& v, const std::filesystem::path& path) { write_file(path, format_vocab(v)); }

Vocabulary load_vocab(const std::filesystem::path& path) { return parse_vocab(read_file(path)); }

}  // namespace xbert
