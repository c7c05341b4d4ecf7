#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace xbert {

using TokenId = std::int32_t;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kUnkId = 1;
inline constexpr TokenId kClsId = 2;
inline constexpr TokenId kSepId = 3;
inline constexpr TokenId kMaskId = 4;
inline constexpr TokenId kNumSpecial = 5;

inline constexpr std::array<std::string_view, kNumSpecial> kSpecialTokens = {"[PAD]", "[UNK]", "[CLS]", "[SEP]",
                                                                            "[MASK]"};
inline constexpr std::string_view kContinuation = "##";

inline bool is_special(TokenId id) noexcept { return id >= 0 && id < kNumSpecial; }

/// Ordered token inventory; a token's id is its index. Ids 0-4 always hold
/// the reserved tokens in kSpecialTokens order.
class Vocabulary {
 public:
  Vocabulary() = default;

  /// Validates uniqueness, non-empty whitespace-free tokens and the special
  /// layout; throws Error(kFormat) otherwise.
  explicit Vocabulary(std::vector<std::string> tokens);

  std::size_t size() const noexcept { return tokens_.size(); }
  const std::string& token(TokenId id) const { return tokens_.at(static_cast<std::size_t>(id)); }
  const std::vector<std::string>& tokens() const noexcept { return tokens_; }

  std::optional<TokenId> find(std::string_view token) const;
  bool contains(std::string_view token) const { return find(token).has_value(); }

  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

std::string format_vocab(const Vocabulary& v);
Vocabulary parse_vocab(std::string_view text);

void save_vocab(const Vocabulary& v, const std::filesystem::path& path);
Vocabulary load_vocab(const std::filesystem::path& path);

}  // namespace xbert
