#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace xbert::utf8 {

inline constexpr char32_t kReplacement = 0xFFFD;

/// Decodes UTF-8, substituting U+FFFD for every malformed sequence
/// (overlong forms, surrogates, truncated or stray continuation bytes).
std::u32string decode(std::string_view bytes);

void append(std::string& out, char32_t cp);
std::string encode(std::u32string_view cps);

/// Splits a UTF-8 string into one string per code point.
std::vector<std::string> split_chars(std::string_view s);

std::size_t length(std::string_view s);

}  // namespace xbert::utf8
