#pragma once

#include <span>
#include <string_view>

namespace xbert {

struct CodeRange {
  char32_t first;
  char32_t last;  // inclusive
};

// Allowed alphabets for cleaning. Everything outside the active profile
// becomes a space.
inline constexpr CodeRange kLatinLetters[] = {{U'A', U'Z'}, {U'a', U'z'}};
inline constexpr CodeRange kAsciiDigits[] = {{U'0', U'9'}};

// Arabic-script letters used by Urdu: the base Arabic block letters plus the
// extended letters (tteh, ddal, rreh, noon ghunna, heh goal, do-chashmee heh,
// farsi yeh, yeh barree and friends).
inline constexpr CodeRange kUrduLetters[] = {
    {0x0621, 0x063A},
    {0x0641, 0x064A},
    {0x066E, 0x066F},
    {0x0671, 0x06D3},
    {0x06D5, 0x06D5},
    {0x06EE, 0x06EF},
    {0x06FA, 0x06FC},
    {0x06FF, 0x06FF},
};

// Arabic-Indic and extended (Urdu/Persian) Arabic-Indic digits.
inline constexpr CodeRange kUrduDigits[] = {{0x0660, 0x0669}, {0x06F0, 0x06F9}};

enum class ScriptProfile { kLatinDigits, kLatinDigitsPlusUrdu };

struct CleanOptions {
  ScriptProfile profile = ScriptProfile::kLatinDigits;
  /// Only meaningful for kLatinDigitsPlusUrdu.
  bool urdu_digits = true;
};

bool is_allowed(char32_t cp, const CleanOptions& opts) noexcept;

/// Accepts "latin" / "latin_digits" and "latin+urdu" / "latin_digits_plus_urdu".
ScriptProfile parse_profile(std::string_view name);
std::string_view profile_name(ScriptProfile p) noexcept;

}  // namespace xbert
