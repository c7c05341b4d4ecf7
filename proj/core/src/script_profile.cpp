#include "xbert/script_profile.hpp"

#include "xbert/error.hpp"

namespace xbert {
namespace {

bool in_ranges(char32_t cp, std::span<const CodeRange> ranges) noexcept {
  for (const auto& r : ranges)
    if (cp >= r.first && cp <= r.last) return true;
  return false;
}

}  // namespace

bool is_allowed(char32_t cp, const CleanOptions& opts) noexcept {
  if (in_ranges(cp, kLatinLetters) || in_ranges(cp, kAsciiDigits)) return true;
  if (opts.profile != ScriptProfile::kLatinDigitsPlusUrdu) return false;
  if (in_ranges(cp, kUrduLetters)) return true;
  return opts.urdu_digits && in_ranges(cp, kUrduDigits);
}

ScriptProfile parse_profile(std::string_view name) {
  if (name == "latin" || name == "latin_digits") return ScriptProfile::kLatinDigits;
  if (name == "latin+urdu" || name == "latin_digits_plus_urdu") return ScriptProfile::kLatinDigitsPlusUrdu;
  fail(ErrorCategory::kUsage, "unknown script profile '" + std::string(name) + "' (expected latin or latin+urdu)");
}

std::string_view profile_name(ScriptProfile p) noexcept {
  return p == ScriptProfile::kLatinDigits ? "latin_digits" : "latin_digits_plus_urdu";
}

}  // namespace xbert
