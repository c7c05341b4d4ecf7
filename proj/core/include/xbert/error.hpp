#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace xbert {

/// Coarse failure classes. The CLI maps each to a distinct exit code and
/// prints the category name as the first token of its error line.
enum class ErrorCategory {
  kUsage,
  kIo,
  kFormat,
  kConfig,
  kData,
  kNumeric,
  kInternal,
};

std::string_view category_name(ErrorCategory c) noexcept;
int category_exit_code(ErrorCategory c) noexcept;

class Error : public std::runtime_error {
 public:
  Error(ErrorCategory category, const std::string& what)
      : std::runtime_error(what), category_(category) {}

  ErrorCategory category() const noexcept { return category_; }

 private:
  ErrorCategory category_;
};

[[noreturn]] inline void fail(ErrorCategory c, const std::string& what) {
  throw Error(c, what);
}

}  // namespace xbert
