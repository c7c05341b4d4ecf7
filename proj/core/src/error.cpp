#include "xbert/error.hpp"

namespace xbert {

std::string_view category_name(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::kUsage: return "usage";
    case ErrorCategory::kIo: return "io";
    case ErrorCategory::kFormat: return "format";
    case ErrorCategory::kConfig: return "config";
    case ErrorCategory::kData: return "data";
    case ErrorCategory::kNumeric: return "numeric";
    case ErrorCategory::kInternal: return "internal";
  }
  return "internal";
}

int category_exit_code(ErrorCategory c) noexcept {
  switch (c) {
    case ErrorCategory::kUsage: return 2;
    case ErrorCategory::kIo: return 3;
    case ErrorCategory::kFormat: return 4;
    case ErrorCategory::kConfig: return 5;
    case ErrorCategory::kData: return 6;
    case ErrorCategory::kNumeric: return 7;
    case ErrorCategory::kInternal: return 1;
  }
  return 1;
}

}  // namespace xbert
