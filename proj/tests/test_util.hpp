#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

namespace xbert::test {

/// Fresh directory under the system temp dir, removed on scope exit.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("xbert-" + tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  const std::filesystem::path& path() const noexcept { return path_; }
  std::filesystem::path operator/(const std::string& p) const { return path_ / p; }

 private:
  std::filesystem::path path_;
};

}  // namespace xbert::test

#include <cstdlib>
#include <fstream>
#include <sstream>

namespace xbert::test {

/// Compares `actual` with tests/golden/<name>. With XBERT_UPDATE_GOLDEN=1 in
/// the environment the file is rewritten instead and the check passes.
inline bool matches_golden(const std::string& name, const std::string& actual) {
  const std::filesystem::path path = std::filesystem::path(XBERT_GOLDEN_DIR) / name;
  if (const char* u = std::getenv("XBERT_UPDATE_GOLDEN"); u && std::string(u) == "1") {
    std::ofstream(path, std::ios::binary) << actual;
    return true;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str() == actual;
}

}  // namespace xbert::test
