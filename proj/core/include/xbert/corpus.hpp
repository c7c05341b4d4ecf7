#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "xbert/script_profile.hpp"

namespace xbert {

/// Cleaned sentences in corpus order.
///
/// `document` gives the document index of each sentence; documents are
/// contiguous runs. Blank lines in the input start a new document, which is
/// how boundaries survive a clean/write/read cycle.
struct CleanCorpus {
  std::vector<std::string> sentences;
  std::vector<std::string> provenance;
  std::vector<std::uint32_t> document;

  std::size_t size() const noexcept { return sentences.size(); }
  bool empty() const noexcept { return sentences.empty(); }

  /// Appends a sentence; a new document is opened when `new_document` is set
  /// or the corpus is empty.
  void add(std::string sentence, std::string source, bool new_document);
  std::size_t document_count() const noexcept;
};

struct CorpusStats {
  std::uint64_t sentence_count = 0;
  std::uint64_t word_count = 0;

  CorpusStats& operator+=(const CorpusStats& o) noexcept {
    sentence_count += o.sentence_count;
    word_count += o.word_count;
    return *this;
  }
  friend bool operator==(const CorpusStats&, const CorpusStats&) = default;
};

/// Splits on end-of-line (\n, \r\n, lone \r); blank and whitespace-only
/// lines are dropped. Invalid UTF-8 is replaced by U+FFFD first.
std::vector<std::string> segment_sentences(std::string_view raw_text);

/// Replaces every character outside the profile with a space, collapses
/// space runs and trims. Case is kept. Returns "" when nothing survives.
std::string clean_sentence(std::string_view sentence, const CleanOptions& opts);

/// Segments and cleans a whole text. Blank lines (or sentences that cleaned
/// to nothing) never become sentences, but blank lines do mark document
/// boundaries in the result.
CleanCorpus clean_text(std::string_view raw_text, const CleanOptions& opts, const std::string& source);

CorpusStats corpus_stats(const CleanCorpus& c) noexcept;
CorpusStats sentence_stats(std::string_view sentence) noexcept;

/// Lists regular files in `dir` in lexicographic path order.
std::vector<std::filesystem::path> list_text_files(const std::filesystem::path& dir);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);

/// Reads cleaned files (one sentence per line, blank line between documents).
/// A file is a document per line when it contains no blank lines at all.
CleanCorpus read_clean_dir(const std::filesystem::path& dir);
CleanCorpus read_clean_file(const std::filesystem::path& path);

/// One sentence per line with a blank line between documents.
std::string format_clean(const CleanCorpus& c);

/// Cleans every file under `in_dir` into `out_dir` (same file names).
/// Files are processed on up to `threads` workers; output bytes do not depend
/// on the thread count. Returns per-file stats in file order.
std::vector<std::pair<std::string, CorpusStats>> clean_directory(const std::filesystem::path& in_dir,
                                                                 const std::filesystem::path& out_dir,
                                                                 const CleanOptions& opts, unsigned threads);

}  // namespace xbert
