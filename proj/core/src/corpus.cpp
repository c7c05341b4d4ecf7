#include "xbert/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include "xbert/error.hpp"
#include "xbert/parallel.hpp"
#include "xbert/utf8.hpp"

namespace fs = std::filesystem;

namespace xbert {
namespace {

bool is_space(char32_t c) noexcept {
  return c == U' ' || c == U'\t' || c == U'\v' || c == U'\f' || c == 0x00A0 || c == 0x1680 ||
         (c >= 0x2000 && c <= 0x200B) || c == 0x2028 || c == 0x2029 || c == 0x202F || c == 0x205F ||
         c == 0x3000 || c == 0xFEFF;
}

// Physical lines after UTF-8 repair. A terminating newline does not open an
// extra empty line.
std::vector<std::u32string> split_lines(std::string_view raw) {
  const std::u32string text = utf8::decode(raw);
  std::vector<std::u32string> lines;
  std::u32string cur;
  bool pending = false;
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char32_t c = text[i];
    if (c == U'\n' || c == U'\r') {
      if (c == U'\r' && i + 1 < text.size() && text[i + 1] == U'\n') ++i;
      lines.push_back(std::move(cur));
      cur.clear();
      pending = false;
    } else {
      cur.push_back(c);
      pending = true;
    }
  }
  if (pending) lines.push_back(std::move(cur));
  return lines;
}

bool is_blank(const std::u32string& line) noexcept {
  return std::all_of(line.begin(), line.end(), is_space);
}

// Groups non-blank lines into documents: blank-line separated blocks when some
// blank line sits between two non-blank lines, otherwise one line each.
std::vector<std::vector<std::u32string>> split_documents(std::string_view raw) {
  auto lines = split_lines(raw);
  bool block_mode = false;
  {
    bool seen_text = false;
    bool gap = false;
    for (const auto& l : lines) {
      if (is_blank(l)) {
        gap = seen_text;
      } else {
        if (gap) {
          block_mode = true;
          break;
        }
        seen_text = true;
      }
    }
  }
  std::vector<std::vector<std::u32string>> docs;
  bool open = false;
  for (auto& l : lines) {
    if (is_blank(l)) {
      open = false;
      continue;
    }
    if (!block_mode || !open) docs.emplace_back();
    docs.back().push_back(std::move(l));
    open = true;
  }
  return docs;
}

std::string clean_codepoints(std::u32string_view cps, const CleanOptions& opts) {
  std::string out;
  out.reserve(cps.size());
  bool need_space = false;
  for (char32_t c : cps) {
    if (is_allowed(c, opts)) {
      if (need_space && !out.empty()) out.push_back(' ');
      need_space = false;
      utf8::append(out, c);
    } else {
      need_space = true;
    }
  }
  return out;
}

}  // namespace

void CleanCorpus::add(std::string sentence, std::string source, bool new_document) {
  std::uint32_t doc = 0;
  if (!document.empty()) doc = document.back() + (new_document ? 1 : 0);
  sentences.push_back(std::move(sentence));
  provenance.push_back(std::move(source));
  document.push_back(doc);
}

std::size_t CleanCorpus::document_count() const noexcept {
  return document.empty() ? 0 : static_cast<std::size_t>(document.back()) + 1;
}

std::vector<std::string> segment_sentences(std::string_view raw_text) {
  std::vector<std::string> out;
  for (const auto& line : split_lines(raw_text))
    if (!is_blank(line)) out.push_back(utf8::encode(line));
  return out;
}

std::string clean_sentence(std::string_view sentence, const CleanOptions& opts) {
  return clean_codepoints(utf8::decode(sentence), opts);
}

CleanCorpus clean_text(std::string_view raw_text, const CleanOptions& opts, const std::string& source) {
  CleanCorpus c;
  for (const auto& doc : split_documents(raw_text)) {
    bool first = true;
    for (const auto& line : doc) {
      std::string s = clean_codepoints(line, opts);
      if (s.empty()) continue;
      c.add(std::move(s), source, first);
      first = false;
    }
  }
  return c;
}

CorpusStats sentence_stats(std::string_view sentence) noexcept {
  CorpusStats st;
  st.sentence_count = 1;
  bool in_word = false;
  for (char ch : sentence) {
    const bool space = ch == ' ' || ch == '\t';
    if (!space && !in_word) ++st.word_count;
    in_word = !space;
  }
  return st;
}

CorpusStats corpus_stats(const CleanCorpus& c) noexcept {
  CorpusStats total;
  for (const auto& s : c.sentences) total += sentence_stats(s);
  return total;
}

std::vector<fs::path> list_text_files(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) fail(ErrorCategory::kIo, "not a directory: " + dir.string());
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (!e.is_regular_file()) continue;
    const auto name = e.path().filename().string();
    if (!name.empty() && name.front() == '.') continue;
    files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  return files;
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCategory::kIo, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return std::move(ss).str();
}

void write_file(const fs::path& path, std::string_view content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCategory::kIo, "cannot write " + path.string());
  out.write(content.data(), static_cast<std::streamsize>(content.size()));
  if (!out) fail(ErrorCategory::kIo, "write failed for " + path.string());
}

CleanCorpus read_clean_file(const fs::path& path) {
  const std::string src = path.string();
  CleanCorpus c;
  for (const auto& doc : split_documents(read_file(path))) {
    bool first = true;
    for (const auto& line : doc) {
      c.add(utf8::encode(line), src, first);
      first = false;
    }
  }
  return c;
}

CleanCorpus read_clean_dir(const fs::path& dir) {
  CleanCorpus all;
  for (const auto& f : list_text_files(dir)) {
    CleanCorpus part = read_clean_file(f);
    for (std::size_t i = 0; i < part.size(); ++i) {
      const bool starts = i == 0 || part.document[i] != part.document[i - 1];
      all.add(std::move(part.sentences[i]), std::move(part.provenance[i]), starts);
    }
  }
  return all;
}

std::string format_clean(const CleanCorpus& c) {
  // All single-sentence documents read back the same without separators.
  const bool separators = c.document_count() != c.size();
  std::string out;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (separators && i > 0 && c.document[i] != c.document[i - 1]) out.push_back('\n');
    out += c.sentences[i];
    out.push_back('\n');
  }
  return out;
}

std::vector<std::pair<std::string, CorpusStats>> clean_directory(const fs::path& in_dir, const fs::path& out_dir,
                                                                 const CleanOptions& opts, unsigned threads) {
  const auto files = list_text_files(in_dir);
  std::vector<std::pair<std::string, CorpusStats>> stats(files.size());
  fs::create_directories(out_dir);
  parallel_for(files.size(), threads, [&](std::size_t i) {
    const auto name = files[i].filename().string();
    CleanCorpus c = clean_text(read_file(files[i]), opts, files[i].string());
    write_file(out_dir / name, format_clean(c));
    stats[i] = {name, corpus_stats(c)};
  });
  return stats;
}

}  // namespace xbert
