#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "xbert/corpus.hpp"
#include "xbert/eval.hpp"

namespace xbert {

struct ModelEntry {
  std::string name;
  /// Absent when the model failed to train; `failure` says why.
  std::optional<Metrics> metrics;
  std::string failure;
};

struct CorpusEntry {
  std::string name;
  CorpusStats stats;
};

struct Report {
  std::vector<ModelEntry> models;
  std::vector<CorpusEntry> corpora;
  /// Free-form facts (seeds, sizes) written to the key-value file as info.*.
  std::vector<std::pair<std::string, std::string>> info;
};

struct RenderedReport {
  std::string text;
  std::string kv;
};

/// Model | MLM | NSP and Corpus | Sentence Count | Word Count tables with
/// accuracies to two decimals, plus `metric.<model>.<name>=value` lines.
/// Empty lists produce no table.
RenderedReport render_report(const Report& r);

/// Key form of a display name: lowercase ASCII alphanumerics, other runs
/// collapsed to '_'.
std::string report_key(const std::string& name);

/// 1234567 -> "1,234,567".
std::string group_thousands(std::uint64_t n);

}  // namespace xbert
