#include "xbert/report.hpp"

#include <algorithm>
#include <cstdio>

namespace xbert {

namespace {

std::string fixed2(double x) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", x);
  return buf;
}

std::string full(double x) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", x);
  return buf;
}

// Renders rows as columns; `right[i]` right-aligns column i.
std::string table(const std::vector<std::vector<std::string>>& rows, const std::vector<bool>& right) {
  std::vector<std::size_t> width(rows.front().size(), 0);
  for (const auto& row : rows)
    for (std::size_t i = 0; i < row.size(); ++i) width[i] = std::max(width[i], row[i].size());
  auto line = [&](const std::vector<std::string>& row) {
    std::string out;
    for (std::size_t i = 0; i < row.size(); ++i) {
      const std::string pad(width[i] - row[i].size(), ' ');
      if (i > 0) out += " | ";
      out += right[i] ? pad + row[i] : row[i] + (i + 1 < row.size() ? pad : "");
    }
    return out + "\n";
  };
  std::string out = line(rows.front());
  for (std::size_t i = 0; i < width.size(); ++i) {
    if (i > 0) out += "-+-";
    out += std::string(width[i], '-');
  }
  out += "\n";
  for (std::size_t r = 1; r < rows.size(); ++r) out += line(rows[r]);
  return out;
}

}  // namespace

std::string report_key(const std::string& name) {
  std::string out;
  bool gap = false;
  for (char c : name) {
    const bool alnum = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || (c >= 'A' && c <= 'Z');
    if (!alnum) {
      gap = true;
      continue;
    }
    if (gap && !out.empty()) out.push_back('_');
    gap = false;
    out.push_back(c >= 'A' && c <= 'Z' ? static_cast<char>(c - 'A' + 'a') : c);
  }
  return out.empty() ? "unnamed" : out;
}

std::string group_thousands(std::uint64_t n) {
  std::string digits = std::to_string(n);
  std::string out;
  for (std::size_t i = 0; i < digits.size(); ++i) {
    if (i > 0 && (digits.size() - i) % 3 == 0) out.push_back(',');
    out.push_back(digits[i]);
  }
  return out;
}

RenderedReport render_report(const Report& r) {
  RenderedReport out;
  if (!r.models.empty()) {
    std::vector<std::vector<std::string>> rows{{"Model", "MLM", "NSP"}};
    for (const auto& m : r.models) {
      if (m.metrics) {
        rows.push_back({m.name, fixed2(m.metrics->mlm_accuracy), fixed2(m.metrics->nsp_accuracy)});
      } else {
        rows.push_back({m.name, "failed", "failed"});
      }
    }
    out.text += table(rows, {false, true, true});
  }
  if (!r.corpora.empty()) {
    if (!out.text.empty()) out.text += "\n";
    std::vector<std::vector<std::string>> rows{{"Corpus", "Sentence Count", "Word Count"}};
    for (const auto& c : r.corpora)
      rows.push_back({c.name, group_thousands(c.stats.sentence_count), group_thousands(c.stats.word_count)});
    out.text += table(rows, {false, true, true});
  }

  for (const auto& m : r.models) {
    const std::string p = "metric." + report_key(m.name) + ".";
    if (!m.metrics) {
      out.kv += p + "status=failed\n";
      if (!m.failure.empty()) out.kv += p + "failure=" + m.failure + "\n";
      continue;
    }
    const Metrics& x = *m.metrics;
    out.kv += p + "mlm_accuracy=" + full(x.mlm_accuracy) + "\n";
    out.kv += p + "nsp_accuracy=" + full(x.nsp_accuracy) + "\n";
    out.kv += p + "mlm_loss=" + full(x.mlm_loss) + "\n";
    out.kv += p + "nsp_loss=" + full(x.nsp_loss) + "\n";
    out.kv += p + "instance_count=" + std::to_string(x.instance_count) + "\n";
    out.kv += p + "masked_position_count=" + std::to_string(x.masked_position_count) + "\n";
  }
  for (const auto& c : r.corpora) {
    const std::string p = "corpus." + report_key(c.name) + ".";
    out.kv += p + "sentence_count=" + std::to_string(c.stats.sentence_count) + "\n";
    out.kv += p + "word_count=" + std::to_string(c.stats.word_count) + "\n";
  }
  for (const auto& [k, v] : r.info) out.kv += "info." + k + "=" + v + "\n";
  return out;
}

}  // namespace xbert
