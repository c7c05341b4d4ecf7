#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xbert/corpus.hpp"
#include "xbert/datagen.hpp"
#include "xbert/model_config.hpp"
#include "xbert/report.hpp"
#include "xbert/synthetic.hpp"
#include "xbert/train.hpp"
#include "xbert/wordpiece.hpp"

namespace xbert {

/// Sizes and budgets of a regime comparison.
///
/// All three vocabularies (source, mixture, target) are trained to
/// `tokenizer.target_size`, which also becomes the model's vocab size, so the
/// swap never changes table shapes.
struct RegimeSettings {
  ModelConfig model = ModelConfig::make(2, 32, 2, 384, 64, 0.0);
  TokenizerConfig tokenizer{.target_size = 384, .lowercase = true, .min_frequency = 2, .max_word_chars = 100};
  DataGenParams datagen{.max_seq_length = 48, .masked_lm_prob = 0.15, .max_predictions_per_seq = 7, .dupe_factor = 5,
                        .random_next_prob = 0.5, .holdout_fraction = 0.1};
  /// Budget of each source pretraining run (monolingual and mixture alike).
  std::uint64_t source_steps = 5000;
  double source_lr = 1e-3;
  /// Budget of each of the three target-language runs.
  std::uint64_t steps = 5000;
  double additional_lr = kAdditionalPretrainingLr;
  double scratch_lr = kScratchPretrainingLr;
  std::size_t batch_size = 16;
  /// Warmup as a fraction of each run's steps.
  double warmup_fraction = 0.1;
  SwapPolicy policy = SwapPolicy::kPositional;
  std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
  std::size_t eval_batch_size = 64;
  /// Seeds run concurrently on this many workers; results do not depend on it.
  unsigned threads = 1;

  void validate() const;
};

struct RegimeRun {
  std::uint64_t seed = 0;
  std::optional<Metrics> metrics;
  std::string failure;
};

struct RegimeSummary {
  std::string name;
  std::vector<RegimeRun> runs;
  /// Field-wise medians over seeds; absent when any run failed.
  std::optional<Metrics> median;
};

inline constexpr std::string_view kScratchRegime = "scratch";
inline constexpr std::string_view kMultilingualRegime = "simulated multilingual";
inline constexpr std::string_view kBilingualRegime = "bilingual";
inline constexpr std::string_view kSourceReference = "source reference";

struct ComparisonReport {
  /// Scratch, simulated multilingual, bilingual, then the source model
  /// evaluated on its own language as the upper reference.
  std::vector<RegimeSummary> regimes;
  std::vector<CorpusEntry> corpora;
  RegimeSettings settings;
  double measured_overlap = 0.0;

  const RegimeSummary& regime(std::string_view name) const;
};

/// Runs every regime for every seed. Per seed: instances for A, B and the
/// mixture (A plus `extra_languages`) are generated with that seed; the
/// monolingual source is pretrained on A and the multilingual one on the
/// mixture with the same budget; both are swapped to B's vocabulary and
/// trained on B, and a scratch model is trained on B. Every target model is
/// evaluated on the same held-out B instances. Failed runs are recorded, not
/// thrown.
ComparisonReport run_regime_comparison(const CleanCorpus& corpus_a, const CleanCorpus& corpus_b,
                                       const std::vector<CleanCorpus>& extra_languages, const RegimeSettings& settings,
                                       std::ostream* log = nullptr);

Report to_report(const ComparisonReport& c);

/// A comparison over generated languages: A is parent-free, B is a child of A
/// with `target.overlap`, and the extra mixture languages are parent-free
/// languages with their own seeds.
struct ComparisonConfig {
  RegimeSettings settings;
  SyntheticSpec source;
  SyntheticSpec target;
  std::size_t extra_languages = 3;
  std::uint64_t corpus_seed = 7;
};

/// Parses a JSON object; every key is optional. Unknown keys are an error.
ComparisonConfig parse_comparison_config(std::string_view json_text);

ComparisonReport run_comparison(const ComparisonConfig& cfg, std::ostream* log = nullptr);

}  // namespace xbert
