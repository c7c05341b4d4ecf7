#include <doctest.h>

#include "xbert/error.hpp"
#include "xbert/regimes.hpp"

using namespace xbert;

namespace {

ComparisonConfig tiny() {
  return parse_comparison_config(R"({
    "layers": 1, "hidden": 16, "heads": 2, "max_positions": 32, "vocab_size": 120, "min_frequency": 1,
    "max_seq_length": 24, "max_predictions_per_seq": 3, "dupe_factor": 1, "holdout_fraction": 0.2,
    "source_steps": 20, "steps": 10, "batch_size": 4, "seeds": [1, 2, 3], "threads": 2,
    "source": {"word_types": 40, "sentence_count": 150}
  })");
}

}  // namespace

TEST_CASE("config parsing") {
  const auto c = tiny();
  CHECK(c.settings.model.hidden_size == 16);
  CHECK(c.settings.model.intermediate_size == 64);
  CHECK(c.settings.model.vocab_size == 120);
  CHECK(c.settings.seeds.size() == 3);
  CHECK(c.target.overlap == 0.5);
  CHECK(c.target.word_types == 40);
  CHECK(c.settings.additional_lr == 2e-5);
  CHECK(c.settings.scratch_lr == 1e-4);
  CHECK(parse_comparison_config(R"({"swap_policy": "aligned"})").settings.policy == SwapPolicy::kAligned);

  auto category = [](const char* text) {
    try {
      parse_comparison_config(text);
    } catch (const Error& e) {
      return e.category();
    }
    return ErrorCategory::kInternal;
  };
  CHECK(category("{") == ErrorCategory::kFormat);
  CHECK(category(R"({"stepz": 3})") == ErrorCategory::kConfig);
  CHECK(category(R"({"source": {"overlap": 0.2}})") == ErrorCategory::kConfig);
  CHECK(category(R"({"seeds": []})") == ErrorCategory::kConfig);
  CHECK(category(R"({"steps": "many"})") == ErrorCategory::kConfig);
}

TEST_CASE("a tiny comparison runs every regime and is thread independent") {
  auto cfg = tiny();
  const auto r = run_comparison(cfg);
  REQUIRE(r.regimes.size() == 4);
  CHECK(r.regimes[0].name == kScratchRegime);
  CHECK(r.regimes[1].name == kMultilingualRegime);
  CHECK(r.regimes[2].name == kBilingualRegime);
  CHECK(r.regimes[3].name == kSourceReference);
  for (const auto& g : r.regimes) {
    CHECK(g.runs.size() == 3);
    REQUIRE(g.median.has_value());
    CHECK(g.median->instance_count > 0);
  }
  // The target regimes share the evaluation set.
  CHECK(r.regime(kScratchRegime).median->instance_count == r.regime(kBilingualRegime).median->instance_count);
  CHECK(r.measured_overlap > 0.3);
  CHECK(r.measured_overlap < 0.7);

  cfg.settings.threads = 1;
  const auto s = run_comparison(cfg);
  for (std::size_t i = 0; i < 4; ++i)
    for (std::size_t k = 0; k < 3; ++k) CHECK(*s.regimes[i].runs[k].metrics == *r.regimes[i].runs[k].metrics);

  const auto rep = to_report(r);
  CHECK(rep.models.size() == 4);
  CHECK(rep.corpora.size() >= 2);
  CHECK_THROWS_AS(r.regime("nope"), Error);
}

TEST_CASE("the mixture needs extra languages") {
  const auto c = tiny();
  const auto a = gen_synthetic_corpus(c.source, 1);
  const auto b = gen_synthetic_corpus(c.target, 2, &a);
  CHECK_THROWS_AS(run_regime_comparison(a, b, {a}, c.settings), Error);
}
