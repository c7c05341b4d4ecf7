#include "xbert/regimes.hpp"

#include <algorithm>
#include <mutex>
#include "json.hpp"
#include <ostream>

#include "xbert/error.hpp"
#include "xbert/parallel.hpp"

namespace xbert {

void RegimeSettings::validate() const {
  ModelConfig m = model;
  m.vocab_size = tokenizer.target_size;
  m.validate();
  datagen.validate();
  if (datagen.max_seq_length > m.max_positions)
    fail(ErrorCategory::kConfig, "max_seq_length exceeds the model's max_positions");
  if (seeds.empty()) fail(ErrorCategory::kConfig, "at least one seed is required");
  if (batch_size == 0) fail(ErrorCategory::kConfig, "batch_size must be positive");
  if (!(warmup_fraction >= 0.0 && warmup_fraction <= 1.0))
    fail(ErrorCategory::kConfig, "warmup_fraction must be in [0, 1]");
  if (!(source_lr > 0.0 && additional_lr > 0.0 && scratch_lr > 0.0))
    fail(ErrorCategory::kConfig, "learning rates must be positive");
  if (datagen.holdout_fraction <= 0.0) fail(ErrorCategory::kConfig, "holdout_fraction must be positive");
}

const RegimeSummary& ComparisonReport::regime(std::string_view name) const {
  for (const auto& r : regimes)
    if (r.name == name) return r;
  fail(ErrorCategory::kInternal, "no regime named " + std::string(name));
}

namespace {

struct Split {
  std::vector<PretrainingInstance> train;
  std::vector<PretrainingInstance> eval;
};

Split make_split(const CleanCorpus& corpus, const Vocabulary& v, const RegimeSettings& s, std::uint64_t seed,
                 std::uint64_t stream) {
  DataGenParams p = s.datagen;
  p.seed = mix64(seed * 31 + stream);
  const auto docs = build_documents(corpus, v, s.tokenizer);
  const auto shards = create_instances(docs, v.size(), p, 1);
  const auto split = split_holdout(shards, p.holdout_fraction, p.seed, p.instances_per_shard);
  Split out;
  for (const auto& sh : split.train) out.train.insert(out.train.end(), sh.begin(), sh.end());
  for (const auto& sh : split.eval) out.eval.insert(out.eval.end(), sh.begin(), sh.end());
  if (out.train.empty() || out.eval.empty()) fail(ErrorCategory::kData, "corpus too small for a train/eval split");
  return out;
}

TrainingConfig training(const RegimeSettings& s, std::uint64_t steps, double lr, std::uint64_t seed) {
  TrainingConfig t;
  t.steps = steps;
  t.batch_size = s.batch_size;
  t.learning_rate = lr;
  t.warmup_steps = static_cast<std::uint64_t>(s.warmup_fraction * static_cast<double>(steps));
  t.seed = seed;
  return t;
}

// Outcome of one training run: the trained checkpoint or a failure message.
struct Outcome {
  std::optional<Checkpoint> checkpoint;
  std::string failure;
};

Outcome run_training(const Checkpoint& start, const std::vector<PretrainingInstance>& data, const TrainingConfig& t,
                     const std::string& regime) {
  Outcome o;
  try {
    auto r = train(start, data, t);
    if (r.failure) {
      o.failure = *r.failure;
      return o;
    }
    r.checkpoint.meta.regime = regime;
    o.checkpoint = std::move(r.checkpoint);
  } catch (const Error& e) {
    o.failure = std::string(category_name(e.category())) + ": " + e.what();
  }
  return o;
}

RegimeRun evaluate_run(const Outcome& o, const std::vector<PretrainingInstance>& eval, const RegimeSettings& s,
                       std::uint64_t seed) {
  RegimeRun run;
  run.seed = seed;
  if (!o.checkpoint) {
    run.failure = o.failure.empty() ? "training failed" : o.failure;
    return run;
  }
  run.metrics = evaluate(*o.checkpoint, eval, s.eval_batch_size, 1);
  return run;
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

std::optional<Metrics> median_metrics(const std::vector<RegimeRun>& runs) {
  std::vector<double> a, b, c, d;
  for (const auto& r : runs) {
    if (!r.metrics) return std::nullopt;
    a.push_back(r.metrics->mlm_accuracy);
    b.push_back(r.metrics->nsp_accuracy);
    c.push_back(r.metrics->mlm_loss);
    d.push_back(r.metrics->nsp_loss);
  }
  Metrics m;
  m.mlm_accuracy = median(a);
  m.nsp_accuracy = median(b);
  m.mlm_loss = median(c);
  m.nsp_loss = median(d);
  m.instance_count = runs.front().metrics->instance_count;
  m.masked_position_count = runs.front().metrics->masked_position_count;
  return m;
}

CleanCorpus mixture(const CleanCorpus& a, const std::vector<CleanCorpus>& extra) {
  CleanCorpus out;
  auto append = [&](const CleanCorpus& c, const std::string& tag) {
    for (std::size_t i = 0; i < c.size(); ++i) {
      const bool new_doc = i == 0 || c.document[i] != c.document[i - 1];
      out.add(c.sentences[i], tag, new_doc);
    }
  };
  append(a, "source");
  for (std::size_t k = 0; k < extra.size(); ++k) append(extra[k], "extra-" + std::to_string(k));
  return out;
}

struct SeedResult {
  RegimeRun scratch, multilingual, bilingual, reference;
};

}  // namespace

ComparisonReport run_regime_comparison(const CleanCorpus& corpus_a, const CleanCorpus& corpus_b,
                                       const std::vector<CleanCorpus>& extra_languages, const RegimeSettings& settings,
                                       std::ostream* log) {
  settings.validate();
  if (extra_languages.size() < 3) fail(ErrorCategory::kConfig, "the multilingual mixture needs at least 3 extra languages");
  ModelConfig cfg = settings.model;
  cfg.vocab_size = settings.tokenizer.target_size;

  const CleanCorpus mix = mixture(corpus_a, extra_languages);
  const Vocabulary vocab_a = train_vocab(corpus_a, settings.tokenizer);
  const Vocabulary vocab_b = train_vocab(corpus_b, settings.tokenizer);
  const Vocabulary vocab_mix = train_vocab(mix, settings.tokenizer);

  std::mutex log_mutex;
  auto note = [&](const std::string& msg) {
    if (!log) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    *log << msg << std::endl;
  };

  std::vector<SeedResult> results(settings.seeds.size());
  parallel_for(settings.seeds.size(), settings.threads, [&](std::size_t i) {
    const std::uint64_t seed = settings.seeds[i];
    const std::string tag = "seed " + std::to_string(seed) + ": ";
    const Split data_a = make_split(corpus_a, vocab_a, settings, seed, 1);
    const Split data_b = make_split(corpus_b, vocab_b, settings, seed, 2);
    const Split data_mix = make_split(mix, vocab_mix, settings, seed, 3);

    note(tag + "source pretraining (monolingual)");
    const Outcome mono = run_training(init_scratch(cfg, vocab_a, mix64(seed + 101)), data_a.train,
                                      training(settings, settings.source_steps, settings.source_lr, seed + 1),
                                      "source-monolingual");
    note(tag + "source pretraining (mixture)");
    const Outcome multi = run_training(init_scratch(cfg, vocab_mix, mix64(seed + 102)), data_mix.train,
                                       training(settings, settings.source_steps, settings.source_lr, seed + 2),
                                       "source-multilingual");

    SeedResult& r = results[i];
    r.reference = evaluate_run(mono, data_a.eval, settings, seed);

    note(tag + "scratch");
    const Outcome scratch = run_training(init_scratch(cfg, vocab_b, mix64(seed + 103)), data_b.train,
                                         training(settings, settings.steps, settings.scratch_lr, seed + 3), "scratch");
    r.scratch = evaluate_run(scratch, data_b.eval, settings, seed);

    auto additional = [&](const Outcome& source, const std::string& regime, std::uint64_t stream) {
      if (!source.checkpoint) return Outcome{std::nullopt, "source pretraining failed: " + source.failure};
      const Checkpoint swapped = swap_vocabulary(*source.checkpoint, vocab_b, settings.policy, mix64(seed + stream));
      return run_training(swapped, data_b.train,
                          training(settings, settings.steps, settings.additional_lr, seed + stream), regime);
    };
    note(tag + "additional pretraining (multilingual)");
    r.multilingual = evaluate_run(additional(multi, "additional-multilingual", 4), data_b.eval, settings, seed);
    note(tag + "additional pretraining (bilingual)");
    r.bilingual = evaluate_run(additional(mono, "additional-bilingual", 5), data_b.eval, settings, seed);
    if (r.bilingual.metrics && r.scratch.metrics && r.multilingual.metrics) {
      char buf[160];
      std::snprintf(buf, sizeof buf, "mlm scratch %.4f multilingual %.4f bilingual %.4f",
                    r.scratch.metrics->mlm_accuracy, r.multilingual.metrics->mlm_accuracy,
                    r.bilingual.metrics->mlm_accuracy);
      note(tag + buf);
    }
  });

  ComparisonReport out;
  out.settings = settings;
  out.measured_overlap = type_overlap(corpus_b, corpus_a);
  auto collect = [&](std::string_view name, RegimeRun SeedResult::*field) {
    RegimeSummary s;
    s.name = std::string(name);
    for (const auto& r : results) s.runs.push_back(r.*field);
    s.median = median_metrics(s.runs);
    out.regimes.push_back(std::move(s));
  };
  collect(kScratchRegime, &SeedResult::scratch);
  collect(kMultilingualRegime, &SeedResult::multilingual);
  collect(kBilingualRegime, &SeedResult::bilingual);
  collect(kSourceReference, &SeedResult::reference);
  out.corpora.push_back({"source (A)", corpus_stats(corpus_a)});
  out.corpora.push_back({"target (B)", corpus_stats(corpus_b)});
  out.corpora.push_back({"mixture", corpus_stats(mix)});
  return out;
}

Report to_report(const ComparisonReport& c) {
  Report r;
  for (const auto& s : c.regimes) {
    ModelEntry e;
    e.name = s.name;
    e.metrics = s.median;
    if (!s.median)
      for (const auto& run : s.runs)
        if (!run.metrics) {
          e.failure = "seed " + std::to_string(run.seed) + ": " + run.failure;
          break;
        }
    r.models.push_back(std::move(e));
  }
  r.corpora = c.corpora;
  const auto& st = c.settings;
  std::string seeds;
  for (auto s : st.seeds) seeds += (seeds.empty() ? "" : ",") + std::to_string(s);
  r.info = {{"seeds", seeds},
            {"steps", std::to_string(st.steps)},
            {"source_steps", std::to_string(st.source_steps)},
            {"additional_lr", std::to_string(st.additional_lr)},
            {"scratch_lr", std::to_string(st.scratch_lr)},
            {"source_lr", std::to_string(st.source_lr)},
            {"batch_size", std::to_string(st.batch_size)},
            {"swap_policy", std::string(swap_policy_name(st.policy))},
            {"vocab_size", std::to_string(st.tokenizer.target_size)},
            {"type_overlap", std::to_string(c.measured_overlap)},
            {"statistic", "median over seeds"}};
  for (const auto& s : c.regimes)
    for (const auto& run : s.runs) {
      const std::string p = "seed." + std::to_string(run.seed) + "." + report_key(s.name) + ".";
      if (run.metrics) {
        r.info.emplace_back(p + "mlm_accuracy", std::to_string(run.metrics->mlm_accuracy));
        r.info.emplace_back(p + "nsp_accuracy", std::to_string(run.metrics->nsp_accuracy));
      } else {
        r.info.emplace_back(p + "status", "failed");
      }
    }
  return r;
}

namespace {

using nlohmann::json;

void reject_unknown(const json& j, std::initializer_list<std::string_view> known, const std::string& where) {
  if (!j.is_object()) fail(ErrorCategory::kConfig, where + " must be a JSON object");
  for (const auto& [k, v] : j.items())
    if (std::find(known.begin(), known.end(), k) == known.end())
      fail(ErrorCategory::kConfig, "unknown key " + where + "." + k);
}

template <typename T>
void get(const json& j, const char* key, T& out) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    fail(ErrorCategory::kConfig, std::string("bad value for ") + key);
  }
}

void parse_synthetic(const json& j, SyntheticSpec& s, const std::string& where) {
  reject_unknown(j,
                 {"word_types", "min_word_length", "max_word_length", "min_sentence_length", "max_sentence_length",
                  "min_document_sentences", "max_document_sentences", "sentence_count", "overlap", "successors",
                  "zipf_exponent", "restart_prob", "alphabet"},
                 where);
  get(j, "word_types", s.word_types);
  get(j, "min_word_length", s.min_word_length);
  get(j, "max_word_length", s.max_word_length);
  get(j, "min_sentence_length", s.min_sentence_length);
  get(j, "max_sentence_length", s.max_sentence_length);
  get(j, "min_document_sentences", s.min_document_sentences);
  get(j, "max_document_sentences", s.max_document_sentences);
  get(j, "sentence_count", s.sentence_count);
  get(j, "overlap", s.overlap);
  get(j, "successors", s.successors);
  get(j, "zipf_exponent", s.zipf_exponent);
  get(j, "restart_prob", s.restart_prob);
  get(j, "alphabet", s.alphabet);
}

}  // namespace

ComparisonConfig parse_comparison_config(std::string_view json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("comparison config is not valid JSON: ") + e.what());
  }
  reject_unknown(j,
                 {"layers", "hidden", "heads", "intermediate", "max_positions", "dropout", "vocab_size",
                  "min_frequency", "max_seq_length", "max_predictions_per_seq", "masked_lm_prob", "dupe_factor",
                  "holdout_fraction", "source_steps", "source_lr", "steps", "additional_lr", "scratch_lr",
                  "batch_size", "warmup_fraction", "swap_policy", "seeds", "threads", "extra_languages",
                  "corpus_seed", "source", "target"},
                 "config");
  ComparisonConfig c;
  RegimeSettings& s = c.settings;
  get(j, "layers", s.model.num_layers);
  get(j, "hidden", s.model.hidden_size);
  get(j, "heads", s.model.num_heads);
  s.model.intermediate_size = 4 * s.model.hidden_size;
  get(j, "intermediate", s.model.intermediate_size);
  get(j, "max_positions", s.model.max_positions);
  get(j, "dropout", s.model.dropout_prob);
  get(j, "vocab_size", s.tokenizer.target_size);
  s.model.vocab_size = s.tokenizer.target_size;
  get(j, "min_frequency", s.tokenizer.min_frequency);
  get(j, "max_seq_length", s.datagen.max_seq_length);
  get(j, "max_predictions_per_seq", s.datagen.max_predictions_per_seq);
  get(j, "masked_lm_prob", s.datagen.masked_lm_prob);
  get(j, "dupe_factor", s.datagen.dupe_factor);
  get(j, "holdout_fraction", s.datagen.holdout_fraction);
  get(j, "source_steps", s.source_steps);
  get(j, "source_lr", s.source_lr);
  get(j, "steps", s.steps);
  get(j, "additional_lr", s.additional_lr);
  get(j, "scratch_lr", s.scratch_lr);
  get(j, "batch_size", s.batch_size);
  get(j, "warmup_fraction", s.warmup_fraction);
  if (j.contains("swap_policy")) {
    std::string p;
    get(j, "swap_policy", p);
    s.policy = parse_swap_policy(p);
  }
  get(j, "seeds", s.seeds);
  get(j, "threads", s.threads);
  get(j, "extra_languages", c.extra_languages);
  get(j, "corpus_seed", c.corpus_seed);
  if (j.contains("source")) parse_synthetic(j.at("source"), c.source, "source");
  c.target = c.source;
  c.target.overlap = 0.5;
  if (j.contains("target")) parse_synthetic(j.at("target"), c.target, "target");
  if (c.source.overlap != 0.0) fail(ErrorCategory::kConfig, "the source language has no parent; source.overlap must be 0");
  s.validate();
  return c;
}

ComparisonReport run_comparison(const ComparisonConfig& cfg, std::ostream* log) {
  const CleanCorpus a = gen_synthetic_corpus(cfg.source, cfg.corpus_seed);
  const CleanCorpus b = gen_synthetic_corpus(cfg.target, cfg.corpus_seed + 1, &a);
  std::vector<CleanCorpus> extra;
  for (std::size_t k = 0; k < cfg.extra_languages; ++k) extra.push_back(gen_synthetic_corpus(cfg.source, cfg.corpus_seed + 100 + k));
  return run_regime_comparison(a, b, extra, cfg.settings, log);
}

}  // namespace xbert
