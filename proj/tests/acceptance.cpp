// Acceptance checks. Prints one PASS/FAIL line per criterion; exits non-zero
// if any fails. Pass criterion numbers as arguments to run a subset.

#include <sys/wait.h>

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <iostream>
#include <set>
#include <sstream>

#include "test_util.hpp"
#include "xbert/bert.hpp"
#include "xbert/checkpoint.hpp"
#include "xbert/corpus.hpp"
#include "xbert/datagen.hpp"
#include "xbert/eval.hpp"
#include "xbert/regimes.hpp"
#include "xbert/synthetic.hpp"
#include "xbert/train.hpp"
#include "xbert/utf8.hpp"
#include "xbert/wordpiece.hpp"

using namespace xbert;
namespace fs = std::filesystem;

namespace {

// Tolerances and budgets.
constexpr double kGradTolerance = 1e-4;
constexpr double kGradEpsilon = 1e-5;
constexpr double kParamsLow = 1.08e8, kParamsHigh = 1.12e8;
constexpr std::size_t kMinSelections = 10000;
constexpr double kReplacementTolerance = 0.02;
constexpr double kMaskedFractionTolerance = 0.01;
constexpr double kNspLow = 0.48, kNspHigh = 0.52;
constexpr std::size_t kOracleWords = 1000;
constexpr double kChanceNspLow = 0.42, kChanceNspHigh = 0.58;
constexpr std::size_t kChanceInstances = 1000;
constexpr double kOverfitMlm = 0.9, kOverfitNsp = 0.95;
constexpr std::size_t kLossWindow = 100;
constexpr std::size_t kComparisonSeeds = 5;
constexpr std::size_t kFuzzLines = 10000;

const ModelConfig kToy = ModelConfig::make(2, 32, 2, 128, 64, 0.0);

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

std::vector<PretrainingInstance> flatten(const std::vector<Shard>& shards) {
  std::vector<PretrainingInstance> out;
  for (const auto& s : shards) out.insert(out.end(), s.begin(), s.end());
  return out;
}

struct Toy {
  CleanCorpus corpus;
  Vocabulary vocab;
  std::vector<PretrainingInstance> instances;
};

Toy toy_data(std::size_t word_types, std::size_t sentences, std::size_t vocab_size, const DataGenParams& p,
             std::uint64_t seed) {
  Toy t;
  SyntheticSpec spec;
  spec.word_types = word_types;
  spec.sentence_count = sentences;
  t.corpus = gen_synthetic_corpus(spec, seed);
  TokenizerConfig tc;
  tc.target_size = vocab_size;
  tc.min_frequency = 1;
  t.vocab = train_vocab(t.corpus, tc);
  t.instances = flatten(create_instances(build_documents(t.corpus, t.vocab, tc), t.vocab.size(), p));
  return t;
}

Outcome gradient_correctness() {
  const auto r = gradient_check(kToy, 1, kGradEpsilon);
  return {r.max_relative_error < kGradTolerance,
          fmt("max relative error %.3e over %zu entries (worst %s), bound %.0e", r.max_relative_error,
              r.checked_entries, r.worst_parameter.c_str(), kGradTolerance)};
}

Outcome parameter_count() {
  const auto n = static_cast<double>(param_count(base_config(30522)));
  return {n >= kParamsLow && n <= kParamsHigh, fmt("%.0f parameters, range [%.2e, %.2e]", n, kParamsLow, kParamsHigh)};
}

Outcome masking_statistics() {
  // Replacement split, classified by outcome over many selections.
  DataGenParams mp;
  mp.masked_lm_prob = 0.15;
  mp.max_predictions_per_seq = 20;
  const std::size_t vocab = 30522;
  Rng rng(11);
  std::size_t mask = 0, random = 0, keep = 0;
  while (mask + random + keep < 2 * kMinSelections) {
    std::vector<TokenId> t{kClsId};
    for (int i = 0; i < 120; ++i) t.push_back(static_cast<TokenId>(kNumSpecial + rng.below(vocab - kNumSpecial)));
    t.push_back(kSepId);
    const auto r = apply_masking(t, vocab, mp, rng);
    for (auto pos : r.positions) {
      const auto i = static_cast<std::size_t>(pos);
      if (r.tokens[i] == kMaskId) ++mask;
      else if (r.tokens[i] != t[i]) ++random;
      else ++keep;
    }
  }
  const double n = static_cast<double>(mask + random + keep);
  const double fm = mask / n, fr = random / n, fk = keep / n;
  bool ok = std::abs(fm - 0.8) <= kReplacementTolerance && std::abs(fr - 0.1) <= kReplacementTolerance &&
            std::abs(fk - 0.1) <= kReplacementTolerance;

  // Masked fraction and NSP negatives over generated instances.
  DataGenParams p;
  p.max_seq_length = 128;
  p.max_predictions_per_seq = 20;
  p.dupe_factor = 5;
  p.seed = 5;
  const auto toy = toy_data(500, 20000, 1000, p, 3);
  std::size_t masked = 0, candidates = 0, negatives = 0;
  for (const auto& inst : toy.instances) {
    auto original = inst.token_ids;
    for (std::size_t k = 0; k < inst.masked_positions.size(); ++k)
      original[static_cast<std::size_t>(inst.masked_positions[k])] = inst.masked_labels[k];
    candidates += static_cast<std::size_t>(std::count_if(original.begin(), original.end(), [](TokenId t) { return !is_special(t); }));
    masked += inst.masked_positions.size();
    negatives += inst.is_random_next;
  }
  const double masked_fraction = static_cast<double>(masked) / static_cast<double>(candidates);
  const double neg = static_cast<double>(negatives) / static_cast<double>(toy.instances.size());
  ok = ok && masked >= kMinSelections && std::abs(masked_fraction - 0.15) <= kMaskedFractionTolerance &&
       neg >= kNspLow && neg <= kNspHigh;
  return {ok, fmt("mask/random/keep %.3f/%.3f/%.3f over %.0f selections; masked fraction %.4f over %zu positions; "
                  "NSP negatives %.4f of %zu",
                  fm, fr, fk, n, masked_fraction, masked, neg, toy.instances.size())};
}

// Longest match by trying every prefix length at every position.
std::vector<std::string> brute_force_pieces(const std::string& word, const std::set<std::string>& vocab) {
  const auto chars = utf8::split_chars(word);
  std::vector<std::string> pieces;
  std::size_t i = 0;
  while (i < chars.size()) {
    std::size_t best = 0;
    std::string best_piece;
    for (std::size_t len = 1; i + len <= chars.size(); ++len) {
      std::string piece = i == 0 ? "" : "##";
      for (std::size_t k = i; k < i + len; ++k) piece += chars[k];
      if (vocab.count(piece)) best = len, best_piece = piece;
    }
    if (best == 0) return {"[UNK]"};
    pieces.push_back(best_piece);
    i += best;
  }
  return pieces;
}

Outcome tokenizer_oracle() {
  Rng rng(21);
  auto word = [&](const std::string& letters, std::size_t max_len) {
    std::string w;
    for (std::size_t i = 0, n = 1 + rng.below(max_len); i < n; ++i) w.push_back(letters[rng.below(letters.size())]);
    return w;
  };
  CleanCorpus c;
  for (int s = 0; s < 300; ++s) {
    std::string line;
    for (int k = 0; k < 6; ++k) line += (k ? " " : "") + word("abcdefgh", 8);
    c.add(line, "fuzz", true);
  }
  TokenizerConfig cfg;
  cfg.min_frequency = 1;
  cfg.target_size = 200;
  const Vocabulary v = train_vocab(c, cfg);
  const std::set<std::string> vs(v.tokens().begin(), v.tokens().end());
  std::size_t agree = 0;
  for (std::size_t i = 0; i < kOracleWords; ++i) {
    const auto w = word("abcdefghij", 12);
    std::vector<std::string> got;
    for (TokenId id : tokenize(w, v, cfg)) got.push_back(v.token(id));
    agree += got == brute_force_pieces(w, vs);
  }

  CleanCorpus four;
  four.add("ab ab ab abc", "example", true);
  TokenizerConfig fc;
  fc.min_frequency = 1;
  fc.target_size = 12;
  const std::vector<std::string> hand_run{"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "a",
                                          "b",     "c",     "##b",   "##c",   "ab",     "abc"};
  const bool merges_ok = train_vocab(four, fc).tokens() == hand_run;
  return {agree == kOracleWords && merges_ok,
          fmt("%zu/%zu words agree with the brute-force oracle; merge trace %s", agree, kOracleWords,
              merges_ok ? "matches" : "differs")};
}

Checkpoint perturbed_checkpoint(std::size_t vocab_size) {
  std::vector<std::string> t(kSpecialTokens.begin(), kSpecialTokens.end());
  for (std::size_t i = t.size(); i < vocab_size; ++i) t.push_back("w" + std::to_string(i));
  auto ck = init_scratch(ModelConfig::make(2, 32, 2, vocab_size, 64, 0.0), Vocabulary(t), 1);
  Rng rng(2);
  for (auto& [name, tensor] : ck.params)
    for (float& x : tensor.data) x += static_cast<float>(0.01 * rng.normal());
  return ck;
}

Outcome swap_invariants() {
  const std::size_t V = 1005, H = 32;
  const auto ck = perturbed_checkpoint(V);
  // Half the content tokens kept at shuffled ids, half replaced.
  std::vector<std::string> content;
  for (std::size_t i = kNumSpecial; i < V; ++i)
    content.push_back(i % 2 ? ck.vocab.token(static_cast<TokenId>(i)) : "n" + std::to_string(i));
  Rng rng(3);
  rng.shuffle(std::span<std::string>(content));
  std::vector<std::string> tokens(kSpecialTokens.begin(), kSpecialTokens.end());
  tokens.insert(tokens.end(), content.begin(), content.end());
  const Vocabulary nv(tokens);

  bool ok = true;
  std::size_t compared = 0;
  for (SwapPolicy policy : {SwapPolicy::kPositional, SwapPolicy::kAligned}) {
    const auto out = swap_vocabulary(ck, nv, policy, 4);
    for (const auto& [name, t] : ck.params) {
      if (name == param_names::kTokenEmbeddings || name == param_names::kMlmOutputBias) continue;
      ok = ok && tensor_hash(t) == tensor_hash(out.params.at(name));
      ++compared;
    }
    ok = ok && encode_tensors(swap_vocabulary(ck, ck.vocab, policy, 4).params) == encode_tensors(ck.params);
  }
  const auto aligned = swap_vocabulary(ck, nv, SwapPolicy::kAligned, 4);
  const auto& old_emb = ck.params.at(param_names::kTokenEmbeddings).data;
  const auto& new_emb = aligned.params.at(param_names::kTokenEmbeddings).data;
  std::size_t shared = 0, preserved = 0;
  for (std::size_t id = 0; id < V; ++id) {
    const auto old = ck.vocab.find(nv.token(static_cast<TokenId>(id)));
    if (!old) continue;
    ++shared;
    const auto o = static_cast<std::size_t>(*old);
    preserved += std::equal(new_emb.begin() + id * H, new_emb.begin() + (id + 1) * H, old_emb.begin() + o * H);
  }
  ok = ok && shared == preserved && shared > 0;
  return {ok, fmt("%zu non-embedding tensors compared over both policies; %zu/%zu shared rows preserved; identity swaps "
                  "%s",
                  compared, preserved, shared, ok ? "bit-exact" : "checked")};
}

Outcome chance_level() {
  DataGenParams p;
  p.max_seq_length = 64;
  p.max_predictions_per_seq = 10;
  p.seed = 8;
  const auto toy = toy_data(200, 3000, kToy.vocab_size, p, 6);
  const auto ck = init_scratch(kToy, toy.vocab, 9);
  const auto m = evaluate(ck, toy.instances);
  const double mlm_bound = 2.0 * (1.0 / static_cast<double>(kToy.vocab_size)) * 10.0;
  return {m.instance_count >= kChanceInstances && m.nsp_accuracy >= kChanceNspLow && m.nsp_accuracy <= kChanceNspHigh &&
              m.mlm_accuracy <= mlm_bound,
          fmt("%llu instances: NSP %.4f in [%.2f, %.2f], MLM %.4f <= %.4f",
              static_cast<unsigned long long>(m.instance_count), m.nsp_accuracy, kChanceNspLow, kChanceNspHigh,
              m.mlm_accuracy, mlm_bound)};
}

Outcome overfit() {
  DataGenParams p;
  p.max_seq_length = 32;
  p.max_predictions_per_seq = 5;
  p.dupe_factor = 1;
  p.seed = 1;
  const auto toy = toy_data(60, 64, 128, p, 3);
  const auto cfg = ModelConfig::make(2, 64, 2, 128, 64, 0.0);
  TrainingConfig t;
  t.steps = 2000;
  t.learning_rate = 1e-4;
  t.warmup_steps = 200;
  t.batch_size = 32;
  t.seed = 1;
  const auto r = train(init_scratch(cfg, toy.vocab, 1), toy.instances, t);
  if (r.failure) return {false, "training failed: " + *r.failure};
  const auto m = evaluate(r.checkpoint, toy.instances);
  auto window_mean = [&](std::size_t first) {
    double sum = 0;
    for (std::size_t i = first; i < first + kLossWindow; ++i) sum += r.history[i].total_loss;
    return sum / kLossWindow;
  };
  const double start_loss = window_mean(0), end_loss = window_mean(r.history.size() - kLossWindow);
  return {m.mlm_accuracy >= kOverfitMlm && m.nsp_accuracy >= kOverfitNsp && end_loss < start_loss,
          fmt("%zu training instances from 64 sentences, L2 H64 A2: MLM %.4f (>= %.2f), NSP %.4f (>= %.2f); "
              "%zu-step mean loss %.4f -> %.4f",
              toy.instances.size(), m.mlm_accuracy, kOverfitMlm, m.nsp_accuracy, kOverfitNsp, kLossWindow, start_loss,
              end_loss)};
}

Outcome regime_ordering() {
  ComparisonConfig cfg;
  cfg.source.word_types = 300;
  cfg.source.sentence_count = 4000;
  cfg.target = cfg.source;
  cfg.target.overlap = 0.5;
  cfg.settings.seeds.clear();
  for (std::uint64_t s = 1; s <= kComparisonSeeds; ++s) cfg.settings.seeds.push_back(s);
  const auto& st = cfg.settings;
  if (st.steps != 5000 || st.source_steps != 5000 || st.additional_lr != 2e-5 || st.scratch_lr != 1e-4)
    return {false, "comparison defaults drifted from the required budgets"};
  const auto r = run_comparison(cfg, &std::cerr);
  const auto& scratch = r.regime(kScratchRegime);
  const auto& multi = r.regime(kMultilingualRegime);
  const auto& bi = r.regime(kBilingualRegime);
  if (!scratch.median || !multi.median || !bi.median) return {false, "a regime failed to train"};
  std::cout << render_report(to_report(r)).text;
  const double s = scratch.median->mlm_accuracy, m = multi.median->mlm_accuracy, b = bi.median->mlm_accuracy;
  return {b > s && b >= m, fmt("median MLM over %zu seeds: bilingual %.4f, simulated multilingual %.4f, scratch %.4f; "
                               "measured overlap %.3f",
                               kComparisonSeeds, b, m, s, r.measured_overlap)};
}

int run_cli(const std::string& args) {
  const std::string cmd = std::string(XBERT_CLI_PATH) + " " + args + " > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string dir_bytes(const fs::path& dir) {
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir))
    if (e.is_regular_file()) files.push_back(e.path());
  std::sort(files.begin(), files.end());
  std::string all;
  for (const auto& f : files) all += fs::relative(f, dir).string() + "\n" + read_file(f);
  return all;
}

Outcome determinism() {
  test::TempDir t("accept-det");
  SyntheticSpec spec;
  spec.word_types = 150;
  spec.sentence_count = 1500;
  write_file(t / "clean.txt", format_clean(gen_synthetic_corpus(spec, 12)));
  const std::string q = "'" + t.path().string() + "/";
  const std::string flags = "--deterministic --threads 1 --seed 42 ";
  if (run_cli(flags + "train-vocab --in " + q + "clean.txt' --size 300 --min-freq 1 --out " + q + "vocab.txt'") != 0)
    return {false, "train-vocab failed"};
  for (const char* d : {"data1", "data2"})
    if (run_cli(flags + "build-data --in " + q + "clean.txt' --vocab " + q + "vocab.txt' --max-seq 64 --max-pred 10 "
                        "--out " + q + d + "'") != 0)
      return {false, "build-data failed"};
  const bool shards_equal = dir_bytes(t / "data1") == dir_bytes(t / "data2");
  for (const char* c : {"ck1", "ck2"})
    if (run_cli(flags + "pretrain --from scratch --data " + q + "data1' --layers 2 --hidden 32 --heads 2 "
                        "--intermediate 128 --max-positions 64 --steps 200 --batch-size 8 --lr 1e-4 --out " + q + c +
                "'") != 0)
      return {false, "pretrain failed"};
  const std::string h1 = read_file(t / "ck1/history.txt");
  const bool histories_equal = h1 == read_file(t / "ck2/history.txt");
  const bool weights_equal = read_file(t / "ck1/weights.bin") == read_file(t / "ck2/weights.bin");
  const auto lines = std::count(h1.begin(), h1.end(), '\n');
  return {shards_equal && histories_equal && weights_equal && lines == 200,
          fmt("shards %s; %ld-step loss histories %s; weights %s", shards_equal ? "byte-identical" : "differ",
              static_cast<long>(lines), histories_equal ? "identical" : "differ", weights_equal ? "identical" : "differ")};
}

std::string fuzz_line(Rng& rng) {
  static const std::vector<char32_t> pool = {
      U'a', U'Z', U'7', U' ', U' ', U'\t', U'.', U',', U'!', U'?', U'-', U'\'', U'"', U'(', U'é',
      U'ß', U'ب', U'ا', U'ی', U'ے', U'ں', U'َ', U'ِ', U'ٰ', U'۵', U'٣', U'€', U'😀', U'‌',
      U' ', U'　', U'中', U'\x01', U'\x7f'};
  std::string s;
  for (std::size_t i = 0, n = rng.below(60); i < n; ++i) {
    if (rng.bernoulli(0.02)) {
      s.push_back(static_cast<char>(0x80 + rng.below(0x40)));  // stray continuation byte
      continue;
    }
    utf8::append(s, pool[rng.below(pool.size())]);
  }
  return s;
}

Outcome roundtrips() {
  test::TempDir t("accept-rt");
  const auto ck = perturbed_checkpoint(300);
  save_checkpoint(ck, t / "a");
  save_checkpoint(load_checkpoint(t / "a"), t / "b");
  const bool ck_ok = dir_bytes(t / "a") == dir_bytes(t / "b");

  SyntheticSpec spec;
  spec.sentence_count = 2000;
  TokenizerConfig tc;
  tc.target_size = 400;
  const auto v = train_vocab(gen_synthetic_corpus(spec, 4), tc);
  save_vocab(v, t / "v1.txt");
  save_vocab(load_vocab(t / "v1.txt"), t / "v2.txt");
  const bool vocab_ok = read_file(t / "v1.txt") == read_file(t / "v2.txt");

  Rng rng(17);
  std::size_t stable = 0;
  for (std::size_t i = 0; i < kFuzzLines; ++i) {
    const std::string line = fuzz_line(rng);
    bool ok = true;
    for (ScriptProfile prof : {ScriptProfile::kLatinDigits, ScriptProfile::kLatinDigitsPlusUrdu}) {
      const CleanOptions o{prof, true};
      const auto once = format_clean(clean_text(line, o, "fuzz"));
      ok = ok && format_clean(clean_text(once, o, "fuzz")) == once;
    }
    stable += ok;
  }
  return {ck_ok && vocab_ok && stable == kFuzzLines,
          fmt("checkpoint %s; vocab %s; cleaning idempotent on %zu/%zu fuzz lines", ck_ok ? "byte-identical" : "differs",
              vocab_ok ? "byte-identical" : "differs", stable, kFuzzLines)};
}

struct Criterion {
  int id;
  const char* name;
  double budget_seconds;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  const std::vector<Criterion> criteria = {
      {1, "gradient correctness", 300, gradient_correctness},
      {2, "parameter count", 5, parameter_count},
      {3, "masking statistics", 60, masking_statistics},
      {4, "tokenizer oracle", 60, tokenizer_oracle},
      {5, "swap invariants", 60, swap_invariants},
      {6, "chance-level sanity", 300, chance_level},
      {7, "overfit capability", 1800, overfit},
      {8, "regime ordering", 4 * 3600, regime_ordering},
      {9, "determinism", 600, determinism},
      {10, "format roundtrips", 60, roundtrips},
  };
  std::set<int> only;
  for (int i = 1; i < argc; ++i) only.insert(std::atoi(argv[i]));

  int failures = 0;
  for (const auto& c : criteria) {
    if (!only.empty() && !only.count(c.id)) continue;
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    const bool pass = o.pass && secs <= c.budget_seconds;
    failures += !pass;
    std::printf("criterion %d %s: %s (%.1fs, budget %.0fs) %s\n", c.id, c.name, pass ? "PASS" : "FAIL", secs,
                c.budget_seconds, o.detail.c_str());
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
