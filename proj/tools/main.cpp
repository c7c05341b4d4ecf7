#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <thread>

#include "xbert/bert.hpp"
#include "xbert/checkpoint.hpp"
#include "xbert/corpus.hpp"
#include "xbert/datagen.hpp"
#include "xbert/error.hpp"
#include "xbert/eval.hpp"
#include "xbert/regimes.hpp"
#include "xbert/report.hpp"
#include "xbert/synthetic.hpp"
#include "xbert/train.hpp"
#include "xbert/wordpiece.hpp"

namespace fs = std::filesystem;
using namespace xbert;

namespace {

struct Globals {
  std::optional<std::uint64_t> seed;
  unsigned threads = 0;
  bool deterministic = false;

  std::uint64_t resolve_seed() const {
    if (seed) return *seed;
    if (deterministic) return 0;
    std::random_device rd;
    const std::uint64_t s = (static_cast<std::uint64_t>(rd()) << 32) | rd();
    std::cerr << "seed: " << s << "\n";
    return s;
  }
  unsigned resolve_threads() const {
    if (threads > 0) return threads;
    return std::max(1u, std::thread::hardware_concurrency());
  }
};

struct ModelFlags {
  std::size_t layers = 12, hidden = 768, heads = 12, intermediate = 0, positions = 512;
  double dropout = 0.1;

  void add(CLI::App* app) {
    app->add_option("--layers", layers, "Transformer layers")->capture_default_str();
    app->add_option("--hidden", hidden, "Hidden size")->capture_default_str();
    app->add_option("--heads", heads, "Attention heads")->capture_default_str();
    app->add_option("--intermediate", intermediate, "Feed-forward size (default 4 x hidden)");
    app->add_option("--max-positions", positions, "Position embeddings")->capture_default_str();
    app->add_option("--dropout", dropout, "Dropout probability")->capture_default_str();
  }
  ModelConfig make(std::size_t vocab) const {
    ModelConfig c = ModelConfig::make(layers, hidden, heads, vocab, positions, dropout);
    if (intermediate) c.intermediate_size = intermediate;
    c.validate();
    return c;
  }
};

// A data directory from build-data holds train/ and eval/; a bare shard
// directory is accepted too.
fs::path shard_dir(const fs::path& dir, const char* part) {
  const fs::path sub = dir / part;
  return fs::is_directory(sub) ? sub : dir;
}

std::vector<PretrainingInstance> load_data(const fs::path& dir, const char* part) {
  if (!fs::is_directory(dir)) fail(ErrorCategory::kIo, "not a directory: " + dir.string());
  auto data = read_shards(shard_dir(dir, part));
  if (data.empty()) fail(ErrorCategory::kData, "no instances under " + shard_dir(dir, part).string());
  return data;
}

CleanCorpus read_corpus(const fs::path& p) {
  if (fs::is_directory(p)) return read_clean_dir(p);
  if (fs::is_regular_file(p)) return read_clean_file(p);
  fail(ErrorCategory::kIo, "no such file or directory: " + p.string());
}

std::string metrics_line(const Metrics& m) {
  char buf[256];
  std::snprintf(buf, sizeof buf, "mlm_accuracy=%.4f nsp_accuracy=%.4f mlm_loss=%.4f nsp_loss=%.4f instances=%llu masked=%llu",
                m.mlm_accuracy, m.nsp_accuracy, m.mlm_loss, m.nsp_loss,
                static_cast<unsigned long long>(m.instance_count),
                static_cast<unsigned long long>(m.masked_position_count));
  return buf;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bilingual BERT pretraining toolkit"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed");
  app.add_option("--threads", g.threads, "Worker threads (default: all cores)");
  app.add_flag("--deterministic", g.deterministic, "Fixed default seed; outputs depend only on inputs and seed");

  // clean
  auto* clean = app.add_subcommand("clean", "Segment and clean raw text files");
  std::string clean_in, clean_out, profile = "latin";
  bool no_urdu_digits = false;
  clean->add_option("--in", clean_in, "Directory of raw text files")->required();
  clean->add_option("--out", clean_out, "Output directory")->required();
  clean->add_option("--profile", profile, "Allowed script: latin | latin+urdu")->capture_default_str();
  clean->add_flag("--no-urdu-digits", no_urdu_digits, "Drop Urdu digits under latin+urdu");

  // stats
  auto* stats = app.add_subcommand("stats", "Sentence and word counts of cleaned corpora");
  std::string stats_in, stats_report;
  stats->add_option("--in", stats_in, "Cleaned file or directory")->required();
  stats->add_option("--report", stats_report, "Write key-value report here");

  // train-vocab
  auto* tv = app.add_subcommand("train-vocab", "Learn a fixed-size WordPiece vocabulary");
  std::string tv_in, tv_out;
  TokenizerConfig tcfg;
  bool cased = false;
  tv->add_option("--in", tv_in, "Cleaned file or directory")->required();
  tv->add_option("--size", tcfg.target_size, "Vocabulary size")->capture_default_str();
  tv->add_option("--min-freq,--min-frequency", tcfg.min_frequency, "Minimum character frequency")->capture_default_str();
  tv->add_flag("--cased", cased, "Keep case");
  tv->add_flag("--lowercase,!--no-lowercase", tcfg.lowercase, "Lowercase words (default)");
  tv->add_option("--out", tv_out, "vocab.txt to write")->required();

  // build-data
  auto* bd = app.add_subcommand("build-data", "Generate MLM/NSP pretraining shards");
  std::string bd_in, bd_vocab, bd_out;
  DataGenParams dp;
  bool bd_cased = false;
  bd->add_option("--in", bd_in, "Cleaned file or directory")->required();
  bd->add_option("--vocab", bd_vocab, "vocab.txt")->required();
  bd->add_option("--out", bd_out, "Output directory")->required();
  bd->add_option("--max-seq,--max-seq-length", dp.max_seq_length)->capture_default_str();
  bd->add_option("--max-pred,--max-predictions", dp.max_predictions_per_seq)->capture_default_str();
  bd->add_option("--mask-prob,--masked-lm-prob", dp.masked_lm_prob)->capture_default_str();
  bd->add_option("--dupe,--dupe-factor", dp.dupe_factor)->capture_default_str();
  bd->add_option("--random-next-prob", dp.random_next_prob)->capture_default_str();
  bd->add_option("--holdout", dp.holdout_fraction, "Held-out fraction")->capture_default_str();
  bd->add_option("--shard-size", dp.instances_per_shard)->capture_default_str();
  bd->add_flag("--cased", bd_cased, "Keep case");

  // pretrain
  auto* pt = app.add_subcommand("pretrain", "Run MLM/NSP pretraining");
  std::string pt_from, pt_data, pt_out, pt_vocab, pt_regime;
  TrainingConfig tc;
  std::optional<std::uint64_t> warmup;
  std::optional<double> pt_lr;
  ModelFlags mf;
  pt->add_option("--from", pt_from, "scratch or a checkpoint directory")->required();
  pt->add_option("--data", pt_data, "Directory from build-data")->required();
  pt->add_option("--out", pt_out, "Checkpoint directory to write")->required();
  pt->add_option("--steps", tc.steps)->capture_default_str();
  pt->add_option("--lr", pt_lr, "Peak learning rate (default 1e-4 from scratch, 2e-5 otherwise)");
  pt->add_option("--batch-size", tc.batch_size)->capture_default_str();
  pt->add_option("--warmup", warmup, "Warmup steps (default min(1000, steps/10))");
  pt->add_option("--weight-decay", tc.adam.weight_decay)->capture_default_str();
  pt->add_option("--clip-norm", tc.adam.grad_clip_norm)->capture_default_str();
  pt->add_option("--beta1", tc.adam.beta1)->capture_default_str();
  pt->add_option("--beta2", tc.adam.beta2)->capture_default_str();
  pt->add_option("--adam-eps", tc.adam.epsilon)->capture_default_str();
  pt->add_option("--eval-every", tc.eval_every, "Held-out eval interval (0: off)")->capture_default_str();
  pt->add_option("--vocab", pt_vocab, "vocab.txt for --from scratch (default DATA/vocab.txt)");
  pt->add_option("--regime", pt_regime, "Regime tag stored in the checkpoint");
  mf.add(pt);

  // swap-vocab
  auto* sv = app.add_subcommand("swap-vocab", "Replace a checkpoint's vocabulary");
  std::string sv_ck, sv_vocab, sv_out, sv_policy = "positional";
  sv->add_option("--ckpt", sv_ck, "Checkpoint directory")->required();
  sv->add_option("--vocab", sv_vocab, "New vocab.txt")->required();
  sv->add_option("--policy", sv_policy, "positional | aligned")->capture_default_str();
  sv->add_option("--out", sv_out, "Checkpoint directory to write")->required();

  // evaluate
  auto* ev = app.add_subcommand("evaluate", "MLM/NSP accuracy on held-out shards");
  std::string ev_ck, ev_data, ev_report, ev_name = "model";
  std::size_t ev_batch = 64;
  ev->add_option("--ckpt", ev_ck, "Checkpoint directory")->required();
  ev->add_option("--data", ev_data, "Directory from build-data or a shard directory")->required();
  ev->add_option("--batch-size", ev_batch)->capture_default_str();
  ev->add_option("--name", ev_name, "Model name for the report")->capture_default_str();
  ev->add_option("--report", ev_report, "Write key-value report here");

  // compare-regimes
  auto* cr = app.add_subcommand("compare-regimes", "Scratch vs. multilingual vs. bilingual transfer");
  std::string cr_config, cr_out;
  cr->add_option("--config", cr_config, "JSON config")->required();
  cr->add_option("--out", cr_out, "Report directory")->required();

  // gradient-check
  auto* gc = app.add_subcommand("gradient-check", "Finite-difference check of the analytic gradients");
  ModelFlags gmf{.layers = 2, .hidden = 32, .heads = 2, .intermediate = 0, .positions = 64, .dropout = 0.0};
  std::size_t gc_vocab = 128, gc_samples = 12;
  double gc_eps = 1e-5, gc_tol = 1e-4, gc_floor = 1e-5;
  gmf.add(gc);
  gc->add_option("--vocab-size", gc_vocab)->capture_default_str();
  gc->add_option("--epsilon", gc_eps)->capture_default_str();
  gc->add_option("--samples", gc_samples, "Entries probed per tensor")->capture_default_str();
  gc->add_option("--floor", gc_floor, "Denominator floor of the relative error")->capture_default_str();
  gc->add_option("--tolerance", gc_tol)->capture_default_str();

  // gen-synthetic
  auto* gs = app.add_subcommand("gen-synthetic", "Generate a synthetic language corpus");
  std::string gs_out, gs_parent;
  SyntheticSpec spec;
  gs->add_option("--out", gs_out, "Cleaned corpus file to write")->required();
  gs->add_option("--parent", gs_parent, "Parent corpus for overlap");
  gs->add_option("--overlap", spec.overlap, "Fraction of parent word types kept")->capture_default_str();
  gs->add_option("--word-types", spec.word_types)->capture_default_str();
  gs->add_option("--sentences", spec.sentence_count)->capture_default_str();
  gs->add_option("--min-word-length", spec.min_word_length)->capture_default_str();
  gs->add_option("--max-word-length", spec.max_word_length)->capture_default_str();
  gs->add_option("--min-sentence-length", spec.min_sentence_length)->capture_default_str();
  gs->add_option("--max-sentence-length", spec.max_sentence_length)->capture_default_str();
  gs->add_option("--successors", spec.successors)->capture_default_str();
  gs->add_option("--zipf", spec.zipf_exponent)->capture_default_str();

  try {
    try {
      app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
      return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
      return app.exit(e);
    } catch (const CLI::ParseError& e) {
      fail(ErrorCategory::kUsage, e.what());
    }
    const unsigned threads = g.resolve_threads();

    if (*clean) {
      CleanOptions opts{parse_profile(profile), !no_urdu_digits};
      const auto per_file = clean_directory(clean_in, clean_out, opts, threads);
      Report r;
      for (const auto& [name, st] : per_file) r.corpora.push_back({name, st});
      if (!r.corpora.empty()) std::cout << render_report(r).text;
    } else if (*stats) {
      Report r;
      const fs::path in(stats_in);
      if (fs::is_directory(in)) {
        for (const auto& f : list_text_files(in)) r.corpora.push_back({f.filename().string(), corpus_stats(read_clean_file(f))});
      } else {
        r.corpora.push_back({in.filename().string(), corpus_stats(read_corpus(in))});
      }
      if (r.corpora.empty()) fail(ErrorCategory::kData, "no files under " + stats_in);
      const auto out = render_report(r);
      std::cout << out.text;
      if (!stats_report.empty()) write_file(stats_report, out.kv);
    } else if (*tv) {
      if (cased) tcfg.lowercase = false;
      const Vocabulary v = train_vocab(read_corpus(tv_in), tcfg);
      save_vocab(v, tv_out);
      std::cout << "vocab_size=" << v.size() << "\n";
    } else if (*bd) {
      dp.seed = g.resolve_seed();
      dp.validate();
      TokenizerConfig t;
      t.lowercase = !bd_cased;
      const Vocabulary v = load_vocab(bd_vocab);
      const auto docs = build_documents(read_corpus(bd_in), v, t);
      const auto shards = create_instances(docs, v.size(), dp, threads);
      const auto split = split_holdout(shards, dp.holdout_fraction, dp.seed, dp.instances_per_shard);
      const fs::path out(bd_out);
      write_shards(split.train, out / "train");
      write_shards(split.eval, out / "eval");
      save_vocab(v, out / "vocab.txt");
      std::size_t n_train = 0, n_eval = 0;
      for (const auto& s : split.train) n_train += s.size();
      for (const auto& s : split.eval) n_eval += s.size();
      std::ostringstream meta;
      meta << "{\n  \"seed\": " << dp.seed << ",\n  \"max_seq_length\": " << dp.max_seq_length
           << ",\n  \"max_predictions_per_seq\": " << dp.max_predictions_per_seq
           << ",\n  \"masked_lm_prob\": " << dp.masked_lm_prob << ",\n  \"dupe_factor\": " << dp.dupe_factor
           << ",\n  \"random_next_prob\": " << dp.random_next_prob << ",\n  \"holdout_fraction\": " << dp.holdout_fraction
           << ",\n  \"lowercase\": " << (t.lowercase ? "true" : "false") << ",\n  \"train_instances\": " << n_train
           << ",\n  \"eval_instances\": " << n_eval << "\n}\n";
      write_file(out / "datagen.json", meta.str());
      std::cout << "train_instances=" << n_train << " eval_instances=" << n_eval << "\n";
    } else if (*pt) {
      tc.seed = g.resolve_seed();
      tc.warmup_steps = warmup ? *warmup : std::min<std::uint64_t>(1000, tc.steps / 10);
      tc.learning_rate = pt_lr ? *pt_lr : pt_from == "scratch" ? kScratchPretrainingLr : kAdditionalPretrainingLr;
      tc.validate();
      const fs::path data_dir(pt_data);
      const auto data = load_data(data_dir, "train");
      std::vector<PretrainingInstance> eval_data;
      if (tc.eval_every > 0) eval_data = load_data(data_dir, "eval");
      Checkpoint start;
      if (pt_from == "scratch") {
        const fs::path vp = pt_vocab.empty() ? data_dir / "vocab.txt" : fs::path(pt_vocab);
        const Vocabulary v = load_vocab(vp);
        start = init_scratch(mf.make(v.size()), v, tc.seed);
      } else {
        start = load_checkpoint(pt_from);
      }
      auto result = train(start, data, tc, eval_data, [](const HistoryEntry& h) {
        if (h.eval) std::cerr << "step " << h.step << " eval " << metrics_line(*h.eval) << "\n";
      });
      if (!pt_regime.empty()) result.checkpoint.meta.regime = pt_regime;
      save_checkpoint(result.checkpoint, pt_out);
      write_file(fs::path(pt_out) / "history.txt", format_history(result.history));
      if (result.failure) fail(ErrorCategory::kNumeric, *result.failure + " (last good checkpoint written)");
      if (!result.history.empty()) {
        const auto& last = result.history.back();
        std::printf("step=%llu loss=%.6f mlm_loss=%.6f nsp_loss=%.6f\n", static_cast<unsigned long long>(last.step),
                    last.total_loss, last.mlm_loss, last.nsp_loss);
      }
    } else if (*sv) {
      const Checkpoint ck = load_checkpoint(sv_ck);
      const Checkpoint out = swap_vocabulary(ck, load_vocab(sv_vocab), parse_swap_policy(sv_policy), g.resolve_seed());
      save_checkpoint(out, sv_out);
      std::cout << "parent_hash=" << out.meta.parent_hash << " hash=" << out.hash() << "\n";
    } else if (*ev) {
      const Checkpoint ck = load_checkpoint(ev_ck);
      const auto data = load_data(ev_data, "eval");
      const Metrics m = evaluate(ck, data, ev_batch, threads);
      Report r;
      r.models.push_back({ev_name, m, ""});
      const auto out = render_report(r);
      std::cout << out.text << metrics_line(m) << "\n";
      if (!ev_report.empty()) write_file(ev_report, out.kv);
    } else if (*cr) {
      ComparisonConfig cfg = parse_comparison_config(read_file(cr_config));
      if (g.threads > 0) cfg.settings.threads = g.threads;
      const ComparisonReport rep = run_comparison(cfg, &std::cerr);
      const auto out = render_report(to_report(rep));
      fs::create_directories(cr_out);
      write_file(fs::path(cr_out) / "report.txt", out.text);
      write_file(fs::path(cr_out) / "report.kv", out.kv);
      std::cout << out.text;
    } else if (*gc) {
      const auto r = gradient_check(gmf.make(gc_vocab), g.seed.value_or(1), gc_eps, gc_samples, gc_floor);
      std::printf("max_relative_error=%.3e worst=%s analytic=%.6e numeric=%.6e entries=%zu\n", r.max_relative_error,
                  r.worst_parameter.c_str(), r.worst_analytic, r.worst_numeric, r.checked_entries);
      if (!(r.max_relative_error < gc_tol))
        fail(ErrorCategory::kNumeric, "gradient check failed: relative error above tolerance");
    } else if (*gs) {
      std::optional<CleanCorpus> parent;
      if (!gs_parent.empty()) parent = read_corpus(gs_parent);
      const CleanCorpus c = gen_synthetic_corpus(spec, g.resolve_seed(), parent ? &*parent : nullptr);
      write_file(gs_out, format_clean(c));
      const auto st = corpus_stats(c);
      std::cout << "sentence_count=" << st.sentence_count << " word_count=" << st.word_count << "\n";
      if (parent) std::printf("type_overlap=%.4f\n", type_overlap(c, *parent));
    }
  } catch (const Error& e) {
    std::cerr << "error: " << category_name(e.category()) << ": " << e.what() << "\n";
    return category_exit_code(e.category());
  } catch (const fs::filesystem_error& e) {
    std::cerr << "error: " << category_name(ErrorCategory::kIo) << ": " << e.what() << "\n";
    return category_exit_code(ErrorCategory::kIo);
  } catch (const std::exception& e) {
    std::cerr << "error: " << category_name(ErrorCategory::kInternal) << ": " << e.what() << "\n";
    return category_exit_code(ErrorCategory::kInternal);
  }
  return 0;
}
