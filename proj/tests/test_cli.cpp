#include <doctest.h>

#include <array>
#include <cstdio>
#include <sys/wait.h>

#include "test_util.hpp"
#include "xbert/checkpoint.hpp"
#include "xbert/corpus.hpp"
#include "xbert/datagen.hpp"
#include "xbert/synthetic.hpp"

using namespace xbert;

namespace {

struct Run {
  int code = -1;
  std::string out;  // stdout and stderr
};

Run cli(const std::string& args) {
  const std::string cmd = std::string(XBERT_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* p = ::popen(cmd.c_str(), "r");
  REQUIRE(p != nullptr);
  std::array<char, 4096> buf{};
  while (std::size_t n = std::fread(buf.data(), 1, buf.size(), p)) r.out.append(buf.data(), n);
  const int status = ::pclose(p);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string q(const std::filesystem::path& p) { return "'" + p.string() + "'"; }

void write_raw_corpus(const std::filesystem::path& dir, std::size_t sentences, std::uint64_t seed) {
  SyntheticSpec s;
  s.word_types = 60;
  s.sentence_count = sentences;
  const auto c = gen_synthetic_corpus(s, seed);
  std::filesystem::create_directories(dir);
  std::string text;
  for (std::size_t i = 0; i < c.size(); ++i) {
    if (i > 0 && c.document[i] != c.document[i - 1]) text += "\n";
    text += c.sentences[i] + "\n";
  }
  write_file(dir / "part.txt", text);
}

}  // namespace

TEST_CASE("usage errors exit with code 2") {
  CHECK(cli("").code == 2);
  CHECK(cli("no-such-command").code == 2);
  CHECK(cli("clean --in").code == 2);
  const auto h = cli("--help");
  CHECK(h.code == 0);
  CHECK(h.out.find("pretrain") != std::string::npos);
}

TEST_CASE("error categories map to exit codes") {
  test::TempDir t("cli");
  const auto io = cli("stats --in " + q(t / "missing.txt"));
  CHECK(io.code == 3);
  CHECK(io.out.find("error: io:") != std::string::npos);

  write_file(t / "v.txt", "[PAD]\n[UNK]\n");
  const auto fmt = cli("swap-vocab --ckpt " + q(t / "nock") + " --vocab " + q(t / "v.txt") + " --out " + q(t / "o"));
  CHECK(fmt.code != 0);
  CHECK(fmt.code != 2);

  write_file(t / "cfg.json", R"({"stepz": 1})");
  const auto cfg = cli("compare-regimes --config " + q(t / "cfg.json") + " --out " + q(t / "r"));
  CHECK(cfg.code == 5);
  CHECK(cfg.out.find("error: config:") != std::string::npos);
}

TEST_CASE("end-to-end pipeline through the command line") {
  test::TempDir t("e2e");
  write_raw_corpus(t / "raw", 200, 3);
  REQUIRE(cli("clean --in " + q(t / "raw") + " --out " + q(t / "clean.txt")).code == 0);
  const auto stats = cli("stats --in " + q(t / "clean.txt") + " --report " + q(t / "stats.txt"));
  REQUIRE(stats.code == 0);
  CHECK(stats.out.find("200") != std::string::npos);

  REQUIRE(cli("train-vocab --in " + q(t / "clean.txt") + " --size 100 --min-freq 1 --out " + q(t / "vocab.txt")).code ==
          0);
  CHECK(load_vocab(t / "vocab.txt").size() == 100);

  const auto bd = cli("--seed 4 build-data --in " + q(t / "clean.txt") + " --vocab " + q(t / "vocab.txt") + " --out " +
                      q(t / "data") + " --max-seq 32 --max-pred 5 --dupe 2 --holdout 0.1");
  REQUIRE(bd.code == 0);
  CHECK(bd.out.find("train_instances") != std::string::npos);
  CHECK(std::filesystem::exists(t / "data/datagen.json"));

  const std::string model = " --layers 1 --hidden 16 --heads 2 --intermediate 32 --max-positions 32 ";
  const std::string pre = "--seed 9 pretrain --from scratch --data " + q(t / "data") + model +
                          "--steps 20 --batch-size 4 --lr 1e-3 --warmup 2 --out ";
  REQUIRE(cli(pre + q(t / "ck1")).code == 0);
  REQUIRE(cli(pre + q(t / "ck2")).code == 0);
  for (const char* f : {"weights.bin", "optstate.bin", "config.json", "vocab.txt", "history.txt"})
    CHECK_MESSAGE(read_file(t / "ck1" / f) == read_file(t / "ck2" / f), f);

  const auto ev = cli("evaluate --ckpt " + q(t / "ck1") + " --data " + q(t / "data") + " --name Toy --report " +
                      q(t / "rep"));
  REQUIRE(ev.code == 0);
  CHECK(ev.out.find("Toy") != std::string::npos);

  // Additional pretraining on a second vocabulary of the same size.
  write_raw_corpus(t / "raw2", 200, 8);
  REQUIRE(cli("clean --in " + q(t / "raw2") + " --out " + q(t / "clean2.txt")).code == 0);
  REQUIRE(cli("train-vocab --in " + q(t / "clean2.txt") + " --size 100 --min-freq 1 --out " + q(t / "vocab2.txt"))
              .code == 0);
  REQUIRE(cli("swap-vocab --ckpt " + q(t / "ck1") + " --vocab " + q(t / "vocab2.txt") +
              " --policy aligned --out " + q(t / "sw"))
              .code == 0);
  const auto sw = load_checkpoint(t / "sw");
  CHECK(sw.meta.swap_policy == "aligned");
  CHECK(sw.meta.parent_hash == load_checkpoint(t / "ck1").hash());

  REQUIRE(cli("--seed 4 build-data --in " + q(t / "clean2.txt") + " --vocab " + q(t / "vocab2.txt") + " --out " +
              q(t / "data2") + " --max-seq 32 --max-pred 5")
              .code == 0);
  REQUIRE(cli("--seed 1 pretrain --from " + q(t / "sw") + " --data " + q(t / "data2") +
              " --steps 5 --batch-size 4 --lr 2e-5 --warmup 1 --regime bilingual --out " + q(t / "ck3"))
              .code == 0);
  CHECK(load_checkpoint(t / "ck3").meta.regime == "bilingual");

  // A vocabulary of the wrong size is refused.
  REQUIRE(cli("train-vocab --in " + q(t / "clean2.txt") + " --size 90 --min-freq 1 --out " + q(t / "v90.txt")).code ==
          0);
  const auto bad = cli("swap-vocab --ckpt " + q(t / "ck1") + " --vocab " + q(t / "v90.txt") + " --out " + q(t / "x"));
  CHECK(bad.code == 5);
  CHECK(bad.out.find("fixed") != std::string::npos);
}

TEST_CASE("unseeded runs print the seed they drew") {
  test::TempDir t("seed");
  const auto r = cli("gen-synthetic --out " + q(t / "s.txt") + " --sentences 20");
  REQUIRE(r.code == 0);
  CHECK(r.out.find("seed: ") != std::string::npos);
  const auto d = cli("--deterministic gen-synthetic --out " + q(t / "s.txt") + " --sentences 20");
  CHECK(d.out.find("seed: ") == std::string::npos);
}

TEST_CASE("gradient check through the command line") {
  const auto r = cli("--seed 1 gradient-check");
  CHECK(r.code == 0);
  CHECK(r.out.find("max_relative_error") != std::string::npos);
}
