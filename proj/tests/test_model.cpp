#include <doctest.h>

#include <cmath>
#include <cstdio>

#include "test_util.hpp"
#include "xbert/bert.hpp"
#include "xbert/error.hpp"

using namespace xbert;

namespace {

const ModelConfig kToy = ModelConfig::make(2, 32, 2, 128, 64, 0.0);

// Closed form of the parameter inventory.
std::uint64_t closed_form(std::uint64_t L, std::uint64_t H, std::uint64_t I, std::uint64_t V, std::uint64_t P) {
  const std::uint64_t embeddings = V * H + P * H + 2 * H + 2 * H;
  const std::uint64_t layer = 4 * (H * H + H) + 2 * H + (H * I + I) + (I * H + H) + 2 * H;
  const std::uint64_t mlm = H * H + H + 2 * H + V;
  const std::uint64_t pooler_nsp = H * H + H + 2 * H + 2;
  return embeddings + L * layer + mlm + pooler_nsp;
}

// Batch with `extra` [PAD] columns appended (attention off).
Batch padded(const Batch& b, std::size_t extra) {
  Batch p = b;
  p.seq_len = b.seq_len + extra;
  auto grow = [&](const auto& src, auto& dst, auto fill) {
    dst.assign(p.batch_size * p.seq_len, fill);
    for (std::size_t r = 0; r < b.batch_size; ++r)
      for (std::size_t i = 0; i < b.seq_len; ++i) dst[r * p.seq_len + i] = src[r * b.seq_len + i];
  };
  grow(b.token_ids, p.token_ids, kPadId);
  grow(b.segment_ids, p.segment_ids, std::uint8_t{0});
  grow(b.attention_mask, p.attention_mask, std::uint8_t{0});
  return p;
}

std::string dump(const Tensor<float>& t) {
  std::string out;
  char buf[32];
  for (std::size_t i = 0; i < t.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.6e\n", static_cast<double>(t.data[i]));
    out += buf;
  }
  return out;
}

}  // namespace

TEST_CASE("parameter count of the base configuration is about 110M") {
  const auto n = param_count(base_config());
  CHECK(n >= 108000000);
  CHECK(n <= 112000000);
  CHECK(n == closed_form(12, 768, 3072, 30522, 512));
}

TEST_CASE("toy and depth-zero counts match the closed form and the tensors") {
  CHECK(param_count(kToy) == closed_form(2, 32, 128, 128, 64));
  // embeddings 6272, two layers of 12704, MLM head 1248, pooler and NSP 1122
  CHECK(param_count(kToy) == 34050);
  const auto l0 = ModelConfig::make(0, 32, 2, 128, 64, 0.0);
  CHECK(param_count(l0) == closed_form(0, 32, 128, 128, 64));
  for (const auto& cfg : {kToy, l0}) {
    std::uint64_t enumerated = 0;
    for (const auto& [name, shape] : parameter_inventory(cfg)) enumerated += numel(shape);
    CHECK(enumerated == param_count(cfg));
    CHECK(init_parameters<float>(cfg, 1).total_elements() == param_count(cfg));
  }
}

TEST_CASE("config validation") {
  CHECK_THROWS_AS(ModelConfig::make(2, 30, 4, 128, 64).validate(), Error);
  CHECK_THROWS_AS(ModelConfig::make(2, 32, 2, 4, 64).validate(), Error);
  CHECK_THROWS_AS(ModelConfig::make(2, 0, 2, 128, 64).validate(), Error);
  CHECK_NOTHROW(base_config().validate());
  CHECK(base_config().intermediate_size == 3072);
}

TEST_CASE("forward shapes hold over random small configurations") {
  Rng rng(1);
  for (int trial = 0; trial < 12; ++trial) {
    const std::size_t heads = 1 + rng.below(3);
    const auto cfg = ModelConfig::make(rng.below(3), heads * (2 + rng.below(5)), heads, 6 + rng.below(40),
                                       8 + rng.below(24), 0.0);
    const std::size_t B = 1 + rng.below(3), P = 1 + rng.below(4), S = 5 + rng.below(cfg.max_positions - 4);
    const auto batch = random_batch(cfg, B, S, P, trial);
    const auto logits = forward(init_parameters<float>(cfg, trial), cfg, batch);
    CHECK(logits.mlm.shape == Shape{B, P, cfg.vocab_size});
    CHECK(logits.nsp.shape == Shape{B, 2});
  }
}

TEST_CASE("padding columns do not change logits") {
  const auto params = init_parameters<float>(kToy, 3);
  const auto batch = random_batch(kToy, 3, 20, 4, 5);
  const auto a = forward(params, kToy, batch);
  const auto b = forward(params, kToy, padded(batch, 9));
  CHECK(a.mlm.data == b.mlm.data);
  CHECK(a.nsp.data == b.nsp.data);
}

TEST_CASE("forward is deterministic without dropout, stochastic with it") {
  auto cfg = kToy;
  cfg.dropout_prob = 0.1;
  const auto params = init_parameters<float>(cfg, 3);
  const auto batch = random_batch(cfg, 2, 16, 3, 5);
  CHECK(forward(params, cfg, batch).mlm.data == forward(params, cfg, batch, true).mlm.data);
  Rng r1(1), r2(1), r3(2);
  const auto d1 = forward(params, cfg, batch, true, &r1);
  CHECK(d1.mlm.data == forward(params, cfg, batch, true, &r2).mlm.data);
  CHECK(d1.mlm.data != forward(params, cfg, batch, true, &r3).mlm.data);
  CHECK(d1.mlm.data != forward(params, cfg, batch).mlm.data);
}

TEST_CASE("golden logits for the toy configuration") {
  const auto params = init_parameters<float>(kToy, 2024);
  const auto batch = random_batch(kToy, 2, 24, 3, 7);
  const auto l = forward(params, kToy, batch);
  CHECK(test::matches_golden("toy_logits.txt", dump(l.mlm) + dump(l.nsp)));
}

TEST_CASE("depth zero still produces both heads") {
  const auto cfg = ModelConfig::make(0, 16, 2, 40, 32, 0.0);
  const auto batch = random_batch(cfg, 2, 12, 3, 1);
  const auto l = forward(init_parameters<float>(cfg, 1), cfg, batch);
  CHECK(l.mlm.shape == Shape{2, 3, 40});
  CHECK(l.nsp.shape == Shape{2, 2});
}

TEST_CASE("bad inputs are rejected") {
  const auto params = init_parameters<float>(kToy, 1);
  auto batch = random_batch(kToy, 1, 10, 2, 1);
  auto bad = batch;
  bad.token_ids[1] = 128;
  CHECK_THROWS_AS(forward(params, kToy, bad), Error);
  CHECK_THROWS_AS(random_batch(kToy, 1, 65, 2, 1), Error);
  auto nan = params;
  nan.at("encoder.layer.1.ffn.out.bias").data[0] = std::nanf("");
  try {
    forward(nan, kToy, batch);
    FAIL("expected a numeric error");
  } catch (const Error& e) {
    CHECK(e.category() == ErrorCategory::kNumeric);
    CHECK(std::string(e.what()).find("layer 1") != std::string::npos);
  }
}

TEST_CASE("uniform and one-hot logits give the analytic losses") {
  const auto batch = random_batch(kToy, 4, 16, 3, 9);
  Logits<double> l{Tensor<double>({4, 3, 128}), Tensor<double>({4, 2})};
  auto v = loss(l, batch).value;
  CHECK(v.mlm == doctest::Approx(std::log(128.0)).epsilon(1e-12));
  CHECK(v.nsp == doctest::Approx(std::log(2.0)).epsilon(1e-12));
  CHECK(v.total == doctest::Approx(v.mlm + v.nsp).epsilon(1e-15));
  for (std::size_t r = 0; r < 4; ++r) {
    for (std::size_t j = 0; j < 3; ++j)
      l.mlm.data[(r * 3 + j) * 128 + static_cast<std::size_t>(batch.masked_labels[r * 3 + j])] = 60.0;
    l.nsp.data[r * 2 + static_cast<std::size_t>(batch.nsp_labels[r])] = 60.0;
  }
  v = loss(l, batch).value;
  CHECK(v.mlm >= 0.0);
  CHECK(v.mlm < 1e-20);
  CHECK(v.nsp < 1e-20);
}

TEST_CASE("loss equals a direct log-softmax recomputation") {
  const auto cfg = ModelConfig::make(2, 32, 2, 128, 64, 0.0);
  const auto params = init_parameters<double>(cfg, 17);
  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    const auto batch = random_batch(cfg, 3, 20, 4, seed);
    const auto logits = forward(params, cfg, batch);
    long double mlm = 0, nsp = 0;
    std::size_t count = 0;
    for (std::size_t r = 0; r < 3; ++r) {
      for (std::size_t j = 0; j < 4; ++j) {
        if (!batch.masked_weights[r * 4 + j]) continue;
        const double* row = &logits.mlm.data[(r * 4 + j) * 128];
        long double z = 0;
        for (std::size_t k = 0; k < 128; ++k) z += std::exp(static_cast<long double>(row[k]));
        mlm += std::log(z) - row[batch.masked_labels[r * 4 + j]];
        ++count;
      }
      const double* n = &logits.nsp.data[r * 2];
      nsp += std::log(std::exp(static_cast<long double>(n[0])) + std::exp(static_cast<long double>(n[1]))) -
             n[batch.nsp_labels[r]];
    }
    const auto v = loss(logits, batch).value;
    CHECK(v.mlm == doctest::Approx(static_cast<double>(mlm / count)).epsilon(1e-6));
    CHECK(v.nsp == doctest::Approx(static_cast<double>(nsp / 3)).epsilon(1e-6));
  }
}

TEST_CASE("a batch without real predictions contributes only the NSP loss") {
  auto batch = random_batch(kToy, 2, 12, 2, 3);
  std::fill(batch.masked_weights.begin(), batch.masked_weights.end(), 0);
  const auto l = forward(init_parameters<double>(kToy, 1), kToy, batch);
  const auto v = loss(l, batch);
  CHECK(v.value.mlm == 0.0);
  CHECK(v.value.total == v.value.nsp);
  for (double g : v.d_mlm.data) CHECK(g == 0.0);
}

TEST_CASE("gradient check passes for two seeds") {
  for (std::uint64_t seed : {1, 2}) {
    const auto r = gradient_check(kToy, seed, 1e-5);
    CHECK(r.max_relative_error < 1e-4);
    CHECK(r.checked_entries >= 10 * parameter_inventory(kToy).size() / 2);
  }
}

TEST_CASE("positions beyond the batch length get exactly zero gradient") {
  const auto params = init_parameters<double>(kToy, 4);
  const auto batch = random_batch(kToy, 2, 16, 3, 4);
  const auto g = loss_and_gradients(params, kToy, batch, false, nullptr);
  const auto& pos = g.grads.at(param_names::kPositionEmbeddings);
  for (std::size_t row = 16; row < 64; ++row)
    for (std::size_t h = 0; h < 32; ++h) CHECK(pos.data[row * 32 + h] == 0.0);
  double used = 0.0;
  for (std::size_t i = 0; i < 16 * 32; ++i) used += std::abs(pos.data[i]);
  CHECK(used > 0.0);
}

TEST_CASE("initialization: truncated normal moments, unit gains, zero biases") {
  const auto cfg = ModelConfig::make(1, 768, 12, 30, 8, 0.1);
  const auto p = init_parameters<float>(cfg, 5);
  const auto& w = p.at(param_names::layer(0, "attention.query.weight"));
  REQUIRE(w.shape == Shape{768, 768});
  double sum = 0, sq = 0, lim = 0;
  for (float x : w.data) {
    sum += x;
    sq += static_cast<double>(x) * x;
    lim = std::max(lim, std::abs(static_cast<double>(x)));
  }
  const double n = static_cast<double>(w.size());
  const double mean = sum / n;
  const double sd = std::sqrt(sq / n - mean * mean);
  CHECK(std::abs(mean) < 0.002);
  CHECK(std::abs(sd - 0.02) < 0.002);
  CHECK(lim <= 2.0 * 0.02 / truncated_unit_std() + 1e-7);
  for (const auto& [name, t] : p) {
    if (is_layernorm_gain(name)) {
      for (float x : t.data) CHECK(x == 1.0f);
    } else if (is_no_decay(name)) {
      for (float x : t.data) CHECK(x == 0.0f);
    }
  }
  CHECK(init_parameters<float>(cfg, 5) == p);
  CHECK(!(init_parameters<float>(cfg, 6) == p));
}
