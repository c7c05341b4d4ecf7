#include "xbert/model_config.hpp"

#include "xbert/vocab.hpp"

namespace xbert {

void ModelConfig::validate() const {
  if (hidden_size == 0 || num_heads == 0 || intermediate_size == 0 || max_positions == 0 || type_vocab_size == 0)
    fail(ErrorCategory::kConfig, "model sizes must be positive");
  if (hidden_size % num_heads != 0)
    fail(ErrorCategory::kConfig, "hidden size " + std::to_string(hidden_size) + " is not divisible by " +
                                     std::to_string(num_heads) + " heads");
  if (vocab_size < static_cast<std::size_t>(kNumSpecial))
    fail(ErrorCategory::kConfig, "vocab size must be at least " + std::to_string(kNumSpecial));
  if (!(dropout_prob >= 0.0 && dropout_prob < 1.0)) fail(ErrorCategory::kConfig, "dropout must be in [0, 1)");
}

ModelConfig ModelConfig::make(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t vocab,
                              std::size_t positions, double dropout) {
  ModelConfig c;
  c.num_layers = layers;
  c.hidden_size = hidden;
  c.num_heads = heads;
  c.intermediate_size = 4 * hidden;
  c.vocab_size = vocab;
  c.max_positions = positions;
  c.dropout_prob = dropout;
  return c;
}

ModelConfig base_config(std::size_t vocab_size) { return ModelConfig::make(12, 768, 12, vocab_size, 512); }

namespace param_names {
std::string layer(std::size_t l, const std::string& leaf) {
  return "encoder.layer." + std::to_string(l) + "." + leaf;
}
}  // namespace param_names

std::vector<std::pair<std::string, Shape>> parameter_inventory(const ModelConfig& cfg) {
  const std::size_t h = cfg.hidden_size;
  const std::size_t ff = cfg.intermediate_size;
  std::vector<std::pair<std::string, Shape>> inv;
  inv.emplace_back(param_names::kTokenEmbeddings, Shape{cfg.vocab_size, h});
  inv.emplace_back(param_names::kPositionEmbeddings, Shape{cfg.max_positions, h});
  inv.emplace_back(param_names::kSegmentEmbeddings, Shape{cfg.type_vocab_size, h});
  inv.emplace_back("embeddings.ln.gain", Shape{h});
  inv.emplace_back("embeddings.ln.bias", Shape{h});
  for (std::size_t l = 0; l < cfg.num_layers; ++l) {
    for (const char* proj : {"attention.query", "attention.key", "attention.value", "attention.output"}) {
      inv.emplace_back(param_names::layer(l, std::string(proj) + ".weight"), Shape{h, h});
      inv.emplace_back(param_names::layer(l, std::string(proj) + ".bias"), Shape{h});
    }
    inv.emplace_back(param_names::layer(l, "attention.ln.gain"), Shape{h});
    inv.emplace_back(param_names::layer(l, "attention.ln.bias"), Shape{h});
    inv.emplace_back(param_names::layer(l, "ffn.in.weight"), Shape{h, ff});
    inv.emplace_back(param_names::layer(l, "ffn.in.bias"), Shape{ff});
    inv.emplace_back(param_names::layer(l, "ffn.out.weight"), Shape{ff, h});
    inv.emplace_back(param_names::layer(l, "ffn.out.bias"), Shape{h});
    inv.emplace_back(param_names::layer(l, "output.ln.gain"), Shape{h});
    inv.emplace_back(param_names::layer(l, "output.ln.bias"), Shape{h});
  }
  inv.emplace_back("mlm.transform.weight", Shape{h, h});
  inv.emplace_back("mlm.transform.bias", Shape{h});
  inv.emplace_back("mlm.ln.gain", Shape{h});
  inv.emplace_back("mlm.ln.bias", Shape{h});
  inv.emplace_back(param_names::kMlmOutputBias, Shape{cfg.vocab_size});
  inv.emplace_back("pooler.weight", Shape{h, h});
  inv.emplace_back("pooler.bias", Shape{h});
  inv.emplace_back("nsp.weight", Shape{h, 2});
  inv.emplace_back("nsp.bias", Shape{2});
  return inv;
}

std::uint64_t param_count(const ModelConfig& cfg) {
  const std::uint64_t h = cfg.hidden_size;
  const std::uint64_t ff = cfg.intermediate_size;
  const std::uint64_t v = cfg.vocab_size;
  const std::uint64_t embeddings = v * h + cfg.max_positions * h + cfg.type_vocab_size * h + 2 * h;
  const std::uint64_t per_layer = 4 * (h * h + h) + 2 * h + (h * ff + ff) + (ff * h + h) + 2 * h;
  const std::uint64_t mlm_head = (h * h + h) + 2 * h + v;
  const std::uint64_t nsp_head = (h * h + h) + (h * 2 + 2);
  return embeddings + cfg.num_layers * per_layer + mlm_head + nsp_head;
}

bool is_no_decay(const std::string& name) {
  return name.ends_with(".bias") || name.ends_with("_bias") || name.find(".ln.") != std::string::npos;
}

bool is_layernorm_gain(const std::string& name) { return name.ends_with(".ln.gain"); }

}  // namespace xbert
