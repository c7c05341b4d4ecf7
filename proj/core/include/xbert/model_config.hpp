#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "xbert/tensor.hpp"

namespace xbert {

struct ModelConfig {
  std::size_t num_layers = 12;
  std::size_t hidden_size = 768;
  std::size_t num_heads = 12;
  std::size_t intermediate_size = 3072;
  std::size_t vocab_size = 30522;
  std::size_t max_positions = 512;
  std::size_t type_vocab_size = 2;
  double dropout_prob = 0.1;

  /// Throws Error(kConfig) on an inconsistent configuration.
  void validate() const;

  /// intermediate_size defaults to 4 * hidden.
  static ModelConfig make(std::size_t layers, std::size_t hidden, std::size_t heads, std::size_t vocab,
                          std::size_t positions, double dropout = 0.1);

  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// BERT-base sizes with the given vocabulary.
ModelConfig base_config(std::size_t vocab_size = 30522);

/// Canonical (name, shape) list for a configuration, in storage order.
std::vector<std::pair<std::string, Shape>> parameter_inventory(const ModelConfig& cfg);

/// Closed-form parameter count; the tied MLM projection is counted once.
std::uint64_t param_count(const ModelConfig& cfg);

namespace param_names {
inline const std::string kTokenEmbeddings = "embeddings.token";
inline const std::string kPositionEmbeddings = "embeddings.position";
inline const std::string kSegmentEmbeddings = "embeddings.segment";
inline const std::string kMlmOutputBias = "mlm.output_bias";
std::string layer(std::size_t l, const std::string& leaf);
}  // namespace param_names

/// Biases and layer-norm parameters are exempt from weight decay.
bool is_no_decay(const std::string& name);
/// Layer-norm gains; initialized to one.
bool is_layernorm_gain(const std::string& name);

}  // namespace xbert
