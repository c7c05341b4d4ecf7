#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xbert/model_config.hpp"
#include "xbert/tensor.hpp"
#include "xbert/vocab.hpp"

namespace xbert {

inline constexpr char kWeightsMagic[4] = {'R', 'U', 'B', 'T'};
inline constexpr std::uint8_t kWeightsFormatVersion = 1;

enum class SwapPolicy { kPositional, kAligned };

SwapPolicy parse_swap_policy(std::string_view name);
std::string_view swap_policy_name(SwapPolicy p) noexcept;

struct OptimizerState {
  ParameterSet<float> first_moment;
  ParameterSet<float> second_moment;
  std::uint64_t step = 0;
};

struct CheckpointMeta {
  std::string regime = "scratch";
  std::string parent_hash;
  std::string swap_policy;
  std::uint64_t seed = 0;
};

struct Checkpoint {
  ModelConfig config;
  Vocabulary vocab;
  ParameterSet<float> params;
  OptimizerState optimizer;
  CheckpointMeta meta;

  /// Config, vocabulary and parameter shapes agree; every value is finite.
  void validate() const;
  /// Hex digest of the serialized weights.
  std::string hash() const;
};

/// Zeroed moments for every parameter.
OptimizerState fresh_optimizer_state(const ParameterSet<float>& params);

/// Named-tensor container: magic "RUBT", version byte, u32 tensor count,
/// then per tensor u16 name length, UTF-8 name, u8 rank, u32 dims and
/// little-endian f32 data in row-major order.
std::string encode_tensors(const ParameterSet<float>& tensors);
ParameterSet<float> decode_tensors(std::string_view bytes);

std::string encode_config_json(const Checkpoint& ck);

/// Writes config.json, vocab.txt, weights.bin and optstate.bin into `dir`.
void save_checkpoint(const Checkpoint& ck, const std::filesystem::path& dir);
Checkpoint load_checkpoint(const std::filesystem::path& dir);

}  // namespace xbert
