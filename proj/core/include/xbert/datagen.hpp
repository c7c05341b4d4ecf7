#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "xbert/corpus.hpp"
#include "xbert/rng.hpp"
#include "xbert/vocab.hpp"
#include "xbert/wordpiece.hpp"

namespace xbert {

using Sentence = std::vector<TokenId>;
using Document = std::vector<Sentence>;

struct DocumentSet {
  std::vector<Document> documents;
};

struct DataGenParams {
  std::size_t max_seq_length = 128;
  double masked_lm_prob = 0.15;
  std::size_t max_predictions_per_seq = 20;
  std::size_t dupe_factor = 5;
  double random_next_prob = 0.5;
  double holdout_fraction = 0.02;
  std::uint64_t seed = 12345;
  /// Documents per work unit; each unit owns an RNG stream.
  std::size_t documents_per_unit = 256;
  std::size_t instances_per_shard = 1000;

  void validate() const;
};

struct PretrainingInstance {
  std::vector<TokenId> token_ids;
  std::vector<std::uint8_t> segment_ids;
  std::vector<std::uint8_t> attention_mask;
  std::vector<std::int32_t> masked_positions;
  std::vector<TokenId> masked_labels;
  bool is_random_next = false;

  friend bool operator==(const PretrainingInstance&, const PretrainingInstance&) = default;
};

using Shard = std::vector<PretrainingInstance>;

struct MaskingResult {
  std::vector<TokenId> tokens;
  std::vector<std::int32_t> positions;
  std::vector<TokenId> labels;
};

/// Tokenizes every sentence of the corpus into documents, dropping sentences
/// that tokenize to nothing (and documents left empty).
DocumentSet build_documents(const CleanCorpus& corpus, const Vocabulary& v, const TokenizerConfig& cfg);

/// Selects k = min(max_pred, max(1, round(prob * candidates))) non-special
/// positions without replacement; 80% become [MASK], 10% a random
/// non-special id, 10% stay. Positions are returned ascending.
MaskingResult apply_masking(const std::vector<TokenId>& tokens, std::size_t vocab_size, const DataGenParams& params,
                            Rng& rng);

/// Instances for one document, following the greedy segment-pair packing.
void create_instances_from_document(const DocumentSet& docs, std::size_t doc_index, std::size_t vocab_size,
                                    const DataGenParams& params, Rng& rng, std::vector<PretrainingInstance>& out);

/// All instances, dupe_factor passes, shuffled by seed and cut into shards of
/// params.instances_per_shard. Work units run on up to `threads` workers; the
/// result does not depend on the thread count.
std::vector<Shard> create_instances(const DocumentSet& docs, std::size_t vocab_size, const DataGenParams& params,
                                    unsigned threads = 1);

struct HoldoutSplit {
  std::vector<Shard> train;
  std::vector<Shard> eval;
};

/// Exactly round(fraction * n) instances go to eval, chosen by a seeded
/// permutation; both sides keep the original relative order.
HoldoutSplit split_holdout(const std::vector<Shard>& shards, double fraction, std::uint64_t seed,
                           std::size_t instances_per_shard);

/// Checks every structural invariant; returns an empty string when valid.
std::string check_instance(const PretrainingInstance& inst, std::size_t max_seq_length, std::size_t max_predictions,
                           std::size_t vocab_size);

/// Undoes masking: writes masked_labels back into a copy of token_ids.
std::vector<TokenId> unmask(const PretrainingInstance& inst);

std::string instance_to_json(const PretrainingInstance& inst);
PretrainingInstance instance_from_json(std::string_view line);

std::string format_shard(const Shard& shard);
Shard parse_shard(std::string_view text);

/// Writes shard-NNNNN.jsonl files into `dir`.
void write_shards(const std::vector<Shard>& shards, const std::filesystem::path& dir);
/// Reads every shard-*.jsonl in `dir`, in name order, flattened.
std::vector<PretrainingInstance> read_shards(const std::filesystem::path& dir);

std::string shard_name(std::size_t index);

}  // namespace xbert
