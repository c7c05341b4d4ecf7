#include "xbert/datagen.hpp"

#include <algorithm>
#include <cmath>
#include "json.hpp"

#include "xbert/error.hpp"
#include "xbert/parallel.hpp"

namespace fs = std::filesystem;

namespace xbert {

void DataGenParams::validate() const {
  if (max_seq_length < 5) fail(ErrorCategory::kConfig, "max_seq_length must be at least 5");
  if (!(masked_lm_prob >= 0.0 && masked_lm_prob <= 1.0)) fail(ErrorCategory::kConfig, "masked_lm_prob must be in [0, 1]");
  if (max_predictions_per_seq > max_seq_length)
    fail(ErrorCategory::kConfig, "max_predictions_per_seq cannot exceed max_seq_length");
  if (!(random_next_prob >= 0.0 && random_next_prob <= 1.0))
    fail(ErrorCategory::kConfig, "random_next_prob must be in [0, 1]");
  if (!(holdout_fraction >= 0.0 && holdout_fraction < 1.0))
    fail(ErrorCategory::kConfig, "holdout fraction must be in [0, 1)");
  if (dupe_factor == 0 || documents_per_unit == 0 || instances_per_shard == 0)
    fail(ErrorCategory::kConfig, "dupe_factor, documents_per_unit and instances_per_shard must be positive");
}

DocumentSet build_documents(const CleanCorpus& corpus, const Vocabulary& v, const TokenizerConfig& cfg) {
  DocumentSet set;
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    const bool starts = i == 0 || corpus.document[i] != corpus.document[i - 1];
    if (starts && (set.documents.empty() || !set.documents.back().empty())) set.documents.emplace_back();
    auto ids = tokenize(corpus.sentences[i], v, cfg);
    if (!ids.empty()) set.documents.back().push_back(std::move(ids));
  }
  if (!set.documents.empty() && set.documents.back().empty()) set.documents.pop_back();
  if (set.documents.empty()) fail(ErrorCategory::kData, "no sentence produced any tokens");
  return set;
}

MaskingResult apply_masking(const std::vector<TokenId>& tokens, std::size_t vocab_size, const DataGenParams& params,
                            Rng& rng) {
  MaskingResult r;
  r.tokens = tokens;
  std::vector<std::int32_t> candidates;
  for (std::size_t i = 0; i < tokens.size(); ++i)
    if (!is_special(tokens[i])) candidates.push_back(static_cast<std::int32_t>(i));
  if (params.masked_lm_prob <= 0.0 || candidates.empty() || params.max_predictions_per_seq == 0) return r;

  const auto wanted = static_cast<std::size_t>(std::llround(params.masked_lm_prob * static_cast<double>(candidates.size())));
  const std::size_t k = std::min({params.max_predictions_per_seq, std::max<std::size_t>(1, wanted), candidates.size()});
  rng.shuffle(std::span<std::int32_t>(candidates));
  candidates.resize(k);

  const auto random_range = static_cast<std::uint64_t>(vocab_size) - kNumSpecial;
  for (std::int32_t pos : candidates) {
    const double u = rng.uniform();
    const auto p = static_cast<std::size_t>(pos);
    if (u < 0.8) {
      r.tokens[p] = kMaskId;
    } else if (u < 0.9) {
      r.tokens[p] = random_range > 0 ? kNumSpecial + static_cast<TokenId>(rng.below(random_range)) : kMaskId;
    }
  }
  std::sort(candidates.begin(), candidates.end());
  r.positions = candidates;
  r.labels.reserve(k);
  for (std::int32_t pos : candidates) r.labels.push_back(tokens[static_cast<std::size_t>(pos)]);
  return r;
}

namespace {

PretrainingInstance make_instance(const std::vector<TokenId>& a, const std::vector<TokenId>& b, bool random_next,
                                  std::size_t vocab_size, const DataGenParams& params, Rng& rng) {
  std::vector<TokenId> tokens;
  tokens.reserve(params.max_seq_length);
  tokens.push_back(kClsId);
  tokens.insert(tokens.end(), a.begin(), a.end());
  tokens.push_back(kSepId);
  tokens.insert(tokens.end(), b.begin(), b.end());
  tokens.push_back(kSepId);

  auto masked = apply_masking(tokens, vocab_size, params, rng);
  PretrainingInstance inst;
  inst.token_ids = std::move(masked.tokens);
  inst.masked_positions = std::move(masked.positions);
  inst.masked_labels = std::move(masked.labels);
  inst.is_random_next = random_next;

  const std::size_t used = inst.token_ids.size();
  inst.segment_ids.assign(params.max_seq_length, 0);
  for (std::size_t i = a.size() + 2; i < used; ++i) inst.segment_ids[i] = 1;
  inst.attention_mask.assign(params.max_seq_length, 0);
  std::fill_n(inst.attention_mask.begin(), used, std::uint8_t{1});
  inst.token_ids.resize(params.max_seq_length, kPadId);
  return inst;
}

void append_all(std::vector<TokenId>& dst, const Sentence& s) { dst.insert(dst.end(), s.begin(), s.end()); }

}  // namespace

void create_instances_from_document(const DocumentSet& docs, std::size_t doc_index, std::size_t vocab_size,
                                    const DataGenParams& params, Rng& rng, std::vector<PretrainingInstance>& out) {
  const auto& document = docs.documents[doc_index];
  const std::size_t max_tokens = params.max_seq_length - 3;
  const std::size_t n_docs = docs.documents.size();

  std::vector<const Sentence*> chunk;
  std::size_t chunk_len = 0;
  std::size_t i = 0;
  while (i < document.size()) {
    chunk.push_back(&document[i]);
    chunk_len += document[i].size();
    if (i + 1 == document.size() || chunk_len >= max_tokens) {
      bool random_next = rng.bernoulli(params.random_next_prob);
      const std::size_t a_end = chunk.size() >= 2 ? static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(chunk.size()) - 1)) : 1;
      std::vector<TokenId> a;
      std::vector<TokenId> b;
      for (std::size_t j = 0; j < a_end; ++j) append_all(a, *chunk[j]);

      if (!random_next) {
        if (chunk.size() >= 2) {
          for (std::size_t j = a_end; j < chunk.size(); ++j) append_all(b, *chunk[j]);
        } else if (a.size() >= 2) {
          // A lone sentence is its own continuation: split it in two.
          const auto cut = static_cast<std::size_t>(rng.range(1, static_cast<std::int64_t>(a.size()) - 1));
          b.assign(a.begin() + static_cast<std::ptrdiff_t>(cut), a.end());
          a.resize(cut);
        } else {
          random_next = true;
        }
      }
      if (random_next) {
        const std::size_t target_b = a.size() < max_tokens ? max_tokens - a.size() : 1;
        std::size_t other = static_cast<std::size_t>(rng.below(n_docs - 1));
        if (other >= doc_index) ++other;
        const auto& odoc = docs.documents[other];
        for (std::size_t j = static_cast<std::size_t>(rng.below(odoc.size())); j < odoc.size(); ++j) {
          append_all(b, odoc[j]);
          if (b.size() >= target_b) break;
        }
        // Segments after a_end are skipped in this pass, which keeps the
        // instance count of a pass independent of the draws.
      }

      // Trim the longer side at its outer end so the A|B boundary survives.
      while (a.size() + b.size() > max_tokens) {
        if (a.size() > b.size()) {
          a.erase(a.begin());
        } else {
          b.pop_back();
        }
      }
      out.push_back(make_instance(a, b, random_next, vocab_size, params, rng));
      chunk.clear();
      chunk_len = 0;
    }
    ++i;
  }
}

std::vector<Shard> create_instances(const DocumentSet& docs, std::size_t vocab_size, const DataGenParams& params,
                                    unsigned threads) {
  params.validate();
  if (docs.documents.size() < 2)
    fail(ErrorCategory::kData, "NSP negatives impossible: need at least two documents, got " +
                                   std::to_string(docs.documents.size()));
  const std::size_t n_docs = docs.documents.size();
  const std::size_t blocks = (n_docs + params.documents_per_unit - 1) / params.documents_per_unit;
  const std::size_t units = blocks * params.dupe_factor;

  std::vector<std::vector<PretrainingInstance>> per_unit(units);
  parallel_for(units, threads, [&](std::size_t u) {
    Rng rng = Rng::derive(params.seed, u, 1);
    const std::size_t block = u % blocks;
    const std::size_t first = block * params.documents_per_unit;
    const std::size_t last = std::min(n_docs, first + params.documents_per_unit);
    for (std::size_t d = first; d < last; ++d) create_instances_from_document(docs, d, vocab_size, params, rng, per_unit[u]);
  });

  std::vector<PretrainingInstance> all;
  for (auto& part : per_unit)
    for (auto& inst : part) all.push_back(std::move(inst));
  Rng shuffler = Rng::derive(params.seed, 0, 2);
  shuffler.shuffle(std::span<PretrainingInstance>(all));

  std::vector<Shard> shards;
  for (std::size_t i = 0; i < all.size(); i += params.instances_per_shard) {
    const std::size_t end = std::min(all.size(), i + params.instances_per_shard);
    shards.emplace_back(std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(i)),
                        std::make_move_iterator(all.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return shards;
}

namespace {

std::vector<Shard> reshard(std::vector<PretrainingInstance> items, std::size_t per_shard) {
  std::vector<Shard> out;
  for (std::size_t i = 0; i < items.size(); i += per_shard) {
    const std::size_t end = std::min(items.size(), i + per_shard);
    out.emplace_back(std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(i)),
                     std::make_move_iterator(items.begin() + static_cast<std::ptrdiff_t>(end)));
  }
  return out;
}

}  // namespace

HoldoutSplit split_holdout(const std::vector<Shard>& shards, double fraction, std::uint64_t seed,
                           std::size_t instances_per_shard) {
  if (!(fraction >= 0.0 && fraction < 1.0)) fail(ErrorCategory::kConfig, "holdout fraction must be in [0, 1)");
  if (shards.empty()) fail(ErrorCategory::kData, "no shards to split");
  if (instances_per_shard == 0) fail(ErrorCategory::kConfig, "instances_per_shard must be positive");
  std::size_t n = 0;
  for (const auto& s : shards) n += s.size();
  const auto k = static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = Rng::derive(seed, 0, 3);
  rng.shuffle(std::span<std::size_t>(order));
  std::vector<char> held(n, 0);
  for (std::size_t i = 0; i < k; ++i) held[order[i]] = 1;

  std::vector<PretrainingInstance> train;
  std::vector<PretrainingInstance> eval;
  std::size_t idx = 0;
  for (const auto& s : shards)
    for (const auto& inst : s) (held[idx++] ? eval : train).push_back(inst);
  return {reshard(std::move(train), instances_per_shard), reshard(std::move(eval), instances_per_shard)};
}

std::string check_instance(const PretrainingInstance& inst, std::size_t max_seq_length, std::size_t max_predictions,
                           std::size_t vocab_size) {
  const auto& t = inst.token_ids;
  if (t.size() != max_seq_length) return "token_ids length " + std::to_string(t.size());
  if (inst.segment_ids.size() != max_seq_length || inst.attention_mask.size() != max_seq_length)
    return "segment_ids/attention_mask length mismatch";
  if (t[0] != kClsId) return "position 0 is not [CLS]";
  std::vector<std::size_t> seps;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (t[i] < 0 || static_cast<std::size_t>(t[i]) >= vocab_size) return "token id out of range at " + std::to_string(i);
    if (t[i] == kSepId) seps.push_back(i);
    if ((inst.attention_mask[i] == 1) != (t[i] != kPadId)) return "attention_mask disagrees with [PAD] at " + std::to_string(i);
  }
  if (seps.size() != 2) return "expected exactly two [SEP] tokens, found " + std::to_string(seps.size());
  if (seps[0] < 2 || seps[1] < seps[0] + 2) return "empty segment";
  for (std::size_t i = 0; i < t.size(); ++i) {
    const std::uint8_t want = (i > seps[0] && i <= seps[1]) ? 1 : 0;
    if (inst.segment_ids[i] != want) return "segment id wrong at " + std::to_string(i);
    if (i > seps[1] && t[i] != kPadId) return "content after the second [SEP]";
  }
  if (inst.masked_positions.size() != inst.masked_labels.size()) return "masked positions/labels size mismatch";
  if (inst.masked_positions.size() > max_predictions) return "too many masked positions";
  for (std::size_t j = 0; j < inst.masked_positions.size(); ++j) {
    const auto p = inst.masked_positions[j];
    if (p <= 0 || static_cast<std::size_t>(p) >= max_seq_length) return "masked position out of range";
    if (j > 0 && p <= inst.masked_positions[j - 1]) return "masked positions not strictly ascending";
    const TokenId cur = t[static_cast<std::size_t>(p)];
    if (cur == kClsId || cur == kSepId || cur == kPadId) return "masked position on [CLS]/[SEP]/[PAD]";
    const TokenId label = inst.masked_labels[j];
    if (is_special(label) || static_cast<std::size_t>(label) >= vocab_size) return "masked label is not a content id";
  }
  return {};
}

std::vector<TokenId> unmask(const PretrainingInstance& inst) {
  auto t = inst.token_ids;
  for (std::size_t j = 0; j < inst.masked_positions.size(); ++j)
    t[static_cast<std::size_t>(inst.masked_positions[j])] = inst.masked_labels[j];
  return t;
}

std::string instance_to_json(const PretrainingInstance& inst) {
  nlohmann::ordered_json j;
  j["token_ids"] = inst.token_ids;
  j["segment_ids"] = inst.segment_ids;
  j["attention_mask"] = inst.attention_mask;
  j["masked_positions"] = inst.masked_positions;
  j["masked_labels"] = inst.masked_labels;
  j["is_random_next"] = inst.is_random_next;
  return j.dump();
}

PretrainingInstance instance_from_json(std::string_view line) {
  try {
    const auto j = nlohmann::json::parse(line);
    PretrainingInstance inst;
    j.at("token_ids").get_to(inst.token_ids);
    j.at("segment_ids").get_to(inst.segment_ids);
    j.at("attention_mask").get_to(inst.attention_mask);
    j.at("masked_positions").get_to(inst.masked_positions);
    j.at("masked_labels").get_to(inst.masked_labels);
    inst.is_random_next = j.at("is_random_next").get<bool>();
    return inst;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, std::string("bad instance record: ") + e.what());
  }
}

std::string format_shard(const Shard& shard) {
  std::string out;
  for (const auto& inst : shard) {
    out += instance_to_json(inst);
    out.push_back('\n');
  }
  return out;
}

Shard parse_shard(std::string_view text) {
  Shard shard;
  std::size_t pos = 0;
  while (pos < text.size()) {
    auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    const auto line = text.substr(pos, nl - pos);
    if (!line.empty()) shard.push_back(instance_from_json(line));
    pos = nl + 1;
  }
  return shard;
}

std::string shard_name(std::size_t index) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "shard-%05zu.jsonl", index);
  return buf;
}

void write_shards(const std::vector<Shard>& shards, const fs::path& dir) {
  fs::create_directories(dir);
  for (const auto& e : fs::directory_iterator(dir)) {
    const auto name = e.path().filename().string();
    if (name.starts_with("shard-") && name.ends_with(".jsonl")) fs::remove(e.path());
  }
  for (std::size_t i = 0; i < shards.size(); ++i) write_file(dir / shard_name(i), format_shard(shards[i]));
}

std::vector<PretrainingInstance> read_shards(const fs::path& dir) {
  std::vector<PretrainingInstance> all;
  for (const auto& f : list_text_files(dir)) {
    const auto name = f.filename().string();
    if (!name.starts_with("shard-") || !name.ends_with(".jsonl")) continue;
    for (auto& inst : parse_shard(read_file(f))) all.push_back(std::move(inst));
  }
  return all;
}

}  // namespace xbert
