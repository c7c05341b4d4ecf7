#include "xbert/checkpoint.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <iomanip>
#include "json.hpp"
#include <sstream>

#include "xbert/corpus.hpp"
#include "xbert/error.hpp"

namespace fs = std::filesystem;

namespace xbert {

SwapPolicy parse_swap_policy(std::string_view name) {
  if (name == "positional") return SwapPolicy::kPositional;
  if (name == "aligned") return SwapPolicy::kAligned;
  fail(ErrorCategory::kUsage, "unknown swap policy '" + std::string(name) + "' (expected positional or aligned)");
}

std::string_view swap_policy_name(SwapPolicy p) noexcept {
  return p == SwapPolicy::kPositional ? "positional" : "aligned";
}

OptimizerState fresh_optimizer_state(const ParameterSet<float>& params) {
  return {params.zeros_like(), params.zeros_like(), 0};
}

void Checkpoint::validate() const {
  config.validate();
  if (config.vocab_size != vocab.size())
    fail(ErrorCategory::kFormat, "config vocab size " + std::to_string(config.vocab_size) +
                                     " differs from vocabulary size " + std::to_string(vocab.size()));
  const auto inventory = parameter_inventory(config);
  if (params.size() != inventory.size())
    fail(ErrorCategory::kFormat, "checkpoint holds " + std::to_string(params.size()) + " tensors, config expects " +
                                     std::to_string(inventory.size()));
  for (const auto& [name, shape] : inventory) {
    if (!params.contains(name)) fail(ErrorCategory::kFormat, "missing tensor " + name);
    const auto& t = params.at(name);
    if (t.shape != shape)
      fail(ErrorCategory::kFormat, "tensor " + name + " has shape " + shape_string(t.shape) + ", expected " +
                                       shape_string(shape));
    for (float v : t.data)
      if (!std::isfinite(v)) fail(ErrorCategory::kNumeric, "non-finite value in " + name);
  }
  for (const auto* moments : {&optimizer.first_moment, &optimizer.second_moment}) {
    if (moments->size() != params.size()) fail(ErrorCategory::kFormat, "optimizer state does not cover the parameters");
    for (const auto& [name, t] : *moments)
      if (!params.contains(name) || params.at(name).shape != t.shape)
        fail(ErrorCategory::kFormat, "optimizer state tensor " + name + " does not match a parameter");
  }
}

std::string Checkpoint::hash() const {
  const std::string bytes = encode_tensors(params);
  const auto h = hash_bytes(std::as_bytes(std::span<const char>(bytes.data(), bytes.size())));
  std::ostringstream ss;
  ss << std::hex << std::setw(16) << std::setfill('0') << h;
  return ss.str();
}

namespace {

void put_u8(std::string& out, std::uint8_t v) { out.push_back(static_cast<char>(v)); }
void put_u16(std::string& out, std::uint16_t v) {
  put_u8(out, static_cast<std::uint8_t>(v & 0xFF));
  put_u8(out, static_cast<std::uint8_t>(v >> 8));
}
void put_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) put_u8(out, static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

class Reader {
 public:
  explicit Reader(std::string_view bytes) : bytes_(bytes) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint16_t u16() {
    const std::uint16_t lo = u8();
    return static_cast<std::uint16_t>(lo | (static_cast<std::uint16_t>(u8()) << 8));
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const noexcept { return pos_ == bytes_.size(); }

 private:
  void need(std::size_t n) const {
    if (bytes_.size() - pos_ < n) fail(ErrorCategory::kFormat, "truncated tensor file");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string encode_tensors(const ParameterSet<float>& tensors) {
  std::string out(kWeightsMagic, sizeof kWeightsMagic);
  put_u8(out, kWeightsFormatVersion);
  put_u32(out, static_cast<std::uint32_t>(tensors.size()));
  for (const auto& [name, t] : tensors) {
    if (name.size() > 0xFFFF) fail(ErrorCategory::kFormat, "tensor name too long");
    if (t.shape.size() > 0xFF) fail(ErrorCategory::kFormat, "tensor rank too large");
    put_u16(out, static_cast<std::uint16_t>(name.size()));
    out += name;
    put_u8(out, static_cast<std::uint8_t>(t.shape.size()));
    for (auto d : t.shape) put_u32(out, static_cast<std::uint32_t>(d));
    out.reserve(out.size() + 4 * t.size());
    for (float v : t.data) put_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

ParameterSet<float> decode_tensors(std::string_view bytes) {
  Reader r(bytes);
  if (r.take(4) != std::string_view(kWeightsMagic, 4)) fail(ErrorCategory::kFormat, "bad magic: not a RUBT tensor file");
  const auto version = r.u8();
  if (version != kWeightsFormatVersion)
    fail(ErrorCategory::kFormat, "unsupported tensor format version " + std::to_string(version));
  const auto count = r.u32();
  ParameterSet<float> out;
  for (std::uint32_t i = 0; i < count; ++i) {
    std::string name(r.take(r.u16()));
    Shape shape(r.u8());
    for (auto& d : shape) d = r.u32();
    Tensor<float> t(shape);
    for (auto& v : t.data) v = std::bit_cast<float>(r.u32());
    if (out.contains(name)) fail(ErrorCategory::kFormat, "duplicate tensor " + name);
    out.add(std::move(name), std::move(t));
  }
  if (!r.done()) fail(ErrorCategory::kFormat, "trailing bytes after tensor data");
  return out;
}

namespace {

constexpr const char* kFirstPrefix = "m/";
constexpr const char* kSecondPrefix = "v/";

std::string encode_optimizer(const OptimizerState& st) {
  ParameterSet<float> all;
  for (const auto& [name, t] : st.first_moment) all.add(kFirstPrefix + name, t);
  for (const auto& [name, t] : st.second_moment) all.add(kSecondPrefix + name, t);
  return encode_tensors(all);
}

OptimizerState decode_optimizer(std::string_view bytes, std::uint64_t step) {
  OptimizerState st;
  st.step = step;
  for (auto& [name, t] : decode_tensors(bytes)) {
    if (name.starts_with(kFirstPrefix)) {
      st.first_moment.add(name.substr(2), std::move(t));
    } else if (name.starts_with(kSecondPrefix)) {
      st.second_moment.add(name.substr(2), std::move(t));
    } else {
      fail(ErrorCategory::kFormat, "unexpected optimizer tensor " + name);
    }
  }
  return st;
}

nlohmann::json config_to_json(const ModelConfig& c) {
  return {{"num_layers", c.num_layers},           {"hidden_size", c.hidden_size},
          {"num_heads", c.num_heads},             {"intermediate_size", c.intermediate_size},
          {"vocab_size", c.vocab_size},           {"max_positions", c.max_positions},
          {"type_vocab_size", c.type_vocab_size}, {"dropout_prob", c.dropout_prob}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  j.at("num_layers").get_to(c.num_layers);
  j.at("hidden_size").get_to(c.hidden_size);
  j.at("num_heads").get_to(c.num_heads);
  j.at("intermediate_size").get_to(c.intermediate_size);
  j.at("vocab_size").get_to(c.vocab_size);
  j.at("max_positions").get_to(c.max_positions);
  j.at("type_vocab_size").get_to(c.type_vocab_size);
  j.at("dropout_prob").get_to(c.dropout_prob);
  return c;
}

}  // namespace

std::string encode_config_json(const Checkpoint& ck) {
  nlohmann::json j;
  j["format_version"] = kWeightsFormatVersion;
  j["model"] = config_to_json(ck.config);
  j["metadata"] = {{"regime", ck.meta.regime},
                   {"parent_hash", ck.meta.parent_hash},
                   {"swap_policy", ck.meta.swap_policy},
                   {"seed", ck.meta.seed},
                   {"optimizer_step", ck.optimizer.step}};
  return j.dump(2) + "\n";
}

void save_checkpoint(const Checkpoint& ck, const fs::path& dir) {
  ck.validate();
  fs::create_directories(dir);
  write_file(dir / "config.json", encode_config_json(ck));
  save_vocab(ck.vocab, dir / "vocab.txt");
  write_file(dir / "weights.bin", encode_tensors(ck.params));
  write_file(dir / "optstate.bin", encode_optimizer(ck.optimizer));
}

Checkpoint load_checkpoint(const fs::path& dir) {
  Checkpoint ck;
  try {
    const auto j = nlohmann::json::parse(read_file(dir / "config.json"));
    if (j.at("format_version").get<int>() != kWeightsFormatVersion)
      fail(ErrorCategory::kFormat, "unsupported checkpoint format version");
    ck.config = config_from_json(j.at("model"));
    const auto& m = j.at("metadata");
    m.at("regime").get_to(ck.meta.regime);
    m.at("parent_hash").get_to(ck.meta.parent_hash);
    m.at("swap_policy").get_to(ck.meta.swap_policy);
    m.at("seed").get_to(ck.meta.seed);
    ck.optimizer.step = m.at("optimizer_step").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCategory::kFormat, "bad config.json in " + dir.string() + ": " + e.what());
  }
  ck.vocab = load_vocab(dir / "vocab.txt");
  ck.params = decode_tensors(read_file(dir / "weights.bin"));
  const auto step = ck.optimizer.step;
  ck.optimizer = decode_optimizer(read_file(dir / "optstate.bin"), step);
  ck.validate();
  return ck;
}

}  // namespace xbert
