#include "genret/checkpoint.hpp"

#include <bit>
#include <cstring>

#include "genret/text.hpp"

namespace genret {
namespace {

constexpr std::string_view kMagic = "GENRETCK";
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  void u8(std::uint8_t v) { out_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) out_.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
  }
  void bytes(std::string_view s) {
    u32(static_cast<std::uint32_t>(s.size()));
    out_.append(s);
  }
  void matrix(const Matrix<float>& m) {
    u32(static_cast<std::uint32_t>(m.rows()));
    u32(static_cast<std::uint32_t>(m.cols()));
    for (Eigen::Index i = 0; i < m.size(); ++i) u32(std::bit_cast<std::uint32_t>(m.data()[i]));
  }
  std::string take() { return std::move(out_); }

 private:
  std::string out_;
};

class Reader {
 public:
  explicit Reader(std::string_view in) : in_(in) {}
  std::uint8_t u8() { return static_cast<std::uint8_t>(take(1)[0]); }
  std::uint32_t u32() {
    auto s = take(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(static_cast<unsigned char>(s[static_cast<std::size_t>(i)])) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    auto s = take(8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(s[static_cast<std::size_t>(i)])) << (8 * i);
    return v;
  }
  std::string bytes() { return std::string(take(u32())); }
  void matrix(Matrix<float>& m) {
    const auto rows = u32(), cols = u32();
    if (rows != m.rows() || cols != m.cols()) throw ValidationError("checkpoint: parameter shape mismatch");
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = std::bit_cast<float>(u32());
  }
  std::string_view take(std::size_t n) {
    if (pos_ + n > in_.size()) throw ValidationError("checkpoint: truncated file");
    auto s = in_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == in_.size(); }

 private:
  std::string_view in_;
  std::size_t pos_ = 0;
};

}  // namespace

std::string serialize_checkpoint(const Seq2SeqModel& model, const AdamState* adam) {
  Writer w;
  for (char c : kMagic) w.u8(static_cast<std::uint8_t>(c));
  w.u32(kVersion);
  w.bytes(model.config().to_json().dump());
  w.bytes(model.tokenizer_hash);
  w.u64(static_cast<std::uint64_t>(model.step));
  w.u32(static_cast<std::uint32_t>(model.params().size()));
  w.u8(adam ? 1 : 0);
  for (const auto& p : model.params()) w.matrix(p.value);
  if (adam) {
    for (const auto& m : adam->m) w.matrix(m);
    for (const auto& v : adam->v) w.matrix(v);
  }
  return w.take();
}

Checkpoint parse_checkpoint(std::string_view bytes, std::string_view expected_tokenizer_hash) {
  Reader r(bytes);
  if (r.take(kMagic.size()) != kMagic) throw ValidationError("checkpoint: bad magic");
  if (r.u32() != kVersion) throw ValidationError("checkpoint: unsupported version");
  ModelConfig cfg;
  try {
    cfg = ModelConfig::from_json(nlohmann::json::parse(r.bytes()));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("checkpoint: bad config: ") + e.what());
  }
  Checkpoint ck{Seq2SeqModel(cfg), std::nullopt};
  ck.model.tokenizer_hash = r.bytes();
  if (!expected_tokenizer_hash.empty() && ck.model.tokenizer_hash != expected_tokenizer_hash) {
    throw ValidationError("checkpoint was trained with tokenizer " + ck.model.tokenizer_hash + ", expected " +
                          std::string(expected_tokenizer_hash));
  }
  ck.model.step = static_cast<std::int64_t>(r.u64());
  if (r.u32() != ck.model.params().size()) throw ValidationError("checkpoint: parameter count mismatch");
  const bool has_adam = r.u8() != 0;
  for (auto& p : ck.model.params()) r.matrix(p.value);
  if (has_adam) {
    AdamState adam = AdamState::zeros_like(ck.model);
    for (auto& m : adam.m) r.matrix(m);
    for (auto& v : adam.v) r.matrix(v);
    ck.adam = std::move(adam);
  }
  if (!r.done()) throw ValidationError("checkpoint: trailing bytes");
  return ck;
}

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const AdamState* adam) {
  write_file_atomic(path, serialize_checkpoint(model, adam));
}

Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_tokenizer_hash) {
  return parse_checkpoint(read_file(path), expected_tokenizer_hash);
}

}  // namespace genret
