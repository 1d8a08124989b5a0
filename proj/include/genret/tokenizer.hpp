#pragma once

#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <utility>
#include <vector>

namespace genret {

class Corpus;

inline constexpr int kPadId = 0;
inline constexpr int kBosId = 1;
inline constexpr int kEosId = 2;
inline constexpr int kUnkId = 3;
inline constexpr int kNumSpecial = 4;
inline constexpr int kByteBase = kNumSpecial;  // ids 4..259 are raw bytes
inline constexpr int kMinVocab = kByteBase + 256;
inline constexpr std::size_t kUnbounded = std::numeric_limits<std::size_t>::max();

inline constexpr std::string_view kTitlePrompt = "title:";
inline constexpr std::string_view kPassagePrompt = "passage:";

enum class Role { source, target };

/// Token ids for one side of a training pair. Targets always end with EOS.
struct TokenSequence {
  std::vector<int> ids;
  Role role = Role::source;
  friend bool operator==(const TokenSequence&, const TokenSequence&) = default;
};

struct Merge {
  int left;
  int right;
  int result;
};

/// Byte-level BPE. Ids 0-3 are PAD/BOS/EOS/UNK, 4-259 the 256 bytes, the rest
/// learned merges. Every byte string is encodable, so UNK is never emitted.
class Tokenizer {
 public:
  /// Learns merges over `texts` until the vocabulary holds exactly `vocab_size`
  /// entries. Merge selection: highest pair count, ties to the lexicographically
  /// smallest (left bytes, right bytes). When no observed pair remains the
  /// table is padded with unseen byte pairs in byte order.
  static Tokenizer train(std::span<const std::string> texts, int vocab_size, std::uint64_t seed = 0);

  static Tokenizer from_json(std::string_view json_text);
  /// Byte-stable serialization: version, vocab, merges, specials.
  std::string to_json() const;
  /// sha256 of to_json().
  const std::string& hash() const { return hash_; }

  /// Unbounded encoding without specials.
  std::vector<int> encode_ids(std::string_view text) const;
  /// Truncates to max_len; targets keep the last slot for EOS.
  TokenSequence encode(std::string_view text, Role role, std::size_t max_len = kUnbounded) const;
  /// Drops specials and stops at the first EOS. Throws on out-of-range ids.
  std::string decode(std::span<const int> ids) const;
  std::string decode(const TokenSequence& seq) const { return decode(seq.ids); }

  int vocab_size() const { return static_cast<int>(vocab_.size()); }
  const std::string& token_bytes(int id) const { return vocab_.at(static_cast<std::size_t>(id)); }
  const std::vector<Merge>& merges() const { return merges_; }
  std::uint64_t seed() const { return seed_; }
  bool byte_fallback() const { return true; }

  static bool is_special(int id) { return id >= 0 && id < kNumSpecial; }
  static std::string_view special_marker(int id);

 private:
  struct PairHash {
    std::size_t operator()(std::pair<int, int> p) const {
      return std::hash<std::uint64_t>{}((static_cast<std::uint64_t>(p.first) << 32) |
                                        static_cast<std::uint32_t>(p.second));
    }
  };

  Tokenizer() = default;
  void add_merge(int left, int right, int result);
  void finalize();
  void encode_chunk(std::string_view chunk, std::vector<int>& out) const;

  std::vector<std::string> vocab_;
  std::vector<Merge> merges_;
  std::unordered_map<std::pair<int, int>, std::size_t, PairHash> merge_rank_;
  std::uint64_t seed_ = 0;
  std::string hash_;
};

/// Splits text into pre-tokenization chunks (optional leading space + letters,
/// digit runs, punctuation runs, whitespace runs). Chunks concatenate back to
/// the input exactly.
std::vector<std::string_view> pretokenize(std::string_view text);

/// Trains on every title, passage and assigned URL plus the prompt literals.
Tokenizer train_tokenizer(const Corpus& corpus, int vocab_size, std::uint64_t seed);

}  // namespace genret
