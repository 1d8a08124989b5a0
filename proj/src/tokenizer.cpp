#include "genret/tokenizer.hpp"

#include <algorithm>
#include <array>
#include <map>
#include <set>
#include <unordered_set>

#include <json.hpp>

#include "genret/corpus.hpp"
#include "genret/text.hpp"

namespace genret {

using nlohmann::json;

namespace {

constexpr std::array<std::string_view, kNumSpecial> kMarkers = {"<pad>", "<s>", "</s>", "<unk>"};
constexpr int kFormatVersion = 1;

enum class CharClass { space, letter, digit, punct };

CharClass classify(unsigned char c) {
  if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') return CharClass::space;
  if (c >= 0x80 || (c >= 'a' && c <= 'z') || (c >= 'A' && c <= 'Z')) return CharClass::letter;
  if (c >= '0' && c <= '9') return CharClass::digit;
  return CharClass::punct;
}

// Printable bytes map to themselves, the rest to code points from U+0100 up,
// so token strings survive JSON as valid UTF-8.
const std::array<std::string, 256>& byte_to_unicode() {
  static const std::array<std::string, 256> table = [] {
    std::array<std::string, 256> t;
    auto printable = [](int b) {
      return (b >= '!' && b <= '~') || (b >= 0xA1 && b <= 0xAC) || (b >= 0xAE && b <= 0xFF);
    };
    int extra = 0;
    for (int b = 0; b < 256; ++b) {
      char32_t cp = printable(b) ? static_cast<char32_t>(b) : static_cast<char32_t>(256 + extra++);
      std::string s;
      if (cp < 0x80) {
        s.push_back(static_cast<char>(cp));
      } else {
        s.push_back(static_cast<char>(0xC0 | (cp >> 6)));
        s.push_back(static_cast<char>(0x80 | (cp & 0x3F)));
      }
      t[static_cast<std::size_t>(b)] = s;
    }
    return t;
  }();
  return table;
}

std::string to_visible(std::string_view bytes) {
  const auto& table = byte_to_unicode();
  std::string out;
  for (unsigned char c : bytes) out += table[c];
  return out;
}

std::string from_visible(std::string_view visible) {
  static const std::map<std::string, unsigned char, std::less<>> reverse = [] {
    std::map<std::string, unsigned char, std::less<>> m;
    const auto& table = byte_to_unicode();
    for (int b = 0; b < 256; ++b) m.emplace(table[static_cast<std::size_t>(b)], static_cast<unsigned char>(b));
    return m;
  }();
  std::string out;
  std::size_t i = 0;
  while (i < visible.size()) {
    std::size_t len = (static_cast<unsigned char>(visible[i]) < 0x80) ? 1 : 2;
    auto it = reverse.find(visible.substr(i, len));
    if (it == reverse.end()) throw ValidationError("tokenizer: bad token string encoding");
    out.push_back(static_cast<char>(it->second));
    i += len;
  }
  return out;
}

bool is_marker(std::string_view s) {
  return std::find(kMarkers.begin(), kMarkers.end(), s) != kMarkers.end();
}

struct Word {
  std::vector<int> symbols;
  long count = 0;
};

}  // namespace

std::string_view Tokenizer::special_marker(int id) { return kMarkers.at(static_cast<std::size_t>(id)); }

std::vector<std::string_view> pretokenize(std::string_view text) {
  std::vector<std::string_view> chunks;
  std::size_t i = 0;
  while (i < text.size()) {
    std::size_t start = i;
    CharClass cls = classify(static_cast<unsigned char>(text[i]));
    if (text[i] == ' ' && i + 1 < text.size() &&
        classify(static_cast<unsigned char>(text[i + 1])) == CharClass::letter) {
      ++i;
      cls = CharClass::letter;
    }
    while (i < text.size() && classify(static_cast<unsigned char>(text[i])) == cls) {
      // Keep one space back to prefix the following word.
      if (cls == CharClass::space && text[i] == ' ' && i + 1 < text.size() && i > start &&
          classify(static_cast<unsigned char>(text[i + 1])) == CharClass::letter) {
        break;
      }
      ++i;
    }
    chunks.push_back(text.substr(start, i - start));
  }
  return chunks;
}

void Tokenizer::add_merge(int left, int right, int result) {
  merge_rank_.emplace(std::pair{left, right}, merges_.size());
  merges_.push_back({left, right, result});
}

void Tokenizer::finalize() { hash_ = sha256_hex(to_json()); }

Tokenizer Tokenizer::train(std::span<const std::string> texts, int vocab_size, std::uint64_t seed) {
  if (vocab_size < kMinVocab) {
    throw ValidationError("vocab_size must be >= " + std::to_string(kMinVocab));
  }
  Tokenizer tok;
  tok.seed_ = seed;
  for (int i = 0; i < kNumSpecial; ++i) tok.vocab_.emplace_back(kMarkers[static_cast<std::size_t>(i)]);
  for (int b = 0; b < 256; ++b) tok.vocab_.emplace_back(1, static_cast<char>(b));

  std::unordered_map<std::string, int> id_of;
  for (int i = kByteBase; i < static_cast<int>(tok.vocab_.size()); ++i) id_of.emplace(tok.vocab_[static_cast<std::size_t>(i)], i);

  std::map<std::string, long> chunk_counts;
  for (const auto& t : texts) {
    for (auto c : pretokenize(t)) ++chunk_counts[std::string(c)];
  }
  std::vector<Word> words;
  words.reserve(chunk_counts.size());
  for (const auto& [chunk, count] : chunk_counts) {
    Word w;
    w.count = count;
    for (unsigned char c : chunk) w.symbols.push_back(kByteBase + c);
    words.push_back(std::move(w));
  }

  std::unordered_map<std::pair<int, int>, long, PairHash> pair_counts;
  std::unordered_map<std::pair<int, int>, std::set<std::size_t>, PairHash> where;
  auto add_pairs = [&](std::size_t wi, long sign) {
    const Word& w = words[wi];
    for (std::size_t j = 0; j + 1 < w.symbols.size(); ++j) {
      std::pair<int, int> p{w.symbols[j], w.symbols[j + 1]};
      pair_counts[p] += sign * w.count;
      if (sign > 0) where[p].insert(wi);
    }
  };
  for (std::size_t wi = 0; wi < words.size(); ++wi) add_pairs(wi, +1);

  std::unordered_set<std::pair<int, int>, PairHash> banned;
  auto bytes_of = [&](int id) -> const std::string& { return tok.vocab_[static_cast<std::size_t>(id)]; };

  while (static_cast<int>(tok.vocab_.size()) < vocab_size) {
    std::pair<int, int> best{-1, -1};
    long best_count = 0;
    for (const auto& [p, c] : pair_counts) {
      if (c <= 0 || banned.count(p)) continue;
      if (c > best_count) {
        best = p;
        best_count = c;
      } else if (c == best_count) {
        int cmp = bytes_of(p.first).compare(bytes_of(best.first));
        if (cmp < 0 || (cmp == 0 && bytes_of(p.second) < bytes_of(best.second))) best = p;
      }
    }
    if (best_count == 0) break;

    std::string merged = bytes_of(best.first) + bytes_of(best.second);
    if (is_marker(merged)) {
      banned.insert(best);
      continue;
    }
    int result;
    if (auto it = id_of.find(merged); it != id_of.end()) {
      result = it->second;
    } else {
      result = static_cast<int>(tok.vocab_.size());
      tok.vocab_.push_back(merged);
      id_of.emplace(merged, result);
    }
    tok.add_merge(best.first, best.second, result);
    banned.insert(best);

    std::set<std::size_t> affected = std::move(where[best]);
    where.erase(best);
    for (std::size_t wi : affected) {
      add_pairs(wi, -1);
      Word& w = words[wi];
      std::vector<int> next;
      next.reserve(w.symbols.size());
      for (std::size_t j = 0; j < w.symbols.size(); ++j) {
        if (j + 1 < w.symbols.size() && w.symbols[j] == best.first && w.symbols[j + 1] == best.second) {
          next.push_back(result);
          ++j;
        } else {
          next.push_back(w.symbols[j]);
        }
      }
      w.symbols = std::move(next);
      add_pairs(wi, +1);
    }
    pair_counts.erase(best);
  }

  // Padding merges over byte pairs never seen in training text.
  for (int a = 0; a < 256 && static_cast<int>(tok.vocab_.size()) < vocab_size; ++a) {
    for (int b = 0; b < 256 && static_cast<int>(tok.vocab_.size()) < vocab_size; ++b) {
      std::pair<int, int> p{kByteBase + a, kByteBase + b};
      std::string merged{static_cast<char>(a), static_cast<char>(b)};
      if (tok.merge_rank_.count(p) || id_of.count(merged) || is_marker(merged)) continue;
      int result = static_cast<int>(tok.vocab_.size());
      tok.vocab_.push_back(merged);
      id_of.emplace(merged, result);
      tok.add_merge(p.first, p.second, result);
    }
  }
  if (static_cast<int>(tok.vocab_.size()) != vocab_size) {
    throw ValidationError("vocab_size " + std::to_string(vocab_size) + " unreachable");
  }
  tok.finalize();
  return tok;
}

void Tokenizer::encode_chunk(std::string_view chunk, std::vector<int>& out) const {
  std::vector<int> syms;
  syms.reserve(chunk.size());
  for (unsigned char c : chunk) syms.push_back(kByteBase + c);
  while (syms.size() > 1) {
    std::size_t best_rank = std::numeric_limits<std::size_t>::max();
    for (std::size_t j = 0; j + 1 < syms.size(); ++j) {
      auto it = merge_rank_.find({syms[j], syms[j + 1]});
      if (it != merge_rank_.end() && it->second < best_rank) best_rank = it->second;
    }
    if (best_rank == std::numeric_limits<std::size_t>::max()) break;
    const Merge& m = merges_[best_rank];
    std::size_t w = 0;
    for (std::size_t j = 0; j < syms.size(); ++j) {
      if (j + 1 < syms.size() && syms[j] == m.left && syms[j + 1] == m.right) {
        syms[w++] = m.result;
        ++j;
      } else {
        syms[w++] = syms[j];
      }
    }
    syms.resize(w);
  }
  out.insert(out.end(), syms.begin(), syms.end());
}

std::vector<int> Tokenizer::encode_ids(std::string_view text) const {
  std::vector<int> out;
  for (auto chunk : pretokenize(text)) encode_chunk(chunk, out);
  return out;
}

TokenSequence Tokenizer::encode(std::string_view text, Role role, std::size_t max_len) const {
  TokenSequence seq;
  seq.role = role;
  seq.ids = encode_ids(text);
  if (role == Role::target) {
    if (max_len < 1) throw ValidationError("target max_len must be >= 1");
    if (seq.ids.size() > max_len - 1) seq.ids.resize(max_len - 1);
    seq.ids.push_back(kEosId);
  } else if (seq.ids.size() > max_len) {
    seq.ids.resize(max_len);
  }
  return seq;
}

std::string Tokenizer::decode(std::span<const int> ids) const {
  std::string out;
  for (int id : ids) {
    if (id < 0 || id >= vocab_size()) {
      throw ValidationError("token id " + std::to_string(id) + " out of range");
    }
    if (id == kEosId) break;
    if (is_special(id)) continue;
    out += vocab_[static_cast<std::size_t>(id)];
  }
  return out;
}

std::string Tokenizer::to_json() const {
  json vocab = json::array();
  for (std::size_t i = 0; i < vocab_.size(); ++i) {
    vocab.push_back(i < kNumSpecial ? vocab_[i] : to_visible(vocab_[i]));
  }
  json merges = json::array();
  for (const auto& m : merges_) {
    merges.push_back(to_visible(vocab_[static_cast<std::size_t>(m.left)]) + " " +
                     to_visible(vocab_[static_cast<std::size_t>(m.right)]));
  }
  json specials = {{"pad", kPadId}, {"bos", kBosId}, {"eos", kEosId}, {"unk", kUnkId}};
  json doc = {{"version", kFormatVersion}, {"type", "byte_bpe"}, {"byte_fallback", true},
              {"seed", seed_}, {"vocab", vocab}, {"merges", merges}, {"specials", specials}};
  return doc.dump() + "\n";
}

Tokenizer Tokenizer::from_json(std::string_view json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("tokenizer: malformed JSON: ") + e.what());
  }
  if (doc.value("version", 0) != kFormatVersion) throw ValidationError("tokenizer: unsupported version");
  Tokenizer tok;
  tok.seed_ = doc.value("seed", std::uint64_t{0});
  const auto& vocab = doc.at("vocab");
  if (vocab.size() < static_cast<std::size_t>(kMinVocab)) throw ValidationError("tokenizer: vocab too small");
  std::unordered_map<std::string, int> id_of;
  for (std::size_t i = 0; i < vocab.size(); ++i) {
    std::string s = vocab[i].get<std::string>();
    if (i < kNumSpecial) {
      if (s != kMarkers[i]) throw ValidationError("tokenizer: special tokens must occupy ids 0-3");
      tok.vocab_.push_back(s);
      continue;
    }
    std::string bytes = from_visible(s);
    if (bytes.empty()) throw ValidationError("tokenizer: empty token string");
    if (!id_of.emplace(bytes, static_cast<int>(i)).second) throw ValidationError("tokenizer: duplicate token");
    tok.vocab_.push_back(std::move(bytes));
  }
  for (int b = 0; b < 256; ++b) {
    if (tok.vocab_[static_cast<std::size_t>(kByteBase + b)] != std::string(1, static_cast<char>(b))) {
      throw ValidationError("tokenizer: byte tokens must occupy ids 4-259");
    }
  }
  for (const auto& m : doc.at("merges")) {
    std::string s = m.get<std::string>();
    auto space = s.find(' ');
    if (space == std::string::npos) throw ValidationError("tokenizer: bad merge entry");
    std::string left = from_visible(s.substr(0, space));
    std::string right = from_visible(s.substr(space + 1));
    auto l = id_of.find(left), r = id_of.find(right), res = id_of.find(left + right);
    if (l == id_of.end() || r == id_of.end() || res == id_of.end()) {
      throw ValidationError("tokenizer: merge references unknown token");
    }
    tok.add_merge(l->second, r->second, res->second);
  }
  tok.finalize();
  return tok;
}

Tokenizer train_tokenizer(const Corpus& corpus, int vocab_size, std::uint64_t seed) {
  if (corpus.empty()) throw ValidationError("cannot train a tokenizer on an empty corpus");
  std::vector<std::string> texts;
  texts.emplace_back(kTitlePrompt);
  texts.emplace_back(kPassagePrompt);
  for (const auto& r : corpus.records()) {
    texts.push_back(r.title);
    texts.push_back(r.passage);
    for (const auto& u : r.urls) texts.push_back(u);
  }
  return Tokenizer::train(texts, vocab_size, seed);
}

}  // namespace genret
