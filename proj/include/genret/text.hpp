#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace genret {

/// Bad input or configuration. The CLI maps this to exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Failure while doing otherwise valid work (I/O, numerics). Exit code 2.
class RuntimeFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Text normalization used for corpus membership and exact-match scoring:
// Unicode NFC, internal whitespace runs collapsed to one space, edges
// stripped, case preserved.
std::string normalize_text(std::string_view text);

// Whitespace-delimited words, no normalization.
std::vector<std::string> split_whitespace(std::string_view text);
std::string join(const std::vector<std::string>& words, std::string_view sep);

// Lowercased alphanumeric terms. Bytes >= 0x80 count as word characters.
std::vector<std::string> split_terms(std::string_view text);

std::string sha256_hex(std::string_view bytes);
// Hash of `bytes` as git would store it in a blob object.
std::string git_blob_sha1(std::string_view bytes);

// 64-bit mix of a seed and a string, stable across platforms and runs.
std::uint64_t mix_seed(std::uint64_t seed, std::string_view key);
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t key);

std::string read_file(const std::filesystem::path& path);
// Writes via a temporary sibling and rename so readers never see partial files.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);

}  // namespace genret
