#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>

#include "genret/model.hpp"
#include "genret/train.hpp"

namespace genret {

/// Checkpoint layout, all integers little-endian:
///   "GENRETCK" | u32 version | u32 n + n bytes config JSON
///   | u32 n + n bytes tokenizer hash | i64 step | u32 param count | u8 has_adam
///   | per parameter in layout order: u32 rows, u32 cols, rows*cols f32
///   | if has_adam: the same block for Adam m, then for Adam v
struct Checkpoint {
  Seq2SeqModel model;
  std::optional<AdamState> adam;
};

std::string serialize_checkpoint(const Seq2SeqModel& model, const AdamState* adam = nullptr);
/// Throws ValidationError on a bad header, truncated payload, or when
/// expected_tokenizer_hash is non-empty and differs from the embedded hash.
Checkpoint parse_checkpoint(std::string_view bytes, std::string_view expected_tokenizer_hash = {});

void save_checkpoint(const std::filesystem::path& path, const Seq2SeqModel& model, const AdamState* adam = nullptr);
Checkpoint load_checkpoint(const std::filesystem::path& path, std::string_view expected_tokenizer_hash = {});

}  // namespace genret
