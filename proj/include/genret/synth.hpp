#pragma once

#include <cstdint>
#include <vector>

#include "genret/corpus.hpp"

namespace genret {

struct SynthConfig {
  int n_records = 50;
  std::uint64_t seed = 0;
  int min_sentences = 4;
  int max_sentences = 6;
  // Share of records that also get an archive URL.
  double second_url_fraction = 0.2;

  void validate() const;
};

struct SynthCorpus {
  std::vector<PassageRecord> records;
  // One natural-language query per record, never used for training.
  std::vector<QueryRecord> queries;
};

/// Templated records over a fixed word pool. Titles are distinct; ids are
/// "doc00000"...; URLs are "https://example.org/doc/{title-slug}-{n}".
SynthCorpus synth_corpus(const SynthConfig& cfg);

/// Lowercase ASCII alphanumerics joined by single hyphens.
std::string slugify(std::string_view text);

}  // namespace genret
