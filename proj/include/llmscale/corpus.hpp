#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

#include "llmscale/model.hpp"

namespace llmscale {

// Byte-level character vocabulary. Ids are assigned by ascending byte value
// over the kept set; when a cap drops rare bytes they encode as id 0.
struct CharVocab {
  std::vector<unsigned char> id_to_byte;
  std::array<int, 256> byte_to_id{};  // -1 where the byte is not in the vocab

  int size() const { return static_cast<int>(id_to_byte.size()); }
};

// Keeps at most `cap` distinct bytes, preferring the most frequent (ties go
// to the lower byte value). cap <= 0 means keep everything.
CharVocab build_char_vocab(std::string_view text, std::int64_t cap);

// strict=true raises VocabError on a byte outside the vocabulary; otherwise
// unknown bytes map to id 0.
TokenSequence encode(const CharVocab& vocab, std::string_view text,
                     bool strict = false);

std::string decode(const CharVocab& vocab, const TokenSequence& tokens);

std::string read_text_file(const std::string& path);

}  // namespace llmscale
