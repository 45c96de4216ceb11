#include "llmscale/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

namespace llmscale {

CharVocab build_char_vocab(std::string_view text, std::int64_t cap) {
  std::array<std::uint64_t, 256> freq{};
  for (unsigned char c : text) ++freq[c];

  std::vector<int> bytes;
  for (int b = 0; b < 256; ++b) {
    if (freq[b] > 0) bytes.push_back(b);
  }
  if (cap > 0 && static_cast<std::int64_t>(bytes.size()) > cap) {
    std::sort(bytes.begin(), bytes.end(), [&freq](int a, int b) {
      return freq[a] != freq[b] ? freq[a] > freq[b] : a < b;
    });
    bytes.resize(static_cast<std::size_t>(cap));
  }
  std::sort(bytes.begin(), bytes.end());

  CharVocab vocab;
  vocab.byte_to_id.fill(-1);
  for (int b : bytes) {
    vocab.byte_to_id[static_cast<std::size_t>(b)] = vocab.size();
    vocab.id_to_byte.push_back(static_cast<unsigned char>(b));
  }
  return vocab;
}

TokenSequence encode(const CharVocab& vocab, std::string_view text, bool strict) {
  TokenSequence out;
  out.reserve(text.size());
  for (unsigned char c : text) {
    const int id = vocab.byte_to_id[c];
    if (id < 0) {
      if (strict) {
        throw VocabError("byte value " + std::to_string(static_cast<int>(c)) +
                         " ('" + std::string(1, static_cast<char>(c)) +
                         "') not in vocabulary");
      }
      out.push_back(0);
    } else {
      out.push_back(id);
    }
  }
  return out;
}

std::string decode(const CharVocab& vocab, const TokenSequence& tokens) {
  std::string out;
  out.reserve(tokens.size());
  for (int id : tokens) {
    if (id < 0 || id >= vocab.size()) {
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(vocab.size()));
    }
    out.push_back(static_cast<char>(vocab.id_to_byte[static_cast<std::size_t>(id)]));
  }
  return out;
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

}  // namespace llmscale
