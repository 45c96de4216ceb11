#pragma once

#include <cstdint>
#include <string>

#include "llmscale/corpus.hpp"
#include "llmscale/model.hpp"

namespace llmscale {

struct Checkpoint {
  ParameterSet params;
  CharVocab vocab;
  std::uint64_t seed = 0;
};

// Flat little-endian binary dump: magic, format version, config, seed, the
// vocabulary bytes, then every parameter scalar in tensor_refs order.
// Host-endianness only; cross-machine portability is a non-goal.
void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const CharVocab& vocab, std::uint64_t seed);

Checkpoint load_checkpoint(const std::string& path);

}  // namespace llmscale
