#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "llmscale/model.hpp"

namespace llmscale {

// Per-layer key/value rows for tokens already processed. Rows hold the
// post-projection head outputs concatenated to embed_dim width, so the cache
// holds exactly 2 * layers * tokens * embed_dim scalars. Buffers grow by
// amortized doubling up to the context window.
class KVCache {
 public:
  explicit KVCache(const ModelConfig& cfg);

  const ModelConfig& config() const { return cfg_; }
  std::int64_t token_count() const { return count_; }
  std::int64_t scalar_count() const;

  // Row-major t x embed_dim views over the cached projections.
  std::span<const double> key_rows(std::int64_t layer) const;
  std::span<const double> value_rows(std::int64_t layer) const;

  // Appends one token's rows to one layer; advance() commits the token once
  // every layer has received it and checks the layers stayed in step.
  void append_row(std::int64_t layer, std::span<const double> key,
                  std::span<const double> value);
  void advance(std::int64_t tokens);

 private:
  struct LayerKV {
    std::vector<double> keys;
    std::vector<double> values;
  };

  ModelConfig cfg_;
  std::int64_t count_ = 0;
  std::vector<LayerKV> layers_;
};

struct PrefillResult {
  KVCache cache;
  std::vector<double> last_logits;
};

// Runs the full forward pass over the prompt while recording K/V rows. The
// returned logits row is the same arithmetic as forward()'s last row.
PrefillResult prefill(const TokenSequence& prompt, const ParameterSet& params,
                      FlopLedger& ledger);

// Appends one token and returns its logits row using cached K/V only. Raises
// WindowError once the cache holds context_window tokens.
std::vector<double> decode_step(KVCache& cache, int token, const ParameterSet& params,
                                FlopLedger& ledger);

// prefill + steps sampled continuation tokens; deterministic per seed.
// Returns prompt followed by the sampled tokens.
TokenSequence generate(const TokenSequence& prompt, std::int64_t steps,
                       double temperature, std::uint64_t seed,
                       const ParameterSet& params, FlopLedger& ledger);

}  // namespace llmscale
