#include "llmscale/kv_decoder.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace llmscale {

KVCache::KVCache(const ModelConfig& cfg) : cfg_(cfg) {
  cfg.validate_for_model();
  layers_.resize(static_cast<std::size_t>(cfg.num_layers));
}

std::int64_t KVCache::scalar_count() const {
  std::int64_t n = 0;
  for (const auto& layer : layers_) {
    n += static_cast<std::int64_t>(layer.keys.size() + layer.values.size());
  }
  return n;
}

std::span<const double> KVCache::key_rows(std::int64_t layer) const {
  return layers_[static_cast<std::size_t>(layer)].keys;
}

std::span<const double> KVCache::value_rows(std::int64_t layer) const {
  return layers_[static_cast<std::size_t>(layer)].values;
}

void KVCache::append_row(std::int64_t layer, std::span<const double> key,
                         std::span<const double> value) {
  auto& kv = layers_[static_cast<std::size_t>(layer)];
  const auto d = static_cast<std::size_t>(cfg_.embed_dim);
  if (key.size() != d || value.size() != d) {
    throw ShapeError("kv cache row width " + std::to_string(key.size()) +
                     " does not match embedding dimension " + std::to_string(d));
  }
  if (static_cast<std::int64_t>(kv.keys.size() / d) >= cfg_.context_window) {
    throw WindowError("kv cache full: context window " +
                      std::to_string(cfg_.context_window));
  }
  if (kv.keys.size() + d > kv.keys.capacity()) {
    // amortized doubling, capped at the context window
    const std::size_t cap =
        std::min(std::max(kv.keys.capacity() * 2, d),
                 static_cast<std::size_t>(cfg_.context_window) * d);
    kv.keys.reserve(cap);
    kv.values.reserve(cap);
  }
  kv.keys.insert(kv.keys.end(), key.begin(), key.end());
  kv.values.insert(kv.values.end(), value.begin(), value.end());
}

void KVCache::advance(std::int64_t tokens) {
  count_ += tokens;
  if (count_ > cfg_.context_window) {
    throw WindowError("kv cache overran context window " +
                      std::to_string(cfg_.context_window));
  }
  const auto expected = static_cast<std::size_t>(count_ * cfg_.embed_dim);
  for (const auto& layer : layers_) {
    if (layer.keys.size() != expected || layer.values.size() != expected) {
      throw ShapeError("kv cache layers out of step");
    }
  }
}

PrefillResult prefill(const TokenSequence& prompt, const ParameterSet& params,
                      FlopLedger& ledger) {
  KVCache cache(params.cfg);
  Matrix logits = run_forward(prompt, params, ledger, &cache, nullptr);
  const auto last = logits.row(logits.rows() - 1);
  return {std::move(cache), std::vector<double>(last.begin(), last.end())};
}

namespace {

// t x head_dim copy of one head's slice from the cache's concatenated rows.
Matrix head_slice(std::span<const double> rows, std::size_t d, std::size_t head,
                  std::size_t dh) {
  const std::size_t t = rows.size() / d;
  Matrix out(t, dh);
  for (std::size_t i = 0; i < t; ++i) {
    const double* src = rows.data() + i * d + head * dh;
    std::copy(src, src + dh, out.row(i).begin());
  }
  return out;
}

}  // namespace

std::vector<double> decode_step(KVCache& cache, int token, const ParameterSet& params,
                                FlopLedger& ledger) {
  const auto& cfg = params.cfg;
  if (cache.token_count() >= cfg.context_window) {
    throw WindowError("kv cache full: context window " +
                      std::to_string(cfg.context_window));
  }
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const auto heads = static_cast<std::size_t>(cfg.num_heads);
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  if (token < 0 || token >= cfg.vocab_size) {
    throw VocabError("token id " + std::to_string(token) +
                     " outside vocabulary of size " + std::to_string(cfg.vocab_size));
  }
  Matrix x(1, d);
  {
    const auto erow = params.embedding.row(static_cast<std::size_t>(token));
    const auto pe = positional_encoding(cache.token_count(), cfg.embed_dim);
    const auto row = x.row(0);
    for (std::size_t j = 0; j < d; ++j) row[j] = erow[j] + pe[j];
  }

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const auto& layer = params.layers[l];
    Matrix xn = layer_norm_rows(x, layer.ln1_gain, layer.ln1_bias, ledger);

    std::vector<Matrix> q(heads);
    Matrix krow(1, d), vrow(1, d);
    for (std::size_t h = 0; h < heads; ++h) {
      q[h] = matmul(xn, layer.w_query[h], ledger, FlopCategory::qkv_projection);
      Matrix k = matmul(xn, layer.w_key[h], ledger, FlopCategory::qkv_projection);
      Matrix v = matmul(xn, layer.w_value[h], ledger, FlopCategory::qkv_projection);
      std::copy(k.row(0).begin(), k.row(0).end(), krow.row(0).begin() + h * dh);
      std::copy(v.row(0).begin(), v.row(0).end(), vrow.row(0).begin() + h * dh);
    }
    cache.append_row(static_cast<std::int64_t>(l), krow.row(0), vrow.row(0));

    Matrix concat(1, d);
    for (std::size_t h = 0; h < heads; ++h) {
      Matrix keys = head_slice(cache.key_rows(static_cast<std::int64_t>(l)), d, h, dh);
      Matrix values =
          head_slice(cache.value_rows(static_cast<std::int64_t>(l)), d, h, dh);
      Matrix scores = matmul_bt(q[h], keys, ledger, FlopCategory::attention_scores);
      for (double& s : scores.data()) s *= scale;
      Matrix probs = softmax_rows(scores);
      Matrix head_out = matmul(probs, values, ledger, FlopCategory::attention_values);
      std::copy(head_out.row(0).begin(), head_out.row(0).end(),
                concat.row(0).begin() + h * dh);
    }
    Matrix attn = matmul(concat, layer.w_out, ledger, FlopCategory::output_projection);
    x += attn;

    Matrix xn2 = layer_norm_rows(x, layer.ln2_gain, layer.ln2_bias, ledger);
    Matrix pre = matmul(xn2, layer.w_ffn_in, ledger, FlopCategory::ffn_expand);
    for (double& v : pre.data()) v = gelu(v);
    Matrix ffn = matmul(pre, layer.w_ffn_out, ledger, FlopCategory::ffn_contract);
    x += ffn;
  }
  cache.advance(1);

  Matrix logits = matmul(x, params.unembedding, ledger, FlopCategory::logit_projection);
  const auto row = logits.row(0);
  return {row.begin(), row.end()};
}

TokenSequence generate(const TokenSequence& prompt, std::int64_t steps,
                       double temperature, std::uint64_t seed,
                       const ParameterSet& params, FlopLedger& ledger) {
  if (prompt.empty()) throw WindowError("generate needs a non-empty prompt");
  if (static_cast<std::int64_t>(prompt.size()) + steps > params.cfg.context_window) {
    throw WindowError("prompt of " + std::to_string(prompt.size()) + " plus " +
                      std::to_string(steps) + " steps exceeds context window " +
                      std::to_string(params.cfg.context_window));
  }
  TokenSequence out = prompt;
  if (steps == 0) return out;

  auto [cache, logits] = prefill(prompt, params, ledger);
  std::mt19937_64 rng(seed);
  for (std::int64_t s = 0; s < steps; ++s) {
    const int token = sample_next(logits, temperature, rng);
    out.push_back(token);
    if (s + 1 < steps) logits = decode_step(cache, token, params, ledger);
  }
  return out;
}

}  // namespace llmscale
