#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <vector>

#include "llmscale/matrix.hpp"

namespace llmscale {

class KVCache;

// Decoder-only transformer shape. ffn_dim == 0 means the 4x embed_dim default.
struct ModelConfig {
  std::int64_t context_window = 0;
  std::int64_t vocab_size = 0;
  std::int64_t embed_dim = 0;
  std::int64_t num_heads = 1;
  std::int64_t num_layers = 0;
  std::int64_t ffn_dim = 0;

  std::int64_t head_dim() const { return embed_dim / num_heads; }
  std::int64_t ffn_width() const { return ffn_dim > 0 ? ffn_dim : 4 * embed_dim; }

  // Positivity only; enough for the closed-form cost estimates, where the
  // head count cancels out of every formula.
  void validate_for_cost() const;

  // Additionally requires vocab_size >= 1 and embed_dim divisible by
  // num_heads, needed before the model can be instantiated.
  void validate_for_model() const;

  bool operator==(const ModelConfig&) const = default;
};

struct LayerParams {
  std::vector<Matrix> w_query;  // per head, embed_dim x head_dim
  std::vector<Matrix> w_key;
  std::vector<Matrix> w_value;
  Matrix w_out;      // embed_dim x embed_dim
  Matrix w_ffn_in;   // embed_dim x ffn_width
  Matrix w_ffn_out;  // ffn_width x embed_dim
  std::vector<double> ln1_gain, ln1_bias;
  std::vector<double> ln2_gain, ln2_bias;
};

struct ParameterSet {
  ModelConfig cfg;
  Matrix embedding;    // vocab_size x embed_dim
  std::vector<LayerParams> layers;
  Matrix unembedding;  // embed_dim x vocab_size

  std::uint64_t scalar_count() const;
  static ParameterSet zeros(const ModelConfig& cfg);
};

// Gradients share the parameter layout exactly.
using GradientSet = ParameterSet;

using TokenSequence = std::vector<int>;

enum class ParamRole {
  embedding,
  query,
  key,
  value,
  attn_out,
  ffn_in,
  ffn_out,
  norm_gain,
  norm_bias,
  unembedding,
};

std::string_view to_string(ParamRole role);

struct TensorRef {
  ParamRole role;
  int layer;  // -1 for embedding / unembedding
  std::span<double> values;
};

// Every parameter tensor in a fixed traversal order (embedding, layers in
// order, unembedding), so two congruent sets can be zipped index by index.
std::vector<TensorRef> tensor_refs(ParameterSet& params);

// Seeded, deterministic init. Weights are zero-mean gaussian at 1/sqrt(fan-in)
// scale; the projections that write into the residual stream (w_out,
// w_ffn_out) and the unembedding carry an extra damping factor so the initial
// logits stay near zero. Norm gains start at 1, biases at 0.
ParameterSet init_params(const ModelConfig& cfg, std::uint64_t seed);

std::vector<double> positional_encoding(std::int64_t position, std::int64_t dim);

// Embedding lookup plus sinusoidal position signal; costs no ledgered flops.
Matrix embed(const TokenSequence& tokens, const ParameterSet& params,
             FlopLedger& ledger);

// Multi-head self-attention over x (rows are positions). With causal=true,
// position i attends to positions <= i.
Matrix attention(const Matrix& x, const LayerParams& layer, FlopLedger& ledger,
                 bool causal);

// gelu(x * w_ffn_in) * w_ffn_out; no norm inside.
Matrix feed_forward(const Matrix& x, const LayerParams& layer, FlopLedger& ledger);

// Pre-norm residual block: x + attn(norm1(x)), then + ffn(norm2(.)).
Matrix transformer_layer(const Matrix& x, const LayerParams& layer,
                         FlopLedger& ledger);

// Full pass: embed -> layers -> logit projection. Returns m x vocab logits.
Matrix forward(const TokenSequence& tokens, const ParameterSet& params,
               FlopLedger& ledger);

// Everything the backward pass needs, captured during a forward pass.
struct LayerTrace {
  Matrix input;  // residual stream entering the layer
  RowNormStats norm1;
  Matrix norm1_out;
  std::vector<Matrix> q, k, v;  // per head, m x head_dim
  std::vector<Matrix> probs;    // per head, m x m attention weights
  Matrix heads_concat;          // m x embed_dim
  Matrix after_attention;       // residual after the attention add
  RowNormStats norm2;
  Matrix norm2_out;
  Matrix ffn_pre;  // m x ffn_width, before the activation
  Matrix ffn_act;  // gelu(ffn_pre)
};

struct ForwardTrace {
  TokenSequence tokens;
  Matrix embedded;
  std::vector<LayerTrace> layers;
  Matrix hidden;  // final residual stream
  Matrix logits;
};

ForwardTrace forward_with_trace(const TokenSequence& tokens,
                                const ParameterSet& params, FlopLedger& ledger);

// Shared forward pass; optionally fills a kv cache and/or a trace.
Matrix run_forward(const TokenSequence& tokens, const ParameterSet& params,
                   FlopLedger& ledger, KVCache* cache, ForwardTrace* trace);

// Samples a token id from softmax(logits / temperature); temperature == 0
// means argmax. Non-finite logits raise NumericError.
int sample_next(std::span<const double> logits, double temperature,
                std::mt19937_64& rng);
int sample_next(std::span<const double> logits, double temperature,
                std::uint64_t seed);

double gelu(double x);
double gelu_derivative(double x);

// Uniform double in [0, 1) from the top 53 bits; keeps sampling and init
// reproducible across standard libraries.
double uniform01(std::mt19937_64& rng);

}  // namespace llmscale
