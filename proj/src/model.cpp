#include "llmscale/model.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "llmscale/kv_decoder.hpp"

namespace llmscale {

namespace {

constexpr double kPi = 3.14159265358979323846;

double gaussian(std::mt19937_64& rng) {
  // Box-Muller without caching the second value, for a fixed draw order.
  const double u1 = uniform01(rng);
  const double u2 = uniform01(rng);
  return std::sqrt(-2.0 * std::log(1.0 - u1)) * std::cos(2.0 * kPi * u2);
}

void fill_gaussian(Matrix& m, double scale, std::mt19937_64& rng) {
  for (double& v : m.data()) v = scale * gaussian(rng);
}

}  // namespace

double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

void ModelConfig::validate_for_cost() const {
  if (context_window < 1) throw ConfigError("context window must be >= 1");
  if (embed_dim < 1) throw ConfigError("embedding dimension must be >= 1");
  if (num_heads < 1) throw ConfigError("head count must be >= 1");
  if (num_layers < 0) throw ConfigError("layer count must be >= 0");
  if (vocab_size < 0) throw ConfigError("vocabulary size must be >= 0");
  if (ffn_dim < 0) throw ConfigError("ffn dimension must be >= 0");
}

void ModelConfig::validate_for_model() const {
  validate_for_cost();
  if (vocab_size < 1) throw ConfigError("vocabulary size must be >= 1");
  if (embed_dim % num_heads != 0) {
    throw ConfigError("embedding dimension " + std::to_string(embed_dim) +
                      " not divisible by " + std::to_string(num_heads) + " heads");
  }
}

std::string_view to_string(ParamRole role) {
  switch (role) {
    case ParamRole::embedding: return "embedding";
    case ParamRole::query: return "w_query";
    case ParamRole::key: return "w_key";
    case ParamRole::value: return "w_value";
    case ParamRole::attn_out: return "w_out";
    case ParamRole::ffn_in: return "w_ffn_in";
    case ParamRole::ffn_out: return "w_ffn_out";
    case ParamRole::norm_gain: return "norm_gain";
    case ParamRole::norm_bias: return "norm_bias";
    case ParamRole::unembedding: return "unembedding";
  }
  return "unknown";
}

std::uint64_t ParameterSet::scalar_count() const {
  std::uint64_t n = embedding.rows() * embedding.cols();
  for (const auto& layer : layers) {
    for (const auto& w : layer.w_query) n += w.rows() * w.cols();
    for (const auto& w : layer.w_key) n += w.rows() * w.cols();
    for (const auto& w : layer.w_value) n += w.rows() * w.cols();
    n += layer.w_out.rows() * layer.w_out.cols();
    n += layer.w_ffn_in.rows() * layer.w_ffn_in.cols();
    n += layer.w_ffn_out.rows() * layer.w_ffn_out.cols();
    n += layer.ln1_gain.size() + layer.ln1_bias.size();
    n += layer.ln2_gain.size() + layer.ln2_bias.size();
  }
  n += unembedding.rows() * unembedding.cols();
  return n;
}

ParameterSet ParameterSet::zeros(const ModelConfig& cfg) {
  cfg.validate_for_model();
  const auto d = static_cast<std::size_t>(cfg.embed_dim);
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const auto dff = static_cast<std::size_t>(cfg.ffn_width());
  ParameterSet p;
  p.cfg = cfg;
  p.embedding = Matrix(static_cast<std::size_t>(cfg.vocab_size), d);
  p.layers.resize(static_cast<std::size_t>(cfg.num_layers));
  for (auto& layer : p.layers) {
    layer.w_query.assign(static_cast<std::size_t>(cfg.num_heads), Matrix(d, dh));
    layer.w_key = layer.w_query;
    layer.w_value = layer.w_query;
    layer.w_out = Matrix(d, d);
    layer.w_ffn_in = Matrix(d, dff);
    layer.w_ffn_out = Matrix(dff, d);
    layer.ln1_gain.assign(d, 0.0);
    layer.ln1_bias.assign(d, 0.0);
    layer.ln2_gain.assign(d, 0.0);
    layer.ln2_bias.assign(d, 0.0);
  }
  p.unembedding = Matrix(d, static_cast<std::size_t>(cfg.vocab_size));
  return p;
}

std::vector<TensorRef> tensor_refs(ParameterSet& params) {
  std::vector<TensorRef> refs;
  refs.push_back({ParamRole::embedding, -1, params.embedding.data()});
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto& layer = params.layers[l];
    const int li = static_cast<int>(l);
    for (auto& w : layer.w_query) refs.push_back({ParamRole::query, li, w.data()});
    for (auto& w : layer.w_key) refs.push_back({ParamRole::key, li, w.data()});
    for (auto& w : layer.w_value) refs.push_back({ParamRole::value, li, w.data()});
    refs.push_back({ParamRole::attn_out, li, layer.w_out.data()});
    refs.push_back({ParamRole::ffn_in, li, layer.w_ffn_in.data()});
    refs.push_back({ParamRole::ffn_out, li, layer.w_ffn_out.data()});
    refs.push_back({ParamRole::norm_gain, li, layer.ln1_gain});
    refs.push_back({ParamRole::norm_bias, li, layer.ln1_bias});
    refs.push_back({ParamRole::norm_gain, li, layer.ln2_gain});
    refs.push_back({ParamRole::norm_bias, li, layer.ln2_bias});
  }
  refs.push_back({ParamRole::unembedding, -1, params.unembedding.data()});
  return refs;
}

ParameterSet init_params(const ModelConfig& cfg, std::uint64_t seed) {
  ParameterSet p = ParameterSet::zeros(cfg);
  std::mt19937_64 rng(seed);
  const double d = static_cast<double>(cfg.embed_dim);
  const double dff = static_cast<double>(cfg.ffn_width());
  // Residual write-outs are damped by depth and the unembedding is halved so
  // the starting loss sits at ln(vocab) instead of drifting above it.
  const double residual_damp = 1.0 / (2.0 * std::max<std::int64_t>(cfg.num_layers, 1));
  fill_gaussian(p.embedding, 1.0 / std::sqrt(d), rng);
  for (auto& layer : p.layers) {
    for (auto& w : layer.w_query) fill_gaussian(w, 1.0 / std::sqrt(d), rng);
    for (auto& w : layer.w_key) fill_gaussian(w, 1.0 / std::sqrt(d), rng);
    for (auto& w : layer.w_value) fill_gaussian(w, 1.0 / std::sqrt(d), rng);
    fill_gaussian(layer.w_out, residual_damp / std::sqrt(d), rng);
    fill_gaussian(layer.w_ffn_in, 1.0 / std::sqrt(d), rng);
    fill_gaussian(layer.w_ffn_out, residual_damp / std::sqrt(dff), rng);
    std::fill(layer.ln1_gain.begin(), layer.ln1_gain.end(), 1.0);
    std::fill(layer.ln2_gain.begin(), layer.ln2_gain.end(), 1.0);
  }
  fill_gaussian(p.unembedding, 0.5 / std::sqrt(d), rng);
  return p;
}

std::vector<double> positional_encoding(std::int64_t position, std::int64_t dim) {
  std::vector<double> out(static_cast<std::size_t>(dim));
  for (std::int64_t i = 0; i < dim; i += 2) {
    const double freq = std::pow(10000.0, -static_cast<double>(i) / static_cast<double>(dim));
    const double angle = static_cast<double>(position) * freq;
    out[static_cast<std::size_t>(i)] = std::sin(angle);
    if (i + 1 < dim) out[static_cast<std::size_t>(i + 1)] = std::cos(angle);
  }
  return out;
}

Matrix embed(const TokenSequence& tokens, const ParameterSet& params,
             FlopLedger& ledger) {
  (void)ledger;  // lookups cost nothing by convention
  const auto& cfg = params.cfg;
  if (tokens.empty()) throw WindowError("cannot embed an empty sequence");
  Matrix out(tokens.size(), static_cast<std::size_t>(cfg.embed_dim));
  for (std::size_t k = 0; k < tokens.size(); ++k) {
    const int id = tokens[k];
    if (id < 0 || id >= cfg.vocab_size) {
      throw VocabError("token id " + std::to_string(id) +
                       " outside vocabulary of size " + std::to_string(cfg.vocab_size));
    }
    const auto erow = params.embedding.row(static_cast<std::size_t>(id));
    const auto pe = positional_encoding(static_cast<std::int64_t>(k), cfg.embed_dim);
    const auto orow = out.row(k);
    for (std::size_t j = 0; j < orow.size(); ++j) orow[j] = erow[j] + pe[j];
  }
  return out;
}

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

struct KVRows {
  Matrix keys;    // m x embed_dim, heads concatenated
  Matrix values;  // m x embed_dim
};

Matrix attention_impl(const Matrix& x, const LayerParams& layer, FlopLedger& ledger,
                      bool causal, LayerTrace* trace, KVRows* kv_rows) {
  const std::size_t m = x.rows();
  const std::size_t heads = layer.w_query.size();
  const std::size_t dh = layer.w_query.empty() ? 0 : layer.w_query[0].cols();
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  Matrix concat(m, heads * dh);
  if (kv_rows != nullptr) {
    kv_rows->keys = Matrix(m, heads * dh);
    kv_rows->values = Matrix(m, heads * dh);
  }
  if (trace != nullptr) {
    trace->q.resize(heads);
    trace->k.resize(heads);
    trace->v.resize(heads);
    trace->probs.resize(heads);
  }

  for (std::size_t h = 0; h < heads; ++h) {
    Matrix q = matmul(x, layer.w_query[h], ledger, FlopCategory::qkv_projection);
    Matrix k = matmul(x, layer.w_key[h], ledger, FlopCategory::qkv_projection);
    Matrix v = matmul(x, layer.w_value[h], ledger, FlopCategory::qkv_projection);

    Matrix scores = matmul_bt(q, k, ledger, FlopCategory::attention_scores);
    for (double& s : scores.data()) s *= scale;
    if (causal) {
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = i + 1; j < m; ++j) scores(i, j) = kNegInf;
      }
    }
    Matrix probs = softmax_rows(scores);
    Matrix head_out = matmul(probs, v, ledger, FlopCategory::attention_values);

    for (std::size_t i = 0; i < m; ++i) {
      const auto src = head_out.row(i);
      const auto dst = concat.row(i);
      std::copy(src.begin(), src.end(), dst.begin() + h * dh);
      if (kv_rows != nullptr) {
        const auto krow = k.row(i);
        const auto vrow = v.row(i);
        std::copy(krow.begin(), krow.end(), kv_rows->keys.row(i).begin() + h * dh);
        std::copy(vrow.begin(), vrow.end(), kv_rows->values.row(i).begin() + h * dh);
      }
    }
    if (trace != nullptr) {
      trace->q[h] = std::move(q);
      trace->k[h] = std::move(k);
      trace->v[h] = std::move(v);
      trace->probs[h] = std::move(probs);
    }
  }
  if (trace != nullptr) trace->heads_concat = concat;
  return matmul(concat, layer.w_out, ledger, FlopCategory::output_projection);
}

Matrix gelu_matrix(const Matrix& x) {
  Matrix out(x.rows(), x.cols());
  const auto src = x.data();
  const auto dst = out.data();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i] = gelu(src[i]);
  return out;
}

Matrix transformer_layer_impl(const Matrix& x, const LayerParams& layer,
                              FlopLedger& ledger, LayerTrace* trace,
                              KVRows* kv_rows) {
  RowNormStats stats1;
  Matrix norm1_out = layer_norm_rows(x, layer.ln1_gain, layer.ln1_bias, ledger,
                                     Direction::forward,
                                     trace != nullptr ? &stats1 : nullptr);
  Matrix attn = attention_impl(norm1_out, layer, ledger, /*causal=*/true, trace,
                               kv_rows);
  Matrix mid = x + attn;

  RowNormStats stats2;
  Matrix norm2_out = layer_norm_rows(mid, layer.ln2_gain, layer.ln2_bias, ledger,
                                     Direction::forward,
                                     trace != nullptr ? &stats2 : nullptr);
  Matrix ffn_pre = matmul(norm2_out, layer.w_ffn_in, ledger, FlopCategory::ffn_expand);
  Matrix ffn_act = gelu_matrix(ffn_pre);
  Matrix ffn_out = matmul(ffn_act, layer.w_ffn_out, ledger, FlopCategory::ffn_contract);
  Matrix out = mid + ffn_out;

  if (trace != nullptr) {
    trace->input = x;
    trace->norm1 = std::move(stats1);
    trace->norm1_out = std::move(norm1_out);
    trace->after_attention = std::move(mid);
    trace->norm2 = std::move(stats2);
    trace->norm2_out = std::move(norm2_out);
    trace->ffn_pre = std::move(ffn_pre);
    trace->ffn_act = std::move(ffn_act);
  }
  return out;
}

}  // namespace

Matrix attention(const Matrix& x, const LayerParams& layer, FlopLedger& ledger,
                 bool causal) {
  return attention_impl(x, layer, ledger, causal, nullptr, nullptr);
}

Matrix feed_forward(const Matrix& x, const LayerParams& layer, FlopLedger& ledger) {
  Matrix pre = matmul(x, layer.w_ffn_in, ledger, FlopCategory::ffn_expand);
  Matrix act = gelu_matrix(pre);
  return matmul(act, layer.w_ffn_out, ledger, FlopCategory::ffn_contract);
}

Matrix transformer_layer(const Matrix& x, const LayerParams& layer,
                         FlopLedger& ledger) {
  return transformer_layer_impl(x, layer, ledger, nullptr, nullptr);
}

Matrix run_forward(const TokenSequence& tokens, const ParameterSet& params,
                   FlopLedger& ledger, KVCache* cache, ForwardTrace* trace) {
  const auto& cfg = params.cfg;
  if (static_cast<std::int64_t>(tokens.size()) > cfg.context_window) {
    throw WindowError("sequence length " + std::to_string(tokens.size()) +
                      " exceeds context window " + std::to_string(cfg.context_window));
  }
  Matrix x = embed(tokens, params, ledger);
  if (trace != nullptr) {
    trace->tokens = tokens;
    trace->embedded = x;
    trace->layers.resize(params.layers.size());
  }
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    KVRows kv_rows;
    x = transformer_layer_impl(x, params.layers[l], ledger,
                               trace != nullptr ? &trace->layers[l] : nullptr,
                               cache != nullptr ? &kv_rows : nullptr);
    if (cache != nullptr) {
      for (std::size_t t = 0; t < tokens.size(); ++t) {
        cache->append_row(static_cast<std::int64_t>(l), kv_rows.keys.row(t),
                          kv_rows.values.row(t));
      }
    }
  }
  if (cache != nullptr) cache->advance(static_cast<std::int64_t>(tokens.size()));
  Matrix logits = matmul(x, params.unembedding, ledger, FlopCategory::logit_projection);
  if (trace != nullptr) {
    trace->hidden = std::move(x);
    trace->logits = logits;
  }
  return logits;
}

Matrix forward(const TokenSequence& tokens, const ParameterSet& params,
               FlopLedger& ledger) {
  return run_forward(tokens, params, ledger, nullptr, nullptr);
}

ForwardTrace forward_with_trace(const TokenSequence& tokens,
                                const ParameterSet& params, FlopLedger& ledger) {
  ForwardTrace trace;
  run_forward(tokens, params, ledger, nullptr, &trace);
  return trace;
}

int sample_next(std::span<const double> logits, double temperature,
                std::mt19937_64& rng) {
  if (logits.empty()) throw ShapeError("sample_next: empty logits row");
  for (double v : logits) {
    if (!std::isfinite(v)) throw NumericError("sample_next: non-finite logit");
  }
  if (temperature < 0.0) throw NumericError("sample_next: negative temperature");
  if (temperature == 0.0) {
    return static_cast<int>(std::max_element(logits.begin(), logits.end()) -
                            logits.begin());
  }
  double max = logits[0] / temperature;
  std::vector<double> p(logits.size());
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = logits[i] / temperature;
    max = std::max(max, p[i]);
  }
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - max);
    sum += v;
  }
  const double u = uniform01(rng) * sum;
  double acc = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    acc += p[i];
    if (u < acc) return static_cast<int>(i);
  }
  return static_cast<int>(p.size()) - 1;
}

int sample_next(std::span<const double> logits, double temperature,
                std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  return sample_next(logits, temperature, rng);
}

double gelu(double x) {
  return 0.5 * x * (1.0 + std::erf(x / std::sqrt(2.0)));
}

double gelu_derivative(double x) {
  const double cdf = 0.5 * (1.0 + std::erf(x / std::sqrt(2.0)));
  const double pdf = std::exp(-0.5 * x * x) / std::sqrt(2.0 * kPi);
  return cdf + x * pdf;
}

}  // namespace llmscale
