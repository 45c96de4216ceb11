#include "llmscale/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace llmscale {

namespace {

double log_sum_exp(std::span<const double> row) {
  double max = -std::numeric_limits<double>::infinity();
  for (double v : row) max = std::max(max, v);
  double sum = 0.0;
  for (double v : row) sum += std::exp(v - max);
  return max + std::log(sum);
}

}  // namespace

double loss_all_positions(const Matrix& logits, const TokenSequence& tokens) {
  const std::size_t m = tokens.size();
  if (m < 2) throw std::invalid_argument("loss needs at least 2 tokens");
  if (logits.rows() != m) {
    throw ShapeError("loss: " + std::to_string(logits.rows()) + " logit rows for " +
                     std::to_string(m) + " tokens");
  }
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const int target = tokens[k + 1];
    if (target < 0 || static_cast<std::size_t>(target) >= logits.cols()) {
      throw VocabError("target id " + std::to_string(target) +
                       " outside vocabulary of size " + std::to_string(logits.cols()));
    }
    sum += log_sum_exp(logits.row(k)) - logits(k, static_cast<std::size_t>(target));
  }
  return sum / static_cast<double>(m - 1);
}

Matrix loss_backward(const Matrix& logits, const TokenSequence& tokens) {
  const std::size_t m = tokens.size();
  if (m < 2) throw std::invalid_argument("loss needs at least 2 tokens");
  Matrix dlogits(logits.rows(), logits.cols());
  const double inv = 1.0 / static_cast<double>(m - 1);
  for (std::size_t k = 0; k + 1 < m; ++k) {
    const auto row = logits.row(k);
    const auto drow = dlogits.row(k);
    double max = -std::numeric_limits<double>::infinity();
    for (double v : row) max = std::max(max, v);
    double sum = 0.0;
    for (std::size_t j = 0; j < row.size(); ++j) {
      drow[j] = std::exp(row[j] - max);
      sum += drow[j];
    }
    for (std::size_t j = 0; j < row.size(); ++j) drow[j] *= inv / sum;
    drow[static_cast<std::size_t>(tokens[k + 1])] -= inv;
  }
  return dlogits;
}

namespace {

// dx for y = gain * xhat + bias given dy, accumulating the gain/bias grads.
// Tallies 2 d per row backward, mirroring the d-per-row forward convention.
Matrix layer_norm_backward(const Matrix& dy, const RowNormStats& stats,
                           std::span<const double> gain, std::vector<double>& dgain,
                           std::vector<double>& dbias, FlopLedger& ledger) {
  const std::size_t m = dy.rows();
  const std::size_t d = dy.cols();
  Matrix dx(m, d);
  std::vector<double> dxhat(d);
  for (std::size_t i = 0; i < m; ++i) {
    const auto dyrow = dy.row(i);
    const auto xhat = stats.xhat.row(i);
    double mean_dxhat = 0.0;
    double mean_dxhat_xhat = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      dgain[j] += dyrow[j] * xhat[j];
      dbias[j] += dyrow[j];
      dxhat[j] = dyrow[j] * gain[j];
      mean_dxhat += dxhat[j];
      mean_dxhat_xhat += dxhat[j] * xhat[j];
    }
    mean_dxhat /= static_cast<double>(d);
    mean_dxhat_xhat /= static_cast<double>(d);
    const double rstd = stats.rstd[i];
    const auto dxrow = dx.row(i);
    for (std::size_t j = 0; j < d; ++j) {
      dxrow[j] = rstd * (dxhat[j] - mean_dxhat - xhat[j] * mean_dxhat_xhat);
    }
  }
  ledger.add(FlopCategory::layer_norm, Direction::backward,
             2 * static_cast<std::uint64_t>(m) * d);
  return dx;
}

// dS from dP for P = softmax(S) applied row-wise. Masked positions carry
// P == 0 and so stay zero.
Matrix softmax_backward_rows(const Matrix& probs, const Matrix& dprobs) {
  Matrix ds(probs.rows(), probs.cols());
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    const auto p = probs.row(i);
    const auto dp = dprobs.row(i);
    double dot = 0.0;
    for (std::size_t j = 0; j < p.size(); ++j) dot += p[j] * dp[j];
    const auto out = ds.row(i);
    for (std::size_t j = 0; j < p.size(); ++j) out[j] = p[j] * (dp[j] - dot);
  }
  return ds;
}

Matrix column_slice(const Matrix& x, std::size_t first, std::size_t width) {
  Matrix out(x.rows(), width);
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto src = x.row(i);
    std::copy(src.begin() + first, src.begin() + first + width, out.row(i).begin());
  }
  return out;
}

}  // namespace

GradientSet backward(const ForwardTrace& trace, const ParameterSet& params,
                     FlopLedger& ledger) {
  const auto& cfg = params.cfg;
  GradientSet grads = ParameterSet::zeros(cfg);
  const std::size_t m = trace.tokens.size();
  const auto dh = static_cast<std::size_t>(cfg.head_dim());
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  const auto bw = Direction::backward;

  Matrix dlogits = loss_backward(trace.logits, trace.tokens);
  grads.unembedding = matmul_at(trace.hidden, dlogits, ledger,
                                FlopCategory::logit_projection, bw);
  Matrix dx = matmul_bt(dlogits, params.unembedding, ledger,
                        FlopCategory::logit_projection, bw);

  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const auto& layer = params.layers[l];
    const auto& lt = trace.layers[l];
    auto& glayer = grads.layers[l];

    // ffn block: out = mid + gelu(norm2(mid) W1) W2
    Matrix dffn_w2_in = matmul_bt(dx, layer.w_ffn_out, ledger,
                                  FlopCategory::ffn_contract, bw);
    glayer.w_ffn_out = matmul_at(lt.ffn_act, dx, ledger, FlopCategory::ffn_contract, bw);
    {
      const auto pre = lt.ffn_pre.data();
      const auto dg = dffn_w2_in.data();
      for (std::size_t i = 0; i < dg.size(); ++i) dg[i] *= gelu_derivative(pre[i]);
    }
    glayer.w_ffn_in = matmul_at(lt.norm2_out, dffn_w2_in, ledger,
                                FlopCategory::ffn_expand, bw);
    Matrix dnorm2_out = matmul_bt(dffn_w2_in, layer.w_ffn_in, ledger,
                                  FlopCategory::ffn_expand, bw);
    Matrix dmid = layer_norm_backward(dnorm2_out, lt.norm2, layer.ln2_gain,
                                      glayer.ln2_gain, glayer.ln2_bias, ledger);
    dmid += dx;  // residual skip around the ffn

    // attention block: mid = input + attn(norm1(input))
    Matrix dconcat = matmul_bt(dmid, layer.w_out, ledger,
                               FlopCategory::output_projection, bw);
    glayer.w_out = matmul_at(lt.heads_concat, dmid, ledger,
                             FlopCategory::output_projection, bw);

    Matrix dnorm1_out(m, static_cast<std::size_t>(cfg.embed_dim));
    for (std::size_t h = 0; h < static_cast<std::size_t>(cfg.num_heads); ++h) {
      Matrix dhead = column_slice(dconcat, h * dh, dh);
      Matrix dprobs = matmul_bt(dhead, lt.v[h], ledger,
                                FlopCategory::attention_values, bw);
      Matrix dv = matmul_at(lt.probs[h], dhead, ledger,
                            FlopCategory::attention_values, bw);
      Matrix dscores = softmax_backward_rows(lt.probs[h], dprobs);
      for (double& v : dscores.data()) v *= scale;
      Matrix dq = matmul(dscores, lt.k[h], ledger, FlopCategory::attention_scores, bw);
      Matrix dk = matmul_at(dscores, lt.q[h], ledger, FlopCategory::attention_scores, bw);

      dnorm1_out += matmul_bt(dq, layer.w_query[h], ledger,
                              FlopCategory::qkv_projection, bw);
      dnorm1_out += matmul_bt(dk, layer.w_key[h], ledger,
                              FlopCategory::qkv_projection, bw);
      dnorm1_out += matmul_bt(dv, layer.w_value[h], ledger,
                              FlopCategory::qkv_projection, bw);
      glayer.w_query[h] = matmul_at(lt.norm1_out, dq, ledger,
                                    FlopCategory::qkv_projection, bw);
      glayer.w_key[h] = matmul_at(lt.norm1_out, dk, ledger,
                                  FlopCategory::qkv_projection, bw);
      glayer.w_value[h] = matmul_at(lt.norm1_out, dv, ledger,
                                    FlopCategory::qkv_projection, bw);
    }
    Matrix dinput = layer_norm_backward(dnorm1_out, lt.norm1, layer.ln1_gain,
                                        glayer.ln1_gain, glayer.ln1_bias, ledger);
    dinput += dmid;  // residual skip around attention
    dx = std::move(dinput);
  }

  // embedding rows accumulate by lookup; the position signal is constant
  for (std::size_t k = 0; k < m; ++k) {
    const auto src = dx.row(k);
    const auto dst = grads.embedding.row(static_cast<std::size_t>(trace.tokens[k]));
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] += src[j];
  }
  return grads;
}

void sgd_step(ParameterSet& params, const GradientSet& grads, double learning_rate) {
  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(const_cast<GradientSet&>(grads));
  if (prefs.size() != grefs.size()) throw ShapeError("sgd: parameter layout mismatch");
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    auto p = prefs[i].values;
    const auto g = grefs[i].values;
    if (p.size() != g.size()) throw ShapeError("sgd: tensor size mismatch");
    for (std::size_t j = 0; j < p.size(); ++j) p[j] -= learning_rate * g[j];
  }
}

namespace {

void accumulate(GradientSet& into, const GradientSet& from, double weight) {
  auto dst = tensor_refs(into);
  auto src = tensor_refs(const_cast<GradientSet&>(from));
  for (std::size_t i = 0; i < dst.size(); ++i) {
    for (std::size_t j = 0; j < dst[i].values.size(); ++j) {
      dst[i].values[j] += weight * src[i].values[j];
    }
  }
}

}  // namespace

TrainResult train_demo(const ModelConfig& cfg_in, const TrainingConfig& tcfg) {
  const std::string text = read_text_file(tcfg.corpus_path);
  if (text.size() < 2) throw IoError("corpus too small: " + tcfg.corpus_path);
  if (cfg_in.context_window < 2) throw ConfigError("training window must be >= 2");

  CharVocab vocab = build_char_vocab(text, cfg_in.vocab_size);
  ModelConfig cfg = cfg_in;
  cfg.vocab_size = vocab.size();
  const TokenSequence data = encode(vocab, text);

  TrainResult result;
  result.vocab = std::move(vocab);
  result.params = init_params(cfg, tcfg.seed);

  std::mt19937_64 rng(tcfg.seed);
  const auto window = static_cast<std::size_t>(cfg.context_window);
  const std::size_t span = data.size() > window ? data.size() - window : data.size();

  for (std::int64_t step = 0; step < tcfg.steps; ++step) {
    GradientSet batch_grads = ParameterSet::zeros(cfg);
    double batch_loss = 0.0;
    for (std::int64_t b = 0; b < tcfg.batch_size; ++b) {
      const auto start = static_cast<std::size_t>(rng() % span);
      TokenSequence tokens(window);
      for (std::size_t i = 0; i < window; ++i) {
        tokens[i] = data[(start + i) % data.size()];
      }
      ForwardTrace trace = forward_with_trace(tokens, result.params, result.ledger);
      batch_loss += loss_all_positions(trace.logits, tokens);
      GradientSet g = backward(trace, result.params, result.ledger);
      accumulate(batch_grads, g, 1.0 / static_cast<double>(tcfg.batch_size));
    }
    result.loss_history.push_back(batch_loss / static_cast<double>(tcfg.batch_size));
    sgd_step(result.params, batch_grads, tcfg.learning_rate);
  }
  return result;
}

GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed,
                           double epsilon, int min_samples) {
  ParameterSet params = init_params(cfg, seed);
  std::mt19937_64 rng(seed + 1);
  TokenSequence tokens(static_cast<std::size_t>(cfg.context_window));
  for (int& t : tokens) t = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.vocab_size));

  FlopLedger scratch;
  ForwardTrace trace = forward_with_trace(tokens, params, scratch);
  GradientSet analytic = backward(trace, params, scratch);

  auto eval_loss = [&]() {
    FlopLedger l;
    return loss_all_positions(forward(tokens, params, l), tokens);
  };

  auto prefs = tensor_refs(params);
  auto grefs = tensor_refs(analytic);

  // roles merged for reporting: every norm tensor counts as "norms"
  auto role_name = [](ParamRole role) {
    if (role == ParamRole::norm_gain || role == ParamRole::norm_bias) {
      return std::string("norms");
    }
    return std::string(to_string(role));
  };

  std::vector<std::string> role_order;
  std::vector<std::vector<std::size_t>> role_tensors;  // indices into prefs
  for (std::size_t i = 0; i < prefs.size(); ++i) {
    const std::string name = role_name(prefs[i].role);
    auto it = std::find(role_order.begin(), role_order.end(), name);
    if (it == role_order.end()) {
      role_order.push_back(name);
      role_tensors.push_back({i});
    } else {
      role_tensors[static_cast<std::size_t>(it - role_order.begin())].push_back(i);
    }
  }

  const int per_role = std::max(
      1, static_cast<int>((min_samples + static_cast<int>(role_order.size()) - 1) /
                          static_cast<int>(role_order.size())));

  GradCheckReport report;
  for (std::size_t r = 0; r < role_order.size(); ++r) {
    GradCheckRole role{role_order[r], 0, 0.0};
    for (int s = 0; s < per_role; ++s) {
      const auto ti = role_tensors[r][rng() % role_tensors[r].size()];
      auto pspan = prefs[ti].values;
      const auto gspan = grefs[ti].values;
      const auto idx = static_cast<std::size_t>(rng() % pspan.size());

      const double original = pspan[idx];
      pspan[idx] = original + epsilon;
      const double loss_plus = eval_loss();
      pspan[idx] = original - epsilon;
      const double loss_minus = eval_loss();
      pspan[idx] = original;

      const double numeric = (loss_plus - loss_minus) / (2.0 * epsilon);
      const double exact = gspan[idx];
      const double denom = std::max({std::fabs(exact), std::fabs(numeric), 1e-4});
      const double rel = std::fabs(exact - numeric) / denom;
      role.max_rel_error = std::max(role.max_rel_error, rel);
      ++role.samples;
    }
    report.max_rel_error = std::max(report.max_rel_error, role.max_rel_error);
    report.roles.push_back(std::move(role));
  }
  return report;
}

}  // namespace llmscale
