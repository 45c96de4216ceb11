#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llmscale/corpus.hpp"
#include "llmscale/model.hpp"

namespace llmscale {

// Mean cross-entropy over positions 0..m-2, each predicting the next token.
// The final position has no target and contributes nothing. m < 2 is an
// error. Uniform logits give exactly ln(vocab).
double loss_all_positions(const Matrix& logits, const TokenSequence& tokens);

// d(loss)/d(logits): softmax minus one-hot, scaled by 1/(m-1); the last row
// is zero. Not ledgered (the logit projection itself is).
Matrix loss_backward(const Matrix& logits, const TokenSequence& tokens);

// Manual backpropagation through the traced forward pass. Every forward
// matmul contributes exactly two backward matmuls of the same size (one per
// operand), so the backward matmul ledger is exactly twice the forward one.
GradientSet backward(const ForwardTrace& trace, const ParameterSet& params,
                     FlopLedger& ledger);

// params -= learning_rate * grads, over every tensor.
void sgd_step(ParameterSet& params, const GradientSet& grads, double learning_rate);

struct TrainingConfig {
  double learning_rate = 0.5;
  std::int64_t steps = 200;
  std::int64_t batch_size = 8;
  std::uint64_t seed = 1;
  std::string corpus_path;
};

struct TrainResult {
  std::vector<double> loss_history;  // pre-update loss at each step
  ParameterSet params;
  CharVocab vocab;
  FlopLedger ledger;
};

// Character-level demo: builds the vocabulary from the corpus (capped at
// cfg.vocab_size), then runs plain SGD over random contiguous windows of
// cfg.context_window tokens. Deterministic for a fixed config and seed.
TrainResult train_demo(const ModelConfig& cfg, const TrainingConfig& tcfg);

struct GradCheckRole {
  std::string name;
  int samples = 0;
  double max_rel_error = 0;
};

struct GradCheckReport {
  double max_rel_error = 0;
  std::vector<GradCheckRole> roles;
};

// Central-difference check of backward() on a seeded model and random token
// window, sampling at least min_samples scalars spread over every parameter
// role. Relative error uses max(|analytic|, |numeric|, 1e-4) as denominator.
GradCheckReport grad_check(const ModelConfig& cfg, std::uint64_t seed,
                           double epsilon, int min_samples = 200);

}  // namespace llmscale
