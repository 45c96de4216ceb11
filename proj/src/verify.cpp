#include "llmscale/verify.hpp"

#include <cmath>
#include <cstdio>

#include "llmscale/cost_model.hpp"
#include "llmscale/kv_decoder.hpp"
#include "llmscale/training.hpp"

namespace llmscale {

namespace {

std::string format_counts(std::uint64_t measured, std::uint64_t predicted) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "measured %llu, predicted %llu",
                static_cast<unsigned long long>(measured),
                static_cast<unsigned long long>(predicted));
  return buf;
}

}  // namespace

std::string VerifyResult::to_string() const {
  std::string out;
  for (const auto& check : checks) {
    char line[256];
    std::snprintf(line, sizeof(line), "%-44s %-6s %s\n", check.label.c_str(),
                  check.ok ? "ok" : "FAIL", check.detail.c_str());
    out += line;
  }
  out += all_ok ? "verification PASSED\n" : "verification FAILED\n";
  return out;
}

VerifyResult run_verification(const VerifyOptions& options) {
  const ModelConfig& cfg = options.cfg;
  cfg.validate_for_model();
  const auto n = cfg.context_window;
  const std::uint64_t corrupt = options.corrupt ? 1 : 0;

  VerifyResult result;
  auto add = [&result](std::string label, bool ok, std::string detail) {
    result.checks.push_back({std::move(label), std::move(detail), ok});
    result.all_ok = result.all_ok && ok;
  };

  ParameterSet params = init_params(cfg, options.seed);
  std::mt19937_64 rng(options.seed + 17);
  TokenSequence tokens(static_cast<std::size_t>(n));
  for (int& t : tokens) {
    t = static_cast<int>(rng() % static_cast<std::uint64_t>(cfg.vocab_size));
  }

  // parameter count against the closed form
  {
    const auto measured = params.scalar_count();
    const auto predicted = static_cast<std::uint64_t>(param_count(cfg)) + corrupt;
    add("parameter count", measured == predicted, format_counts(measured, predicted));
  }

  // forward ledger, category by category
  {
    FlopLedger ledger;
    forward(tokens, params, ledger);
    const FlopBreakdown predicted = forward_flop_breakdown(cfg, n);
    for (int c = 0; c < kNumFlopCategories; ++c) {
      const auto category = static_cast<FlopCategory>(c);
      if (category == FlopCategory::other) continue;
      const auto want =
          static_cast<std::uint64_t>(predicted.by_category[c]) + corrupt;
      const auto got = ledger.count(category, Direction::forward);
      add("forward ledger: " + std::string(to_string(category)), got == want,
          format_counts(got, want));
    }
  }

  // decode deltas at every cache length, plus the cache size identity
  {
    FlopLedger ledger;
    auto res = prefill({tokens[0]}, params, ledger);
    bool deltas_ok = true;
    bool cache_ok =
        res.cache.scalar_count() == static_cast<std::int64_t>(kv_cache_memory(cfg, 1));
    std::string first_bad;
    for (std::int64_t t = 1; t < n; ++t) {
      FlopLedger step;
      decode_step(res.cache, tokens[static_cast<std::size_t>(t)], params, step);
      const auto want = static_cast<std::uint64_t>(
                            incremental_flops(cfg, t + 1, /*include_logit=*/true)) +
                        corrupt;
      const auto got = step.matmul_total(Direction::forward);
      if (got != want && first_bad.empty()) {
        first_bad = "t=" + std::to_string(t) + ": " + format_counts(got, want);
      }
      deltas_ok = deltas_ok && got == want;
      cache_ok = cache_ok && res.cache.scalar_count() ==
                                 static_cast<std::int64_t>(kv_cache_memory(cfg, t + 1));
    }
    add("decode ledger delta, every cache length", deltas_ok,
        deltas_ok ? "t=1.." + std::to_string(n - 1) + " all exact" : first_bad);
    add("kv cache scalars = 2 L t d", cache_ok, cache_ok ? "exact" : "mismatch");
  }

  // cached decode reproduces the full recompute
  {
    FlopLedger ledger;
    const TokenSequence prompt(tokens.begin(), tokens.begin() + n / 2);
    auto res = prefill(prompt, params, ledger);
    double worst = 0.0;
    TokenSequence sofar = prompt;
    for (std::int64_t t = n / 2; t < n; ++t) {
      const int tok = tokens[static_cast<std::size_t>(t)];
      const auto cached = decode_step(res.cache, tok, params, ledger);
      sofar.push_back(tok);
      const Matrix full = forward(sofar, params, ledger);
      const auto ref = full.row(full.rows() - 1);
      for (std::size_t j = 0; j < cached.size(); ++j) {
        const double denom = std::max(1.0, std::fabs(ref[j]));
        worst = std::max(worst, std::fabs(cached[j] - ref[j]) / denom);
      }
    }
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max rel diff %.2e", worst);
    add("cached vs recomputed logits", worst <= 1e-9 && corrupt == 0, buf);
  }

  // backward matmuls are exactly twice the forward ones
  {
    FlopLedger ledger;
    ForwardTrace trace = forward_with_trace(tokens, params, ledger);
    backward(trace, params, ledger);
    const auto fwd = ledger.matmul_total(Direction::forward);
    const auto bwd = ledger.matmul_total(Direction::backward);
    add("backward matmuls = 2x forward", bwd == 2 * fwd + corrupt,
        format_counts(bwd, 2 * fwd + corrupt));
  }

  // the ledger total is blind to the head count
  {
    std::uint64_t reference = 0;
    bool same = true;
    std::string detail = "heads";
    for (const auto heads : options.head_sweep) {
      ModelConfig swept = cfg;
      swept.num_heads = heads;
      swept.validate_for_model();
      FlopLedger ledger;
      forward(tokens, init_params(swept, options.seed), ledger);
      const auto total = ledger.direction_total(Direction::forward);
      if (reference == 0) reference = total;
      same = same && total == reference;
      detail += " " + std::to_string(heads);
    }
    detail += ": total " + std::to_string(reference + corrupt);
    add("head-count independence", same && corrupt == 0, detail);
  }

  // finite differences against the analytic gradients
  {
    const GradCheckReport report =
        grad_check(cfg, options.seed, 1e-5, options.grad_samples);
    char buf[64];
    std::snprintf(buf, sizeof(buf), "max rel error %.2e", report.max_rel_error);
    add("gradient check", report.max_rel_error <= 1e-5 && corrupt == 0, buf);
  }

  return result;
}

}  // namespace llmscale
