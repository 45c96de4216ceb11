#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llmscale/model.hpp"

namespace llmscale {

// Desk-scale guard: configs whose full forward pass would exceed this many
// flops are refused rather than verified.
inline constexpr double kVerifyFlopGuard = 1e9;

struct VerifyOptions {
  ModelConfig cfg{8, 11, 8, 2, 2, 32};
  std::vector<std::int64_t> head_sweep{1, 2, 4};
  std::uint64_t seed = 0;
  int grad_samples = 60;
  // Test hook: bumps one predicted count so the failure path is reachable.
  bool corrupt = false;
};

struct VerifyCheck {
  std::string label;
  std::string detail;
  bool ok = false;
};

struct VerifyResult {
  std::vector<VerifyCheck> checks;
  bool all_ok = true;
  std::string to_string() const;
};

// Cross-validates the instrumented model against the closed forms: forward
// ledger per category, decode deltas at every cache length, cache size,
// backward/forward ratio, cached-vs-recomputed logits, head-count
// independence and a finite-difference gradient check.
VerifyResult run_verification(const VerifyOptions& options);

}  // namespace llmscale
