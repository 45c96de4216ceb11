#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace llmscale {

// One flop = one multiply-add. A matrix product (m x k) * (k x p) tallies
// exactly m*k*p; layer norm tallies d per row by convention. Additions,
// softmax exponentials and activation functions are not tallied.
enum class FlopCategory : int {
  qkv_projection = 0,
  attention_scores,
  attention_values,
  output_projection,
  ffn_expand,
  ffn_contract,
  logit_projection,
  layer_norm,
  other,
};

inline constexpr int kNumFlopCategories = 9;

std::string_view to_string(FlopCategory category);

enum class Direction : int { forward = 0, backward = 1 };

class FlopLedger {
 public:
  void add(FlopCategory category, Direction direction, std::uint64_t flops) {
    counts_[static_cast<int>(direction)][static_cast<int>(category)] += flops;
  }

  std::uint64_t count(FlopCategory category, Direction direction) const {
    return counts_[static_cast<int>(direction)][static_cast<int>(category)];
  }

  std::uint64_t category_total(FlopCategory category) const;
  std::uint64_t direction_total(Direction direction) const;
  std::uint64_t total() const;

  // Matmul tallies only, i.e. everything except the layer-norm convention.
  std::uint64_t matmul_total(Direction direction) const;

  void reset() { counts_ = {}; }

 private:
  std::array<std::array<std::uint64_t, kNumFlopCategories>, 2> counts_{};
};

struct LedgerReportRow {
  FlopCategory category;
  std::uint64_t forward;
  std::uint64_t backward;
};

struct LedgerReport {
  std::array<LedgerReportRow, kNumFlopCategories> rows;
  std::uint64_t forward_total;
  std::uint64_t backward_total;

  std::string to_string() const;
};

// Per-category table in fixed enum order plus per-direction totals.
LedgerReport ledger_report(const FlopLedger& ledger);

}  // namespace llmscale
