#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "llmscale/flop_ledger.hpp"
#include "llmscale/model.hpp"

namespace llmscale {

// Everything here is closed-form arithmetic on the config; the head count
// cancels out of every formula. Doubles are used throughout because training
// budgets overflow 64-bit integers; desk-scale values stay exactly integral.

struct HardwareProfile {
  double gpu_flops = 300e12;          // sustained flop/s per device
  double cost_per_gpu_year = 10000.0; // dollars
  double seconds_per_year = 3.156e7;

  double dollars_per_flop() const {
    return cost_per_gpu_year / (gpu_flops * seconds_per_year);
  }
};

// Weight scalars: L (4 d^2 + 2 d d_ff + 4 d) + 2 V d.
double param_count(const ModelConfig& cfg);

// Multiply-adds for one forward pass over m positions, norms included:
// L (4 m d^2 + 2 m d d_ff + 2 m^2 d + 2 m d) + m d V.
double forward_flops(const ModelConfig& cfg, std::int64_t m);

// Per-category split of forward_flops, indexed by FlopCategory.
struct FlopBreakdown {
  std::array<double, kNumFlopCategories> by_category{};

  double operator[](FlopCategory c) const {
    return by_category[static_cast<int>(c)];
  }
  double total() const;
};

FlopBreakdown forward_flop_breakdown(const ModelConfig& cfg, std::int64_t m);

// Matmul cost of appending one token against a context of length
// context_len: L (4 d^2 + 2 d d_ff + 2 context_len d), plus d V when the
// logit row is included. Norms are excluded here.
double incremental_flops(const ModelConfig& cfg, std::int64_t context_len,
                         bool include_logit = false);

// Per-category split of one decode step (logit row and norms included).
FlopBreakdown incremental_flop_breakdown(const ModelConfig& cfg,
                                         std::int64_t context_len);

// Scalars that must be live during one forward pass: n (9 d + d_ff) + n V.
double activations_memory(const ModelConfig& cfg);

// Cached K/V scalars after t tokens: 2 L t d.
double kv_cache_memory(const ModelConfig& cfg, std::int64_t t);

// Compute-optimal dataset size at 20 tokens per weight (norm scalars
// excluded): 20 (L (4 d^2 + 2 d d_ff) + 2 V d).
double chinchilla_tokens(const ModelConfig& cfg, bool include_vocab = true);

// Forward plus backward cost per trained token, norms excluded:
// 3 (L (4 d^2 + 2 d d_ff + 2 n d) + V d); the V term is optional.
double per_token_train_flops(const ModelConfig& cfg, bool include_vocab = true);

// chinchilla_tokens x per_token_train_flops. Without the vocab terms this is
// the closed form 240 L^2 d^3 (6 n + 36 d) at the default d_ff = 4 d.
double training_flops(const ModelConfig& cfg, bool include_vocab = false);

struct Economics {
  double gpu_years;
  double dollars;
};

Economics economics(double flops, const HardwareProfile& hw);

// Price of one million generated tokens at full context (or at an explicit
// context length), from incremental_flops and the dollars-per-flop rate.
double incremental_price_per_mtok(const ModelConfig& cfg, const HardwareProfile& hw,
                                  std::optional<std::int64_t> context_len = {});

struct CostReport {
  std::string label;
  ModelConfig cfg;
  double params = 0;
  double activations_memory = 0;
  double kv_cache_memory = 0;
  double forward_flops = 0;
  double incremental_flops_per_token = 0;
  double chinchilla_tokens = 0;
  double training_flops = 0;
  double gpu_years = 0;
  double dollars = 0;
};

enum class Preset { A, B, C, DLow, DHigh };

std::optional<Preset> parse_preset(std::string_view name);
std::string_view to_string(Preset preset);
ModelConfig preset_config(Preset preset);

CostReport report_for_config(const ModelConfig& cfg, const HardwareProfile& hw,
                             bool training_with_vocab = false,
                             std::string label = "custom");
CostReport use_case_report(Preset preset, const HardwareProfile& hw,
                           bool training_with_vocab = false);

// Mixture-of-experts deployment described by its dense active slice. Only the
// active parameters enter the flop formulas; the latent total sets the
// compute-optimal dataset.
struct MoEScenario {
  std::string name;
  ModelConfig active_training;   // training-time active config
  ModelConfig active_inference;  // inference-time active config
  double total_latent_params = 0;
  double dataset_tokens = 0;
};

MoEScenario deepseek_scenario();

struct MoEReport {
  std::string name;
  double active_inference_params = 0;
  double chinchilla_tokens = 0;   // 20 x latent total
  double dataset_tokens = 0;
  double per_token_train_flops = 0;
  double training_flops = 0;      // per-token cost x dataset
  double gpu_years = 0;
  double dollars = 0;
  double incremental_flops_per_token = 0;  // inference config, full context
  double kv_cache_memory = 0;              // inference config, full context
};

MoEReport moe_scenario_report(const MoEScenario& scenario, const HardwareProfile& hw);

}  // namespace llmscale
