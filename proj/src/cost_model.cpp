#include "llmscale/cost_model.hpp"

#include <cmath>

namespace llmscale {

namespace {

struct Dims {
  double n, v, d, l, dff;
};

Dims dims(const ModelConfig& cfg) {
  cfg.validate_for_cost();
  return {static_cast<double>(cfg.context_window), static_cast<double>(cfg.vocab_size),
          static_cast<double>(cfg.embed_dim), static_cast<double>(cfg.num_layers),
          static_cast<double>(cfg.ffn_width())};
}

}  // namespace

double param_count(const ModelConfig& cfg) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  return l * (4 * d * d + 2 * d * dff + 4 * d) + 2 * v * d;
}

double forward_flops(const ModelConfig& cfg, std::int64_t m) {
  return forward_flop_breakdown(cfg, m).total();
}

double FlopBreakdown::total() const {
  double sum = 0;
  for (double v : by_category) sum += v;
  return sum;
}

FlopBreakdown forward_flop_breakdown(const ModelConfig& cfg, std::int64_t m) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  const double mm = static_cast<double>(m);
  FlopBreakdown b;
  auto set = [&b](FlopCategory c, double value) {
    b.by_category[static_cast<int>(c)] = value;
  };
  set(FlopCategory::qkv_projection, l * 3 * mm * d * d);
  set(FlopCategory::attention_scores, l * mm * mm * d);
  set(FlopCategory::attention_values, l * mm * mm * d);
  set(FlopCategory::output_projection, l * mm * d * d);
  set(FlopCategory::ffn_expand, l * mm * d * dff);
  set(FlopCategory::ffn_contract, l * mm * dff * d);
  set(FlopCategory::logit_projection, mm * d * v);
  set(FlopCategory::layer_norm, l * 2 * mm * d);
  return b;
}

double incremental_flops(const ModelConfig& cfg, std::int64_t context_len,
                         bool include_logit) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  const double t = static_cast<double>(context_len);
  double flops = l * (4 * d * d + 2 * d * dff + 2 * t * d);
  if (include_logit) flops += d * v;
  return flops;
}

FlopBreakdown incremental_flop_breakdown(const ModelConfig& cfg,
                                         std::int64_t context_len) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  const double t = static_cast<double>(context_len);
  FlopBreakdown b;
  auto set = [&b](FlopCategory c, double value) {
    b.by_category[static_cast<int>(c)] = value;
  };
  set(FlopCategory::qkv_projection, l * 3 * d * d);
  set(FlopCategory::attention_scores, l * t * d);
  set(FlopCategory::attention_values, l * t * d);
  set(FlopCategory::output_projection, l * d * d);
  set(FlopCategory::ffn_expand, l * d * dff);
  set(FlopCategory::ffn_contract, l * dff * d);
  set(FlopCategory::logit_projection, d * v);
  set(FlopCategory::layer_norm, l * 2 * d);
  return b;
}

double activations_memory(const ModelConfig& cfg) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  return n * (9 * d + dff) + n * v;
}

double kv_cache_memory(const ModelConfig& cfg, std::int64_t t) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  return 2 * l * static_cast<double>(t) * d;
}

double chinchilla_tokens(const ModelConfig& cfg, bool include_vocab) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  double weights = l * (4 * d * d + 2 * d * dff);
  if (include_vocab) weights += 2 * v * d;
  return 20 * weights;
}

double per_token_train_flops(const ModelConfig& cfg, bool include_vocab) {
  [[maybe_unused]] const auto [n, v, d, l, dff] = dims(cfg);
  double per_token = l * (4 * d * d + 2 * d * dff + 2 * n * d);
  if (include_vocab) per_token += v * d;
  return 3 * per_token;
}

double training_flops(const ModelConfig& cfg, bool include_vocab) {
  return chinchilla_tokens(cfg, include_vocab) *
         per_token_train_flops(cfg, include_vocab);
}

Economics economics(double flops, const HardwareProfile& hw) {
  const double gpu_years = flops / (hw.gpu_flops * hw.seconds_per_year);
  return {gpu_years, gpu_years * hw.cost_per_gpu_year};
}

double incremental_price_per_mtok(const ModelConfig& cfg, const HardwareProfile& hw,
                                  std::optional<std::int64_t> context_len) {
  const std::int64_t t = context_len.value_or(cfg.context_window);
  return incremental_flops(cfg, t) * 1e6 * hw.dollars_per_flop();
}

std::optional<Preset> parse_preset(std::string_view name) {
  if (name == "A" || name == "a") return Preset::A;
  if (name == "B" || name == "b") return Preset::B;
  if (name == "C" || name == "c") return Preset::C;
  if (name == "D-low" || name == "d-low" || name == "Dlow") return Preset::DLow;
  if (name == "D-high" || name == "d-high" || name == "Dhigh") return Preset::DHigh;
  return {};
}

std::string_view to_string(Preset preset) {
  switch (preset) {
    case Preset::A: return "A";
    case Preset::B: return "B";
    case Preset::C: return "C";
    case Preset::DLow: return "D-low";
    case Preset::DHigh: return "D-high";
  }
  return "unknown";
}

ModelConfig preset_config(Preset preset) {
  // Binary "32K"/"64K" vocabularies, decimal for the larger tiers. The
  // D-high head count does not divide its width; that only matters when the
  // reference model is instantiated, never for these estimates.
  switch (preset) {
    case Preset::A: return {2048, 32768, 4096, 32, 32, 16384};
    case Preset::B: return {4096, 65536, 6144, 48, 60, 24576};
    case Preset::C: return {8192, 80000, 12288, 96, 96, 49152};
    case Preset::DLow: return {100000, 100000, 16384, 128, 120, 65536};
    case Preset::DHigh: return {200000, 200000, 20480, 192, 160, 81920};
  }
  return {};
}

CostReport report_for_config(const ModelConfig& cfg, const HardwareProfile& hw,
                             bool training_with_vocab, std::string label) {
  CostReport r;
  r.label = std::move(label);
  r.cfg = cfg;
  r.params = param_count(cfg);
  r.activations_memory = activations_memory(cfg);
  r.kv_cache_memory = kv_cache_memory(cfg, cfg.context_window);
  r.forward_flops = forward_flops(cfg, cfg.context_window);
  r.incremental_flops_per_token = incremental_flops(cfg, cfg.context_window);
  r.chinchilla_tokens = chinchilla_tokens(cfg);
  r.training_flops = training_flops(cfg, training_with_vocab);
  const Economics e = economics(r.training_flops, hw);
  r.gpu_years = e.gpu_years;
  r.dollars = e.dollars;
  return r;
}

CostReport use_case_report(Preset preset, const HardwareProfile& hw,
                           bool training_with_vocab) {
  return report_for_config(preset_config(preset), hw, training_with_vocab,
                           std::string(to_string(preset)));
}

MoEScenario deepseek_scenario() {
  MoEScenario s;
  s.name = "deepseek-v3";
  s.active_training = {32768, 0, 7168, 128, 61, 0};
  s.active_inference = {128000, 0, 7168, 128, 61, 0};
  s.total_latent_params = 671e9;
  s.dataset_tokens = 14.8e12;
  return s;
}

MoEReport moe_scenario_report(const MoEScenario& scenario, const HardwareProfile& hw) {
  MoEReport r;
  r.name = scenario.name;
  r.active_inference_params = param_count(scenario.active_inference);
  r.chinchilla_tokens = 20 * scenario.total_latent_params;
  r.dataset_tokens = scenario.dataset_tokens;
  r.per_token_train_flops = per_token_train_flops(scenario.active_training);
  r.training_flops = r.per_token_train_flops * scenario.dataset_tokens;
  const Economics e = economics(r.training_flops, hw);
  r.gpu_years = e.gpu_years;
  r.dollars = e.dollars;
  r.incremental_flops_per_token = incremental_flops(scenario.active_inference,
                                                    scenario.active_inference.context_window);
  r.kv_cache_memory = kv_cache_memory(scenario.active_inference,
                                      scenario.active_inference.context_window);
  return r;
}

}  // namespace llmscale
