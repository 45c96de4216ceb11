#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "llmscale/config_file.hpp"
#include "llmscale/cost_model.hpp"
#include "llmscale/errors.hpp"

using namespace llmscale;

namespace {

bool within(double got, double want, double rel) {
  return std::fabs(got - want) <= rel * std::fabs(want);
}

// Published figures for the four use cases (K/M/B/T = 1e3/1e6/1e9/1e12).
struct PublishedRow {
  double a, b, c, d_lo, d_hi;
};
const PublishedRow kParams{6.7e9, 28e9, 175e9, 400e9, 800e9};
const PublishedRow kActivations{180e6, 600e6, 1.9e9, 30e9, 90e9};
const PublishedRow kCache{0.5e9, 3e9, 20e9, 0.4e12, 1.3e12};
const PublishedRow kForward{15e12, 125e12, 1.6e15, 80e15, 400e15};
const PublishedRow kIncremental{7e9, 30e9, 200e9, 1e12, 2e12};
const PublishedRow kTrainingTokens{130e9, 540e9, 3.5e12, 8e12, 15e12};
const PublishedRow kTrainingFlops{2.7e21, 50e21, 2e24, 20e24, 100e24};
const PublishedRow kGpuYears{0.27, 5, 200, 2000, 10000};
const PublishedRow kDollars{2.7e3, 50e3, 2e6, 20e6, 100e6};

CostReport report(Preset p) { return use_case_report(p, HardwareProfile{}); }

}  // namespace

TEST_CASE("preset parsing accepts the documented spellings") {
  CHECK(parse_preset("A") == Preset::A);
  CHECK(parse_preset("a") == Preset::A);
  CHECK(parse_preset("b") == Preset::B);
  CHECK(parse_preset("C") == Preset::C);
  CHECK(parse_preset("D-low") == Preset::DLow);
  CHECK(parse_preset("d-low") == Preset::DLow);
  CHECK(parse_preset("Dlow") == Preset::DLow);
  CHECK(parse_preset("D-high") == Preset::DHigh);
  CHECK(parse_preset("Dhigh") == Preset::DHigh);
  CHECK(!parse_preset("Z").has_value());
  CHECK(!parse_preset("").has_value());
  CHECK(to_string(Preset::DLow) == "D-low");
}

TEST_CASE("preset configs carry the use-case table dimensions") {
  ModelConfig a = preset_config(Preset::A);
  CHECK(a.context_window == 2048);
  CHECK(a.vocab_size == 32768);
  CHECK(a.embed_dim == 4096);
  CHECK(a.num_heads == 32);
  CHECK(a.num_layers == 32);
  CHECK(a.ffn_width() == 16384);

  ModelConfig b = preset_config(Preset::B);
  CHECK(b.context_window == 4096);
  CHECK(b.vocab_size == 65536);
  CHECK(b.embed_dim == 6144);
  CHECK(b.num_heads == 48);
  CHECK(b.num_layers == 60);

  ModelConfig c = preset_config(Preset::C);
  CHECK(c.context_window == 8192);
  CHECK(c.vocab_size == 80000);
  CHECK(c.embed_dim == 12288);
  CHECK(c.num_heads == 96);
  CHECK(c.num_layers == 96);

  ModelConfig dl = preset_config(Preset::DLow);
  CHECK(dl.context_window == 100000);
  CHECK(dl.vocab_size == 100000);
  CHECK(dl.embed_dim == 16384);
  CHECK(dl.num_heads == 128);
  CHECK(dl.num_layers == 120);

  ModelConfig dh = preset_config(Preset::DHigh);
  CHECK(dh.context_window == 200000);
  CHECK(dh.vocab_size == 200000);
  CHECK(dh.embed_dim == 20480);
  CHECK(dh.num_heads == 192);
  CHECK(dh.num_layers == 160);
}

TEST_CASE("closed forms land on exact hand-derived integers") {
  ModelConfig a = preset_config(Preset::A);
  CHECK(param_count(a) == 6711410688.0);
  CHECK(forward_flops(a, a.context_window) == 14569065938944.0);
  CHECK(activations_memory(a) == 176160768.0);
  CHECK(kv_cache_memory(a, a.context_window) == 536870912.0);
  CHECK(incremental_flops(a, a.context_window) == 6979321856.0);
  CHECK(chinchilla_tokens(a) == 134217728000.0);

  ModelConfig b = preset_config(Preset::B);
  CHECK(param_count(b) == 27985870848.0);
  CHECK(incremental_flops(b, b.context_window) == 30198988800.0);

  ModelConfig c = preset_config(Preset::C);
  CHECK(param_count(c) == 175916974080.0);
  CHECK(forward_flops(c, c.context_window) == 1591369135030272.0);
  CHECK(incremental_flops(c, c.context_window) == 193273528320.0);
}

TEST_CASE("use cases A, B and C reproduce every published quantity within 10%") {
  CostReport ra = report(Preset::A), rb = report(Preset::B), rc = report(Preset::C);
  auto check_row = [&](const PublishedRow& row, double va, double vb, double vc) {
    CHECK(within(va, row.a, 0.10));
    CHECK(within(vb, row.b, 0.10));
    CHECK(within(vc, row.c, 0.10));
  };
  check_row(kParams, ra.params, rb.params, rc.params);
  check_row(kActivations, ra.activations_memory, rb.activations_memory,
            rc.activations_memory);
  check_row(kCache, ra.kv_cache_memory, rb.kv_cache_memory, rc.kv_cache_memory);
  check_row(kForward, ra.forward_flops, rb.forward_flops, rc.forward_flops);
  check_row(kIncremental, ra.incremental_flops_per_token,
            rb.incremental_flops_per_token, rc.incremental_flops_per_token);
  check_row(kTrainingTokens, ra.chinchilla_tokens, rb.chinchilla_tokens,
            rc.chinchilla_tokens);
  check_row(kTrainingFlops, ra.training_flops, rb.training_flops, rc.training_flops);
  check_row(kGpuYears, ra.gpu_years, rb.gpu_years, rc.gpu_years);
  check_row(kDollars, ra.dollars, rb.dollars, rc.dollars);
}

TEST_CASE("case D bounds bracket every published range with 10% slack") {
  CostReport lo = report(Preset::DLow), hi = report(Preset::DHigh);
  auto bracket = [&](const PublishedRow& row, double vlo, double vhi) {
    CHECK(vlo < vhi);
    CHECK(vlo <= row.d_lo * 1.10);
    CHECK(vhi >= row.d_hi * 0.90);
  };
  bracket(kParams, lo.params, hi.params);
  bracket(kActivations, lo.activations_memory, hi.activations_memory);
  bracket(kCache, lo.kv_cache_memory, hi.kv_cache_memory);
  bracket(kForward, lo.forward_flops, hi.forward_flops);
  bracket(kIncremental, lo.incremental_flops_per_token, hi.incremental_flops_per_token);
  bracket(kTrainingTokens, lo.chinchilla_tokens, hi.chinchilla_tokens);
  bracket(kTrainingFlops, lo.training_flops, hi.training_flops);
  bracket(kGpuYears, lo.gpu_years, hi.gpu_years);
  bracket(kDollars, lo.dollars, hi.dollars);
}

TEST_CASE("desk-scale config arithmetic is integer exact") {
  ModelConfig cfg{8, 11, 8, 2, 2, 0};
  CHECK(cfg.ffn_width() == 32);
  CHECK(param_count(cfg) == 1776.0);
  // m = 4: per layer 4 m d^2 + 8 m d^2 + 2 m^2 d + 2 m d = 1024+2048+256+64,
  // twice, plus the m d V logit block of 352.
  CHECK(forward_flops(cfg, 4) == 7136.0);
  CHECK(forward_flops(cfg, 8) == 15296.0);
  FlopBreakdown bd = forward_flop_breakdown(cfg, 4);
  CHECK(bd[FlopCategory::qkv_projection] == 2 * 3 * 4 * 8 * 8);
  CHECK(bd[FlopCategory::attention_scores] == 2 * 4 * 8 * 4);
  CHECK(bd[FlopCategory::attention_values] == 2 * 4 * 8 * 4);
  CHECK(bd[FlopCategory::output_projection] == 2 * 4 * 8 * 8);
  CHECK(bd[FlopCategory::ffn_expand] == 2 * 4 * 8 * 32);
  CHECK(bd[FlopCategory::ffn_contract] == 2 * 4 * 32 * 8);
  CHECK(bd[FlopCategory::logit_projection] == 4 * 8 * 11);
  CHECK(bd[FlopCategory::layer_norm] == 2 * 2 * 4 * 8);
  CHECK(bd[FlopCategory::other] == 0);
  CHECK(bd.total() == 7136.0);
}

TEST_CASE("breakdowns sum to the closed-form totals over random widths") {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 30; ++trial) {
    ModelConfig cfg;
    cfg.context_window = 1 + static_cast<std::int64_t>(rng() % 64);
    cfg.vocab_size = 1 + static_cast<std::int64_t>(rng() % 50);
    cfg.embed_dim = 1 + static_cast<std::int64_t>(rng() % 64);
    cfg.num_heads = 1;
    cfg.num_layers = 1 + static_cast<std::int64_t>(rng() % 4);
    cfg.ffn_dim = 1 + static_cast<std::int64_t>(rng() % 64);
    std::int64_t m = 1 + static_cast<std::int64_t>(rng() % cfg.context_window);
    CHECK(forward_flop_breakdown(cfg, m).total() == forward_flops(cfg, m));
    std::int64_t t = 1 + static_cast<std::int64_t>(rng() % cfg.context_window);
    FlopBreakdown inc = incremental_flop_breakdown(cfg, t);
    double norms = 2.0 * static_cast<double>(cfg.num_layers * cfg.embed_dim);
    CHECK(inc.total() == incremental_flops(cfg, t, true) + norms);
  }
}

TEST_CASE("incremental flops floor at zero context") {
  ModelConfig cfg{8, 11, 8, 2, 2, 0};
  // no attended context: only the weight-matrix work remains
  CHECK(incremental_flops(cfg, 0) == 2 * 12 * 8 * 8.0);
  CHECK(incremental_flops(cfg, 0, true) == 2 * 12 * 8 * 8.0 + 8 * 11);
  CHECK(incremental_flops(cfg, 3) == 2 * (12 * 64 + 2 * 3 * 8.0));
}

TEST_CASE("chinchilla sizing is twenty tokens per weight") {
  for (Preset p : {Preset::A, Preset::B, Preset::C, Preset::DLow, Preset::DHigh}) {
    ModelConfig cfg = preset_config(p);
    double tokens = chinchilla_tokens(cfg);
    // the closed form drops only the norm gain/bias scalars
    double norm_params = 4.0 * static_cast<double>(cfg.embed_dim * cfg.num_layers);
    CHECK(tokens == 20.0 * (param_count(cfg) - norm_params));
    CHECK(within(tokens, 20.0 * param_count(cfg), 0.005));
  }
}

TEST_CASE("training cost is the dataset-size x per-token product") {
  for (Preset p : {Preset::A, Preset::C, Preset::DHigh}) {
    ModelConfig cfg = preset_config(p);
    CHECK(training_flops(cfg, false) ==
          chinchilla_tokens(cfg, false) * per_token_train_flops(cfg, false));
    CHECK(training_flops(cfg, true) ==
          chinchilla_tokens(cfg, true) * per_token_train_flops(cfg, true));
    // closed form at d_ff = 4 d: 240 L^2 d^3 (6 n + 36 d)
    double l = static_cast<double>(cfg.num_layers);
    double d = static_cast<double>(cfg.embed_dim);
    double n = static_cast<double>(cfg.context_window);
    double closed = 240.0 * l * l * d * d * d * (6.0 * n + 36.0 * d);
    CHECK(within(training_flops(cfg, false), closed, 1e-12));
  }
}

TEST_CASE("per-token training cost is three forward passes per token") {
  ModelConfig cfg{8, 11, 8, 2, 2, 0};
  // forward matmuls for one token at full context, tripled
  double fwd_one = incremental_flops(cfg, cfg.context_window, true);
  CHECK(per_token_train_flops(cfg) == 3.0 * fwd_one);
  CHECK(per_token_train_flops(cfg, false) ==
        3.0 * incremental_flops(cfg, cfg.context_window, false));
}

TEST_CASE("economics uses the published hardware rate") {
  HardwareProfile hw;
  CHECK(hw.dollars_per_flop() == doctest::Approx(1.0561892691170257e-18).epsilon(1e-15));
  Economics unit = economics(300e12 * 3.156e7, hw);
  CHECK(unit.gpu_years == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(unit.dollars == doctest::Approx(10000.0).epsilon(1e-15));
  CostReport ra = report(Preset::A);
  CHECK(ra.gpu_years == doctest::Approx(0.284943).epsilon(1e-5));
  CHECK(ra.dollars == doctest::Approx(2849.4258).epsilon(1e-5));
}

TEST_CASE("doubling device throughput halves gpu-years") {
  ModelConfig a = preset_config(Preset::A);
  HardwareProfile base, fast;
  fast.gpu_flops = 2.0 * base.gpu_flops;
  double flops = training_flops(a);
  CHECK(economics(flops, fast).gpu_years ==
        doctest::Approx(economics(flops, base).gpu_years / 2.0).epsilon(1e-15));
}

TEST_CASE("price per million tokens under a round 1e-18 dollars-per-flop rate") {
  HardwareProfile hw;
  hw.gpu_flops = 1e18;
  hw.cost_per_gpu_year = 1.0;
  hw.seconds_per_year = 1.0;
  CHECK(hw.dollars_per_flop() == 1e-18);
  ModelConfig cfg{8, 11, 8, 2, 2, 0};
  // at zero context the incremental work is exactly 12 d^2 L
  CHECK(incremental_price_per_mtok(cfg, hw, 0) ==
        doctest::Approx(12.0 * 64.0 * 2.0 * 1e-12).epsilon(1e-12));
}

TEST_CASE("case D prices land in the one-to-two dollar band within 25%") {
  HardwareProfile hw;
  double lo = incremental_price_per_mtok(preset_config(Preset::DLow), hw);
  double hi = incremental_price_per_mtok(preset_config(Preset::DHigh), hw);
  CHECK(lo == doctest::Approx(0.823577).epsilon(1e-5));
  CHECK(hi == doctest::Approx(2.234924).epsilon(1e-5));
  CHECK(lo >= 1.0 * 0.75);
  CHECK(hi <= 2.0 * 1.25);
}

TEST_CASE("mixture-of-experts scenario reproduces the published deepseek costs") {
  MoEScenario sc = deepseek_scenario();
  CHECK(sc.active_training.context_window == 32768);
  CHECK(sc.active_training.embed_dim == 7168);
  CHECK(sc.active_training.num_heads == 128);
  CHECK(sc.active_training.num_layers == 61);
  CHECK(sc.active_inference.context_window == 128000);
  CHECK(sc.total_latent_params == 671e9);
  CHECK(sc.dataset_tokens == 14.8e12);

  MoEReport rep = moe_scenario_report(sc, HardwareProfile{});
  CHECK(rep.per_token_train_flops == 198797426688.0);
  CHECK(within(rep.training_flops, 2.9e24, 0.03));
  CHECK(within(rep.chinchilla_tokens, 13.4e12, 0.01));
  CHECK(within(rep.active_inference_params, 38e9, 0.03));
  CHECK(rep.active_inference_params == 37612072960.0);
  CHECK(rep.training_flops == doctest::Approx(2.942202e24).epsilon(1e-5));
  CHECK(rep.dollars == doctest::Approx(3107522.09).epsilon(1e-6));
  CHECK(rep.incremental_flops_per_token == 149545811968.0);
  CHECK(rep.kv_cache_memory == 2.0 * 61 * 128000 * 7168);
}

TEST_CASE("costs are monotone in the driving dimensions") {
  ModelConfig base{64, 50, 16, 2, 2, 0};
  ModelConfig wider = base;
  wider.embed_dim *= 2;
  ModelConfig deeper = base;
  deeper.num_layers *= 2;
  ModelConfig longer = base;
  longer.context_window *= 2;
  ModelConfig bigger_vocab = base;
  bigger_vocab.vocab_size *= 2;

  CHECK(param_count(wider) > param_count(base));
  CHECK(param_count(deeper) > param_count(base));
  CHECK(param_count(bigger_vocab) > param_count(base));
  CHECK(forward_flops(longer, longer.context_window) >
        forward_flops(base, base.context_window));
  CHECK(incremental_flops(wider, 10) > incremental_flops(base, 10));
  CHECK(incremental_flops(base, 20) > incremental_flops(base, 10));
  CHECK(activations_memory(longer) > activations_memory(base));
  CHECK(kv_cache_memory(deeper, 10) > kv_cache_memory(base, 10));
}

TEST_CASE("cost validation accepts head counts that model validation rejects") {
  ModelConfig dh = preset_config(Preset::DHigh);
  CHECK_NOTHROW(dh.validate_for_cost());
  CHECK_THROWS_AS(dh.validate_for_model(), ConfigError);  // 192 does not divide 20480

  ModelConfig no_vocab{64, 0, 16, 2, 2, 0};
  CHECK_NOTHROW(no_vocab.validate_for_cost());
  CHECK_THROWS_AS(no_vocab.validate_for_model(), ConfigError);

  ModelConfig bad{0, 10, 16, 2, 2, 0};
  CHECK_THROWS_AS(bad.validate_for_cost(), ConfigError);
  CHECK_THROWS_AS(param_count(bad), ConfigError);
}

TEST_CASE("model config files parse with comments and defaults") {
  ModelConfig cfg = parse_model_config(
      "# toy model\n"
      "n = 8\n"
      "vocab = 11\n"
      "d_emb = 8   # width\n"
      "heads = 2\n"
      "layers = 2\n");
  CHECK(cfg.context_window == 8);
  CHECK(cfg.vocab_size == 11);
  CHECK(cfg.embed_dim == 8);
  CHECK(cfg.num_heads == 2);
  CHECK(cfg.num_layers == 2);
  CHECK(cfg.ffn_dim == 0);
  CHECK(cfg.ffn_width() == 32);
  CHECK(param_count(cfg) == 1776.0);

  ModelConfig wide = parse_model_config("n=4\nvocab=5\nd_emb=6\nheads=1\nlayers=1\nd_ff=7\n");
  CHECK(wide.ffn_width() == 7);
}

TEST_CASE("config files reject unknown keys and malformed lines naming the line") {
  try {
    parse_model_config("n=8\nvocab=11\nd_emb=8\nheads=2\nlayers=2\nwidth=9\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    std::string msg = e.what();
    CHECK(msg.find("line 6") != std::string::npos);
    CHECK(msg.find("width") != std::string::npos);
  }
  try {
    parse_model_config("n=8\nwhat is this\n");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("line 2") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_model_config("n=8\nvocab=eleven\n"), ConfigError);
  // missing required keys
  CHECK_THROWS_AS(parse_model_config("n=8\n"), ConfigError);
  // validation failures surface as config errors too
  CHECK_THROWS_AS(parse_model_config("n=8\nvocab=11\nd_emb=0\nheads=2\nlayers=2\n"),
                  ConfigError);
}

TEST_CASE("hardware profile files parse and validate") {
  HardwareProfile hw = parse_hardware_profile(
      "gpu_flops = 600e12\ncost_per_gpu_year = 20000\nseconds_per_year = 3.156e7\n");
  CHECK(hw.gpu_flops == 600e12);
  CHECK(hw.cost_per_gpu_year == 20000.0);
  CHECK_THROWS_AS(parse_hardware_profile("gpu_flops = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse_hardware_profile("bogus = 1\n"), ConfigError);
}
