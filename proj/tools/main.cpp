// Command-line front end: cost estimation reports, instrumented-vs-analytic
// verification, a character-level training demo and cached generation.
//
// Exit codes: 0 success, 1 verification failure, 2 usage/config error,
// 3 guard refusal (config too large for desk verification).

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <optional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "llmscale/checkpoint.hpp"
#include "llmscale/config_file.hpp"
#include "llmscale/corpus.hpp"
#include "llmscale/cost_model.hpp"
#include "llmscale/errors.hpp"
#include "llmscale/kv_decoder.hpp"
#include "llmscale/model.hpp"
#include "llmscale/training.hpp"
#include "llmscale/verify.hpp"

namespace {

using nlohmann::json;

constexpr double kJsonIntLimit = 9007199254740992.0;  // 2^53

// Counts are exact integers as long as they fit a double's mantissa; emit
// them as JSON integers so downstream parsers see exact values.
json json_number(double v) {
  if (std::floor(v) == v && std::fabs(v) < kJsonIntLimit) {
    return json(static_cast<std::int64_t>(v));
  }
  return json(v);
}

std::string csv_number(double v) {
  char buf[40];
  if (std::floor(v) == v && std::fabs(v) < kJsonIntLimit) {
    std::snprintf(buf, sizeof buf, "%lld", static_cast<long long>(v));
  } else {
    std::snprintf(buf, sizeof buf, "%.17g", v);
  }
  return buf;
}

struct EstimateArgs {
  std::string preset;
  std::string config_path;
  std::string format = "table";
  bool training_with_vocab = false;
  double gpu_flops = 0;
  double cost_per_gpu_year = 0;
  double seconds_per_year = 0;
  bool has_gpu_flops = false;
  bool has_cost = false;
  bool has_seconds = false;
};

llmscale::HardwareProfile resolve_hardware(const EstimateArgs& a) {
  llmscale::HardwareProfile hw;
  if (const char* path = std::getenv("LLMSCALE_HW_PROFILE")) {
    hw = llmscale::load_hardware_profile(path);
  }
  if (a.has_gpu_flops) hw.gpu_flops = a.gpu_flops;
  if (a.has_cost) hw.cost_per_gpu_year = a.cost_per_gpu_year;
  if (a.has_seconds) hw.seconds_per_year = a.seconds_per_year;
  if (hw.gpu_flops <= 0 || hw.cost_per_gpu_year <= 0 || hw.seconds_per_year <= 0) {
    throw llmscale::ConfigError("hardware profile values must be positive");
  }
  return hw;
}

void render_table(const llmscale::CostReport& r, double price_per_mtok) {
  auto row_s = [](const char* k, const std::string& v) {
    std::printf("%-28s %s\n", k, v.c_str());
  };
  auto row_i = [&](const char* k, std::int64_t v) {
    row_s(k, std::to_string(v));
  };
  auto row_e = [&](const char* k, double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.2e", v);
    row_s(k, buf);
  };
  row_s("case", r.label);
  row_i("n (context window)", r.cfg.context_window);
  row_i("vocab", r.cfg.vocab_size);
  row_i("d_emb", r.cfg.embed_dim);
  row_i("heads", r.cfg.num_heads);
  row_i("layers", r.cfg.num_layers);
  row_i("d_ff", r.cfg.ffn_width());
  row_e("params", r.params);
  row_e("activation scalars", r.activations_memory);
  row_e("kv cache scalars", r.kv_cache_memory);
  row_e("forward flops", r.forward_flops);
  row_e("incremental flops/token", r.incremental_flops_per_token);
  row_e("chinchilla tokens", r.chinchilla_tokens);
  row_e("training flops", r.training_flops);
  row_e("training gpu-years", r.gpu_years);
  row_e("training dollars", r.dollars);
  row_e("price per mtok (dollars)", price_per_mtok);
}

json report_to_json(const llmscale::CostReport& r, const llmscale::HardwareProfile& hw,
                    double price_per_mtok) {
  json j;
  j["label"] = r.label;
  j["config"] = {{"n", r.cfg.context_window}, {"vocab", r.cfg.vocab_size},
                 {"d_emb", r.cfg.embed_dim},  {"heads", r.cfg.num_heads},
                 {"layers", r.cfg.num_layers}, {"d_ff", r.cfg.ffn_width()}};
  j["params"] = json_number(r.params);
  j["activation_scalars"] = json_number(r.activations_memory);
  j["kv_cache_scalars"] = json_number(r.kv_cache_memory);
  j["forward_flops"] = json_number(r.forward_flops);
  j["incremental_flops_per_token"] = json_number(r.incremental_flops_per_token);
  j["chinchilla_tokens"] = json_number(r.chinchilla_tokens);
  j["training_flops"] = json_number(r.training_flops);
  j["training_gpu_years"] = r.gpu_years;
  j["training_dollars"] = r.dollars;
  j["price_per_mtok"] = price_per_mtok;
  j["hardware"] = {{"gpu_flops", hw.gpu_flops},
                   {"cost_per_gpu_year", hw.cost_per_gpu_year},
                   {"seconds_per_year", hw.seconds_per_year},
                   {"dollars_per_flop", hw.dollars_per_flop()}};
  return j;
}

void render_csv(const llmscale::CostReport& r, double price_per_mtok) {
  std::printf(
      "label,n,vocab,d_emb,heads,layers,d_ff,params,activation_scalars,"
      "kv_cache_scalars,forward_flops,incremental_flops_per_token,"
      "chinchilla_tokens,training_flops,training_gpu_years,training_dollars,"
      "price_per_mtok\n");
  std::printf("%s,%lld,%lld,%lld,%lld,%lld,%lld", r.label.c_str(),
              static_cast<long long>(r.cfg.context_window),
              static_cast<long long>(r.cfg.vocab_size),
              static_cast<long long>(r.cfg.embed_dim),
              static_cast<long long>(r.cfg.num_heads),
              static_cast<long long>(r.cfg.num_layers),
              static_cast<long long>(r.cfg.ffn_width()));
  for (double v : {r.params, r.activations_memory, r.kv_cache_memory,
                   r.forward_flops, r.incremental_flops_per_token,
                   r.chinchilla_tokens}) {
    std::printf(",%s", csv_number(v).c_str());
  }
  std::printf(",%s,%.17g,%.17g,%.17g\n", csv_number(r.training_flops).c_str(),
              r.gpu_years, r.dollars, price_per_mtok);
}

int run_estimate(const EstimateArgs& a) {
  if (a.preset.empty() == a.config_path.empty()) {
    std::fprintf(stderr, "estimate: pass exactly one of --preset or --config\n");
    return 2;
  }
  llmscale::HardwareProfile hw = resolve_hardware(a);
  llmscale::CostReport report;
  if (!a.preset.empty()) {
    auto p = llmscale::parse_preset(a.preset);
    if (!p) {
      std::fprintf(stderr,
                   "estimate: unknown preset '%s' (expected A, B, C, D-low or D-high)\n",
                   a.preset.c_str());
      return 2;
    }
    report = llmscale::use_case_report(*p, hw, a.training_with_vocab);
  } else {
    llmscale::ModelConfig cfg = llmscale::load_model_config(a.config_path);
    report = llmscale::report_for_config(cfg, hw, a.training_with_vocab, a.config_path);
  }
  double price = llmscale::incremental_price_per_mtok(report.cfg, hw);
  if (a.format == "json") {
    std::printf("%s\n", report_to_json(report, hw, price).dump(2).c_str());
  } else if (a.format == "csv") {
    render_csv(report, price);
  } else {
    render_table(report, price);
  }
  return 0;
}

struct VerifyArgs {
  std::string config_path;
  std::vector<std::int64_t> heads;
  std::uint64_t seed = 0;
  int grad_samples = 60;
  bool corrupt = false;
};

int run_verify(const VerifyArgs& a) {
  llmscale::VerifyOptions opt;
  if (!a.config_path.empty()) {
    opt.cfg = llmscale::load_model_config(a.config_path);
  }
  if (!a.heads.empty()) opt.head_sweep = a.heads;
  opt.seed = a.seed;
  opt.grad_samples = a.grad_samples;
  opt.corrupt = a.corrupt;

  opt.cfg.validate_for_model();
  for (std::int64_t h : opt.head_sweep) {
    llmscale::ModelConfig swept = opt.cfg;
    swept.num_heads = h;
    swept.validate_for_model();
  }
  double fwd = llmscale::forward_flops(opt.cfg, opt.cfg.context_window);
  if (fwd > llmscale::kVerifyFlopGuard) {
    std::fprintf(stderr,
                 "verify: config too large for desk verification "
                 "(forward pass %.3e flops exceeds guard %.3e)\n",
                 fwd, llmscale::kVerifyFlopGuard);
    return 3;
  }
  llmscale::VerifyResult res = llmscale::run_verification(opt);
  std::printf("%s", res.to_string().c_str());
  return res.all_ok ? 0 : 1;
}

struct ModelKnobs {
  std::int64_t n = 32;
  std::int64_t vocab = 64;
  std::int64_t d_emb = 32;
  std::int64_t heads = 2;
  std::int64_t layers = 2;
  std::int64_t d_ff = 0;  // 0 = 4 * d_emb

  llmscale::ModelConfig to_config() const {
    return llmscale::ModelConfig{n, vocab, d_emb, heads, layers, d_ff};
  }
};

struct TrainArgs {
  std::string corpus_path;
  std::string checkpoint_out;
  ModelKnobs knobs;
  std::int64_t steps = 200;
  double learning_rate = 0.5;
  std::int64_t batch_size = 8;
  std::uint64_t seed = 1;
};

int run_train_demo(const TrainArgs& a) {
  llmscale::ModelConfig cfg = a.knobs.to_config();
  cfg.validate_for_model();
  llmscale::TrainingConfig tc;
  tc.learning_rate = a.learning_rate;
  tc.steps = a.steps;
  tc.batch_size = a.batch_size;
  tc.seed = a.seed;
  tc.corpus_path = a.corpus_path;
  llmscale::TrainResult res = llmscale::train_demo(cfg, tc);
  for (std::size_t i = 0; i < res.loss_history.size(); ++i) {
    std::printf("%zu %.6f\n", i, res.loss_history[i]);
  }
  double initial = res.loss_history.front();
  double final_loss = res.loss_history.back();
  std::printf("vocab %d  ln(vocab) %.6f\n", res.vocab.size(),
              std::log(static_cast<double>(res.vocab.size())));
  std::printf("initial %.6f  final %.6f  ratio %.4f\n", initial, final_loss,
              final_loss / initial);
  std::printf("ledgered flops %.6e\n", static_cast<double>(res.ledger.total()));
  if (!a.checkpoint_out.empty()) {
    llmscale::save_checkpoint(a.checkpoint_out, res.params, res.vocab, a.seed);
    std::printf("checkpoint written to %s\n", a.checkpoint_out.c_str());
  }
  return 0;
}

struct GenerateArgs {
  std::string checkpoint_path;
  std::string corpus_path;
  ModelKnobs knobs;
  std::string prompt = "the ";
  std::int64_t steps = 64;
  double temperature = 1.0;
  bool greedy = false;
  std::uint64_t seed = 1;
};

int run_generate(const GenerateArgs& a) {
  if (a.checkpoint_path.empty() == a.corpus_path.empty()) {
    std::fprintf(stderr,
                 "generate: pass exactly one of --checkpoint or --corpus "
                 "(the corpus builds the vocabulary for a fresh seed model)\n");
    return 2;
  }
  llmscale::ParameterSet params;
  llmscale::CharVocab vocab;
  if (!a.checkpoint_path.empty()) {
    llmscale::Checkpoint ck = llmscale::load_checkpoint(a.checkpoint_path);
    params = std::move(ck.params);
    vocab = std::move(ck.vocab);
  } else {
    llmscale::ModelConfig cfg = a.knobs.to_config();
    std::string text = llmscale::read_text_file(a.corpus_path);
    vocab = llmscale::build_char_vocab(text, cfg.vocab_size);
    cfg.vocab_size = vocab.size();
    cfg.validate_for_model();
    params = llmscale::init_params(cfg, a.seed);
  }
  const llmscale::ModelConfig& cfg = params.cfg;
  llmscale::TokenSequence prompt = llmscale::encode(vocab, a.prompt);
  if (prompt.empty()) {
    std::fprintf(stderr, "generate: prompt is empty\n");
    return 2;
  }
  if (static_cast<std::int64_t>(prompt.size()) + a.steps > cfg.context_window) {
    std::fprintf(stderr,
                 "generate: prompt (%zu tokens) plus %lld steps exceeds the "
                 "context window of %lld\n",
                 prompt.size(), static_cast<long long>(a.steps),
                 static_cast<long long>(cfg.context_window));
    return 2;
  }
  double temperature = a.greedy ? 0.0 : a.temperature;
  llmscale::FlopLedger ledger;
  llmscale::TokenSequence out =
      llmscale::generate(prompt, a.steps, temperature, a.seed, params, ledger);
  std::printf("%s\n", llmscale::decode(vocab, out).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"llmscale: analytic cost model for decoder-only transformers, "
               "cross-validated against an instrumented reference model"};
  app.require_subcommand(1);

  EstimateArgs est;
  CLI::App* cmd_est = app.add_subcommand(
      "estimate", "closed-form cost/size report for a preset or config file");
  cmd_est->add_option("--preset", est.preset, "use case: A, B, C, D-low or D-high");
  cmd_est->add_option("--config", est.config_path, "model config file (key=value)");
  cmd_est->add_option("--format", est.format, "output format")
      ->check(CLI::IsMember({"table", "json", "csv"}))
      ->capture_default_str();
  cmd_est->add_flag("--training-with-vocab", est.training_with_vocab,
                    "include vocabulary terms in the training-cost product");
  auto* o1 = cmd_est->add_option("--gpu-flops", est.gpu_flops,
                                 "sustained flop/s per device");
  auto* o2 = cmd_est->add_option("--gpu-cost-per-year", est.cost_per_gpu_year,
                                 "device cost in dollars per year");
  auto* o3 = cmd_est->add_option("--seconds-per-year", est.seconds_per_year,
                                 "accounting year length in seconds");

  VerifyArgs ver;
  CLI::App* cmd_ver = app.add_subcommand(
      "verify", "run the instrumented model and compare against the closed forms");
  cmd_ver->add_option("--config", ver.config_path,
                      "model config file (defaults to a desk-scale config)");
  cmd_ver->add_option("--heads", ver.heads, "head counts to sweep, e.g. 1,2,4")
      ->delimiter(',');
  cmd_ver->add_option("--seed", ver.seed, "parameter init seed");
  cmd_ver->add_option("--grad-samples", ver.grad_samples,
                      "minimum finite-difference gradient samples");
  cmd_ver->add_flag("--corrupt", ver.corrupt,
                    "test hook: corrupt one predicted count to exercise the failure path")
      ->group("");

  TrainArgs tr;
  CLI::App* cmd_tr = app.add_subcommand(
      "train-demo", "character-level SGD demo on a text corpus");
  cmd_tr->add_option("--corpus", tr.corpus_path, "training text file")->required();
  cmd_tr->add_option("--n", tr.knobs.n, "context window")->capture_default_str();
  cmd_tr->add_option("--vocab", tr.knobs.vocab, "vocabulary cap")->capture_default_str();
  cmd_tr->add_option("--d-emb", tr.knobs.d_emb, "embedding width")->capture_default_str();
  cmd_tr->add_option("--heads", tr.knobs.heads, "attention heads")->capture_default_str();
  cmd_tr->add_option("--layers", tr.knobs.layers, "decoder layers")->capture_default_str();
  cmd_tr->add_option("--d-ff", tr.knobs.d_ff, "ffn width (0 = 4 * d_emb)")
      ->capture_default_str();
  cmd_tr->add_option("--steps", tr.steps, "SGD steps")->capture_default_str();
  cmd_tr->add_option("--lr", tr.learning_rate, "learning rate")->capture_default_str();
  cmd_tr->add_option("--batch", tr.batch_size, "windows per step")->capture_default_str();
  cmd_tr->add_option("--seed", tr.seed, "init and sampling seed")->capture_default_str();
  cmd_tr->add_option("--checkpoint-out", tr.checkpoint_out,
                     "write trained parameters to this path");

  GenerateArgs gen;
  CLI::App* cmd_gen = app.add_subcommand(
      "generate", "sample a continuation with the KV-cached decoder");
  cmd_gen->add_option("--checkpoint", gen.checkpoint_path, "trained checkpoint file");
  cmd_gen->add_option("--corpus", gen.corpus_path,
                      "corpus used to build the vocabulary for a fresh seed model");
  cmd_gen->add_option("--n", gen.knobs.n, "context window")->capture_default_str();
  cmd_gen->add_option("--vocab", gen.knobs.vocab, "vocabulary cap")->capture_default_str();
  cmd_gen->add_option("--d-emb", gen.knobs.d_emb, "embedding width")->capture_default_str();
  cmd_gen->add_option("--heads", gen.knobs.heads, "attention heads")->capture_default_str();
  cmd_gen->add_option("--layers", gen.knobs.layers, "decoder layers")->capture_default_str();
  cmd_gen->add_option("--d-ff", gen.knobs.d_ff, "ffn width (0 = 4 * d_emb)")
      ->capture_default_str();
  cmd_gen->add_option("--prompt", gen.prompt, "prompt text")->capture_default_str();
  cmd_gen->add_option("--steps", gen.steps, "tokens to generate")->capture_default_str();
  cmd_gen->add_option("--temperature", gen.temperature, "sampling temperature")
      ->capture_default_str();
  cmd_gen->add_flag("--greedy", gen.greedy, "argmax decoding (temperature 0)");
  cmd_gen->add_option("--seed", gen.seed, "init/sampling seed")->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }
  est.has_gpu_flops = o1->count() > 0;
  est.has_cost = o2->count() > 0;
  est.has_seconds = o3->count() > 0;

  try {
    if (cmd_est->parsed()) return run_estimate(est);
    if (cmd_ver->parsed()) return run_verify(ver);
    if (cmd_tr->parsed()) return run_train_demo(tr);
    if (cmd_gen->parsed()) return run_generate(gen);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "%s: %s\n", argv[0], e.what());
    return 2;
  }
  return 2;
}
