#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <string>

#include <sys/wait.h>

#include "json.hpp"

using nlohmann::json;

namespace {

struct CliResult {
  int exit_code = -1;
  std::string output;
};

// Runs the installed binary through the shell, folding stderr into stdout.
CliResult run_cli(const std::string& args, const std::string& env_prefix = "") {
  const char* bin = std::getenv("LLMSCALE_CLI");
  REQUIRE_MESSAGE(bin != nullptr, "LLMSCALE_CLI must point at the cli binary");
  std::string cmd = env_prefix + std::string(bin) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe != nullptr);
  char buf[4096];
  std::string out;
  while (std::fgets(buf, sizeof buf, pipe) != nullptr) out += buf;
  int status = pclose(pipe);
  CliResult res;
  res.output = out;
  if (WIFEXITED(status)) res.exit_code = WEXITSTATUS(status);
  return res;
}

std::string corpus_path() {
  const char* path = std::getenv("LLMSCALE_CORPUS");
  REQUIRE_MESSAGE(path != nullptr, "LLMSCALE_CORPUS must point at the demo corpus");
  return path;
}

std::string write_file(const std::string& name, const std::string& text) {
  std::string path = "/tmp/llmscale_cli_" + name;
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return path;
}

}  // namespace

TEST_CASE("estimate json for preset A carries the documented keys and values") {
  CliResult res = run_cli("estimate --preset A --format json");
  REQUIRE(res.exit_code == 0);
  json j = json::parse(res.output);
  for (const char* key :
       {"label", "config", "params", "activation_scalars", "kv_cache_scalars",
        "forward_flops", "incremental_flops_per_token", "chinchilla_tokens",
        "training_flops", "training_gpu_years", "training_dollars",
        "price_per_mtok", "hardware"}) {
    CHECK_MESSAGE(j.contains(key), key);
  }
  CHECK(j.size() == 13);
  CHECK(j["label"] == "A");
  CHECK(j["params"].get<std::int64_t>() == 6711410688);
  CHECK(j["forward_flops"].get<std::int64_t>() == 14569065938944);
  double train = j["training_flops"].get<double>();
  CHECK(std::fabs(train - 2.697836320780022e21) <= 1e12);
  CHECK(std::fabs(train - 2.7e21) <= 0.10 * 2.7e21);  // published value
  CHECK(j["config"]["d_ff"].get<std::int64_t>() == 16384);
}

TEST_CASE("estimate rejects unknown presets with exit 2") {
  CliResult res = run_cli("estimate --preset Z");
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("unknown preset") != std::string::npos);
}

TEST_CASE("estimate needs exactly one of preset and config") {
  CHECK(run_cli("estimate").exit_code == 2);
  std::string cfg = write_file("both.cfg", "n=8\nvocab=11\nd_emb=8\nheads=2\nlayers=2\n");
  CHECK(run_cli("estimate --preset A --config " + cfg).exit_code == 2);
}

TEST_CASE("estimate reads a config file and reports the toy parameter count") {
  std::string cfg = write_file("toy.cfg",
                               "# toy\nn=8\nvocab=11\nd_emb=8\nheads=2\nlayers=2\n");
  CliResult res = run_cli("estimate --config " + cfg + " --format json");
  REQUIRE(res.exit_code == 0);
  json j = json::parse(res.output);
  CHECK(j["params"].get<std::int64_t>() == 1776);
  CHECK(j["forward_flops"].get<std::int64_t>() == 15296);
}

TEST_CASE("estimate names the offending line of a malformed config") {
  std::string cfg = write_file("bad.cfg", "n=8\nnot a pair\n");
  CliResult res = run_cli("estimate --config " + cfg);
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("line 2") != std::string::npos);

  std::string unknown = write_file("unknown.cfg",
                                   "n=8\nvocab=11\nd_emb=8\nheads=2\nlayers=2\nwat=1\n");
  CliResult res2 = run_cli("estimate --config " + unknown);
  CHECK(res2.exit_code == 2);
  CHECK(res2.output.find("line 6") != std::string::npos);
  CHECK(res2.output.find("wat") != std::string::npos);
}

TEST_CASE("doubling gpu throughput halves the reported gpu-years") {
  json base = json::parse(run_cli("estimate --preset A --format json").output);
  json fast =
      json::parse(run_cli("estimate --preset A --gpu-flops 600e12 --format json").output);
  double ratio = fast["training_gpu_years"].get<double>() /
                 base["training_gpu_years"].get<double>();
  CHECK(ratio == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("the hardware profile env var sets defaults that flags override") {
  std::string hw = write_file("hw.cfg", "gpu_flops = 600e12\n");
  json base = json::parse(run_cli("estimate --preset A --format json").output);
  json via_env = json::parse(
      run_cli("estimate --preset A --format json", "LLMSCALE_HW_PROFILE=" + hw + " ").output);
  CHECK(via_env["training_gpu_years"].get<double>() ==
        doctest::Approx(base["training_gpu_years"].get<double>() / 2.0).epsilon(1e-12));
  json flag_wins = json::parse(
      run_cli("estimate --preset A --gpu-flops 300e12 --format json",
              "LLMSCALE_HW_PROFILE=" + hw + " ").output);
  CHECK(flag_wins["training_gpu_years"].get<double>() ==
        doctest::Approx(base["training_gpu_years"].get<double>()).epsilon(1e-12));
}

TEST_CASE("csv output is a header and one data row") {
  CliResult res = run_cli("estimate --preset B --format csv");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.rfind("label,n,vocab,d_emb,heads,layers,d_ff,params,", 0) == 0);
  int newlines = 0;
  for (char c : res.output) newlines += c == '\n';
  CHECK(newlines == 2);
  CHECK(res.output.find("\nB,4096,65536,6144,48,60,24576,27985870848,") != std::string::npos);
}

TEST_CASE("table output renders three significant digits") {
  CliResult res = run_cli("estimate --preset A");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.find("2.70e+21") != std::string::npos);
  CHECK(res.output.find("6.71e+09") != std::string::npos);
}

TEST_CASE("verify passes on the default desk-scale config") {
  CliResult res = run_cli("verify");
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("verification PASSED") != std::string::npos);
  CHECK(res.output.find("parameter count") != std::string::npos);
  CHECK(res.output.find("gradient check") != std::string::npos);
}

TEST_CASE("verify sweeps head counts") {
  CliResult res = run_cli("verify --heads 1,2,4");
  CHECK(res.exit_code == 0);
  CHECK(res.output.find("heads 1 2 4") != std::string::npos);
}

TEST_CASE("the corrupt hook flips verification to exit 1") {
  CliResult res = run_cli("verify --corrupt");
  CHECK(res.exit_code == 1);
  CHECK(res.output.find("verification FAILED") != std::string::npos);
}

TEST_CASE("verify refuses configs beyond the desk-scale guard with exit 3") {
  std::string cfg = write_file("huge.cfg",
                               "n=2048\nvocab=32768\nd_emb=4096\nheads=32\nlayers=32\n");
  CliResult res = run_cli("verify --config " + cfg);
  CHECK(res.exit_code == 3);
  CHECK(res.output.find("too large") != std::string::npos);
}

TEST_CASE("train-demo without a readable corpus exits 2") {
  CliResult res = run_cli("train-demo --corpus /nonexistent/corpus.txt --steps 1");
  CHECK(res.exit_code == 2);
  CHECK(run_cli("train-demo").exit_code == 2);  // --corpus is required
}

TEST_CASE("train-demo emits one loss per step and is deterministic") {
  std::string args = "train-demo --corpus " + corpus_path() +
                     " --steps 5 --batch 2 --seed 9";
  CliResult a = run_cli(args);
  CliResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.output == b.output);
  std::istringstream lines(a.output);
  std::string line;
  for (int step = 0; step < 5; ++step) {
    REQUIRE(std::getline(lines, line));
    std::string prefix = std::to_string(step) + " ";
    CHECK(line.rfind(prefix, 0) == 0);
    CHECK(std::stod(line.substr(prefix.size())) > 0.0);
  }
  CHECK(a.output.find("initial") != std::string::npos);
  CHECK(a.output.find("ratio") != std::string::npos);
}

TEST_CASE("generate echoes the prompt when steps is zero") {
  CliResult res = run_cli("generate --corpus " + corpus_path() +
                          " --prompt \"the ledger\" --steps 0 --seed 4");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output == "the ledger\n");
}

TEST_CASE("generate emits exactly the requested continuation length") {
  CliResult res = run_cli("generate --corpus " + corpus_path() +
                          " --prompt \"count\" --steps 7 --seed 4");
  REQUIRE(res.exit_code == 0);
  CHECK(res.output.size() == 5 + 7 + 1);  // prompt + steps + newline
  CHECK(res.output.rfind("count", 0) == 0);
}

TEST_CASE("generate is deterministic per seed") {
  std::string args = "generate --corpus " + corpus_path() +
                     " --prompt \"the \" --steps 12 --seed 21 --temperature 0.8";
  CliResult a = run_cli(args);
  CliResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.output == b.output);
}

TEST_CASE("generate rejects prompts that overflow the window") {
  CliResult res = run_cli("generate --corpus " + corpus_path() +
                          " --prompt \"the \" --steps 99 --n 32");
  CHECK(res.exit_code == 2);
  CHECK(res.output.find("context window") != std::string::npos);
}

TEST_CASE("a training checkpoint round-trips into generation") {
  std::string ckpt = "/tmp/llmscale_cli_demo.ckpt";
  CliResult train = run_cli("train-demo --corpus " + corpus_path() +
                            " --steps 3 --batch 2 --seed 5 --checkpoint-out " + ckpt);
  REQUIRE(train.exit_code == 0);
  CHECK(train.output.find("checkpoint written") != std::string::npos);
  std::string args = "generate --checkpoint " + std::string(ckpt) +
                     " --prompt \"the \" --steps 16 --seed 2";
  CliResult a = run_cli(args);
  CliResult b = run_cli(args);
  REQUIRE(a.exit_code == 0);
  CHECK(a.output == b.output);
  CHECK(a.output.size() == 4 + 16 + 1);
  CliResult missing = run_cli("generate --checkpoint /nonexistent.ckpt --prompt x");
  CHECK(missing.exit_code == 2);
}

TEST_CASE("generate requires exactly one parameter source") {
  CHECK(run_cli("generate --prompt hi").exit_code == 2);
}
