#include "llmscale/config_file.hpp"

#include <charconv>
#include <cstdlib>
#include <sstream>

#include "llmscale/corpus.hpp"

namespace llmscale {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

struct KeyValue {
  std::string key;
  std::string value;
  int line;
};

std::vector<KeyValue> parse_lines(const std::string& text) {
  std::vector<KeyValue> pairs;
  std::istringstream in(text);
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) {
      line = line.substr(0, hash);
    }
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": expected key=value, got '" + std::string(line) + "'");
    }
    const auto key = trim(line.substr(0, eq));
    const auto value = trim(line.substr(eq + 1));
    if (key.empty() || value.empty()) {
      throw ConfigError("config line " + std::to_string(line_no) +
                        ": empty key or value");
    }
    pairs.push_back({std::string(key), std::string(value), line_no});
  }
  return pairs;
}

std::int64_t parse_int(const KeyValue& kv) {
  std::int64_t out = 0;
  const auto* first = kv.value.data();
  const auto* last = first + kv.value.size();
  const auto [ptr, ec] = std::from_chars(first, last, out);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError("config line " + std::to_string(kv.line) + ": '" + kv.value +
                      "' is not an integer");
  }
  return out;
}

double parse_double(const KeyValue& kv) {
  char* end = nullptr;
  const double out = std::strtod(kv.value.c_str(), &end);
  if (end != kv.value.c_str() + kv.value.size()) {
    throw ConfigError("config line " + std::to_string(kv.line) + ": '" + kv.value +
                      "' is not a number");
  }
  return out;
}

}  // namespace

ModelConfig parse_model_config(const std::string& text) {
  ModelConfig cfg;
  for (const auto& kv : parse_lines(text)) {
    if (kv.key == "n") {
      cfg.context_window = parse_int(kv);
    } else if (kv.key == "vocab") {
      cfg.vocab_size = parse_int(kv);
    } else if (kv.key == "d_emb") {
      cfg.embed_dim = parse_int(kv);
    } else if (kv.key == "heads") {
      cfg.num_heads = parse_int(kv);
    } else if (kv.key == "layers") {
      cfg.num_layers = parse_int(kv);
    } else if (kv.key == "d_ff") {
      cfg.ffn_dim = parse_int(kv);
    } else {
      throw ConfigError("config line " + std::to_string(kv.line) +
                        ": unknown key '" + kv.key + "'");
    }
  }
  cfg.validate_for_cost();
  return cfg;
}

ModelConfig load_model_config(const std::string& path) {
  return parse_model_config(read_text_file(path));
}

HardwareProfile parse_hardware_profile(const std::string& text) {
  HardwareProfile hw;
  for (const auto& kv : parse_lines(text)) {
    if (kv.key == "gpu_flops") {
      hw.gpu_flops = parse_double(kv);
    } else if (kv.key == "cost_per_gpu_year") {
      hw.cost_per_gpu_year = parse_double(kv);
    } else if (kv.key == "seconds_per_year") {
      hw.seconds_per_year = parse_double(kv);
    } else {
      throw ConfigError("config line " + std::to_string(kv.line) +
                        ": unknown key '" + kv.key + "'");
    }
  }
  if (hw.gpu_flops <= 0 || hw.cost_per_gpu_year <= 0 || hw.seconds_per_year <= 0) {
    throw ConfigError("hardware profile values must be positive");
  }
  return hw;
}

HardwareProfile load_hardware_profile(const std::string& path) {
  return parse_hardware_profile(read_text_file(path));
}

}  // namespace llmscale
