#pragma once

#include <string>

#include "llmscale/cost_model.hpp"
#include "llmscale/model.hpp"

namespace llmscale {

// key=value model description. Keys: n, vocab, d_emb, heads, layers, d_ff
// (d_ff optional, defaults to 4*d_emb). '#' starts a comment. Unknown keys
// and malformed lines raise ConfigError naming the line number.
ModelConfig parse_model_config(const std::string& text);
ModelConfig load_model_config(const std::string& path);

// key=value hardware description. Keys: gpu_flops, cost_per_gpu_year,
// seconds_per_year; all optional, defaults as in HardwareProfile.
HardwareProfile parse_hardware_profile(const std::string& text);
HardwareProfile load_hardware_profile(const std::string& path);

}  // namespace llmscale
