#include "llmscale/checkpoint.hpp"

#include <cstring>
#include <fstream>

namespace llmscale {

namespace {

constexpr char kMagic[8] = {'L', 'M', 'S', 'C', 'K', 'P', 'T', '\0'};
constexpr std::uint32_t kVersion = 1;

template <typename T>
void write_pod(std::ofstream& out, const T& value) {
  out.write(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename T>
void read_pod(std::ifstream& in, T& value) {
  in.read(reinterpret_cast<char*>(&value), sizeof(T));
  if (!in) throw IoError("checkpoint truncated");
}

}  // namespace

void save_checkpoint(const std::string& path, const ParameterSet& params,
                     const CharVocab& vocab, std::uint64_t seed) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write checkpoint: " + path);
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kVersion);
  const auto& cfg = params.cfg;
  write_pod(out, cfg.context_window);
  write_pod(out, cfg.vocab_size);
  write_pod(out, cfg.embed_dim);
  write_pod(out, cfg.num_heads);
  write_pod(out, cfg.num_layers);
  write_pod(out, cfg.ffn_dim);
  write_pod(out, seed);

  const auto vocab_len = static_cast<std::uint32_t>(vocab.id_to_byte.size());
  write_pod(out, vocab_len);
  out.write(reinterpret_cast<const char*>(vocab.id_to_byte.data()), vocab_len);

  auto refs = tensor_refs(const_cast<ParameterSet&>(params));
  std::uint64_t scalar_count = 0;
  for (const auto& ref : refs) scalar_count += ref.values.size();
  write_pod(out, scalar_count);
  for (const auto& ref : refs) {
    out.write(reinterpret_cast<const char*>(ref.values.data()),
              static_cast<std::streamsize>(ref.values.size() * sizeof(double)));
  }
  if (!out) throw IoError("failed writing checkpoint: " + path);
}

Checkpoint load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw IoError("not a checkpoint file: " + path);
  }
  std::uint32_t version = 0;
  read_pod(in, version);
  if (version != kVersion) {
    throw IoError("unsupported checkpoint version " + std::to_string(version));
  }

  ModelConfig cfg;
  read_pod(in, cfg.context_window);
  read_pod(in, cfg.vocab_size);
  read_pod(in, cfg.embed_dim);
  read_pod(in, cfg.num_heads);
  read_pod(in, cfg.num_layers);
  read_pod(in, cfg.ffn_dim);

  Checkpoint ckpt;
  read_pod(in, ckpt.seed);

  std::uint32_t vocab_len = 0;
  read_pod(in, vocab_len);
  ckpt.vocab.id_to_byte.resize(vocab_len);
  ckpt.vocab.byte_to_id.fill(-1);
  in.read(reinterpret_cast<char*>(ckpt.vocab.id_to_byte.data()), vocab_len);
  if (!in) throw IoError("checkpoint truncated");
  for (std::uint32_t i = 0; i < vocab_len; ++i) {
    ckpt.vocab.byte_to_id[ckpt.vocab.id_to_byte[i]] = static_cast<int>(i);
  }

  ckpt.params = ParameterSet::zeros(cfg);
  std::uint64_t scalar_count = 0;
  read_pod(in, scalar_count);
  if (scalar_count != ckpt.params.scalar_count()) {
    throw IoError("checkpoint scalar count " + std::to_string(scalar_count) +
                  " does not match config (" +
                  std::to_string(ckpt.params.scalar_count()) + ")");
  }
  for (auto& ref : tensor_refs(ckpt.params)) {
    in.read(reinterpret_cast<char*>(ref.values.data()),
            static_cast<std::streamsize>(ref.values.size() * sizeof(double)));
  }
  if (!in) throw IoError("checkpoint truncated");
  return ckpt;
}

}  // namespace llmscale
