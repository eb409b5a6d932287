// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <memory>

#include "common.hpp"

namespace rfsep {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little,
              "checkpoint payload assumes a little-endian host");

namespace {
constexpr char kMagic[8] = {'R', 'F', 'S', 'E', 'P', 'C', 'K', '1'};

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;
}  // namespace

json model_config_to_json(const ModelConfig& cfg) {
  return json{{"feature_dim", cfg.feature_dim},
              {"encoder_layers", cfg.encoder_layers},
              {"dp_stacks", cfg.dp_stacks},
              {"heads", cfg.heads},
              {"dropout", cfg.dropout},
              {"extractor_kernel", cfg.extractor_kernel},
              {"stride", cfg.stride},
              {"out_channels", cfg.out_channels},
              {"ln_eps", cfg.ln_eps},
              {"window_len", cfg.window_len},
              {"stft", {{"window_len", cfg.stft.window_len},
                        {"hop", cfg.stft.hop},
                        {"fft_size", cfg.stft.fft_size}}}};
}

ModelConfig model_config_from_json(const json& j) {
  ModelConfig cfg;
  cfg.feature_dim = j.value("feature_dim", cfg.feature_dim);
  cfg.encoder_layers = j.value("encoder_layers", cfg.encoder_layers);
  cfg.dp_stacks = j.value("dp_stacks", cfg.dp_stacks);
  cfg.heads = j.value("heads", cfg.heads);
  cfg.dropout = j.value("dropout", cfg.dropout);
  cfg.extractor_kernel = j.value("extractor_kernel", cfg.extractor_kernel);
  cfg.stride = j.value("stride", cfg.stride);
  cfg.out_channels = j.value("out_channels", cfg.out_channels);
  cfg.ln_eps = j.value("ln_eps", cfg.ln_eps);
  cfg.window_len = j.value("window_len", cfg.window_len);
  if (j.contains("stft")) {
    const auto& s = j.at("stft");
    cfg.stft.window_len = s.value("window_len", cfg.stft.window_len);
    cfg.stft.hop = s.value("hop", cfg.stft.hop);
    cfg.stft.fft_size = s.value("fft_size", cfg.stft.fft_size);
  }
  cfg.validate();
  return cfg;
}

void save_checkpoint(const Model& model, const std::string& path) {
  json header;
  header["format_version"] = 1;
  header["config"] = model_config_to_json(model.config());
  header["param_count"] = model.param_count();
  header["tensors"] = json::array();
  for (const auto& [name, p] : model.parameters())
    header["tensors"].push_back(json{{"name", name}, {"shape", p->val.shape}});
  const std::string htext = header.dump();

  FilePtr f(std::fopen(path.c_str(), "wb"));
  if (!f) throw DataError("cannot open checkpoint for writing: " + path);
  auto put = [&](const void* data, size_t bytes) {
    if (std::fwrite(data, 1, bytes, f.get()) != bytes)
      throw DataError("short write: " + path);
  };
  put(kMagic, sizeof(kMagic));
  const uint64_t hlen = htext.size();
  put(&hlen, sizeof(hlen));
  put(htext.data(), htext.size());
  std::vector<float> buf;
  for (const auto& [name, p] : model.parameters()) {
    buf.assign(p->val.v.begin(), p->val.v.end());
    put(buf.data(), buf.size() * sizeof(float));
  }
}

Model load_checkpoint(const std::string& path) {
  FilePtr f(std::fopen(path.c_str(), "rb"));
  if (!f) throw DataError("cannot open checkpoint: " + path);
  auto get = [&](void* data, size_t bytes, const char* what) {
    if (std::fread(data, 1, bytes, f.get()) != bytes)
      throw DataError(std::string("checkpoint truncated reading ") + what + ": " + path);
  };
  char magic[8];
  get(magic, sizeof(magic), "magic");
  if (std::memcmp(magic, kMagic, sizeof(kMagic)) != 0)
    throw DataError("not a checkpoint file (bad magic): " + path);
  uint64_t hlen = 0;
  get(&hlen, sizeof(hlen), "header length");
  if (hlen == 0 || hlen > (1u << 26)) throw DataError("implausible checkpoint header: " + path);
  std::string htext(hlen, '\0');
  get(htext.data(), hlen, "header");
  json header;
  try {
    header = json::parse(htext);
  } catch (const json::exception& ex) {
    throw DataError("bad checkpoint header (" + std::string(ex.what()) + "): " + path);
  }
  if (header.value("format_version", 0) != 1)
    throw DataError("unsupported checkpoint version: " + path);

  Model model(model_config_from_json(header.at("config")), 0);
  const auto& tensors = header.at("tensors");
  const auto& params = model.parameters();
  if (tensors.size() != params.size())
    throw DataError("checkpoint tensor list does not match the model layout: " + path);
  std::vector<float> buf;
  for (size_t i = 0; i < params.size(); ++i) {
    const auto& meta = tensors[i];
    const auto& [name, p] = params[i];
    if (meta.at("name").get<std::string>() != name ||
        meta.at("shape").get<std::vector<int>>() != p->val.shape)
      throw DataError("checkpoint tensor mismatch at '" + name + "': " + path);
    buf.resize(static_cast<size_t>(p->val.size()));
    get(buf.data(), buf.size() * sizeof(float), name.c_str());
    for (size_t k = 0; k < buf.size(); ++k) p->val.v[k] = buf[k];
  }
  if (header.value("param_count", int64_t{0}) != model.param_count())
    throw DataError("checkpoint parameter count mismatch: " + path);
  return model;
}

}  // namespace rfsep
