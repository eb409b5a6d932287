// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#ifndef RFSEP_MODEL_HPP
#define RFSEP_MODEL_HPP

#include <map>
#include <memory>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "autodiff.hpp"
#include "tf_transform.hpp"

namespace rfsep {

struct ModelConfig {
  int feature_dim = 128;   // N; also the transformer model and feed-forward width
  int encoder_layers = 2;  // I
  int dp_stacks = 2;       // J
  int heads = 2;
  double dropout = 0.1;
  int extractor_kernel = 4;
  int stride = 2;
  int out_channels = 4;  // 2 sources x (logamp, phase)
  double ln_eps = 1e-5;
  StftConfig stft;
  int64_t window_len = 65280;  // native processing window (samples)

  void validate() const;
  // Small configuration used by gradient checks and smoke training.
  static ModelConfig tiny();
};

// Parameter layout per layer kind. Separable convs follow the usual
// depthwise (no bias) + pointwise + bias split; all projections carry bias.
struct LinearP {
  nn::VarPtr w, b;
};
struct LayerNormP {
  nn::VarPtr gain, bias;
};
struct SepConvP {
  nn::VarPtr depthwise;  // [k,k,Cin]
  LinearP pointwise;     // [Cin,Cout] + bias
};
struct EncoderLayerP {
  LinearP q, k, v, out;
  LayerNormP ln_attn;
  LinearP ff1, ff2;
  LayerNormP ln_ffw;
};
struct TeBlockP {
  std::vector<EncoderLayerP> layers;  // I layers, weights shared across blocks
};
struct DpModuleP {
  TeBlockP freq_te, time_te;
};

// All layer handles, grouped in forward order.
struct Layers {
  SepConvP conv1;
  LayerNormP ln1;
  SepConvP conv2;
  LayerNormP ln2;
  LinearP proj;
  LayerNormP ln3;
  std::vector<DpModuleP> modules;  // J
  LinearP gate_tanh, gate_sigmoid, gate_proj;
  LayerNormP gate_ln;
  nn::VarPtr up_kernel, up_bias;  // transposed conv [k,k,N,N] + [N]
  LayerNormP sep_ln;
  LinearP head;
};

class Model {
 public:
  Model(ModelConfig cfg, uint64_t init_seed);

  const ModelConfig& config() const { return cfg_; }
  int64_t param_count() const;  // learnable scalars; positional tables excluded
  const std::vector<std::pair<std::string, nn::VarPtr>>& parameters() const { return params_; }
  nn::VarPtr param(const std::string& name) const;
  const Layers& layers() const { return *layers_; }

  struct Ctx {
    nn::Tape* tape = nullptr;
    Rng* rng = nullptr;
    bool training = false;
  };

  // E[p,2i] = sin(p / 10000^(2i/N)), E[p,2i+1] = cos(p / 10000^(2i/N))
  static nn::Tensor positional_encoding(int len, int dim);

  nn::VarPtr feature_extract(Ctx& ctx, nn::VarPtr x) const;  // [Fp,Tp,2] -> [F',T',N]
  nn::VarPtr transformer_encoder_block(Ctx& ctx, nn::VarPtr z, const TeBlockP& p) const;
  nn::VarPtr dp_tf_transform(Ctx& ctx, nn::VarPtr x) const;  // [F',T',N] -> same
  nn::VarPtr gate_and_project(Ctx& ctx, nn::VarPtr x) const;
  // Upsample back to the padded grid and emit mask parameters, cropping the
  // padding rows/columns again: [F',T',N] -> [F,T,4].
  nn::VarPtr separate(Ctx& ctx, nn::VarPtr x, int crop_f, int crop_t) const;

  // Stacked features [F,T,2] -> mask parameters [F,T,4] (full network).
  nn::VarPtr mask_logits(Ctx& ctx, nn::VarPtr features) const;

  // Separable conv application (exposed for shape tests).
  nn::VarPtr sepconv(Ctx& ctx, nn::VarPtr x, const SepConvP& p, int stride) const;

  // End-to-end separation of one window (inference; length % hop == 0).
  std::pair<std::vector<float>, std::vector<float>> separate_signal(std::span<const float> x) const;

  // Training-path forward: separated time-domain signals as graph nodes.
  std::pair<nn::VarPtr, nn::VarPtr> forward_train(Ctx& ctx, std::span<const float> x) const;

  Stft& stft() const { return *stft_; }
  std::shared_ptr<Stft> stft_ptr() const { return stft_; }

 private:
  ModelConfig cfg_;
  std::vector<std::pair<std::string, nn::VarPtr>> params_;
  std::map<std::string, size_t> index_;
  std::shared_ptr<Layers> layers_;
  std::shared_ptr<Stft> stft_;
  mutable std::map<std::pair<int, int>, nn::VarPtr> pe_cache_;

  nn::VarPtr attention(Ctx& ctx, nn::VarPtr x, const EncoderLayerP& p) const;
  nn::VarPtr add_param(const std::string& name, nn::Tensor init);
  LinearP add_linear(const std::string& name, int in, int out, Rng& rng);
  LayerNormP add_layernorm(const std::string& name, int dim);
  SepConvP add_sepconv(const std::string& name, int k, int in, int out, Rng& rng);
  EncoderLayerP add_encoder_layer(const std::string& name, Rng& rng);
  nn::VarPtr pos_encoding_var(int len, int dim) const;
};

// Gradient flow through mask application and iSTFT: y = istft(mask * X_mix).
nn::VarPtr masked_istft(nn::Tape* tape, nn::VarPtr mask_re, nn::VarPtr mask_im,
                        const Spectrogram& mix, const std::shared_ptr<Stft>& stft);

}  // namespace rfsep

#endif
