// Copyright 2026 The rfsep Authors
// License: Apache 2.0 (http://www.apache.org/licenses/LICENSE-2.0)

#include "model.hpp"

#include <cmath>

#include "common.hpp"

namespace rfsep {

using nn::Tape;
using nn::Tensor;
using nn::VarPtr;

void ModelConfig::validate() const {
  if (feature_dim <= 0 || feature_dim % 2 != 0)
    throw UsageError("model: feature dim must be positive and even");
  if (heads <= 0 || feature_dim % heads != 0)
    throw UsageError("model: feature dim must be divisible by the head count");
  if (encoder_layers < 1) throw UsageError("model: need at least one encoder layer");
  if (dp_stacks < 0) throw UsageError("model: negative stack count");
  if (stride < 1 || extractor_kernel < stride) throw UsageError("model: bad kernel/stride");
  if (dropout < 0.0 || dropout >= 1.0) throw UsageError("model: dropout must be in [0,1)");
  if (out_channels != 4) throw UsageError("model: two sources require 4 output channels");
  if (window_len <= 0 || window_len % stft.hop != 0)
    throw UsageError("model: window length must be a positive multiple of the hop");
}

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.feature_dim = 8;
  c.encoder_layers = 1;
  c.dp_stacks = 1;
  c.heads = 2;
  c.dropout = 0.0;
  c.window_len = 2048;
  return c;
}

namespace {

Tensor glorot_uniform(nn::Shape shape, int fan_in, int fan_out, Rng& rng) {
  Tensor t(std::move(shape));
  const double limit = std::sqrt(6.0 / (fan_in + fan_out));
  for (auto& v : t.v) v = rng.uniform(-limit, limit);
  return t;
}

}  // namespace

Model::Model(ModelConfig cfg, uint64_t init_seed) : cfg_(cfg) {
  cfg_.validate();
  stft_ = std::make_shared<Stft>(cfg_.stft);
  layers_ = std::make_shared<Layers>();
  Rng rng(init_seed);
  const int N = cfg_.feature_dim;
  const int k = cfg_.extractor_kernel;
  Layers& L = *layers_;

  L.conv1 = add_sepconv("extractor.conv1", k, 2, N, rng);
  L.ln1 = add_layernorm("extractor.ln1", N);
  L.conv2 = add_sepconv("extractor.conv2", k, N, N, rng);
  L.ln2 = add_layernorm("extractor.ln2", N);
  L.proj = add_linear("extractor.proj", N, N, rng);
  L.ln3 = add_layernorm("extractor.ln3", N);

  L.modules.resize(static_cast<size_t>(cfg_.dp_stacks));
  for (int j = 0; j < cfg_.dp_stacks; ++j) {
    const std::string base = "dptf." + std::to_string(j);
    auto& m = L.modules[static_cast<size_t>(j)];
    for (int i = 0; i < cfg_.encoder_layers; ++i) {
      m.freq_te.layers.push_back(add_encoder_layer(base + ".freq." + std::to_string(i), rng));
    }
    for (int i = 0; i < cfg_.encoder_layers; ++i) {
      m.time_te.layers.push_back(add_encoder_layer(base + ".time." + std::to_string(i), rng));
    }
  }

  L.gate_tanh = add_linear("gate.tanh", N, N, rng);
  L.gate_sigmoid = add_linear("gate.sigmoid", N, N, rng);
  L.gate_proj = add_linear("gate.proj", N, N, rng);
  L.gate_ln = add_layernorm("gate.ln", N);

  L.up_kernel = add_param("separator.upconv.kernel",
                          glorot_uniform({k, k, N, N}, k * k * N, k * k * N, rng));
  L.up_bias = add_param("separator.upconv.bias", Tensor({N}));
  L.sep_ln = add_layernorm("separator.ln", N);
  L.head = add_linear("separator.head", N, cfg_.out_channels, rng);
}

VarPtr Model::add_param(const std::string& name, Tensor init) {
  auto v = nn::parameter(std::move(init));
  index_[name] = params_.size();
  params_.emplace_back(name, v);
  return v;
}

LinearP Model::add_linear(const std::string& name, int in, int out, Rng& rng) {
  LinearP p;
  p.w = add_param(name + ".weight", glorot_uniform({in, out}, in, out, rng));
  p.b = add_param(name + ".bias", Tensor({out}));
  return p;
}

LayerNormP Model::add_layernorm(const std::string& name, int dim) {
  LayerNormP p;
  p.gain = add_param(name + ".gain", Tensor::full({dim}, 1.0));
  p.bias = add_param(name + ".bias", Tensor({dim}));
  return p;
}

SepConvP Model::add_sepconv(const std::string& name, int k, int in, int out, Rng& rng) {
  SepConvP p;
  p.depthwise = add_param(name + ".depthwise", glorot_uniform({k, k, in}, k * k, k * k, rng));
  p.pointwise = add_linear(name + ".pointwise", in, out, rng);
  return p;
}

EncoderLayerP Model::add_encoder_layer(const std::string& name, Rng& rng) {
  const int N = cfg_.feature_dim;
  EncoderLayerP p;
  p.q = add_linear(name + ".attn.q", N, N, rng);
  p.k = add_linear(name + ".attn.k", N, N, rng);
  p.v = add_linear(name + ".attn.v", N, N, rng);
  p.out = add_linear(name + ".attn.out", N, N, rng);
  p.ln_attn = add_layernorm(name + ".ln1", N);
  p.ff1 = add_linear(name + ".ffw.w1", N, N, rng);
  p.ff2 = add_linear(name + ".ffw.w2", N, N, rng);
  p.ln_ffw = add_layernorm(name + ".ln2", N);
  return p;
}

int64_t Model::param_count() const {
  int64_t n = 0;
  for (const auto& [name, p] : params_) n += p->val.size();
  return n;
}

VarPtr Model::param(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) throw UsageError("unknown parameter: " + name);
  return params_[it->second].second;
}

Tensor Model::positional_encoding(int len, int dim) {
  if (dim <= 0 || dim % 2 != 0) throw UsageError("positional encoding: dim must be even");
  if (len <= 0) throw UsageError("positional encoding: non-positive length");
  Tensor e({len, dim});
  for (int p = 0; p < len; ++p) {
    for (int d = 0; d < dim; d += 2) {
      const double denom = std::pow(10000.0, static_cast<double>(d) / dim);
      const double angle = p / denom;
      e.v[static_cast<size_t>(p) * dim + static_cast<size_t>(d)] = std::sin(angle);
      e.v[static_cast<size_t>(p) * dim + static_cast<size_t>(d) + 1] = std::cos(angle);
    }
  }
  return e;
}

VarPtr Model::pos_encoding_var(int len, int dim) const {
  auto key = std::make_pair(len, dim);
  auto it = pe_cache_.find(key);
  if (it != pe_cache_.end()) return it->second;
  auto v = nn::constant(positional_encoding(len, dim));
  pe_cache_[key] = v;
  return v;
}

VarPtr Model::sepconv(Ctx& ctx, VarPtr x, const SepConvP& p, int stride) const {
  auto d = nn::depthwise_conv2d(ctx.tape, std::move(x), p.depthwise, stride, stride);
  return nn::linear(ctx.tape, d, p.pointwise.w, p.pointwise.b);
}

VarPtr Model::feature_extract(Ctx& ctx, VarPtr x) const {
  const Layers& L = *layers_;
  if (x->val.rank() != 3 || x->val.dim(2) != 2)
    throw UsageError("feature_extract: expected [F,T,2] input");
  auto e1 = nn::layernorm_last(ctx.tape, sepconv(ctx, std::move(x), L.conv1, 1), L.ln1.gain,
                               L.ln1.bias, cfg_.ln_eps);
  auto e2 = nn::relu(ctx.tape, nn::layernorm_last(ctx.tape, sepconv(ctx, e1, L.conv2, cfg_.stride),
                                                  L.ln2.gain, L.ln2.bias, cfg_.ln_eps));
  return nn::layernorm_last(ctx.tape, nn::linear(ctx.tape, e2, L.proj.w, L.proj.b), L.ln3.gain,
                            L.ln3.bias, cfg_.ln_eps);
}

VarPtr Model::attention(Ctx& ctx, VarPtr x, const EncoderLayerP& p) const {
  Tape* t = ctx.tape;
  const int B = x->val.dim(0), Len = x->val.dim(1), N = x->val.dim(2);
  const int h = cfg_.heads, dh = N / h;
  auto split = [&](VarPtr v) {
    auto r = nn::reshape(t, std::move(v), {B, Len, h, dh});
    auto pm = nn::permute(t, r, {0, 2, 1, 3});
    return nn::reshape(t, pm, {B * h, Len, dh});
  };
  auto q = split(nn::linear(t, x, p.q.w, p.q.b));
  auto k = split(nn::linear(t, x, p.k.w, p.k.b));
  auto v = split(nn::linear(t, x, p.v.w, p.v.b));
  auto scores = nn::scale(t, nn::bmm(t, q, k, false, true), 1.0 / std::sqrt(static_cast<double>(dh)));
  auto probs = nn::softmax_last(t, scores);
  auto heads = nn::bmm(t, probs, v, false, false);
  auto merged = nn::reshape(
      t, nn::permute(t, nn::reshape(t, heads, {B, h, Len, dh}), {0, 2, 1, 3}), {B, Len, N});
  return nn::linear(t, merged, p.out.w, p.out.b);
}

VarPtr Model::transformer_encoder_block(Ctx& ctx, VarPtr z, const TeBlockP& p) const {
  Tape* t = ctx.tape;
  if (z->val.rank() != 3 || z->val.dim(2) != cfg_.feature_dim)
    throw UsageError("encoder block: expected [B,L,N]");
  if (ctx.training && ctx.rng == nullptr)
    throw UsageError("encoder block: training mode requires an RNG");
  const int Len = z->val.dim(1);
  auto z1 = nn::add_broadcast(t, z, pos_encoding_var(Len, cfg_.feature_dim));
  auto cur = z1;
  Rng dummy(0);
  Rng& rng = ctx.rng ? *ctx.rng : dummy;
  for (const auto& layer : p.layers) {
    auto a = attention(ctx, cur, layer);
    a = nn::dropout(t, a, cfg_.dropout, rng, ctx.training);
    cur = nn::layernorm_last(t, nn::add(t, a, cur), layer.ln_attn.gain, layer.ln_attn.bias,
                             cfg_.ln_eps);
    auto f = nn::linear(t, cur, layer.ff1.w, layer.ff1.b);
    f = nn::relu(t, f);
    f = nn::linear(t, f, layer.ff2.w, layer.ff2.b);
    f = nn::dropout(t, f, cfg_.dropout, rng, ctx.training);
    cur = nn::layernorm_last(t, nn::add(t, f, cur), layer.ln_ffw.gain, layer.ln_ffw.bias,
                             cfg_.ln_eps);
  }
  // residual from the pre-encoding input around the whole block
  return nn::add(t, cur, z);
}

VarPtr Model::dp_tf_transform(Ctx& ctx, VarPtr x) const {
  if (x->val.rank() != 3 || x->val.dim(2) != cfg_.feature_dim)
    throw UsageError("dp_tf_transform: expected [F',T',N]");
  for (const auto& m : layers_->modules) {
    // frequency-axis encoder over the T' blocks of shape [F',N]
    auto xb = nn::permute(ctx.tape, x, {1, 0, 2});
    auto yb = transformer_encoder_block(ctx, xb, m.freq_te);
    x = nn::permute(ctx.tape, yb, {1, 0, 2});
    // time-axis encoder over the F' blocks of shape [T',N]
    x = transformer_encoder_block(ctx, x, m.time_te);
  }
  return x;
}

VarPtr Model::gate_and_project(Ctx& ctx, VarPtr x) const {
  const Layers& L = *layers_;
  Tape* t = ctx.tape;
  auto a = nn::tanh_op(t, nn::linear(t, x, L.gate_tanh.w, L.gate_tanh.b));
  auto b = nn::sigmoid_op(t, nn::linear(t, x, L.gate_sigmoid.w, L.gate_sigmoid.b));
  auto gated = nn::mul(t, a, b);
  return nn::layernorm_last(t, nn::linear(t, gated, L.gate_proj.w, L.gate_proj.b), L.gate_ln.gain,
                            L.gate_ln.bias, cfg_.ln_eps);
}

VarPtr Model::separate(Ctx& ctx, VarPtr x, int crop_f, int crop_t) const {
  const Layers& L = *layers_;
  Tape* t = ctx.tape;
  auto up = nn::conv2d_transpose(t, std::move(x), L.up_kernel, L.up_bias, cfg_.stride, cfg_.stride);
  auto s1 = nn::relu(t, nn::layernorm_last(t, up, L.sep_ln.gain, L.sep_ln.bias, cfg_.ln_eps));
  auto out = nn::linear(t, s1, L.head.w, L.head.b);
  if (crop_f > 0 || crop_t > 0) out = nn::crop2d(t, out, 0, crop_f, 0, crop_t);
  return out;
}

VarPtr Model::mask_logits(Ctx& ctx, VarPtr features) const {
  if (features->val.rank() != 3 || features->val.dim(2) != 2)
    throw UsageError("mask_logits: expected [F,T,2] stacked features");
  const int F = features->val.dim(0), T = features->val.dim(1);
  const int s = cfg_.stride;
  const int pad_f = (s - F % s) % s;
  const int pad_t = (s - T % s) % s;
  auto x = (pad_f || pad_t) ? nn::pad2d(ctx.tape, features, 0, pad_f, 0, pad_t) : features;
  auto e = feature_extract(ctx, x);
  auto d = dp_tf_transform(ctx, e);
  auto g = gate_and_project(ctx, d);
  return separate(ctx, g, pad_f, pad_t);
}

std::pair<std::vector<float>, std::vector<float>> Model::separate_signal(
    std::span<const float> x) const {
  Ctx ctx;  // inference: no tape, no dropout
  const Spectrogram mix = stft_->forward(x);
  auto feats = nn::constant(encode_logamp_phase(mix));
  auto logits = mask_logits(ctx, feats);
  const MaskPair masks = decode_masks(logits->val);
  return apply_masks(*stft_, masks, mix);
}

std::pair<VarPtr, VarPtr> Model::forward_train(Ctx& ctx, std::span<const float> x) const {
  Tape* t = ctx.tape;
  const Spectrogram mix = stft_->forward(x);
  auto feats = nn::constant(encode_logamp_phase(mix));
  auto logits = mask_logits(ctx, feats);
  std::pair<VarPtr, VarPtr> out;
  for (int c = 0; c < 2; ++c) {
    auto logamp = nn::select_channel(t, logits, c);
    auto phase = nn::select_channel(t, logits, 2 + c);
    auto linamp = nn::exp10_op(t, logamp);
    auto mre = nn::mul(t, linamp, nn::cos_op(t, phase));
    auto mim = nn::mul(t, linamp, nn::sin_op(t, phase));
    auto y = masked_istft(t, mre, mim, mix, stft_);
    (c == 0 ? out.first : out.second) = y;
  }
  return out;
}

namespace {

// iSTFT of a masked spectrogram as a custom linear op; the backward pass is
// the exact adjoint of the overlap-add inverse.
VarPtr istft_op(Tape* t, VarPtr re, VarPtr im, const std::shared_ptr<Stft>& stft) {
  const int F = re->val.dim(0), T = re->val.dim(1);
  Spectrogram s(F, T);
  for (int f = 0; f < F; ++f)
    for (int tt = 0; tt < T; ++tt)
      s.at(f, tt) = {re->val.v[static_cast<size_t>(f) * T + tt],
                     im->val.v[static_cast<size_t>(f) * T + tt]};
  const int64_t out_len = stft->config().samples_for(T);
  Tensor y({static_cast<int>(out_len)});
  y.v = stft->inverse_double(s);
  auto node = std::make_shared<nn::Var>();
  node->val = std::move(y);
  if (t != nullptr && (re->requires_grad || im->requires_grad)) {
    node->requires_grad = true;
    node->parents = {re, im};
    node->backward = [re, im, stft, T](nn::Var& n) {
      auto [gre, gim] = stft->inverse_adjoint(
          std::span<const double>(n.grad.v.data(), n.grad.v.size()), T);
      if (re->requires_grad) {
        Tensor& g = re->g();
        for (int64_t i = 0; i < g.size(); ++i) g.v[static_cast<size_t>(i)] += gre.v[static_cast<size_t>(i)];
      }
      if (im->requires_grad) {
        Tensor& g = im->g();
        for (int64_t i = 0; i < g.size(); ++i) g.v[static_cast<size_t>(i)] += gim.v[static_cast<size_t>(i)];
      }
    };
    t->record(node);
  }
  return node;
}

}  // namespace

VarPtr masked_istft(Tape* tape, VarPtr mask_re, VarPtr mask_im, const Spectrogram& mix,
                    const std::shared_ptr<Stft>& stft) {
  if (mask_re->val.rank() != 2 || !mask_re->val.same_shape(mask_im->val) ||
      mask_re->val.dim(0) != mix.freq_bins || mask_re->val.dim(1) != mix.frames)
    throw UsageError("masked_istft: mask/mixture shape mismatch");
  const int F = mix.freq_bins, T = mix.frames;
  Tensor are({F, T}), aim({F, T});
  for (int f = 0; f < F; ++f) {
    for (int t = 0; t < T; ++t) {
      are.v[static_cast<size_t>(f) * T + t] = mix.at(f, t).real();
      aim.v[static_cast<size_t>(f) * T + t] = mix.at(f, t).imag();
    }
  }
  auto cre = nn::constant(std::move(are));
  auto cim = nn::constant(std::move(aim));
  auto yre = nn::sub(tape, nn::mul(tape, mask_re, cre), nn::mul(tape, mask_im, cim));
  auto yim = nn::add(tape, nn::mul(tape, mask_re, cim), nn::mul(tape, mask_im, cre));
  return istft_op(tape, yre, yim, stft);
}

}  // namespace rfsep
