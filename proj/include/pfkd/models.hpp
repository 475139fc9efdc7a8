#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "pfkd/errors.hpp"
#include "pfkd/ops.hpp"
#include "pfkd/rng.hpp"
#include "pfkd/tensor.hpp"

namespace pfkd {

// ---------------------------------------------------------------------------
// Specs
// ---------------------------------------------------------------------------

// Window-to-patch geometry. A window of L frames by A axes (C channels) is
// cut into N = (L/L_p)*(A/A_p) blocks of L_p frames by A_p axes each, and
// every block is flattened to one patch vector of C*L_p*A_p values.
struct PatchConfig {
  std::int64_t window_len = 50;  // L
  std::int64_t axes = 9;         // A
  std::int64_t channels = 1;     // C
  std::int64_t patch_len = 10;   // L_p
  std::int64_t patch_axes = 3;   // A_p

  std::int64_t num_patches() const {
    return (window_len / patch_len) * (axes / patch_axes);
  }
  std::int64_t patch_dim() const { return channels * patch_len * patch_axes; }

  void validate() const {
    if (window_len <= 0 || axes <= 0 || channels <= 0 || patch_len <= 0 || patch_axes <= 0)
      throw ConfigError("patch config extents must be positive");
    if (window_len % patch_len != 0)
      throw ConfigError("patch_len must divide window_len");
    if (axes % patch_axes != 0) throw ConfigError("patch_axes must divide axes");
  }
};

struct VitSpec {
  std::int64_t layers = 3;
  std::int64_t heads = 3;
  std::int64_t hidden = 64;
  std::int64_t mlp = 256;
  double dropout = 0.2;
  std::int64_t num_classes = 2;
  double init_std = 0.02;
  PatchConfig patch;

  // 64 hidden with 3 heads is not integral; heads run at floor(hidden/heads)
  // and the output projection maps heads*head_dim back to hidden.
  std::int64_t head_dim() const { return hidden / heads; }
  std::int64_t attn_dim() const { return head_dim() * heads; }
  std::int64_t seq_len() const { return patch.num_patches() + 1; }  // + class token

  void validate() const {
    patch.validate();
    if (layers <= 0 || heads <= 0 || hidden <= 0 || mlp <= 0 || num_classes <= 0)
      throw ConfigError("vit spec extents must be positive");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("vit dropout must be in [0,1)");
    if (head_dim() == 0) throw ConfigError("vit hidden smaller than head count");
  }
};

struct CnnSpec {
  std::int64_t conv_blocks = 2;
  std::int64_t filters = 64;
  std::int64_t kernel_h = 3, kernel_w = 3;
  std::int64_t pool_h = 1, pool_w = 2;
  double dropout = 0.1;
  std::int64_t mlp_hidden = 64;
  std::int64_t num_classes = 2;
  double init_std = 0.02;
  double prelu_init = 0.25;
  std::int64_t window_len = 50;  // input H
  std::int64_t axes = 9;         // input W

  // Spatial extents after each pool, floor semantics.
  std::int64_t out_h() const {
    std::int64_t h = window_len;
    for (std::int64_t b = 0; b < conv_blocks; ++b) h /= pool_h;
    return h;
  }
  std::int64_t out_w() const {
    std::int64_t w = axes;
    for (std::int64_t b = 0; b < conv_blocks; ++b) w /= pool_w;
    return w;
  }
  std::int64_t flat_dim() const { return filters * out_h() * out_w(); }

  void validate() const {
    if (conv_blocks <= 0 || filters <= 0 || mlp_hidden <= 0 || num_classes <= 0 ||
        window_len <= 0 || axes <= 0)
      throw ConfigError("cnn spec extents must be positive");
    if (kernel_h % 2 == 0 || kernel_w % 2 == 0)
      throw ConfigError("cnn kernel extents must be odd for same padding");
    if (dropout < 0.0 || dropout >= 1.0) throw ConfigError("cnn dropout must be in [0,1)");
    if (out_h() <= 0 || out_w() <= 0)
      throw ConfigError("cnn pooling exhausts the spatial extents");
  }
};

std::uint64_t fingerprint(const VitSpec& spec);
std::uint64_t fingerprint(const CnnSpec& spec);

// ---------------------------------------------------------------------------
// Patchify
// ---------------------------------------------------------------------------

// Row-major block order: patches advance time-major (all axis groups of the
// first L_p frames, then the next L_p frames), and each patch flattens its
// block frame-major. The inverse reconstructs the window exactly.
template <typename T>
std::vector<T> patchify(std::span<const T> window, const PatchConfig& cfg) {
  cfg.validate();
  if (static_cast<std::int64_t>(window.size()) != cfg.window_len * cfg.axes)
    throw std::invalid_argument("patchify: window size does not match config");
  const std::int64_t tg = cfg.window_len / cfg.patch_len, ag = cfg.axes / cfg.patch_axes;
  std::vector<T> out(static_cast<std::size_t>(cfg.num_patches() * cfg.patch_dim()));
  std::int64_t row = 0;
  for (std::int64_t ti = 0; ti < tg; ++ti)
    for (std::int64_t aj = 0; aj < ag; ++aj, ++row)
      for (std::int64_t li = 0; li < cfg.patch_len; ++li)
        for (std::int64_t ak = 0; ak < cfg.patch_axes; ++ak)
          out[static_cast<std::size_t>(row * cfg.patch_dim() + li * cfg.patch_axes + ak)] =
              window[static_cast<std::size_t>((ti * cfg.patch_len + li) * cfg.axes +
                                              aj * cfg.patch_axes + ak)];
  return out;
}

template <typename T>
std::vector<T> unpatchify(std::span<const T> patches, const PatchConfig& cfg) {
  cfg.validate();
  if (static_cast<std::int64_t>(patches.size()) != cfg.num_patches() * cfg.patch_dim())
    throw std::invalid_argument("unpatchify: patch matrix size does not match config");
  const std::int64_t tg = cfg.window_len / cfg.patch_len, ag = cfg.axes / cfg.patch_axes;
  std::vector<T> out(static_cast<std::size_t>(cfg.window_len * cfg.axes));
  std::int64_t row = 0;
  for (std::int64_t ti = 0; ti < tg; ++ti)
    for (std::int64_t aj = 0; aj < ag; ++aj, ++row)
      for (std::int64_t li = 0; li < cfg.patch_len; ++li)
        for (std::int64_t ak = 0; ak < cfg.patch_axes; ++ak)
          out[static_cast<std::size_t>((ti * cfg.patch_len + li) * cfg.axes +
                                       aj * cfg.patch_axes + ak)] =
              patches[static_cast<std::size_t>(row * cfg.patch_dim() + li * cfg.patch_axes + ak)];
  return out;
}

// Batched patchify as a recorded primitive: [B,L,A] -> [B,N,patch_dim].
template <typename T>
Tensor<T> patchify_op(const Tensor<T>& x, const PatchConfig& cfg) {
  if (x.rank() != 3 || x.dim(1) != cfg.window_len || x.dim(2) != cfg.axes)
    throw std::invalid_argument("patchify: expected [B," + std::to_string(cfg.window_len) + "," +
                                std::to_string(cfg.axes) + "], got " + shape_str(x.shape()));
  const std::int64_t b = x.dim(0), wsz = cfg.window_len * cfg.axes;
  Tensor<T> out({b, cfg.num_patches(), cfg.patch_dim()});
  for (std::int64_t i = 0; i < b; ++i) {
    auto rows = patchify<T>({x.data() + i * wsz, static_cast<std::size_t>(wsz)}, cfg);
    std::copy(rows.begin(), rows.end(), out.data() + i * wsz);
  }
  if (detail::tracking<T>({&x})) {
    auto X = x.impl(), O = out.impl();
    current_tape<T>()->record({O}, [X, O, b, wsz, cfg] {
      if (!X->requires_grad) return;
      for (std::int64_t i = 0; i < b; ++i) {
        auto back = unpatchify<T>({O->g.data() + i * wsz, static_cast<std::size_t>(wsz)}, cfg);
        for (std::int64_t j = 0; j < wsz; ++j) X->g[i * wsz + j] += back[static_cast<std::size_t>(j)];
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Model state
// ---------------------------------------------------------------------------

template <typename T>
struct ModelState {
  std::string kind;  // "vit" | "cnn"
  std::uint64_t spec_fingerprint = 0;
  bool training = true;

  std::vector<std::pair<std::string, Tensor<T>>> params;   // trainable, ordered
  std::vector<std::pair<std::string, Tensor<T>>> buffers;  // running stats, ordered

  Tensor<T>& add_param(const std::string& name, Tensor<T> t) {
    if (param_index.count(name)) throw std::invalid_argument("duplicate parameter " + name);
    t.set_requires_grad(true);
    param_index.emplace(name, params.size());
    params.emplace_back(name, std::move(t));
    return params.back().second;
  }

  Tensor<T>& add_buffer(const std::string& name, Tensor<T> t) {
    if (buffer_index.count(name)) throw std::invalid_argument("duplicate buffer " + name);
    buffer_index.emplace(name, buffers.size());
    buffers.emplace_back(name, std::move(t));
    return buffers.back().second;
  }

  Tensor<T>& param(const std::string& name) {
    auto it = param_index.find(name);
    if (it == param_index.end()) throw std::invalid_argument("unknown parameter " + name);
    return params[it->second].second;
  }
  const Tensor<T>& param(const std::string& name) const {
    return const_cast<ModelState*>(this)->param(name);
  }

  Tensor<T>& buffer(const std::string& name) {
    auto it = buffer_index.find(name);
    if (it == buffer_index.end()) throw std::invalid_argument("unknown buffer " + name);
    return buffers[it->second].second;
  }

  void zero_grad() {
    for (auto& [name, t] : params) t.zero_grad();
  }

  std::int64_t param_count() const {
    std::int64_t n = 0;
    for (const auto& [name, t] : params) n += t.size();
    return n;
  }

  std::unordered_map<std::string, std::size_t> param_index;
  std::unordered_map<std::string, std::size_t> buffer_index;
};

struct ParamCount {
  std::int64_t count = 0;
  std::int64_t bytes_at_32bit = 0;
};

template <typename T>
ParamCount count_params(const ModelState<T>& state) {
  ParamCount pc;
  pc.count = state.param_count();
  pc.bytes_at_32bit = 4 * pc.count;
  return pc;
}

namespace detail {

template <typename T>
Tensor<T> init_trunc_normal(Shape shape, double stddev, RngStream& rng) {
  Tensor<T> t(std::move(shape));
  for (std::int64_t i = 0; i < t.size(); ++i)
    t.data()[i] = static_cast<T>(rng.truncated_normal(stddev));
  return t;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// ViT-tiny teacher
// ---------------------------------------------------------------------------

// Parameters: patch projection, class token, learned position embeddings,
// per-layer pre-norm encoder blocks, final layer norm, class-token head.
// Weights are truncated-normal(init_std), biases zero.
template <typename T>
ModelState<T> build_vit(const VitSpec& spec, RngStream rng) {
  spec.validate();
  ModelState<T> st;
  st.kind = "vit";
  st.spec_fingerprint = fingerprint(spec);
  const std::int64_t p = spec.patch.patch_dim(), d = spec.hidden, da = spec.attn_dim();
  st.add_param("embed.w", detail::init_trunc_normal<T>({p, d}, spec.init_std, rng));
  st.add_param("embed.b", Tensor<T>::zeros({d}));
  st.add_param("cls", detail::init_trunc_normal<T>({1, d}, spec.init_std, rng));
  st.add_param("pos", detail::init_trunc_normal<T>({spec.seq_len(), d}, spec.init_std, rng));
  for (std::int64_t l = 0; l < spec.layers; ++l) {
    const std::string pre = "enc" + std::to_string(l) + ".";
    st.add_param(pre + "ln1.g", Tensor<T>::full({d}, T(1)));
    st.add_param(pre + "ln1.b", Tensor<T>::zeros({d}));
    st.add_param(pre + "attn.wq", detail::init_trunc_normal<T>({d, da}, spec.init_std, rng));
    st.add_param(pre + "attn.bq", Tensor<T>::zeros({da}));
    st.add_param(pre + "attn.wk", detail::init_trunc_normal<T>({d, da}, spec.init_std, rng));
    st.add_param(pre + "attn.bk", Tensor<T>::zeros({da}));
    st.add_param(pre + "attn.wv", detail::init_trunc_normal<T>({d, da}, spec.init_std, rng));
    st.add_param(pre + "attn.bv", Tensor<T>::zeros({da}));
    st.add_param(pre + "attn.wo", detail::init_trunc_normal<T>({da, d}, spec.init_std, rng));
    st.add_param(pre + "attn.bo", Tensor<T>::zeros({d}));
    st.add_param(pre + "ln2.g", Tensor<T>::full({d}, T(1)));
    st.add_param(pre + "ln2.b", Tensor<T>::zeros({d}));
    st.add_param(pre + "mlp.w1", detail::init_trunc_normal<T>({d, spec.mlp}, spec.init_std, rng));
    st.add_param(pre + "mlp.b1", Tensor<T>::zeros({spec.mlp}));
    st.add_param(pre + "mlp.w2", detail::init_trunc_normal<T>({spec.mlp, d}, spec.init_std, rng));
    st.add_param(pre + "mlp.b2", Tensor<T>::zeros({d}));
  }
  st.add_param("final_ln.g", Tensor<T>::full({d}, T(1)));
  st.add_param("final_ln.b", Tensor<T>::zeros({d}));
  st.add_param("head.w",
               detail::init_trunc_normal<T>({d, spec.num_classes}, spec.init_std, rng));
  st.add_param("head.b", Tensor<T>::zeros({spec.num_classes}));
  return st;
}

// batch: [B, L, A] -> logits [B, num_classes]. Dropout draws come from `rng`
// in training mode only; eval mode is deterministic and needs no stream.
template <typename T>
Tensor<T> vit_forward(ModelState<T>& state, const VitSpec& spec, const Tensor<T>& batch,
                      RngStream* rng = nullptr) {
  if (batch.rank() != 3 || batch.dim(1) != spec.patch.window_len ||
      batch.dim(2) != spec.patch.axes)
    throw std::invalid_argument("vit_forward: expected [B," +
                                std::to_string(spec.patch.window_len) + "," +
                                std::to_string(spec.patch.axes) + "], got " +
                                shape_str(batch.shape()));
  if (batch.dim(0) == 0) throw std::invalid_argument("vit_forward: empty batch");
  const bool training = state.training;
  if (training && rng == nullptr)
    throw std::invalid_argument("vit_forward: training mode needs an RNG stream");
  RngStream unused(0, "eval");
  RngStream& dropr = rng ? *rng : unused;

  const std::int64_t b = batch.dim(0), n = spec.patch.num_patches(), d = spec.hidden;
  const std::int64_t t = spec.seq_len();
  auto patches = patchify_op(batch, spec.patch);
  auto embedded = reshape(
      linear(reshape(patches, {b * n, spec.patch.patch_dim()}), state.param("embed.w"),
             state.param("embed.b")),
      {b, n, d});
  auto seq = concat(broadcast_leading(state.param("cls"), b), embedded, 1);
  seq = add(seq, state.param("pos"));
  seq = dropout(seq, spec.dropout, training, dropr);
  for (std::int64_t l = 0; l < spec.layers; ++l) {
    const std::string pre = "enc" + std::to_string(l) + ".";
    AttentionParams<T> ap{state.param(pre + "attn.wq"), state.param(pre + "attn.bq"),
                          state.param(pre + "attn.wk"), state.param(pre + "attn.bk"),
                          state.param(pre + "attn.wv"), state.param(pre + "attn.bv"),
                          state.param(pre + "attn.wo"), state.param(pre + "attn.bo")};
    auto normed = layer_norm(seq, state.param(pre + "ln1.g"), state.param(pre + "ln1.b"));
    seq = add(seq, multi_head_attention(normed, ap, spec.heads));
    auto m = layer_norm(seq, state.param(pre + "ln2.g"), state.param(pre + "ln2.b"));
    auto hiddenv = gelu(linear(reshape(m, {b * t, d}), state.param(pre + "mlp.w1"),
                               state.param(pre + "mlp.b1")));
    auto mlp_out = reshape(
        linear(hiddenv, state.param(pre + "mlp.w2"), state.param(pre + "mlp.b2")), {b, t, d});
    seq = add(seq, dropout(mlp_out, spec.dropout, training, dropr));
  }
  seq = layer_norm(seq, state.param("final_ln.g"), state.param("final_ln.b"));
  auto cls_tok = reshape(slice(seq, 1, 0, 1), {b, d});
  return linear(cls_tok, state.param("head.w"), state.param("head.b"));
}

// ---------------------------------------------------------------------------
// Lightweight CNN student
// ---------------------------------------------------------------------------

template <typename T>
ModelState<T> build_cnn(const CnnSpec& spec, RngStream rng) {
  spec.validate();
  ModelState<T> st;
  st.kind = "cnn";
  st.spec_fingerprint = fingerprint(spec);
  std::int64_t cin = 1;
  for (std::int64_t blk = 0; blk < spec.conv_blocks; ++blk) {
    const std::string pre = "block" + std::to_string(blk) + ".";
    st.add_param(pre + "conv.w", detail::init_trunc_normal<T>(
                                     {spec.filters, cin, spec.kernel_h, spec.kernel_w},
                                     spec.init_std, rng));
    st.add_param(pre + "conv.b", Tensor<T>::zeros({spec.filters}));
    st.add_param(pre + "bn.g", Tensor<T>::full({spec.filters}, T(1)));
    st.add_param(pre + "bn.b", Tensor<T>::zeros({spec.filters}));
    st.add_param(pre + "prelu.a", Tensor<T>::full({spec.filters}, static_cast<T>(spec.prelu_init)));
    st.add_buffer(pre + "bn.mean", Tensor<T>::zeros({spec.filters}));
    st.add_buffer(pre + "bn.var", Tensor<T>::full({spec.filters}, T(1)));
    cin = spec.filters;
  }
  st.add_param("fc1.w",
               detail::init_trunc_normal<T>({spec.flat_dim(), spec.mlp_hidden}, spec.init_std, rng));
  st.add_param("fc1.b", Tensor<T>::zeros({spec.mlp_hidden}));
  st.add_param("fc.prelu.a", Tensor<T>::full({spec.mlp_hidden}, static_cast<T>(spec.prelu_init)));
  st.add_param("fc2.w",
               detail::init_trunc_normal<T>({spec.mlp_hidden, spec.num_classes}, spec.init_std, rng));
  st.add_param("fc2.b", Tensor<T>::zeros({spec.num_classes}));
  return st;
}

// batch: [B, 1, L, A] -> per-class log-probabilities [B, num_classes].
// Block = conv(same) -> batchnorm -> PReLU -> maxpool -> dropout, repeated,
// then flatten -> linear -> PReLU -> linear -> log_softmax.
template <typename T>
Tensor<T> cnn_forward(ModelState<T>& state, const CnnSpec& spec, const Tensor<T>& batch,
                      RngStream* rng = nullptr) {
  if (batch.rank() != 4 || batch.dim(1) != 1 || batch.dim(2) != spec.window_len ||
      batch.dim(3) != spec.axes)
    throw std::invalid_argument("cnn_forward: expected [B,1," + std::to_string(spec.window_len) +
                                "," + std::to_string(spec.axes) + "], got " +
                                shape_str(batch.shape()));
  if (batch.dim(0) == 0) throw std::invalid_argument("cnn_forward: empty batch");
  const bool training = state.training;
  if (training && rng == nullptr)
    throw std::invalid_argument("cnn_forward: training mode needs an RNG stream");
  RngStream unused(0, "eval");
  RngStream& dropr = rng ? *rng : unused;

  Tensor<T> h = batch;
  for (std::int64_t blk = 0; blk < spec.conv_blocks; ++blk) {
    const std::string pre = "block" + std::to_string(blk) + ".";
    h = conv2d(h, state.param(pre + "conv.w"), state.param(pre + "conv.b"));
    h = batch_norm(h, state.param(pre + "bn.g"), state.param(pre + "bn.b"),
                   state.buffer(pre + "bn.mean"), state.buffer(pre + "bn.var"), training);
    h = prelu(h, state.param(pre + "prelu.a"), 1);
    h = maxpool2d(h, spec.pool_h, spec.pool_w);
    h = dropout(h, spec.dropout, training, dropr);
  }
  auto flat = reshape(h, {batch.dim(0), spec.flat_dim()});
  auto z = prelu(linear(flat, state.param("fc1.w"), state.param("fc1.b")),
                 state.param("fc.prelu.a"), 1);
  auto logits = linear(z, state.param("fc2.w"), state.param("fc2.b"));
  return log_softmax(logits, -1);
}

// ---------------------------------------------------------------------------
// FLOPs accounting
// ---------------------------------------------------------------------------

struct FlopItem {
  std::string name;
  std::int64_t flops;
};

struct FlopCount {
  std::vector<FlopItem> items;
  std::int64_t total = 0;
  // Counting conventions, echoed into reports.
  static const char* conventions();
};

FlopCount count_flops(const VitSpec& spec);
FlopCount count_flops(const CnnSpec& spec);

}  // namespace pfkd
