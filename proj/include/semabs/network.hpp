// Copyright 2026 The semabs Authors
// SPDX-License-Identifier: Apache-2.0

// Trainable parts of the semantic-abstracted 3D module:
//   encoder  - 3D UNet mapping a relevancy voxel grid to a feature volume
//   decoder  - 2-layer MLP mapping a sampled feature to an occupancy logit
//   spatial  - one 2D-dim embedding per spatial relation plus a learnable
//              log-temperature for the scaled cosine similarity
// Each op has a matching *_backward that yields exact gradients w.r.t. its
// parameters and its tensor inputs.

#pragma once

#include "semabs/nn.hpp"
#include "semabs/scene.hpp"
#include "semabs/voxel.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace semabs {

struct UNetConfig {
  int levels = 3;
  int base_channels = 8;
  int in_channels = 1;
  int out_channels = 16;  // feature width D

  void validate() const {
    SEMABS_EXPECT(levels >= 1 && base_channels >= 1 && in_channels >= 1 && out_channels >= 1,
                  "UNetConfig: all sizes must be >= 1");
  }
  void validate_for(const GridSpec& spec) const {
    validate();
    const int div = 1 << (levels - 1);
    for (int r : spec.resolution)
      SEMABS_EXPECT(r % div == 0, "UNetConfig: grid resolution must be divisible by 2^(levels-1)");
  }
  int channels_at(int level) const { return base_channels << level; }
  friend bool operator==(const UNetConfig&, const UNetConfig&) = default;
};

template <class T>
using Params = nn::ParamSet<T>;

namespace detail {

inline std::string block_name(const char* part, int level, int j) {
  return std::string(part) + std::to_string(level) + "." + std::to_string(j);
}

template <class T>
void add_block_params(Params<T>& p, const std::string& name, int cin, int cout, SeededRng& rng) {
  nn::init_fan_in(p.tensors()[p.add(name + ".conv.weight", {cout, cin * 27})], cin * 27, rng);
  nn::init_fan_in(p.tensors()[p.add(name + ".conv.bias", {cout})], cin * 27, rng);
  auto& gamma = p.tensors()[p.add(name + ".norm.gamma", {cout})];
  std::fill(gamma.value.begin(), gamma.value.end(), T(1));
  p.add(name + ".norm.beta", {cout});
}

}  // namespace detail

/// Encoder, decoder and spatial parameters with fan-in uniform init,
/// deterministic in `seed`.
template <class T = float>
Params<T> init_model_params(const UNetConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  SeededRng rng(seed);
  Params<T> p;
  const int L = cfg.levels;
  for (int l = 0; l < L; ++l) {
    const int cin = l == 0 ? cfg.in_channels : cfg.channels_at(l - 1);
    detail::add_block_params(p, detail::block_name("enc", l, 0), cin, cfg.channels_at(l), rng);
    detail::add_block_params(p, detail::block_name("enc", l, 1), cfg.channels_at(l), cfg.channels_at(l), rng);
  }
  for (int l = L - 2; l >= 0; --l) {
    const int cin = cfg.channels_at(l) + cfg.channels_at(l + 1);
    detail::add_block_params(p, detail::block_name("dec", l, 0), cin, cfg.channels_at(l), rng);
    detail::add_block_params(p, detail::block_name("dec", l, 1), cfg.channels_at(l), cfg.channels_at(l), rng);
  }
  const int D = cfg.out_channels;
  nn::init_fan_in(p.tensors()[p.add("head.weight", {D, cfg.channels_at(0)})], cfg.channels_at(0), rng);
  nn::init_fan_in(p.tensors()[p.add("head.bias", {D})], cfg.channels_at(0), rng);

  nn::init_fan_in(p.tensors()[p.add("decoder.w1", {D, D})], D, rng);
  nn::init_fan_in(p.tensors()[p.add("decoder.b1", {D})], D, rng);
  nn::init_fan_in(p.tensors()[p.add("decoder.w2", {1, D})], D, rng);
  nn::init_fan_in(p.tensors()[p.add("decoder.b2", {1})], D, rng);

  auto& emb = p.tensors()[p.add("spatial.embeddings", {6, 2 * D})];
  for (auto& v : emb.value) v = static_cast<T>(rng.uniform(-1.0, 1.0));
  p.tensors()[p.add("spatial.log_temperature", {1})].value[0] = static_cast<T>(2.3);
  return p;
}

// ---------------------------------------------------------------------------
// Encoder

template <class T>
struct EncodeTape {
  struct Block {
    nn::Mat<T> input;
    nn::NormCache<T> norm;
    nn::Mat<T> output;
  };
  std::map<std::string, Block> blocks;
  std::vector<std::vector<std::int32_t>> pool_argmax;  // per level transition
  std::vector<nn::Dims> dims;
  nn::Mat<T> head_input;
};

namespace detail {

template <class T>
nn::Mat<T> block_forward(const Params<T>& p, const std::string& name, nn::Mat<T> input, const nn::Dims& d,
                         EncodeTape<T>* tape, nn::Scratch<T>& scratch) {
  const nn::Mat<T> pre = nn::conv3_forward(input, d, p[name + ".conv.weight"], p[name + ".conv.bias"], scratch);
  if (!tape) {
    nn::NormCache<T> cache;
    return nn::group_norm_relu_forward(pre, p[name + ".norm.gamma"], p[name + ".norm.beta"], cache);
  }
  auto& rec = tape->blocks[name];
  rec.output = nn::group_norm_relu_forward(pre, p[name + ".norm.gamma"], p[name + ".norm.beta"], rec.norm);
  rec.input = std::move(input);
  return rec.output;
}

template <class T>
nn::Mat<T> block_backward(const Params<T>& p, Params<T>& g, const std::string& name, nn::Mat<T> dout,
                          const nn::Dims& d, const EncodeTape<T>& tape, bool want_input_grad, nn::Scratch<T>& scratch) {
  const auto& rec = tape.blocks.at(name);
  const nn::Mat<T> dpre = nn::group_norm_relu_backward(dout, rec.output, p[name + ".norm.gamma"], rec.norm,
                                                       g[name + ".norm.gamma"], g[name + ".norm.beta"]);
  nn::Mat<T> din;
  nn::conv3_backward(rec.input, d, p[name + ".conv.weight"], dpre, g[name + ".conv.weight"], g[name + ".conv.bias"],
                     want_input_grad ? &din : nullptr, scratch);
  return din;
}

inline nn::Dims dims_of(const GridSpec& spec) { return {spec.resolution[0], spec.resolution[1], spec.resolution[2]}; }

}  // namespace detail

/// Runs the UNet. Output has out_channels channels at the input resolution.
/// Pass a tape to enable encode_backward.
template <class T>
BasicFeatureVolume<T> encode(const BasicFeatureVolume<T>& rvox, const Params<T>& params, const UNetConfig& cfg,
                             EncodeTape<T>* tape = nullptr) {
  cfg.validate_for(rvox.spec);
  if (rvox.channels != cfg.in_channels) throw ContractViolation("encode: input channels do not match UNetConfig");
  const int L = cfg.levels;
  std::vector<nn::Dims> dims{detail::dims_of(rvox.spec)};
  for (int l = 1; l < L; ++l) dims.push_back(dims.back().half());
  if (tape) {
    *tape = EncodeTape<T>{};
    tape->dims = dims;
  }
  thread_local nn::Scratch<T> scratch;
  std::vector<nn::Mat<T>> skips(L);
  nn::Mat<T> a = nn::ConstMatMap<T>(rvox.data.data(), rvox.channels, static_cast<Eigen::Index>(rvox.voxels()));
  for (int l = 0; l < L; ++l) {
    if (l > 0) {
      std::vector<std::int32_t> argmax;
      a = nn::maxpool2_forward(skips[l - 1], dims[l - 1], argmax);
      if (tape) tape->pool_argmax.push_back(std::move(argmax));
    }
    a = detail::block_forward(params, detail::block_name("enc", l, 0), std::move(a), dims[l], tape, scratch);
    skips[l] = detail::block_forward(params, detail::block_name("enc", l, 1), std::move(a), dims[l], tape, scratch);
  }
  nn::Mat<T> d = skips[L - 1];
  for (int l = L - 2; l >= 0; --l) {
    const nn::Mat<T> up = nn::upsample2_forward(d, dims[l + 1]);
    nn::Mat<T> cat(skips[l].rows() + up.rows(), skips[l].cols());
    cat << skips[l], up;
    d = detail::block_forward(params, detail::block_name("dec", l, 0), std::move(cat), dims[l], tape, scratch);
    d = detail::block_forward(params, detail::block_name("dec", l, 1), std::move(d), dims[l], tape, scratch);
  }
  BasicFeatureVolume<T> z(rvox.spec, cfg.out_channels);
  nn::MatMap<T>(z.data.data(), cfg.out_channels, static_cast<Eigen::Index>(z.voxels())) =
      nn::conv1_forward(d, params["head.weight"], params["head.bias"]);
  if (tape) tape->head_input = std::move(d);
  return z;
}

/// Back-propagates d(loss)/dZ through the encoder, accumulating parameter
/// gradients into `grads`. Returns d(loss)/d(input volume) when requested.
template <class T>
std::optional<BasicFeatureVolume<T>> encode_backward(const BasicFeatureVolume<T>& dz, const Params<T>& params,
                                                     const UNetConfig& cfg, const EncodeTape<T>& tape,
                                                     Params<T>& grads, bool want_input_grad = false) {
  const int L = cfg.levels;
  const auto& dims = tape.dims;
  thread_local nn::Scratch<T> scratch;
  const nn::ConstMatMap<T> dZ(dz.data.data(), dz.channels, static_cast<Eigen::Index>(dz.voxels()));
  nn::Mat<T> dd;
  dd.resize(tape.head_input.rows(), tape.head_input.cols());
  nn::conv1_backward(tape.head_input, params["head.weight"], nn::Mat<T>(dZ), grads["head.weight"], grads["head.bias"],
                     &dd);

  std::vector<nn::Mat<T>> dskip(L);
  for (int l = 0; l < L; ++l)
    dskip[l] = nn::Mat<T>::Zero(cfg.channels_at(l), static_cast<Eigen::Index>(dims[l].voxels()));
  for (int l = 0; l <= L - 2; ++l) {
    nn::Mat<T> dh = detail::block_backward(params, grads, detail::block_name("dec", l, 1), std::move(dd), dims[l],
                                           tape, true, scratch);
    nn::Mat<T> dcat = detail::block_backward(params, grads, detail::block_name("dec", l, 0), std::move(dh), dims[l],
                                             tape, true, scratch);
    const int cs = cfg.channels_at(l);
    dskip[l] += dcat.topRows(cs);
    dd = nn::upsample2_backward(nn::Mat<T>(dcat.bottomRows(dcat.rows() - cs)), dims[l + 1]);
  }
  dskip[L - 1] += dd;

  nn::Mat<T> dinput;
  for (int l = L - 1; l >= 0; --l) {
    nn::Mat<T> dh = detail::block_backward(params, grads, detail::block_name("enc", l, 1), std::move(dskip[l]),
                                           dims[l], tape, true, scratch);
    const bool need = l > 0 || want_input_grad;
    nn::Mat<T> da = detail::block_backward(params, grads, detail::block_name("enc", l, 0), std::move(dh), dims[l],
                                           tape, need, scratch);
    if (l > 0)
      dskip[l - 1] += nn::maxpool2_backward(da, dims[l - 1], tape.pool_argmax[l - 1]);
    else if (want_input_grad)
      dinput = std::move(da);
  }
  if (!want_input_grad) return std::nullopt;
  BasicFeatureVolume<T> dx(dz.spec, cfg.in_channels);
  nn::MatMap<T>(dx.data.data(), cfg.in_channels, static_cast<Eigen::Index>(dx.voxels())) = dinput;
  return dx;
}

// ---------------------------------------------------------------------------
// Decoder

/// Logits are clamped to this magnitude so probabilities never reach 0 or 1.
inline constexpr double kLogitClamp = 15.0;

template <class T>
struct DecodeCache {
  nn::Mat<T> hidden;      // N x D, post-ReLU
  std::vector<T> logits;  // pre-clamp
};

template <class T>
T logistic(T z) {
  return z >= T(0) ? T(1) / (T(1) + std::exp(-z)) : std::exp(z) / (T(1) + std::exp(z));
}

/// features: N x D row-major. Returns clamped logits.
template <class T>
std::vector<T> decode_logits(std::span<const T> features, const Params<T>& params, DecodeCache<T>* cache = nullptr) {
  const auto& w1 = params["decoder.w1"];
  const int D = w1.shape[1];
  if (features.size() % D != 0) throw ContractViolation("decode_occupancy: feature width does not match decoder");
  const Eigen::Index N = static_cast<Eigen::Index>(features.size() / D);
  const nn::ConstMatMap<T> F(features.data(), N, D);
  const nn::ConstMatMap<T> W1(w1.value.data(), D, D);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> b1(params["decoder.b1"].value.data(), D);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> w2(params["decoder.w2"].value.data(), D);
  const T b2 = params["decoder.b2"].value[0];
  nn::Mat<T> H = F * W1.transpose();
  H.rowwise() += b1.transpose();
  H = H.cwiseMax(T(0));
  const Eigen::Matrix<T, Eigen::Dynamic, 1> z = (H * w2).array() + b2;
  std::vector<T> logits(static_cast<std::size_t>(N));
  for (Eigen::Index i = 0; i < N; ++i)
    logits[i] = std::clamp(z[i], static_cast<T>(-kLogitClamp), static_cast<T>(kLogitClamp));
  if (cache) {
    cache->hidden = std::move(H);
    cache->logits.assign(z.data(), z.data() + N);
  }
  return logits;
}

/// Occupancy probabilities in (0, 1) for N features of width D.
template <class T>
std::vector<T> decode_occupancy(std::span<const T> features, const Params<T>& params) {
  auto out = decode_logits(features, params);
  for (auto& v : out) v = logistic(v);
  return out;
}

/// Given d(loss)/d(clamped logit), accumulates decoder gradients and returns
/// d(loss)/d(features).
template <class T>
std::vector<T> decode_backward(std::span<const T> features, std::span<const T> dlogits, const Params<T>& params,
                               const DecodeCache<T>& cache, Params<T>& grads) {
  const auto& w1 = params["decoder.w1"];
  const int D = w1.shape[1];
  const Eigen::Index N = static_cast<Eigen::Index>(features.size() / D);
  Eigen::Matrix<T, Eigen::Dynamic, 1> dz(N);
  for (Eigen::Index i = 0; i < N; ++i) {
    const T raw = cache.logits[i];
    dz[i] = (raw > T(-kLogitClamp) && raw < T(kLogitClamp)) ? dlogits[i] : T(0);
  }
  const nn::ConstMatMap<T> F(features.data(), N, D);
  const nn::ConstMatMap<T> W1(w1.value.data(), D, D);
  const Eigen::Map<const Eigen::Matrix<T, Eigen::Dynamic, 1>> w2(params["decoder.w2"].value.data(), D);
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> dw2(grads["decoder.w2"].value.data(), D);
  dw2 += cache.hidden.transpose() * dz;
  grads["decoder.b2"].value[0] += dz.sum();
  nn::Mat<T> dH = dz * w2.transpose();
  dH = dH.cwiseProduct((cache.hidden.array() > T(0)).template cast<T>().matrix());
  nn::MatMap<T>(grads["decoder.w1"].value.data(), D, D).noalias() += dH.transpose() * F;
  Eigen::Map<Eigen::Matrix<T, Eigen::Dynamic, 1>> db1(grads["decoder.b1"].value.data(), D);
  db1 += dH.colwise().sum().transpose();
  std::vector<T> dF(features.size());
  nn::MatMap<T>(dF.data(), N, D).noalias() = dH * W1;
  return dF;
}

// ---------------------------------------------------------------------------
// Spatial relation head

inline int relation_index(SpatialRelation r) { return static_cast<int>(r); }

/// Row-wise concatenation [a | b] of two N x D feature sets.
template <class T>
std::vector<T> concat_features(std::span<const T> a, std::span<const T> b, int D) {
  if (a.size() != b.size() || a.size() % D != 0) throw ContractViolation("concat_features: shape mismatch");
  const std::size_t N = a.size() / D;
  std::vector<T> out(2 * a.size());
  for (std::size_t i = 0; i < N; ++i) {
    std::copy_n(a.data() + i * D, D, out.data() + i * 2 * D);
    std::copy_n(b.data() + i * D, D, out.data() + i * 2 * D + D);
  }
  return out;
}

/// logit_i = exp(log_temperature) * cos(feat_i, embedding[rel]); a zero
/// feature vector has cosine 0.
template <class T>
std::vector<T> spatial_similarity(std::span<const T> feat_pair, SpatialRelation rel, const Params<T>& params) {
  const auto& emb = params["spatial.embeddings"];
  const int W = emb.shape[1];
  if (feat_pair.size() % W != 0) throw ContractViolation("spatial_similarity: feature width must be 2D");
  const std::size_t N = feat_pair.size() / W;
  const T* e = emb.value.data() + relation_index(rel) * W;
  T e_norm2 = 0;
  for (int j = 0; j < W; ++j) e_norm2 += e[j] * e[j];
  const T e_norm = std::sqrt(e_norm2);
  const T temp = std::exp(params["spatial.log_temperature"].value[0]);
  std::vector<T> out(N, T(0));
  for (std::size_t i = 0; i < N; ++i) {
    const T* f = feat_pair.data() + i * W;
    T dot = 0, f2 = 0;
    for (int j = 0; j < W; ++j) {
      dot += f[j] * e[j];
      f2 += f[j] * f[j];
    }
    if (f2 == T(0) || e_norm == T(0)) continue;
    out[i] = temp * dot / (std::sqrt(f2) * e_norm);
  }
  return out;
}

/// Accumulates embedding/temperature gradients; returns d(loss)/d(feat_pair).
template <class T>
std::vector<T> spatial_similarity_backward(std::span<const T> feat_pair, SpatialRelation rel, std::span<const T> dlogits,
                                           const Params<T>& params, Params<T>& grads) {
  const auto& emb = params["spatial.embeddings"];
  const int W = emb.shape[1];
  const std::size_t N = feat_pair.size() / W;
  const T* e = emb.value.data() + relation_index(rel) * W;
  T* de = grads["spatial.embeddings"].value.data() + relation_index(rel) * W;
  T e_norm2 = 0;
  for (int j = 0; j < W; ++j) e_norm2 += e[j] * e[j];
  const T e_norm = std::sqrt(e_norm2);
  const T temp = std::exp(params["spatial.log_temperature"].value[0]);
  std::vector<T> dF(feat_pair.size(), T(0));
  T dlog_temp = 0;
  for (std::size_t i = 0; i < N; ++i) {
    const T* f = feat_pair.data() + i * W;
    T dot = 0, f2 = 0;
    for (int j = 0; j < W; ++j) {
      dot += f[j] * e[j];
      f2 += f[j] * f[j];
    }
    if (f2 == T(0) || e_norm == T(0)) continue;
    const T f_norm = std::sqrt(f2);
    const T cosv = dot / (f_norm * e_norm);
    dlog_temp += dlogits[i] * temp * cosv;
    const T dcos = dlogits[i] * temp;
    T* df = dF.data() + i * W;
    for (int j = 0; j < W; ++j) {
      df[j] = dcos * (e[j] / (f_norm * e_norm) - cosv * f[j] / f2);
      de[j] += dcos * (f[j] / (f_norm * e_norm) - cosv * e[j] / e_norm2);
    }
  }
  grads["spatial.log_temperature"].value[0] += dlog_temp;
  return dF;
}

}  // namespace semabs
