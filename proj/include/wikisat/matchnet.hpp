// Copyright 2026 The wikisat Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "wikisat/common.hpp"
#include "wikisat/image.hpp"
#include "wikisat/nn.hpp"
#include "wikisat/rng.hpp"
#include "wikisat/vec.hpp"

namespace wikisat::net {

/// Small convolutional encoder: stride-2 3x3 conv stack with rectified-linear
/// units and a global average pool. The pooled vector is the visual feature
/// z_v of dimension M = channels.back().
struct EncoderConfig {
  std::uint32_t in_h = 64;
  std::uint32_t in_w = 64;
  std::uint32_t in_c = 3;
  std::vector<std::uint32_t> channels = {8, 16, 32};
  std::uint32_t kernel = 3;
  std::uint32_t stride = 2;
  std::uint32_t pad = 1;

  std::uint32_t feature_dim() const { return channels.back(); }
};

template <typename T>
struct EncoderActs {
  std::vector<std::vector<T>> pre;    // conv outputs before relu
  std::vector<std::vector<T>> post;   // after relu
  std::vector<std::uint32_t> hs, ws;  // spatial dims per layer output
  std::vector<T> pooled;
};

template <typename T>
struct Encoder {
  EncoderConfig config;
  std::vector<Conv2d<T>> convs;

  void init(const EncoderConfig& cfg, Rng& rng) {
    config = cfg;
    convs.clear();
    std::uint32_t c = cfg.in_c;
    for (std::uint32_t oc : cfg.channels) {
      Conv2d<T> conv;
      conv.kernel = cfg.kernel;
      conv.stride = cfg.stride;
      conv.pad = cfg.pad;
      conv.init(c, oc, rng);
      convs.push_back(std::move(conv));
      c = oc;
    }
  }

  std::uint32_t feature_dim() const { return config.feature_dim(); }

  void forward(std::span<const T> image, EncoderActs<T>& acts) const {
    if (image.size() !=
        std::size_t(config.in_h) * config.in_w * config.in_c)
      throw std::invalid_argument("encode: image does not match encoder input");
    acts.pre.resize(convs.size());
    acts.post.resize(convs.size());
    acts.hs.resize(convs.size());
    acts.ws.resize(convs.size());
    std::uint32_t h = config.in_h, w = config.in_w;
    std::span<const T> x = image;
    for (std::size_t l = 0; l < convs.size(); ++l) {
      convs[l].forward(x, h, w, acts.pre[l]);
      h = convs[l].out_dim(h);
      w = convs[l].out_dim(w);
      acts.hs[l] = h;
      acts.ws[l] = w;
      acts.post[l] = acts.pre[l];
      relu_inplace(acts.post[l]);
      x = acts.post[l];
    }
    // global average pool
    std::uint32_t m = feature_dim();
    acts.pooled.assign(m, T(0));
    const auto& last = acts.post.back();
    std::size_t spatial = std::size_t(h) * w;
    for (std::size_t s = 0; s < spatial; ++s)
      for (std::uint32_t c = 0; c < m; ++c) acts.pooled[c] += last[s * m + c];
    for (T& v : acts.pooled) v /= static_cast<T>(spatial);
  }

  // g_pooled is dL/d(pooled). Parameter gradients accumulate into the convs.
  void backward(std::span<const T> image, const EncoderActs<T>& acts,
                std::span<const T> g_pooled) {
    std::uint32_t m = feature_dim();
    std::size_t spatial =
        std::size_t(acts.hs.back()) * acts.ws.back();
    std::vector<T> g(spatial * m);
    for (std::size_t s = 0; s < spatial; ++s)
      for (std::uint32_t c = 0; c < m; ++c)
        g[s * m + c] = g_pooled[c] / static_cast<T>(spatial);

    for (std::size_t l = convs.size(); l-- > 0;) {
      relu_backward<T>(acts.pre[l], g);
      std::uint32_t in_h = l == 0 ? config.in_h : acts.hs[l - 1];
      std::uint32_t in_w = l == 0 ? config.in_w : acts.ws[l - 1];
      std::span<const T> x = l == 0 ? image : std::span<const T>(acts.post[l - 1]);
      if (l == 0) {
        convs[l].backward(x, in_h, in_w, g, nullptr);
      } else {
        std::vector<T> gx;
        convs[l].backward(x, in_h, in_w, g, &gx);
        g = std::move(gx);
      }
    }
  }

  std::vector<ParamBlock<T>> params() {
    std::vector<ParamBlock<T>> blocks;
    for (std::size_t l = 0; l < convs.size(); ++l) {
      blocks.push_back({"conv" + std::to_string(l) + ".w", &convs[l].w,
                        &convs[l].gw});
      blocks.push_back({"conv" + std::to_string(l) + ".b", &convs[l].b,
                        &convs[l].gb});
    }
    return blocks;
  }

  /// Digest of the parameter bytes; used to assert freeze contracts.
  std::string param_hash() const {
    std::string bytes;
    for (const auto& c : convs) {
      bytes.append(reinterpret_cast<const char*>(c.w.data()),
                   c.w.size() * sizeof(T));
      bytes.append(reinterpret_cast<const char*>(c.b.data()),
                   c.b.size() * sizeof(T));
    }
    return sha256_hex(bytes);
  }
};

/// 1 - cos(z_v, z_t); zero iff the directions coincide, bounded by [0, 2].
template <typename T>
T match_loss(std::span<const T> z_v, std::span<const T> z_t) {
  return T(1) - cosine(z_v, z_t);
}

/// dL/da for L = 1 - cos(a, b):  -(b_hat - cos * a_hat) / |a|.
template <typename T>
void match_loss_grad(std::span<const T> a, std::span<const T> b,
                     std::span<T> ga) {
  T na = l2_norm(a);
  T nb = l2_norm(b);
  if (na == 0 || nb == 0)
    throw std::invalid_argument("match_loss: undefined angle for zero vector");
  T cos = 0;
  for (std::size_t i = 0; i < a.size(); ++i)
    cos += (a[i] / na) * (b[i] / nb);
  for (std::size_t i = 0; i < a.size(); ++i)
    ga[i] = -((b[i] / nb) - cos * (a[i] / na)) / na;
}

/// Visual encoder + projection head used for image-to-text matching.
/// The head is one fully connected layer with a rectified-linear unit; an
/// optional second layer (hidden M->M with its own rectifier) mirrors the
/// wider head of early experiments. When `l2_normalize_output` is set the
/// output is L2-normalized, which is inert under the cosine and only
/// conditions gradient magnitudes.
template <typename T>
struct MatchModel {
  Encoder<T> encoder;
  Dense<T> hidden;  // used only when proj_layers == 2
  Dense<T> proj;
  std::uint32_t proj_layers = 1;
  bool l2_normalize_output = true;

  struct Acts {
    EncoderActs<T> enc;
    std::vector<T> hidden_pre;   // hidden dense output before relu
    std::vector<T> hidden_post;  // after relu
    std::vector<T> pre;          // final dense output before relu
    std::vector<T> post;         // after relu
    std::vector<T> z;            // after optional normalization
  };

  void init(const EncoderConfig& cfg, std::uint32_t k, std::uint64_t seed,
            bool normalize = true, std::uint32_t layers = 1) {
    if (layers != 1 && layers != 2)
      throw std::invalid_argument("projection head has one or two layers");
    Rng rng(seed);
    encoder.init(cfg, rng);
    proj_layers = layers;
    if (layers == 2) hidden.init(cfg.feature_dim(), cfg.feature_dim(), rng);
    proj.init(cfg.feature_dim(), k, rng);
    l2_normalize_output = normalize;
  }

  std::uint32_t k() const { return proj.out; }

  std::span<const T> forward(std::span<const T> image, Acts& acts) const {
    encoder.forward(image, acts.enc);
    std::span<const T> feat = acts.enc.pooled;
    if (proj_layers == 2) {
      hidden.forward(feat, acts.hidden_pre);
      acts.hidden_post = acts.hidden_pre;
      relu_inplace(acts.hidden_post);
      feat = acts.hidden_post;
    }
    proj.forward(feat, acts.pre);
    acts.post = acts.pre;
    relu_inplace(acts.post);
    acts.z = acts.post;
    if (l2_normalize_output) {
      T n = l2_norm(std::span<const T>(acts.z));
      if (n > T(0))
        for (T& v : acts.z) v /= n;
      // an all-dead relu keeps z at zero; the loss rejects it upstream
    }
    return acts.z;
  }

  void backward(std::span<const T> image, const Acts& acts,
                std::span<const T> gz) {
    std::vector<T> g(gz.begin(), gz.end());
    if (l2_normalize_output) {
      // v = y / |y|: dL/dy = (g - (g . v) v) / |y|
      T n = l2_norm(std::span<const T>(acts.post));
      if (n > T(0)) {
        T gdotv = 0;
        for (std::size_t i = 0; i < g.size(); ++i)
          gdotv += g[i] * acts.z[i];
        for (std::size_t i = 0; i < g.size(); ++i)
          g[i] = (g[i] - gdotv * acts.z[i]) / n;
      }
    }
    relu_backward<T>(acts.pre, g);
    std::vector<T> g_feat;
    std::span<const T> feat = proj_layers == 2
                                  ? std::span<const T>(acts.hidden_post)
                                  : std::span<const T>(acts.enc.pooled);
    proj.backward(feat, g, &g_feat);
    if (proj_layers == 2) {
      relu_backward<T>(acts.hidden_pre, g_feat);
      std::vector<T> g_pooled;
      hidden.backward(acts.enc.pooled, g_feat, &g_pooled);
      g_feat = std::move(g_pooled);
    }
    encoder.backward(image, acts.enc, g_feat);
  }

  std::vector<ParamBlock<T>> params() {
    auto blocks = encoder.params();
    if (proj_layers == 2) {
      blocks.push_back({"hidden.w", &hidden.w, &hidden.gw});
      blocks.push_back({"hidden.b", &hidden.b, &hidden.gb});
    }
    blocks.push_back({"proj.w", &proj.w, &proj.gw});
    blocks.push_back({"proj.b", &proj.b, &proj.gb});
    return blocks;
  }
};

/// Visual encoder + fully connected classification head with softmax.
template <typename T>
struct ClassifierModel {
  Encoder<T> encoder;
  Dense<T> head;
  std::vector<std::string> label_names;  // index -> label

  struct Acts {
    EncoderActs<T> enc;
    std::vector<T> logits;
    std::vector<T> probs;
  };

  void init(const EncoderConfig& cfg, std::uint32_t num_labels,
            std::uint64_t seed) {
    Rng rng(seed);
    encoder.init(cfg, rng);
    head.init(cfg.feature_dim(), num_labels, rng);
  }

  std::span<const T> forward(std::span<const T> image, Acts& acts) const {
    encoder.forward(image, acts.enc);
    head.forward(acts.enc.pooled, acts.logits);
    softmax<T>(acts.logits, acts.probs);
    return acts.probs;
  }

  // Softmax + cross-entropy backward: g_logits = p - onehot(label).
  void backward(std::span<const T> image, const Acts& acts, std::size_t label,
                bool encoder_too = true) {
    std::vector<T> g(acts.probs);
    g[label] -= T(1);
    std::vector<T> g_pooled;
    head.backward(acts.enc.pooled, g, &g_pooled);
    if (encoder_too) encoder.backward(image, acts.enc, g_pooled);
  }

  std::vector<ParamBlock<T>> params() {
    auto blocks = encoder.params();
    blocks.push_back({"head.w", &head.w, &head.gw});
    blocks.push_back({"head.b", &head.b, &head.gb});
    return blocks;
  }

  std::vector<ParamBlock<T>> head_params() {
    return {{"head.w", &head.w, &head.gw}, {"head.b", &head.b, &head.gb}};
  }
};

/// float <-> double model conversion (gradient checks run in double).
namespace detail {

template <typename U, typename T>
void cast_dense(const Dense<T>& src, Dense<U>& dst) {
  dst.in = src.in;
  dst.out = src.out;
  dst.w.assign(src.w.begin(), src.w.end());
  dst.b.assign(src.b.begin(), src.b.end());
  dst.gw.assign(src.w.size(), U(0));
  dst.gb.assign(src.b.size(), U(0));
}

template <typename U, typename T>
void cast_encoder(const Encoder<T>& src, Encoder<U>& dst) {
  dst.config = src.config;
  dst.convs.resize(src.convs.size());
  for (std::size_t l = 0; l < src.convs.size(); ++l) {
    const auto& s = src.convs[l];
    auto& d = dst.convs[l];
    d.in_c = s.in_c;
    d.out_c = s.out_c;
    d.kernel = s.kernel;
    d.stride = s.stride;
    d.pad = s.pad;
    d.w.assign(s.w.begin(), s.w.end());
    d.b.assign(s.b.begin(), s.b.end());
    d.gw.assign(s.w.size(), U(0));
    d.gb.assign(s.b.size(), U(0));
  }
}

}  // namespace detail

template <typename U, typename T>
MatchModel<U> cast_model(const MatchModel<T>& m) {
  MatchModel<U> out;
  out.l2_normalize_output = m.l2_normalize_output;
  out.proj_layers = m.proj_layers;
  detail::cast_encoder(m.encoder, out.encoder);
  if (m.proj_layers == 2) detail::cast_dense(m.hidden, out.hidden);
  detail::cast_dense(m.proj, out.proj);
  return out;
}

template <typename U, typename T>
ClassifierModel<U> cast_classifier(const ClassifierModel<T>& m) {
  ClassifierModel<U> out;
  out.label_names = m.label_names;
  detail::cast_encoder(m.encoder, out.encoder);
  detail::cast_dense(m.head, out.head);
  return out;
}

}  // namespace wikisat::net
