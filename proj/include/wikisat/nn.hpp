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

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "wikisat/rng.hpp"

namespace wikisat::net {

/// A named parameter block with its gradient accumulator. Blocks are listed
/// in declaration order; checkpoints and optimizers rely on that order.
template <typename T>
struct ParamBlock {
  std::string name;
  std::vector<T>* w;
  std::vector<T>* g;
};

template <typename T>
void zero_grads(const std::vector<ParamBlock<T>>& blocks) {
  for (const auto& b : blocks) std::fill(b.g->begin(), b.g->end(), T(0));
}

template <typename T>
void scale_grads(const std::vector<ParamBlock<T>>& blocks, T factor) {
  for (const auto& b : blocks)
    for (T& g : *b.g) g *= factor;
}

template <typename T>
std::size_t param_count(const std::vector<ParamBlock<T>>& blocks) {
  std::size_t n = 0;
  for (const auto& b : blocks) n += b.w->size();
  return n;
}

template <typename T>
struct Conv2d {
  std::uint32_t in_c = 0, out_c = 0, kernel = 3, stride = 2, pad = 1;
  std::vector<T> w;  // [out_c][kernel][kernel][in_c]
  std::vector<T> b;  // [out_c]
  std::vector<T> gw, gb;

  void init(std::uint32_t in_channels, std::uint32_t out_channels, Rng& rng) {
    in_c = in_channels;
    out_c = out_channels;
    w.resize(std::size_t(out_c) * kernel * kernel * in_c);
    b.assign(out_c, T(0));
    gw.assign(w.size(), T(0));
    gb.assign(out_c, T(0));
    double bound = 1.0 / std::sqrt(double(kernel) * kernel * in_c);
    for (T& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
  }

  std::uint32_t out_dim(std::uint32_t in_dim) const {
    return (in_dim + 2 * pad - kernel) / stride + 1;
  }

  // x: in_h x in_w x in_c (HWC), out: out_h x out_w x out_c
  void forward(std::span<const T> x, std::uint32_t in_h, std::uint32_t in_w,
               std::vector<T>& out) const {
    std::uint32_t oh = out_dim(in_h), ow = out_dim(in_w);
    out.assign(std::size_t(oh) * ow * out_c, T(0));
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        for (std::uint32_t oc = 0; oc < out_c; ++oc) {
          T acc = b[oc];
          for (std::uint32_t ky = 0; ky < kernel; ++ky) {
            std::int64_t iy = std::int64_t(oy) * stride + ky - pad;
            if (iy < 0 || iy >= in_h) continue;
            for (std::uint32_t kx = 0; kx < kernel; ++kx) {
              std::int64_t ix = std::int64_t(ox) * stride + kx - pad;
              if (ix < 0 || ix >= in_w) continue;
              const T* xr = &x[(std::size_t(iy) * in_w + ix) * in_c];
              const T* wr = &w[((std::size_t(oc) * kernel + ky) * kernel + kx) *
                               in_c];
              for (std::uint32_t ic = 0; ic < in_c; ++ic)
                acc += wr[ic] * xr[ic];
            }
          }
          out[(std::size_t(oy) * ow + ox) * out_c + oc] = acc;
        }
      }
    }
  }

  // Accumulates gw/gb; writes gradient w.r.t. x into gx when non-null.
  void backward(std::span<const T> x, std::uint32_t in_h, std::uint32_t in_w,
                std::span<const T> gout, std::vector<T>* gx) {
    std::uint32_t oh = out_dim(in_h), ow = out_dim(in_w);
    if (gx) gx->assign(std::size_t(in_h) * in_w * in_c, T(0));
    for (std::uint32_t oy = 0; oy < oh; ++oy) {
      for (std::uint32_t ox = 0; ox < ow; ++ox) {
        for (std::uint32_t oc = 0; oc < out_c; ++oc) {
          T go = gout[(std::size_t(oy) * ow + ox) * out_c + oc];
          if (go == T(0)) continue;
          gb[oc] += go;
          for (std::uint32_t ky = 0; ky < kernel; ++ky) {
            std::int64_t iy = std::int64_t(oy) * stride + ky - pad;
            if (iy < 0 || iy >= in_h) continue;
            for (std::uint32_t kx = 0; kx < kernel; ++kx) {
              std::int64_t ix = std::int64_t(ox) * stride + kx - pad;
              if (ix < 0 || ix >= in_w) continue;
              const T* xr = &x[(std::size_t(iy) * in_w + ix) * in_c];
              T* wr = &gw[((std::size_t(oc) * kernel + ky) * kernel + kx) *
                          in_c];
              for (std::uint32_t ic = 0; ic < in_c; ++ic)
                wr[ic] += go * xr[ic];
              if (gx) {
                const T* wv = &w[((std::size_t(oc) * kernel + ky) * kernel +
                                  kx) *
                                 in_c];
                T* gxr = &(*gx)[(std::size_t(iy) * in_w + ix) * in_c];
                for (std::uint32_t ic = 0; ic < in_c; ++ic)
                  gxr[ic] += go * wv[ic];
              }
            }
          }
        }
      }
    }
  }
};

template <typename T>
struct Dense {
  std::uint32_t in = 0, out = 0;
  std::vector<T> w;  // [out][in]
  std::vector<T> b;
  std::vector<T> gw, gb;

  void init(std::uint32_t in_dim, std::uint32_t out_dim, Rng& rng) {
    in = in_dim;
    out = out_dim;
    w.resize(std::size_t(out) * in);
    b.assign(out, T(0));
    gw.assign(w.size(), T(0));
    gb.assign(out, T(0));
    double bound = 1.0 / std::sqrt(double(in));
    for (T& x : w) x = static_cast<T>(rng.uniform(-bound, bound));
  }

  void forward(std::span<const T> x, std::vector<T>& y) const {
    y.assign(out, T(0));
    for (std::uint32_t o = 0; o < out; ++o) {
      T acc = b[o];
      const T* wr = &w[std::size_t(o) * in];
      for (std::uint32_t i = 0; i < in; ++i) acc += wr[i] * x[i];
      y[o] = acc;
    }
  }

  void backward(std::span<const T> x, std::span<const T> gy,
                std::vector<T>* gx) {
    if (gx) gx->assign(in, T(0));
    for (std::uint32_t o = 0; o < out; ++o) {
      T go = gy[o];
      if (go == T(0)) continue;
      gb[o] += go;
      T* gwr = &gw[std::size_t(o) * in];
      const T* wr = &w[std::size_t(o) * in];
      for (std::uint32_t i = 0; i < in; ++i) {
        gwr[i] += go * x[i];
        if (gx) (*gx)[i] += go * wr[i];
      }
    }
  }
};

template <typename T>
void relu_inplace(std::vector<T>& v) {
  for (T& x : v)
    if (x < T(0)) x = T(0);
}

// dL/d(pre-activation) from dL/d(post) and the pre-activation values.
template <typename T>
void relu_backward(std::span<const T> pre, std::vector<T>& g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (pre[i] <= T(0)) g[i] = T(0);
}

template <typename T>
void softmax(std::span<const T> logits, std::vector<T>& p) {
  p.assign(logits.size(), T(0));
  T mx = logits[0];
  for (T v : logits) mx = std::max(mx, v);
  T sum = 0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    p[i] = std::exp(logits[i] - mx);
    sum += p[i];
  }
  for (T& v : p) v /= sum;
}

/// -log p[label]; p must be a softmax output.
template <typename T>
T cross_entropy_loss(std::span<const T> p, std::size_t label) {
  if (label >= p.size())
    throw std::invalid_argument("cross_entropy_loss: label out of range");
  T q = p[label];
  const T floor = std::numeric_limits<T>::min();
  return -std::log(q < floor ? floor : q);
}

/// Adam over registered parameter blocks. State is keyed by registration
/// order; a zero gradient leaves its parameters untouched.
template <typename T>
class Adam {
 public:
  struct Config {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
  };

  explicit Adam(Config config) : config_(config) {}

  void attach(const std::vector<ParamBlock<T>>& blocks) {
    m_.resize(blocks.size());
    v_.resize(blocks.size());
    for (std::size_t i = 0; i < blocks.size(); ++i) {
      m_[i].assign(blocks[i].w->size(), T(0));
      v_[i].assign(blocks[i].w->size(), T(0));
    }
    t_ = 0;
  }

  void step(const std::vector<ParamBlock<T>>& blocks) {
    if (m_.size() != blocks.size())
      throw std::logic_error("Adam::step before attach");
    ++t_;
    double bc1 = 1.0 - std::pow(config_.beta1, double(t_));
    double bc2 = 1.0 - std::pow(config_.beta2, double(t_));
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      std::vector<T>& w = *blocks[bi].w;
      std::vector<T>& g = *blocks[bi].g;
      for (std::size_t i = 0; i < w.size(); ++i) {
        m_[bi][i] = static_cast<T>(config_.beta1 * m_[bi][i] +
                                   (1.0 - config_.beta1) * g[i]);
        v_[bi][i] = static_cast<T>(config_.beta2 * v_[bi][i] +
                                   (1.0 - config_.beta2) * g[i] * g[i]);
        double mhat = m_[bi][i] / bc1;
        double vhat = v_[bi][i] / bc2;
        w[i] -= static_cast<T>(config_.lr * mhat /
                               (std::sqrt(vhat) + config_.eps));
      }
    }
  }

  std::uint64_t step_count() const { return t_; }

 private:
  Config config_;
  std::vector<std::vector<T>> m_, v_;
  std::uint64_t t_ = 0;
};

}  // namespace wikisat::net
