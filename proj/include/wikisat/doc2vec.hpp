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
#include <istream>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "wikisat/common.hpp"
#include "wikisat/rng.hpp"
#include "wikisat/vec.hpp"

namespace wikisat::doc2vec {

/// Bit-exact tokenization rule shared by training and inference:
/// lowercase, split on non-alphanumeric bytes, drop empty tokens.
inline std::vector<std::string> tokenize(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : text) {
    if (is_ascii_alnum(static_cast<unsigned char>(c))) {
      cur.push_back(ascii_lower(c));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

struct Vocabulary {
  std::map<std::string, std::uint32_t> token_to_id;
  std::vector<std::string> tokens;       // id -> token
  std::vector<std::uint64_t> counts;     // id -> frequency
  std::uint64_t total_tokens = 0;        // kept-token occurrences
  std::uint64_t min_count = 1;

  std::uint32_t size() const { return static_cast<std::uint32_t>(tokens.size()); }

  std::int64_t lookup(const std::string& tok) const {
    auto it = token_to_id.find(tok);
    return it == token_to_id.end() ? -1 : static_cast<std::int64_t>(it->second);
  }
};

/// Count, drop tokens below min_count, assign dense ids by frequency
/// (ties broken by token). Throws when nothing survives.
inline Vocabulary build_vocab(const std::vector<std::vector<std::string>>& docs,
                              std::uint64_t min_count) {
  if (docs.empty()) throw std::invalid_argument("build_vocab: empty corpus");
  std::map<std::string, std::uint64_t> freq;
  for (const auto& doc : docs)
    for (const auto& tok : doc) ++freq[tok];

  std::vector<std::pair<std::string, std::uint64_t>> kept;
  for (const auto& [tok, n] : freq)
    if (n >= min_count) kept.emplace_back(tok, n);
  if (kept.empty())
    throw std::invalid_argument("build_vocab: empty vocabulary after min_count");
  std::sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary v;
  v.min_count = min_count;
  for (std::uint32_t id = 0; id < kept.size(); ++id) {
    v.token_to_id[kept[id].first] = id;
    v.tokens.push_back(kept[id].first);
    v.counts.push_back(kept[id].second);
    v.total_tokens += kept[id].second;
  }
  return v;
}

struct TrainConfig {
  std::uint32_t k = 300;
  std::uint32_t epochs = 120;     // desk-scale corpora need many passes
  double learning_rate = 0.05;    // linearly decayed per epoch
  std::uint32_t negatives_per_positive = 5;
  std::uint64_t min_count = 2;
  double subsample_threshold = 1e-4;
  std::uint64_t seed = 42;
};

template <typename T>
T sigmoid(T x) {
  return T(1) / (T(1) + std::exp(-x));
}

/// Negative-sampling logistic loss for one (doc, word) pair with label
/// y in {0,1}:  L = -[y log s(u) + (1-y) log(1-s(u))],  u = d . w.
template <typename T>
T pair_loss(std::span<const T> d, std::span<const T> w, int y) {
  T u = dot(d, w);
  T s = sigmoid(u);
  return y ? -std::log(s) : -std::log(T(1) - s);
}

/// Analytic gradients of pair_loss: dL/dd = (s(u) - y) w, dL/dw = (s(u) - y) d.
template <typename T>
void pair_grads(std::span<const T> d, std::span<const T> w, int y,
                std::span<T> grad_d, std::span<T> grad_w) {
  T err = sigmoid(dot(d, w)) - T(y);
  for (std::size_t i = 0; i < d.size(); ++i) {
    grad_d[i] = err * w[i];
    grad_w[i] = err * d[i];
  }
}

/// Per-epoch linear decay with a small floor.
inline double epoch_learning_rate(const TrainConfig& config,
                                  std::uint32_t epoch) {
  double frac = config.epochs == 0
                    ? 0.0
                    : static_cast<double>(epoch) / config.epochs;
  return std::max(config.learning_rate * (1.0 - frac),
                  config.learning_rate * 1e-4);
}

struct ParagraphVectorModel {
  std::uint32_t k = 0;
  std::uint64_t rng_seed = 0;
  Vocabulary vocab;
  std::vector<float> doc_vectors;          // N x K row-major
  std::vector<float> word_output_vectors;  // V x K row-major
  std::vector<double> noise_cdf;           // cumulative freq^(3/4) over ids

  std::uint32_t doc_count() const {
    return k == 0 ? 0 : static_cast<std::uint32_t>(doc_vectors.size() / k);
  }

  std::span<const float> doc_vector(std::uint32_t i) const {
    return {doc_vectors.data() + std::size_t(i) * k, k};
  }
  std::span<float> doc_vector(std::uint32_t i) {
    return {doc_vectors.data() + std::size_t(i) * k, k};
  }
  std::span<const float> word_vector(std::uint32_t i) const {
    return {word_output_vectors.data() + std::size_t(i) * k, k};
  }
  std::span<float> word_vector(std::uint32_t i) {
    return {word_output_vectors.data() + std::size_t(i) * k, k};
  }

  void rebuild_noise_cdf() {
    noise_cdf.resize(vocab.size());
    double acc = 0.0;
    for (std::uint32_t i = 0; i < vocab.size(); ++i) {
      acc += std::pow(static_cast<double>(vocab.counts[i]), 0.75);
      noise_cdf[i] = acc;
    }
  }

  std::uint32_t sample_noise(Rng& rng) const {
    double target = rng.uniform() * noise_cdf.back();
    auto it = std::upper_bound(noise_cdf.begin(), noise_cdf.end(), target);
    if (it == noise_cdf.end()) --it;
    return static_cast<std::uint32_t>(it - noise_cdf.begin());
  }
};

namespace detail {

inline void init_uniform(std::span<float> v, std::uint32_t k, Rng& rng) {
  double half = 0.5 / k;
  for (float& x : v) x = static_cast<float>(rng.uniform(-half, half));
}

inline double keep_probability(std::uint64_t count, std::uint64_t total,
                               double threshold) {
  if (threshold <= 0.0) return 1.0;
  double f = static_cast<double>(count) / static_cast<double>(total);
  double p = std::sqrt(threshold / f) + threshold / f;
  return p < 1.0 ? p : 1.0;
}

// One PV-DBOW step for a (doc, target-word) pair plus negatives. The doc
// update is accumulated against pre-update word vectors and applied by the
// caller once per token.
inline void train_pair(ParagraphVectorModel& m, std::span<float> dvec,
                       std::uint32_t target, float lr, std::uint32_t negatives,
                       Rng& rng, std::vector<float>& doc_delta) {
  const std::uint32_t k = m.k;
  for (std::uint32_t s = 0; s <= negatives; ++s) {
    std::uint32_t w;
    float y;
    if (s == 0) {
      w = target;
      y = 1.0f;
    } else {
      w = m.sample_noise(rng);
      if (w == target) continue;
      y = 0.0f;
    }
    std::span<float> wvec = m.word_vector(w);
    float u = 0.0f;
    for (std::uint32_t i = 0; i < k; ++i) u += wvec[i] * dvec[i];
    float g = lr * (y - sigmoid(u));
    for (std::uint32_t i = 0; i < k; ++i) {
      doc_delta[i] += g * wvec[i];
      wvec[i] += g * dvec[i];
    }
  }
}

inline bool all_finite(std::span<const float> v) {
  for (float x : v)
    if (!std::isfinite(x)) return false;
  return true;
}

}  // namespace detail

/// PV-DBOW training with negative sampling. Deterministic for a given seed
/// (single-threaded schedule).
inline ParagraphVectorModel train(
    const std::vector<std::vector<std::string>>& docs,
    const TrainConfig& config) {
  ParagraphVectorModel m;
  m.k = config.k;
  m.rng_seed = config.seed;
  m.vocab = build_vocab(docs, config.min_count);
  m.rebuild_noise_cdf();

  Rng rng(config.seed);
  m.doc_vectors.resize(std::size_t(docs.size()) * config.k);
  detail::init_uniform(m.doc_vectors, config.k, rng);
  m.word_output_vectors.resize(std::size_t(m.vocab.size()) * config.k);
  detail::init_uniform(m.word_output_vectors, config.k, rng);

  // token ids per doc, resolved once
  std::vector<std::vector<std::uint32_t>> ids(docs.size());
  for (std::size_t d = 0; d < docs.size(); ++d)
    for (const auto& tok : docs[d]) {
      std::int64_t id = m.vocab.lookup(tok);
      if (id >= 0) ids[d].push_back(static_cast<std::uint32_t>(id));
    }

  std::vector<float> doc_delta(config.k);
  for (std::uint32_t epoch = 0; epoch < config.epochs; ++epoch) {
    float lr = static_cast<float>(epoch_learning_rate(config, epoch));
    for (std::size_t d = 0; d < docs.size(); ++d) {
      std::span<float> dvec = m.doc_vector(static_cast<std::uint32_t>(d));
      for (std::uint32_t target : ids[d]) {
        double keep = detail::keep_probability(m.vocab.counts[target],
                                               m.vocab.total_tokens,
                                               config.subsample_threshold);
        if (keep < 1.0 && rng.uniform() >= keep) continue;
        std::fill(doc_delta.begin(), doc_delta.end(), 0.0f);
        detail::train_pair(m, dvec, target, lr,
                           config.negatives_per_positive, rng, doc_delta);
        for (std::uint32_t i = 0; i < config.k; ++i) dvec[i] += doc_delta[i];
      }
    }
    if (!detail::all_finite(m.doc_vectors) ||
        !detail::all_finite(m.word_output_vectors))
      throw TrainingError("doc2vec training diverged at epoch " +
                          std::to_string(epoch));
  }
  return m;
}

/// Optimize a fresh doc vector against the frozen word vectors. The caller's
/// tokens select the targets; out-of-vocabulary-only input is an error.
inline std::vector<float> infer_vector(const ParagraphVectorModel& model,
                                       const std::vector<std::string>& tokens,
                                       std::uint32_t steps,
                                       const TrainConfig& config = {}) {
  std::vector<std::uint32_t> ids;
  for (const auto& tok : tokens) {
    std::int64_t id = model.vocab.lookup(tok);
    if (id >= 0) ids.push_back(static_cast<std::uint32_t>(id));
  }
  if (ids.empty())
    throw std::invalid_argument("infer_vector: no in-vocabulary token");

  std::string joined;
  for (const auto& t : tokens) {
    joined += t;
    joined += ' ';
  }
  Rng rng(hash_mix(model.rng_seed, fnv1a64(joined)));
  std::vector<float> dvec(model.k);
  detail::init_uniform(dvec, model.k, rng);

  std::vector<float> doc_delta(model.k);
  for (std::uint32_t step = 0; step < steps; ++step) {
    double frac = static_cast<double>(step) / steps;
    float lr = static_cast<float>(
        std::max(config.learning_rate * (1.0 - frac),
                 config.learning_rate * 1e-4));
    for (std::uint32_t target : ids) {
      std::fill(doc_delta.begin(), doc_delta.end(), 0.0f);
      for (std::uint32_t s = 0; s <= config.negatives_per_positive; ++s) {
        std::uint32_t w;
        float y;
        if (s == 0) {
          w = target;
          y = 1.0f;
        } else {
          w = model.sample_noise(rng);
          if (w == target) continue;
          y = 0.0f;
        }
        std::span<const float> wvec = model.word_vector(w);
        float u = 0.0f;
        for (std::uint32_t i = 0; i < model.k; ++i) u += wvec[i] * dvec[i];
        float g = lr * (y - sigmoid(u));
        for (std::uint32_t i = 0; i < model.k; ++i)
          doc_delta[i] += g * wvec[i];
      }
      for (std::uint32_t i = 0; i < model.k; ++i) dvec[i] += doc_delta[i];
    }
  }
  return dvec;
}

// ---------------------------------------------------------------------------
// Model container, little-endian: magic "PVDM", u32 version, u32 K, u32 V,
// u32 N, u64 rng_seed, vocabulary entries (u32 byte length, UTF-8 bytes,
// u64 count), then f32 matrices row-major: doc_vectors, word_output_vectors.
// Counts and seed ride along so the sampling distribution (and with it
// inference) survives a round-trip.

inline constexpr std::uint32_t kModelVersion = 1;

inline void save_model(std::ostream& os, const ParagraphVectorModel& m) {
  os.write("PVDM", 4);
  write_u32(os, kModelVersion);
  write_u32(os, m.k);
  write_u32(os, m.vocab.size());
  write_u32(os, m.doc_count());
  write_u64(os, m.rng_seed);
  for (std::uint32_t i = 0; i < m.vocab.size(); ++i) {
    const std::string& tok = m.vocab.tokens[i];
    write_u32(os, static_cast<std::uint32_t>(tok.size()));
    os.write(tok.data(), static_cast<std::streamsize>(tok.size()));
    write_u64(os, m.vocab.counts[i]);
  }
  write_f32_array(os, m.doc_vectors.data(), m.doc_vectors.size());
  write_f32_array(os, m.word_output_vectors.data(),
                  m.word_output_vectors.size());
}

inline ParagraphVectorModel load_model(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "PVDM")
    throw std::runtime_error("not a paragraph-vector model file");
  std::uint32_t version = read_u32(is);
  if (version != kModelVersion)
    throw std::runtime_error("unsupported model version " +
                             std::to_string(version));
  ParagraphVectorModel m;
  m.k = read_u32(is);
  std::uint32_t v = read_u32(is);
  std::uint32_t n = read_u32(is);
  m.rng_seed = read_u64(is);
  m.vocab.min_count = 1;
  for (std::uint32_t i = 0; i < v; ++i) {
    std::uint32_t len = read_u32(is);
    std::string tok(len, '\0');
    if (!is.read(tok.data(), len))
      throw std::runtime_error("truncated vocabulary entry");
    std::uint64_t count = read_u64(is);
    m.vocab.token_to_id[tok] = i;
    m.vocab.tokens.push_back(std::move(tok));
    m.vocab.counts.push_back(count);
    m.vocab.total_tokens += count;
  }
  m.doc_vectors.resize(std::size_t(n) * m.k);
  read_f32_array(is, m.doc_vectors.data(), m.doc_vectors.size());
  m.word_output_vectors.resize(std::size_t(v) * m.k);
  read_f32_array(is, m.word_output_vectors.data(),
                 m.word_output_vectors.size());
  m.rebuild_noise_cdf();
  return m;
}

}  // namespace wikisat::doc2vec
