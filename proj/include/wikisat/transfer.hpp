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
#include <cstdio>
#include <functional>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wikisat/matchnet_train.hpp"

namespace wikisat::eval {

using net::ClassifierModel;
using net::Encoder;
using net::WeakSample;

enum class FinetuneMode { fixed_encoder, full };

inline const char* to_string(FinetuneMode m) {
  return m == FinetuneMode::fixed_encoder ? "fixed" : "full";
}

struct FinetuneOptions {
  std::uint32_t epochs = 20;
  double learning_rate = 1e-3;
  std::uint32_t batch_size = 32;
  std::uint64_t seed = 42;
};

/// Attach a fresh classification head to a pre-trained encoder and train.
/// fixed_encoder updates only the head (encoder parameters stay bitwise
/// identical); full backpropagates through everything.
inline ClassifierModel<float> finetune(const Encoder<float>& pretrained,
                                       const std::vector<WeakSample>& samples,
                                       std::uint32_t num_labels,
                                       FinetuneMode mode,
                                       const FinetuneOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("finetune: empty dataset");
  for (const auto& s : samples)
    if (s.label >= num_labels)
      throw std::invalid_argument("finetune: label out of range");

  ClassifierModel<float> model;
  model.encoder = pretrained;
  Rng rng(hash_mix(opts.seed, 0xF17E));
  model.head.init(pretrained.feature_dim(), num_labels, rng);

  net::Adam<float>::Config adam_cfg;
  adam_cfg.lr = opts.learning_rate;
  net::Adam<float> adam(adam_cfg);
  auto blocks = mode == FinetuneMode::fixed_encoder ? model.head_params()
                                                    : model.params();
  adam.attach(blocks);

  // frozen encoder: features are computed once and the head trains on them
  std::vector<std::vector<float>> features;
  if (mode == FinetuneMode::fixed_encoder) {
    net::EncoderActs<float> acts;
    features.resize(samples.size());
    for (std::size_t i = 0; i < samples.size(); ++i) {
      model.encoder.forward(samples[i].image.data, acts);
      features[i] = acts.pooled;
    }
  }

  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(hash_mix(opts.seed, 0x0D6E));

  typename ClassifierModel<float>::Acts acts;
  std::vector<float> probs, g;
  for (std::uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    shuffle_rng.shuffle(order);
    for (std::size_t begin = 0; begin < order.size();
         begin += opts.batch_size) {
      std::size_t end =
          std::min(order.size(), begin + std::size_t(opts.batch_size));
      net::zero_grads(blocks);
      for (std::size_t i = begin; i < end; ++i) {
        const WeakSample& s = samples[order[i]];
        if (mode == FinetuneMode::fixed_encoder) {
          model.head.forward(features[order[i]], acts.logits);
          net::softmax<float>(acts.logits, probs);
          if (!std::isfinite(probs[s.label]))
            throw TrainingError("finetune: non-finite output");
          g = probs;
          g[s.label] -= 1.0f;
          model.head.backward(features[order[i]], g, nullptr);
        } else {
          model.forward(s.image.data, acts);
          model.backward(s.image.data, acts, s.label, /*encoder_too=*/true);
        }
      }
      net::scale_grads(blocks, 1.0f / static_cast<float>(end - begin));
      adam.step(blocks);
    }
  }
  return model;
}

/// argmax of the class scores; ties resolve to the lowest index.
template <typename T>
std::size_t argmax_lowest(std::span<const T> scores) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < scores.size(); ++i)
    if (scores[i] > scores[best]) best = i;
  return best;
}

inline std::size_t predict_single(const ClassifierModel<float>& model,
                                  const tile::ImageTensor& img) {
  typename ClassifierModel<float>::Acts acts;
  std::span<const float> p = model.forward(img.data, acts);
  return argmax_lowest(p);
}

struct TemporalGroup {
  std::uint64_t area_id = 0;
  std::vector<tile::ImageTensor> images;  // T >= 1, same dims
  std::uint32_t label = 0;
};

/// Mean of the per-image softmax vectors over the group, as double, so the
/// reduction is order-stable; then lowest-index argmax.
inline std::vector<double> temporal_mean_scores(
    const ClassifierModel<float>& model, const TemporalGroup& group) {
  if (group.images.empty())
    throw std::invalid_argument("predict_temporal: empty group");
  typename ClassifierModel<float>::Acts acts;
  std::vector<double> mean;
  for (const auto& img : group.images) {
    std::span<const float> p = model.forward(img.data, acts);
    if (mean.empty()) mean.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) mean[i] += p[i];
  }
  for (double& v : mean) v /= static_cast<double>(group.images.size());
  return mean;
}

inline std::size_t predict_temporal(const ClassifierModel<float>& model,
                                    const TemporalGroup& group) {
  std::vector<double> mean = temporal_mean_scores(model, group);
  return argmax_lowest(std::span<const double>(mean));
}

/// Fraction of samples whose true label scores at least the k-th ranked
/// score (stable rank by index), so ties at the cut count as hits.
inline double topk_accuracy(const std::vector<std::vector<double>>& scores,
                            const std::vector<std::uint32_t>& labels,
                            std::size_t k) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("topk_accuracy: length mismatch");
  if (scores.empty()) throw std::invalid_argument("topk_accuracy: empty input");
  if (k == 0 || k > scores[0].size())
    throw std::invalid_argument("topk_accuracy: bad k");
  std::size_t hits = 0;
  std::vector<double> sorted;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    sorted = scores[i];
    std::nth_element(sorted.begin(), sorted.begin() + (k - 1), sorted.end(),
                     std::greater<double>());
    double kth = sorted[k - 1];
    if (scores[i][labels[i]] >= kth) ++hits;
  }
  return static_cast<double>(hits) / scores.size();
}

struct PerClassMetrics {
  std::uint32_t cls = 0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::uint64_t support = 0;  // true occurrences
  bool absent = false;        // never predicted and never true
};

struct F1Result {
  double macro_f1 = 0.0;
  std::vector<PerClassMetrics> per_class;
};

/// Per-class precision/recall with the 0-convention on empty denominators;
/// macro F1 averages over the whole label space.
inline F1Result f1_score(const std::vector<std::uint32_t>& pred,
                         const std::vector<std::uint32_t>& truth,
                         std::uint32_t num_classes) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("f1_score: length mismatch");
  if (pred.empty()) throw std::invalid_argument("f1_score: empty input");
  std::vector<std::uint64_t> tp(num_classes, 0), fp(num_classes, 0),
      fn(num_classes, 0);
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] >= num_classes || truth[i] >= num_classes)
      throw std::invalid_argument("f1_score: label outside class space");
    if (pred[i] == truth[i])
      ++tp[pred[i]];
    else {
      ++fp[pred[i]];
      ++fn[truth[i]];
    }
  }
  F1Result res;
  double sum = 0.0;
  for (std::uint32_t c = 0; c < num_classes; ++c) {
    PerClassMetrics m;
    m.cls = c;
    m.support = tp[c] + fn[c];
    std::uint64_t pred_count = tp[c] + fp[c];
    m.precision = pred_count == 0 ? 0.0 : double(tp[c]) / pred_count;
    m.recall = m.support == 0 ? 0.0 : double(tp[c]) / m.support;
    m.f1 = (m.precision + m.recall) == 0.0
               ? 0.0
               : 2.0 * m.precision * m.recall / (m.precision + m.recall);
    m.absent = pred_count == 0 && m.support == 0;
    sum += m.f1;
    res.per_class.push_back(m);
  }
  res.macro_f1 = num_classes == 0 ? 0.0 : sum / num_classes;
  return res;
}

/// Intersection over union of two binary masks; two empty masks count as a
/// perfect match.
inline double iou(const std::vector<std::uint8_t>& pred,
                  const std::vector<std::uint8_t>& truth) {
  if (pred.size() != truth.size())
    throw std::invalid_argument("iou: mask dimension mismatch");
  std::uint64_t inter = 0, uni = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    bool p = pred[i] != 0, t = truth[i] != 0;
    inter += p && t;
    uni += p || t;
  }
  if (uni == 0) return 1.0;
  return static_cast<double>(inter) / uni;
}

struct MetricReport {
  double top1 = 0.0;
  double top5 = 0.0;
  double f1_macro = 0.0;
  std::vector<PerClassMetrics> per_class;
  std::optional<double> iou;
  std::uint64_t n_samples = 0;
  std::string mode;  // "single" or "temporal"
};

namespace detail {

inline MetricReport report_from_scores(
    const std::vector<std::vector<double>>& scores,
    const std::vector<std::uint32_t>& labels, std::uint32_t num_classes,
    const std::string& mode) {
  MetricReport rep;
  rep.mode = mode;
  rep.n_samples = scores.size();
  rep.top1 = topk_accuracy(scores, labels, 1);
  rep.top5 = topk_accuracy(scores, labels,
                           std::min<std::size_t>(5, num_classes));
  std::vector<std::uint32_t> preds(scores.size());
  for (std::size_t i = 0; i < scores.size(); ++i)
    preds[i] = static_cast<std::uint32_t>(
        argmax_lowest(std::span<const double>(scores[i])));
  F1Result f1 = f1_score(preds, labels, num_classes);
  rep.f1_macro = f1.macro_f1;
  rep.per_class = std::move(f1.per_class);
  return rep;
}

}  // namespace detail

/// Single-image protocol: score every sample independently.
inline MetricReport evaluate_single(const ClassifierModel<float>& model,
                                    const std::vector<WeakSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("evaluate: empty test set");
  typename ClassifierModel<float>::Acts acts;
  std::vector<std::vector<double>> scores(samples.size());
  std::vector<std::uint32_t> labels(samples.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::span<const float> p = model.forward(samples[i].image.data, acts);
    scores[i].assign(p.begin(), p.end());
    labels[i] = samples[i].label;
  }
  return detail::report_from_scores(scores, labels, model.head.out, "single");
}

/// Temporal protocol: average softmax over each group, then score the mean.
inline MetricReport evaluate_temporal(const ClassifierModel<float>& model,
                                      const std::vector<TemporalGroup>& groups) {
  if (groups.empty()) throw std::invalid_argument("evaluate: no groups");
  std::vector<std::vector<double>> scores(groups.size());
  std::vector<std::uint32_t> labels(groups.size());
  for (std::size_t i = 0; i < groups.size(); ++i) {
    scores[i] = temporal_mean_scores(model, groups[i]);
    labels[i] = groups[i].label;
  }
  return detail::report_from_scores(scores, labels, model.head.out, "temporal");
}

inline nlohmann::ordered_json report_to_json(const MetricReport& rep,
                                             const std::vector<std::string>&
                                                 label_names = {}) {
  nlohmann::ordered_json j;
  j["top1"] = rep.top1;
  j["top5"] = rep.top5;
  j["f1_macro"] = rep.f1_macro;
  j["f1_averaging"] = "macro";
  j["n_samples"] = rep.n_samples;
  j["mode"] = rep.mode;
  nlohmann::ordered_json classes = nlohmann::ordered_json::array();
  for (const auto& m : rep.per_class) {
    nlohmann::ordered_json c;
    c["class"] = m.cls;
    if (m.cls < label_names.size()) c["label"] = label_names[m.cls];
    c["precision"] = m.precision;
    c["recall"] = m.recall;
    c["f1"] = m.f1;
    c["support"] = m.support;
    c["absent"] = m.absent;
    classes.push_back(c);
  }
  j["per_class"] = classes;
  if (rep.iou) j["iou"] = *rep.iou;
  return j;
}

inline void report_to_csv(std::ostream& os, const MetricReport& rep,
                          const std::vector<std::string>& label_names = {}) {
  os << "class,label,precision,recall,f1,support,absent\n";
  char buf[256];
  for (const auto& m : rep.per_class) {
    std::string name = m.cls < label_names.size() ? label_names[m.cls] : "";
    std::snprintf(buf, sizeof(buf), "%u,%s,%.6f,%.6f,%.6f,%llu,%d\n", m.cls,
                  name.c_str(), m.precision, m.recall, m.f1,
                  static_cast<unsigned long long>(m.support), m.absent ? 1 : 0);
    os << buf;
  }
}

}  // namespace wikisat::eval
