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

#include <cstdio>
#include <numeric>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "wikisat/matchnet.hpp"

namespace wikisat::net {

struct MatchSample {
  tile::ImageTensor image;
  std::vector<float> target;  // z_t, the paired document embedding
};

struct WeakSample {
  tile::ImageTensor image;
  std::uint32_t label = 0;
};

struct TrainOptions {
  EncoderConfig encoder;
  std::uint32_t epochs = 50;
  double learning_rate = 1e-4;
  std::uint32_t batch_size = 64;
  std::uint64_t seed = 42;
  bool l2_normalize_output = true;
  std::uint32_t proj_layers = 1;
  Adam<float>::Config adam() const {
    Adam<float>::Config c;
    c.lr = learning_rate;
    return c;
  }
};

struct TrainLogRow {
  std::uint32_t epoch = 0;
  double mean_loss = 0.0;
  double metric = 0.0;  // mean D for matching, accuracy for weak labels
  double lr = 0.0;
};

inline void write_train_log(std::ostream& os,
                            const std::vector<TrainLogRow>& rows,
                            const std::string& metric_name) {
  os << "epoch,mean_loss," << metric_name << ",lr\n";
  char buf[128];
  for (const auto& r : rows) {
    std::snprintf(buf, sizeof(buf), "%u,%.6f,%.6f,%.8f\n", r.epoch,
                  r.mean_loss, r.metric, r.lr);
    os << buf;
  }
}

struct MatchTrainResult {
  MatchModel<float> model;
  std::vector<TrainLogRow> log;
};

/// Minimize mean (1 - D) over batches with Adam. Per-epoch mean D is
/// recorded as the metric; the run is deterministic for a fixed seed.
inline MatchTrainResult train_match(const std::vector<MatchSample>& samples,
                                    const TrainOptions& opts) {
  if (samples.empty())
    throw std::invalid_argument("train_match: empty dataset");
  std::uint32_t k = static_cast<std::uint32_t>(samples[0].target.size());
  for (const auto& s : samples) {
    if (s.target.size() != k)
      throw std::invalid_argument("train_match: inconsistent target dim");
    if (l2_norm(std::span<const float>(s.target)) == 0.0f)
      throw std::invalid_argument("train_match: zero target vector");
    if (s.image.height != opts.encoder.in_h ||
        s.image.width != opts.encoder.in_w ||
        s.image.channels != opts.encoder.in_c)
      throw std::invalid_argument("train_match: image does not fit encoder");
  }

  MatchTrainResult out;
  out.model.init(opts.encoder, k, opts.seed, opts.l2_normalize_output,
                 opts.proj_layers);
  auto blocks = out.model.params();
  Adam<float> adam(opts.adam());
  adam.attach(blocks);

  Rng rng(hash_mix(opts.seed, 0x5EED));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  typename MatchModel<float>::Acts acts;
  std::vector<float> gz(k);
  std::uint64_t step = 0;
  for (std::uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0, epoch_d = 0.0;
    std::size_t seen = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += opts.batch_size) {
      std::size_t end = std::min(order.size(),
                                 begin + std::size_t(opts.batch_size));
      zero_grads(blocks);
      std::size_t used = 0;
      for (std::size_t i = begin; i < end; ++i) {
        const MatchSample& s = samples[order[i]];
        std::span<const float> z = out.model.forward(s.image.data, acts);
        float zn = l2_norm(z);
        if (zn == 0.0f) {
          // fully dead projection: D treated as 0, no gradient to push
          epoch_loss += 1.0;
          ++seen;
          continue;
        }
        float loss = match_loss(z, std::span<const float>(s.target));
        if (!std::isfinite(loss))
          throw TrainingError("train_match: non-finite loss at step " +
                              std::to_string(step));
        match_loss_grad(z, std::span<const float>(s.target),
                        std::span<float>(gz));
        out.model.backward(s.image.data, acts, gz);
        epoch_loss += loss;
        epoch_d += 1.0 - loss;
        ++seen;
        ++used;
      }
      if (used > 0) {
        scale_grads(blocks, 1.0f / static_cast<float>(used));
        adam.step(blocks);
      }
      ++step;
    }
    out.log.push_back({epoch, epoch_loss / seen, epoch_d / seen,
                       opts.learning_rate});
  }
  return out;
}

struct WeakTrainResult {
  ClassifierModel<float> model;
  std::vector<TrainLogRow> log;
};

/// Cross-entropy training of the encoder + classification head.
inline WeakTrainResult train_weak(const std::vector<WeakSample>& samples,
                                  std::uint32_t num_labels,
                                  const TrainOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("train_weak: empty dataset");
  for (const auto& s : samples)
    if (s.label >= num_labels)
      throw std::invalid_argument("train_weak: label out of range");

  WeakTrainResult out;
  out.model.init(opts.encoder, num_labels, opts.seed);
  auto blocks = out.model.params();
  Adam<float> adam(opts.adam());
  adam.attach(blocks);

  Rng rng(hash_mix(opts.seed, 0x5EED));
  std::vector<std::size_t> order(samples.size());
  std::iota(order.begin(), order.end(), 0);

  typename ClassifierModel<float>::Acts acts;
  std::uint64_t step = 0;
  for (std::uint32_t epoch = 0; epoch < opts.epochs; ++epoch) {
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t correct = 0;
    for (std::size_t begin = 0; begin < order.size();
         begin += opts.batch_size) {
      std::size_t end = std::min(order.size(),
                                 begin + std::size_t(opts.batch_size));
      zero_grads(blocks);
      for (std::size_t i = begin; i < end; ++i) {
        const WeakSample& s = samples[order[i]];
        std::span<const float> p = out.model.forward(s.image.data, acts);
        float loss = cross_entropy_loss(p, s.label);
        if (!std::isfinite(loss))
          throw TrainingError("train_weak: non-finite loss at step " +
                              std::to_string(step));
        std::size_t arg = 0;
        for (std::size_t c = 1; c < p.size(); ++c)
          if (p[c] > p[arg]) arg = c;
        if (arg == s.label) ++correct;
        out.model.backward(s.image.data, acts, s.label);
        epoch_loss += loss;
      }
      std::size_t used = end - begin;
      scale_grads(blocks, 1.0f / static_cast<float>(used));
      adam.step(blocks);
      ++step;
    }
    out.log.push_back({epoch, epoch_loss / samples.size(),
                       double(correct) / samples.size(), opts.learning_rate});
  }
  return out;
}

// ---------------------------------------------------------------------------
// Finite-difference gradient verification (double precision).

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t excluded = 0;  // FD interval crossed a relu kink
  double tolerance = 0.0;
  bool pass = false;
};

namespace detail {

// Central differences are only valid where the loss is smooth, so parameters
// whose +-eps evaluations flip any rectifier are excluded and replaced by the
// next candidate. The activation sign pattern doubles as the detector.
template <typename LossFn>
GradCheckReport fd_check(std::vector<ParamBlock<double>>& blocks,
                         const std::vector<double>& analytic, LossFn&& loss_fn,
                         double tolerance, std::size_t max_params,
                         std::uint64_t seed) {
  constexpr double kStep = 1e-5;
  std::uint64_t center_sig = 0;
  loss_fn(&center_sig);

  std::vector<std::pair<std::size_t, std::size_t>> flat;  // block, offset
  for (std::size_t bi = 0; bi < blocks.size(); ++bi)
    for (std::size_t i = 0; i < blocks[bi].w->size(); ++i)
      flat.emplace_back(bi, i);
  Rng rng(hash_mix(seed, 0xFDC3));
  rng.shuffle(flat);

  GradCheckReport report;
  report.tolerance = tolerance;
  std::vector<std::size_t> block_base(blocks.size(), 0);
  for (std::size_t bi = 0, acc = 0; bi < blocks.size(); ++bi) {
    block_base[bi] = acc;
    acc += blocks[bi].w->size();
  }

  for (const auto& [bi, off] : flat) {
    if (report.checked >= max_params) break;
    double& theta = (*blocks[bi].w)[off];
    double saved = theta;

    std::uint64_t sig_plus = 0, sig_minus = 0;
    theta = saved + kStep;
    double lp = loss_fn(&sig_plus);
    theta = saved - kStep;
    double lm = loss_fn(&sig_minus);
    theta = saved;

    if (sig_plus != center_sig || sig_minus != center_sig) {
      ++report.excluded;
      continue;
    }
    double fd = (lp - lm) / (2.0 * kStep);
    double an = analytic[block_base[bi] + off];
    double denom = std::max(std::abs(fd) + std::abs(an), 1e-8);
    double rel = std::abs(fd - an) / denom;
    report.max_rel_error = std::max(report.max_rel_error, rel);
    ++report.checked;
  }
  report.pass = report.checked > 0 && report.max_rel_error < tolerance;
  return report;
}

inline std::uint64_t sign_signature(std::uint64_t sig,
                                    std::span<const double> pre) {
  for (double v : pre) {
    sig ^= v > 0.0 ? 0x9E3779B97F4A7C15ULL : 0xC2B2AE3D27D4EB4FULL;
    sig *= 0x100000001b3ULL;
  }
  return sig;
}

template <typename T>
std::vector<double> flatten_grads(const std::vector<ParamBlock<T>>& blocks) {
  std::vector<double> out;
  for (const auto& b : blocks)
    for (T g : *b.g) out.push_back(static_cast<double>(g));
  return out;
}

}  // namespace detail

/// Verify the match-loss backward pass against central finite differences on
/// up to `max_params` randomly chosen parameters.
inline GradCheckReport gradient_check_match(MatchModel<double>& model,
                                            const std::vector<double>& image,
                                            const std::vector<double>& target,
                                            double tolerance = 1e-4,
                                            std::size_t max_params = 200,
                                            std::uint64_t seed = 42) {
  auto blocks = model.params();

  typename MatchModel<double>::Acts acts;
  auto loss_fn = [&](std::uint64_t* sig) {
    std::span<const double> z = model.forward(image, acts);
    if (sig) {
      std::uint64_t s = 0xcbf29ce484222325ULL;
      for (const auto& pre : acts.enc.pre)
        s = detail::sign_signature(s, pre);
      if (model.proj_layers == 2)
        s = detail::sign_signature(s, acts.hidden_pre);
      s = detail::sign_signature(s, acts.pre);
      *sig = s;
    }
    return static_cast<double>(match_loss(z, std::span<const double>(target)));
  };

  zero_grads(blocks);
  model.forward(image, acts);
  std::vector<double> gz(target.size());
  match_loss_grad(std::span<const double>(acts.z),
                  std::span<const double>(target), std::span<double>(gz));
  model.backward(image, acts, gz);
  std::vector<double> analytic = detail::flatten_grads(blocks);

  return detail::fd_check(blocks, analytic, loss_fn, tolerance, max_params,
                          seed);
}

/// Same verification for the cross-entropy path through the classifier.
inline GradCheckReport gradient_check_xent(ClassifierModel<double>& model,
                                           const std::vector<double>& image,
                                           std::size_t label,
                                           double tolerance = 1e-4,
                                           std::size_t max_params = 200,
                                           std::uint64_t seed = 42) {
  auto blocks = model.params();

  typename ClassifierModel<double>::Acts acts;
  auto loss_fn = [&](std::uint64_t* sig) {
    std::span<const double> p = model.forward(image, acts);
    if (sig) {
      std::uint64_t s = 0xcbf29ce484222325ULL;
      for (const auto& pre : acts.enc.pre)
        s = detail::sign_signature(s, pre);
      *sig = s;
    }
    return static_cast<double>(cross_entropy_loss(p, label));
  };

  zero_grads(blocks);
  model.forward(image, acts);
  model.backward(image, acts, label);
  std::vector<double> analytic = detail::flatten_grads(blocks);

  return detail::fd_check(blocks, analytic, loss_fn, tolerance, max_params,
                          seed);
}

// ---------------------------------------------------------------------------
// Checkpoint container: magic "WSMN", u32 version, u32 kind, length-prefixed
// JSON architecture header, then f32 parameter blobs in declaration order.
// Loading rebuilds the architecture and validates every blob size.

inline constexpr std::uint32_t kCheckpointVersion = 1;
inline constexpr std::uint32_t kKindMatch = 1;
inline constexpr std::uint32_t kKindClassifier = 2;

namespace detail {

inline nlohmann::ordered_json encoder_json(const EncoderConfig& c) {
  nlohmann::ordered_json j;
  j["in_h"] = c.in_h;
  j["in_w"] = c.in_w;
  j["in_c"] = c.in_c;
  j["channels"] = c.channels;
  j["kernel"] = c.kernel;
  j["stride"] = c.stride;
  j["pad"] = c.pad;
  return j;
}

inline EncoderConfig encoder_from_json(const nlohmann::json& j) {
  EncoderConfig c;
  c.in_h = j.at("in_h").get<std::uint32_t>();
  c.in_w = j.at("in_w").get<std::uint32_t>();
  c.in_c = j.at("in_c").get<std::uint32_t>();
  c.channels = j.at("channels").get<std::vector<std::uint32_t>>();
  c.kernel = j.at("kernel").get<std::uint32_t>();
  c.stride = j.at("stride").get<std::uint32_t>();
  c.pad = j.at("pad").get<std::uint32_t>();
  return c;
}

template <typename Model>
void write_blobs(std::ostream& os, Model& model) {
  for (const auto& b : model.params())
    write_f32_array(os, b.w->data(), b.w->size());
}

template <typename Model>
void read_blobs(std::istream& is, Model& model) {
  for (const auto& b : model.params()) read_f32_array(is, b.w->data(), b.w->size());
}

inline void write_header(std::ostream& os, std::uint32_t kind,
                         const nlohmann::ordered_json& arch) {
  os.write("WSMN", 4);
  write_u32(os, kCheckpointVersion);
  write_u32(os, kind);
  std::string arch_str = arch.dump();
  write_u32(os, static_cast<std::uint32_t>(arch_str.size()));
  os.write(arch_str.data(), static_cast<std::streamsize>(arch_str.size()));
}

inline nlohmann::json read_header(std::istream& is, std::uint32_t expect_kind) {
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "WSMN")
    throw std::runtime_error("not a model checkpoint");
  if (read_u32(is) != kCheckpointVersion)
    throw std::runtime_error("unsupported checkpoint version");
  std::uint32_t kind = read_u32(is);
  if (kind != expect_kind)
    throw std::runtime_error("checkpoint holds a different model kind");
  std::uint32_t len = read_u32(is);
  std::string arch(len, '\0');
  if (!is.read(arch.data(), len))
    throw std::runtime_error("truncated checkpoint header");
  return nlohmann::json::parse(arch);
}

}  // namespace detail

inline void save_checkpoint(std::ostream& os, MatchModel<float>& model) {
  nlohmann::ordered_json arch;
  arch["encoder"] = detail::encoder_json(model.encoder.config);
  arch["k"] = model.k();
  arch["l2_normalize"] = model.l2_normalize_output;
  arch["proj_layers"] = model.proj_layers;
  detail::write_header(os, kKindMatch, arch);
  detail::write_blobs(os, model);
}

inline MatchModel<float> load_match_checkpoint(std::istream& is) {
  nlohmann::json arch = detail::read_header(is, kKindMatch);
  MatchModel<float> model;
  model.init(detail::encoder_from_json(arch.at("encoder")),
             arch.at("k").get<std::uint32_t>(), 0,
             arch.at("l2_normalize").get<bool>(),
             arch.value("proj_layers", 1u));
  detail::read_blobs(is, model);
  return model;
}

inline void save_checkpoint(std::ostream& os, ClassifierModel<float>& model) {
  nlohmann::ordered_json arch;
  arch["encoder"] = detail::encoder_json(model.encoder.config);
  arch["labels"] = model.label_names;
  arch["num_labels"] = model.head.out;
  detail::write_header(os, kKindClassifier, arch);
  detail::write_blobs(os, model);
}

inline ClassifierModel<float> load_classifier_checkpoint(std::istream& is) {
  nlohmann::json arch = detail::read_header(is, kKindClassifier);
  ClassifierModel<float> model;
  model.init(detail::encoder_from_json(arch.at("encoder")),
             arch.at("num_labels").get<std::uint32_t>(), 0);
  model.label_names =
      arch.at("labels").get<std::vector<std::string>>();
  detail::read_blobs(is, model);
  return model;
}

}  // namespace wikisat::net
