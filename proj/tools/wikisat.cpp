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

// Pipeline driver: extract -> label -> pair -> train-doc2vec -> train-match /
// train-weak -> finetune -> eval -> report, plus selfcheck. Every stage reads
// and writes files, re-runs are no-ops when outputs already match, and all
// randomness flows from --seed.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "wikisat/corpus.hpp"
#include "wikisat/corpus_io.hpp"
#include "wikisat/doc2vec.hpp"
#include "wikisat/matchnet_train.hpp"
#include "wikisat/tile.hpp"
#include "wikisat/transfer.hpp"
#include "wikisat/weak_label.hpp"

namespace fs = std::filesystem;
using namespace wikisat;

namespace {

/// Bad inputs or refused overwrites: exit 1 (runtime faults exit 2).
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::ifstream open_input(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw ValidationError("cannot open input file: " + path);
  return f;
}

/// Write-if-changed with restart semantics: identical content is a no-op,
/// different content demands --force.
void write_checked(const fs::path& path, const std::string& content,
                   bool force) {
  if (fs::exists(path)) {
    std::string old = read_file_bytes(path.string());
    if (old == content) return;  // up to date
    if (!force)
      throw ValidationError("output " + path.string() +
                            " exists with different content; pass --force to "
                            "overwrite");
  }
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot write " + path.string());
  f.write(content.data(), static_cast<std::streamsize>(content.size()));
}

std::vector<corpus::ArticleRow> load_article_rows(const std::string& path) {
  auto f = open_input(path);
  return corpus::read_rows(f);
}

std::map<std::uint64_t, std::string> load_label_pairs(const std::string& path) {
  auto f = open_input(path);
  std::map<std::uint64_t, std::string> out;
  std::string line;
  while (std::getline(f, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    out[j.at("id").get<std::uint64_t>()] = j.at("label").get<std::string>();
  }
  return out;
}

tile::DatasetManifest load_manifest(const std::string& path) {
  auto f = open_input(path);
  return tile::read_manifest(f);
}

tile::ImageTensor load_tile(const fs::path& manifest_dir,
                            const std::string& rel, std::uint32_t input_px) {
  tile::ImageTensor img = tile::load_tensor_file((manifest_dir / rel).string());
  if (input_px != 0 && (img.height != input_px || img.width != input_px))
    img = tile::resize(img, input_px, input_px);
  if (img.channels == 1) {  // widen grayscale so one encoder fits all tiles
    tile::ImageTensor rgb = tile::make_image(img.height, img.width, 3);
    for (std::uint32_t y = 0; y < img.height; ++y)
      for (std::uint32_t x = 0; x < img.width; ++x)
        for (int c = 0; c < 3; ++c) rgb.at(y, x, c) = img.at(y, x, 0);
    return rgb;
  }
  return img;
}

/// Articles eligible for document-vector training, in file order: geolocated
/// with a body sidecar. train-doc2vec and train-match must agree on this.
std::vector<std::size_t> doc2vec_row_indices(
    const std::vector<corpus::ArticleRow>& rows) {
  std::vector<std::size_t> idx;
  for (std::size_t i = 0; i < rows.size(); ++i)
    if (rows[i].lat && rows[i].lon && rows[i].body_path) idx.push_back(i);
  return idx;
}

std::string read_body(const fs::path& articles_dir,
                      const corpus::ArticleRow& row) {
  return read_file_bytes((articles_dir / *row.body_path).string());
}

net::EncoderConfig encoder_for(std::uint32_t px) {
  net::EncoderConfig cfg;
  cfg.in_h = px;
  cfg.in_w = px;
  return cfg;
}

// ---------------------------------------------------------------------------

struct ExtractArgs {
  std::string dump, out, bodies;
  bool force = false;
};

int cmd_extract(const ExtractArgs& a) {
  auto in = open_input(a.dump);
  corpus::DumpParser parser(in);

  fs::path out_path(a.out);
  fs::path out_dir = out_path.has_parent_path() ? out_path.parent_path()
                                                : fs::path(".");
  std::ostringstream rows;
  std::vector<std::pair<fs::path, std::string>> bodies;
  while (auto rec = parser.next()) {
    std::optional<std::string> body_rel;
    if (!a.bodies.empty()) {
      fs::path body_file = fs::path(a.bodies) /
                           (std::to_string(rec->id) + ".txt");
      // stored relative to the articles file so dataset trees can move
      fs::path rel = body_file.lexically_relative(out_dir);
      body_rel = (rel.empty() ? body_file : rel).generic_string();
      bodies.emplace_back(body_file, rec->body);
    }
    corpus::write_row(rows, corpus::make_row(*rec, body_rel));
  }

  write_checked(out_path, rows.str(), a.force);
  for (const auto& [path, body] : bodies) write_checked(path, body, a.force);

  const corpus::CorpusStats& s = parser.stats();
  std::printf(
      "extract: %llu articles (%llu geolocated, %llu with raw label); "
      "skipped %llu redirects, %llu technical; %llu coords rejected\n",
      (unsigned long long)s.total_articles, (unsigned long long)s.geolocated,
      (unsigned long long)s.with_raw_label,
      (unsigned long long)s.skipped_redirects,
      (unsigned long long)s.skipped_technical,
      (unsigned long long)s.coord_rejected);
  return 0;
}

struct LabelArgs {
  std::string articles, hierarchy, out, report;
  std::uint64_t threshold = 100;
  unsigned jobs = 1;
  bool force = false;
};

int cmd_label(const LabelArgs& a) {
  auto rows = load_article_rows(a.articles);
  weak::KeywordHierarchy h = a.hierarchy.empty()
                                 ? weak::default_hierarchy()
                                 : weak::load_hierarchy(a.hierarchy);

  std::vector<corpus::ArticleRecord> articles(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    articles[i].id = rows[i].id;
    articles[i].title = rows[i].title;
    articles[i].raw_label = rows[i].raw_label;
    articles[i].categories = rows[i].categories;
  }

  weak::LabelCorpusResult res =
      weak::label_corpus(articles, h, a.threshold, a.jobs);

  std::ostringstream pairs;
  for (const auto& p : res.pairs) {
    nlohmann::ordered_json j;
    j["id"] = p.id;
    j["label"] = p.label;
    pairs << j.dump() << '\n';
  }
  write_checked(a.out, pairs.str(), a.force);
  if (!a.report.empty())
    write_checked(a.report, weak::report_to_json(res.report).dump(2) + "\n",
                  a.force);

  std::printf("label: %zu labeled, %llu unlabeled, %llu discarded, %zu labels "
              "kept, %zu pruned\n",
              res.pairs.size(), (unsigned long long)res.report.unlabeled,
              (unsigned long long)res.report.discarded,
              res.report.histogram.size(), res.report.pruned_labels.size());
  return 0;
}

struct PairArgs {
  std::string articles, labels, out, provider = "synthetic";
  double gsd = 0.3;
  std::uint32_t tile_px = 1000;
  double cloud_rate = 0.05;
  double gap_rate = 0.0;
  std::uint64_t seed = 42;
  unsigned jobs = 1;
  bool force = false;
};

int cmd_pair(const PairArgs& a) {
  if (a.provider != "synthetic")
    throw ValidationError("unknown tile provider: " + a.provider);
  auto rows = load_article_rows(a.articles);
  std::map<std::uint64_t, std::string> labels;
  if (!a.labels.empty()) labels = load_label_pairs(a.labels);

  tile::SyntheticTileProvider::Config cfg;
  cfg.seed = a.seed;
  cfg.cloud_rate = a.cloud_rate;
  cfg.coverage_gap_rate = a.gap_rate;
  tile::SyntheticTileProvider provider(cfg);

  std::vector<tile::PairingArticle> articles;
  for (const auto& row : rows) {
    if (!row.lat || !row.lon) continue;
    tile::PairingArticle art;
    art.id = row.id;
    art.coord = {*row.lat, *row.lon};
    auto it = labels.find(row.id);
    if (it != labels.end()) art.weak_label = it->second;
    if (art.weak_label) provider.set_label(art.coord, *art.weak_label);
    articles.push_back(std::move(art));
  }

  tile::BuildOptions opts;
  opts.gsd = a.gsd;
  opts.tile_px = a.tile_px;
  opts.jobs = a.jobs;
  tile::DatasetManifest manifest =
      tile::build_dataset(articles, provider, a.out, opts);

  std::ostringstream os;
  tile::write_manifest(os, manifest);
  write_checked(fs::path(a.out) / "manifest.jsonl", os.str(), a.force);

  std::printf("pair: %zu tuples, %llu coverage misses (gsd %.2f, %ux%u px)\n",
              manifest.tuples.size(),
              (unsigned long long)manifest.coverage_misses, a.gsd, a.tile_px,
              a.tile_px);
  return 0;
}

struct TrainDoc2vecArgs {
  std::string articles, out;
  doc2vec::TrainConfig cfg;
  bool force = false;
};

int cmd_train_doc2vec(const TrainDoc2vecArgs& a) {
  auto rows = load_article_rows(a.articles);
  fs::path articles_dir = fs::path(a.articles).has_parent_path()
                              ? fs::path(a.articles).parent_path()
                              : fs::path(".");
  auto idx = doc2vec_row_indices(rows);
  if (idx.empty())
    throw ValidationError(
        "no geolocated articles with body sidecars; run extract with --bodies");

  std::vector<std::vector<std::string>> docs;
  docs.reserve(idx.size());
  for (std::size_t i : idx)
    docs.push_back(doc2vec::tokenize(read_body(articles_dir, rows[i])));

  doc2vec::ParagraphVectorModel model = doc2vec::train(docs, a.cfg);
  std::ostringstream os(std::ios::binary);
  doc2vec::save_model(os, model);
  write_checked(a.out, os.str(), a.force);

  std::printf("train-doc2vec: %u docs, vocab %u, k=%u, %u epochs\n",
              model.doc_count(), model.vocab.size(), model.k, a.cfg.epochs);
  return 0;
}

struct TrainMatchArgs {
  std::string manifest, articles, doc2vec_model, out, log;
  std::uint32_t input_px = 64;
  std::uint32_t epochs = 50;
  double lr = 1e-4;
  std::uint32_t batch = 64;
  std::uint32_t proj_layers = 1;
  std::uint64_t seed = 42;
  bool force = false;
};

int cmd_train_match(const TrainMatchArgs& a) {
  auto manifest = load_manifest(a.manifest);
  if (manifest.tuples.empty()) throw ValidationError("empty dataset manifest");
  fs::path manifest_dir = fs::path(a.manifest).parent_path();

  auto rows = load_article_rows(a.articles);
  auto idx = doc2vec_row_indices(rows);
  std::map<std::uint64_t, std::uint32_t> doc_row;
  for (std::uint32_t d = 0; d < idx.size(); ++d)
    doc_row[rows[idx[d]].id] = d;

  auto model_in = open_input(a.doc2vec_model);
  doc2vec::ParagraphVectorModel text_model = doc2vec::load_model(model_in);
  if (text_model.doc_count() != idx.size())
    throw ValidationError(
        "doc2vec model row count does not match the articles file");

  std::vector<net::MatchSample> samples;
  samples.reserve(manifest.tuples.size());
  for (const auto& t : manifest.tuples) {
    auto it = doc_row.find(t.article_id);
    if (it == doc_row.end())
      throw ValidationError("article " + std::to_string(t.article_id) +
                            " has no document vector (missing body?)");
    net::MatchSample s;
    s.image = load_tile(manifest_dir, t.image_path, a.input_px);
    auto z = text_model.doc_vector(it->second);
    s.target.assign(z.begin(), z.end());
    samples.push_back(std::move(s));
  }

  net::TrainOptions opts;
  opts.encoder = encoder_for(a.input_px);
  opts.epochs = a.epochs;
  opts.learning_rate = a.lr;
  opts.batch_size = a.batch;
  opts.seed = a.seed;
  opts.proj_layers = a.proj_layers;
  net::MatchTrainResult res = net::train_match(samples, opts);

  std::ostringstream os(std::ios::binary);
  net::save_checkpoint(os, res.model);
  write_checked(a.out, os.str(), a.force);
  if (!a.log.empty()) {
    std::ostringstream csv;
    net::write_train_log(csv, res.log, "mean_D");
    write_checked(a.log, csv.str(), a.force);
  }

  std::printf("train-match: %zu pairs, %u epochs, final mean D %.4f\n",
              samples.size(), a.epochs, res.log.back().metric);
  return 0;
}

struct TrainWeakArgs {
  std::string manifest, out, log;
  std::uint32_t input_px = 64;
  std::uint32_t epochs = 30;
  double lr = 1e-3;
  std::uint32_t batch = 64;
  std::uint64_t seed = 42;
  bool force = false;
};

// Sorted unique labels of the manifest become the class indices.
std::pair<std::vector<net::WeakSample>, std::vector<std::string>>
weak_samples_from_manifest(const tile::DatasetManifest& manifest,
                           const fs::path& manifest_dir,
                           std::uint32_t input_px) {
  std::map<std::string, std::uint32_t> label_ids;
  for (const auto& t : manifest.tuples)
    if (t.weak_label) label_ids.emplace(*t.weak_label, 0);
  std::vector<std::string> names;
  for (auto& [name, id] : label_ids) {
    id = static_cast<std::uint32_t>(names.size());
    names.push_back(name);
  }
  std::vector<net::WeakSample> samples;
  for (const auto& t : manifest.tuples) {
    if (!t.weak_label) continue;
    samples.push_back({load_tile(manifest_dir, t.image_path, input_px),
                       label_ids.at(*t.weak_label)});
  }
  return {std::move(samples), std::move(names)};
}

int cmd_train_weak(const TrainWeakArgs& a) {
  auto manifest = load_manifest(a.manifest);
  auto [samples, names] = weak_samples_from_manifest(
      manifest, fs::path(a.manifest).parent_path(), a.input_px);
  if (samples.empty())
    throw ValidationError("manifest has no labeled tuples to train on");

  net::TrainOptions opts;
  opts.encoder = encoder_for(a.input_px);
  opts.epochs = a.epochs;
  opts.learning_rate = a.lr;
  opts.batch_size = a.batch;
  opts.seed = a.seed;
  net::WeakTrainResult res =
      net::train_weak(samples, static_cast<std::uint32_t>(names.size()), opts);
  res.model.label_names = names;

  std::ostringstream os(std::ios::binary);
  net::save_checkpoint(os, res.model);
  write_checked(a.out, os.str(), a.force);
  if (!a.log.empty()) {
    std::ostringstream csv;
    net::write_train_log(csv, res.log, "accuracy");
    write_checked(a.log, csv.str(), a.force);
  }

  std::printf("train-weak: %zu samples, %zu labels, final accuracy %.4f\n",
              samples.size(), names.size(), res.log.back().metric);
  return 0;
}

struct FinetuneArgs {
  std::string manifest, model, out;
  std::string mode = "fixed";
  std::uint32_t input_px = 64;
  std::uint32_t epochs = 60;
  double lr = 1e-3;
  std::uint32_t batch = 32;
  std::uint64_t seed = 42;
  bool force = false;
};

net::Encoder<float> load_any_encoder(const std::string& path) {
  auto f = open_input(path);
  char magic[4];
  f.read(magic, 4);
  read_u32(f);  // version
  std::uint32_t kind = read_u32(f);
  f.seekg(0);
  if (kind == net::kKindMatch) return net::load_match_checkpoint(f).encoder;
  if (kind == net::kKindClassifier)
    return net::load_classifier_checkpoint(f).encoder;
  throw ValidationError("unrecognized checkpoint kind in " + path);
}

int cmd_finetune(const FinetuneArgs& a) {
  if (a.mode != "fixed" && a.mode != "full")
    throw ValidationError("--mode must be fixed or full");
  auto manifest = load_manifest(a.manifest);
  auto [samples, names] = weak_samples_from_manifest(
      manifest, fs::path(a.manifest).parent_path(), a.input_px);
  if (samples.empty())
    throw ValidationError("manifest has no labeled tuples to fine-tune on");

  net::Encoder<float> encoder = load_any_encoder(a.model);
  if (encoder.config.in_h != a.input_px || encoder.config.in_w != a.input_px)
    throw ValidationError("checkpoint expects " +
                          std::to_string(encoder.config.in_h) +
                          "px inputs, got --input-px " +
                          std::to_string(a.input_px));

  eval::FinetuneOptions opts;
  opts.epochs = a.epochs;
  opts.learning_rate = a.lr;
  opts.batch_size = a.batch;
  opts.seed = a.seed;
  net::ClassifierModel<float> model = eval::finetune(
      encoder, samples, static_cast<std::uint32_t>(names.size()),
      a.mode == "fixed" ? eval::FinetuneMode::fixed_encoder
                        : eval::FinetuneMode::full,
      opts);
  model.label_names = names;

  std::ostringstream os(std::ios::binary);
  net::save_checkpoint(os, model);
  write_checked(a.out, os.str(), a.force);

  std::printf("finetune: %zu samples, %zu labels, mode %s\n", samples.size(),
              names.size(), a.mode.c_str());
  return 0;
}

struct EvalArgs {
  std::string manifest, model, out, csv;
  std::uint32_t input_px = 64;
  bool temporal = false;
  bool force = false;
};

int cmd_eval(const EvalArgs& a) {
  auto manifest = load_manifest(a.manifest);
  fs::path manifest_dir = fs::path(a.manifest).parent_path();
  auto model_in = open_input(a.model);
  net::ClassifierModel<float> model =
      net::load_classifier_checkpoint(model_in);

  std::map<std::string, std::uint32_t> label_ids;
  for (std::uint32_t i = 0; i < model.label_names.size(); ++i)
    label_ids[model.label_names[i]] = i;

  eval::MetricReport rep;
  if (a.temporal) {
    // rows sharing an article id form one temporal stack
    std::map<std::uint64_t, eval::TemporalGroup> groups;
    for (const auto& t : manifest.tuples) {
      if (!t.weak_label) continue;
      auto it = label_ids.find(*t.weak_label);
      if (it == label_ids.end())
        throw ValidationError("label '" + *t.weak_label +
                              "' unknown to the model");
      auto& g = groups[t.article_id];
      g.area_id = t.article_id;
      g.label = it->second;
      g.images.push_back(load_tile(manifest_dir, t.image_path, a.input_px));
    }
    std::vector<eval::TemporalGroup> list;
    for (auto& [id, g] : groups) list.push_back(std::move(g));
    if (list.empty()) throw ValidationError("no labeled groups to evaluate");
    rep = eval::evaluate_temporal(model, list);
  } else {
    std::vector<net::WeakSample> samples;
    for (const auto& t : manifest.tuples) {
      if (!t.weak_label) continue;
      auto it = label_ids.find(*t.weak_label);
      if (it == label_ids.end())
        throw ValidationError("label '" + *t.weak_label +
                              "' unknown to the model");
      samples.push_back({load_tile(manifest_dir, t.image_path, a.input_px),
                         it->second});
    }
    if (samples.empty()) throw ValidationError("no labeled tuples to evaluate");
    rep = eval::evaluate_single(model, samples);
  }

  write_checked(a.out,
                eval::report_to_json(rep, model.label_names).dump(2) + "\n",
                a.force);
  if (!a.csv.empty()) {
    std::ostringstream os;
    eval::report_to_csv(os, rep, model.label_names);
    write_checked(a.csv, os.str(), a.force);
  }

  std::printf("eval: %s over %llu samples: top1 %.4f top5 %.4f f1 %.4f\n",
              rep.mode.c_str(), (unsigned long long)rep.n_samples, rep.top1,
              rep.top5, rep.f1_macro);
  return 0;
}

struct ReportArgs {
  std::string metrics, articles, labels, scatter;
  bool force = false;
};

int cmd_report(const ReportArgs& a) {
  auto f = open_input(a.metrics);
  nlohmann::json j = nlohmann::json::parse(f);
  std::printf("metric        value\n");
  std::printf("top1          %.3f\n", j.at("top1").get<double>());
  std::printf("top5          %.3f\n", j.at("top5").get<double>());
  std::printf("f1_macro      %.3f\n", j.at("f1_macro").get<double>());
  std::printf("n_samples     %llu\n",
              (unsigned long long)j.at("n_samples").get<std::uint64_t>());
  std::printf("mode          %s\n", j.at("mode").get<std::string>().c_str());
  if (j.contains("per_class")) {
    std::printf("class  label            precision recall  f1\n");
    for (const auto& c : j.at("per_class")) {
      std::printf("%-6u %-16s %-9.3f %-7.3f %.3f\n",
                  c.at("class").get<unsigned>(),
                  c.value("label", std::string("-")).c_str(),
                  c.at("precision").get<double>(),
                  c.at("recall").get<double>(), c.at("f1").get<double>());
    }
  }

  if (!a.scatter.empty()) {
    if (a.articles.empty() || a.labels.empty())
      throw ValidationError("--scatter needs --articles and --labels");
    auto rows = load_article_rows(a.articles);
    auto labels = load_label_pairs(a.labels);
    std::ostringstream os;
    os << "lat,lon,label\n";
    char buf[160];
    for (const auto& row : rows) {
      if (!row.lat || !row.lon) continue;
      auto it = labels.find(row.id);
      if (it == labels.end()) continue;
      std::snprintf(buf, sizeof(buf), "%.6f,%.6f,%s\n", *row.lat, *row.lon,
                    it->second.c_str());
      os << buf;
    }
    write_checked(a.scatter, os.str(), a.force);
    std::printf("scatter csv written to %s\n", a.scatter.c_str());
  }
  return 0;
}

int cmd_selfcheck(std::uint64_t seed) {
  bool ok = true;
  auto verdict = [&](bool pass, const std::string& what) {
    std::printf("[%s] %s\n", pass ? "PASS" : "FAIL", what.c_str());
    ok = ok && pass;
  };

  for (std::uint64_t s : {seed, seed + 1, seed + 2}) {
    net::MatchModel<double> mm;
    mm.init(encoder_for(16), 32, s);
    Rng rng(hash_mix(s, 0x11));
    std::vector<double> img(16 * 16 * 3);
    for (auto& v : img) v = rng.uniform();
    std::vector<double> target(32);
    for (auto& v : target) v = rng.normal();
    auto rep = net::gradient_check_match(mm, img, target, 1e-4, 200, s);
    char line[160];
    std::snprintf(line, sizeof(line),
                  "match-loss gradients seed %llu (max rel err %.2e, %zu "
                  "checked)",
                  (unsigned long long)s, rep.max_rel_error, rep.checked);
    verdict(rep.pass, line);

    net::ClassifierModel<double> cm;
    cm.init(encoder_for(16), 5, s);
    auto rep2 = net::gradient_check_xent(cm, img, s % 5, 1e-4, 200, s);
    std::snprintf(line, sizeof(line),
                  "cross-entropy gradients seed %llu (max rel err %.2e, %zu "
                  "checked)",
                  (unsigned long long)s, rep2.max_rel_error, rep2.checked);
    verdict(rep2.pass, line);
  }

  {
    Rng rng(seed);
    const std::size_t k = 300;
    std::vector<double> x(k), y(k);
    double sum = 0;
    for (int i = 0; i < 10000; ++i) {
      for (std::size_t d = 0; d < k; ++d) {
        x[d] = rng.normal();
        y[d] = rng.normal();
      }
      sum += std::abs(cosine<double>(x, y));
    }
    double mean_abs = sum / 10000.0;
    char line[120];
    std::snprintf(line, sizeof(line),
                  "orthogonality statistic (mean |cos| %.4f < 0.1)", mean_abs);
    verdict(mean_abs < 0.1, line);
  }

  std::printf("selfcheck: %s\n", ok ? "all checks passed" : "FAILURES");
  return ok ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"wikisat: weakly-labeled satellite pre-training pipeline"};
  app.require_subcommand(1);
  app.set_config("--config", "", "key=value config file; flags win");
  app.allow_config_extras(true);

  ExtractArgs ex;
  auto* extract = app.add_subcommand(
      "extract", "parse a dump into article rows (json lines)");
  extract->add_option("--dump", ex.dump, "input XML dump")->required();
  extract->add_option("--out", ex.out, "output articles.jsonl")->required();
  extract->add_option("--bodies", ex.bodies,
                      "directory for body text sidecars");
  extract->add_flag("--force", ex.force, "overwrite differing outputs");

  LabelArgs la;
  auto* label = app.add_subcommand("label", "assign weak labels to articles");
  label->add_option("--articles", la.articles, "articles.jsonl")->required();
  label->add_option("--hierarchy", la.hierarchy,
                    "hierarchy file (bundled default when omitted)");
  label->add_option("--threshold", la.threshold, "rare-label prune threshold");
  label->add_option("--out", la.out, "labeled pairs jsonl")->required();
  label->add_option("--report", la.report, "label report json");
  label->add_option("--jobs", la.jobs, "parallel labeling workers");
  label->add_flag("--force", la.force, "overwrite differing outputs");

  PairArgs pa;
  auto* pair = app.add_subcommand("pair",
                                  "fetch one tile per geolocated article");
  pair->add_option("--articles", pa.articles, "articles.jsonl")->required();
  pair->add_option("--labels", pa.labels, "labeled pairs jsonl");
  pair->add_option("--out", pa.out, "dataset directory")->required();
  pair->add_option("--provider", pa.provider, "tile provider (synthetic)");
  pair->add_option("--gsd", pa.gsd, "ground sampling distance m/px");
  pair->add_option("--tile-px", pa.tile_px, "tile side length in pixels");
  pair->add_option("--cloud-rate", pa.cloud_rate, "synthetic cloudy fraction");
  pair->add_option("--gap-rate", pa.gap_rate, "synthetic coverage gaps");
  pair->add_option("--seed", pa.seed, "provider seed");
  pair->add_option("--jobs", pa.jobs, "parallel tile fetches");
  pair->add_flag("--force", pa.force, "overwrite differing outputs");

  TrainDoc2vecArgs da;
  auto* tdv = app.add_subcommand("train-doc2vec",
                                 "train paragraph vectors on article bodies");
  tdv->add_option("--articles", da.articles, "articles.jsonl")->required();
  tdv->add_option("--out", da.out, "model file")->required();
  tdv->add_option("--k", da.cfg.k, "embedding dimension");
  tdv->add_option("--epochs", da.cfg.epochs, "training epochs");
  tdv->add_option("--lr", da.cfg.learning_rate, "initial learning rate");
  tdv->add_option("--min-count", da.cfg.min_count, "vocabulary cutoff");
  tdv->add_option("--negatives", da.cfg.negatives_per_positive,
                  "negative samples per positive");
  tdv->add_option("--seed", da.cfg.seed, "rng seed");
  tdv->add_flag("--force", da.force, "overwrite differing outputs");

  TrainMatchArgs ma;
  auto* tm = app.add_subcommand(
      "train-match", "train the visual encoder against document vectors");
  tm->add_option("--manifest", ma.manifest, "dataset manifest")->required();
  tm->add_option("--articles", ma.articles, "articles.jsonl")->required();
  tm->add_option("--doc2vec", ma.doc2vec_model, "paragraph-vector model")
      ->required();
  tm->add_option("--out", ma.out, "checkpoint file")->required();
  tm->add_option("--log", ma.log, "per-epoch csv log");
  tm->add_option("--input-px", ma.input_px, "train-time input size");
  tm->add_option("--epochs", ma.epochs, "training epochs");
  tm->add_option("--lr", ma.lr, "learning rate");
  tm->add_option("--batch", ma.batch, "batch size");
  tm->add_option("--proj-layers", ma.proj_layers,
                 "projection head depth (1 or 2)");
  tm->add_option("--seed", ma.seed, "rng seed");
  tm->add_flag("--force", ma.force, "overwrite differing outputs");

  TrainWeakArgs wa;
  auto* tw = app.add_subcommand("train-weak",
                                "train the encoder on weak labels");
  tw->add_option("--manifest", wa.manifest, "dataset manifest")->required();
  tw->add_option("--out", wa.out, "checkpoint file")->required();
  tw->add_option("--log", wa.log, "per-epoch csv log");
  tw->add_option("--input-px", wa.input_px, "train-time input size");
  tw->add_option("--epochs", wa.epochs, "training epochs");
  tw->add_option("--lr", wa.lr, "learning rate");
  tw->add_option("--batch", wa.batch, "batch size");
  tw->add_option("--seed", wa.seed, "rng seed");
  tw->add_flag("--force", wa.force, "overwrite differing outputs");

  FinetuneArgs fa;
  auto* ft = app.add_subcommand("finetune",
                                "fit a classifier head on a target set");
  ft->add_option("--manifest", fa.manifest, "target dataset manifest")
      ->required();
  ft->add_option("--model", fa.model, "pretrained checkpoint")->required();
  ft->add_option("--out", fa.out, "classifier checkpoint")->required();
  ft->add_option("--mode", fa.mode, "fixed (encoder frozen) or full");
  ft->add_option("--input-px", fa.input_px, "input size");
  ft->add_option("--epochs", fa.epochs, "training epochs");
  ft->add_option("--lr", fa.lr, "learning rate");
  ft->add_option("--batch", fa.batch, "batch size");
  ft->add_option("--seed", fa.seed, "rng seed");
  ft->add_flag("--force", fa.force, "overwrite differing outputs");

  EvalArgs ea;
  auto* ev = app.add_subcommand("eval", "score a classifier on a test set");
  ev->add_option("--manifest", ea.manifest, "test dataset manifest")
      ->required();
  ev->add_option("--model", ea.model, "classifier checkpoint")->required();
  ev->add_option("--out", ea.out, "metric report json")->required();
  ev->add_option("--csv", ea.csv, "per-class csv");
  ev->add_option("--input-px", ea.input_px, "input size");
  ev->add_flag("--temporal", ea.temporal,
               "average softmax over views sharing an article id");
  ev->add_flag("--force", ea.force, "overwrite differing outputs");

  ReportArgs ra;
  auto* rp = app.add_subcommand("report", "pretty-print a metric report");
  rp->add_option("--metrics", ra.metrics, "metric report json")->required();
  rp->add_option("--articles", ra.articles, "articles.jsonl (for --scatter)");
  rp->add_option("--labels", ra.labels, "labeled pairs jsonl (for --scatter)");
  rp->add_option("--scatter", ra.scatter, "write lat,lon,label csv here");
  rp->add_flag("--force", ra.force, "overwrite differing outputs");

  std::uint64_t selfcheck_seed = 42;
  auto* sc = app.add_subcommand(
      "selfcheck", "gradient checks and the orthogonality statistic");
  sc->add_option("--seed", selfcheck_seed, "rng seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (extract->parsed()) return cmd_extract(ex);
    if (label->parsed()) return cmd_label(la);
    if (pair->parsed()) return cmd_pair(pa);
    if (tdv->parsed()) return cmd_train_doc2vec(da);
    if (tm->parsed()) return cmd_train_match(ma);
    if (tw->parsed()) return cmd_train_weak(wa);
    if (ft->parsed()) return cmd_finetune(fa);
    if (ev->parsed()) return cmd_eval(ea);
    if (rp->parsed()) return cmd_report(ra);
    if (sc->parsed()) return cmd_selfcheck(selfcheck_seed);
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::invalid_argument& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "runtime error: %s\n", e.what());
    return 2;
  }
  return 0;
}
