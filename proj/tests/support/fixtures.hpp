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

// Deterministic synthetic fixtures shared by the unit, CLI and acceptance
// suites: dump XML generators with known ground truth, two-topic text
// corpora, and paired image/embedding datasets on top of the synthetic tile
// provider.

#pragma once

#include <cstdio>
#include <string>
#include <vector>

#include "wikisat/corpus.hpp"
#include "wikisat/matchnet_train.hpp"
#include "wikisat/rng.hpp"
#include "wikisat/tile.hpp"
#include "wikisat/transfer.hpp"
#include "wikisat/vec.hpp"

namespace fixtures {

using wikisat::GeoCoordinate;
using wikisat::Rng;

// --------------------------------------------------------------------------
// Dump pages

struct CoordSpec {
  enum Kind { decimal, dms, none } kind = none;
  // decimal form
  double lat = 0.0, lon = 0.0;
  // dms form
  int lat_d = 0, lat_m = 0;
  double lat_s = 0.0;
  char lat_hemi = 'N';
  int lon_d = 0, lon_m = 0;
  double lon_s = 0.0;
  char lon_hemi = 'E';

  /// Ground truth recomputed from the raw components, independent of the
  /// library conversion path.
  double expected_lat() const {
    if (kind == decimal) return lat;
    double v = lat_d + lat_m / 60.0 + lat_s / 3600.0;
    return lat_hemi == 'S' ? -v : v;
  }
  double expected_lon() const {
    if (kind == decimal) return lon;
    double v = lon_d + lon_m / 60.0 + lon_s / 3600.0;
    return lon_hemi == 'W' ? -v : v;
  }
};

struct PageSpec {
  std::uint64_t id = 0;
  std::string title;
  CoordSpec coord;
  std::string raw_label;                 // empty -> no infobox
  std::vector<std::string> categories;
  std::vector<std::string> body_words;
  std::string intended_label;            // ground-truth weak label ("" = none)
  bool redirect = false;
  bool technical = false;
};

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '&': out += "&amp;"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

inline std::string format_seconds(double s) {
  char buf[32];
  if (s == static_cast<int>(s))
    std::snprintf(buf, sizeof(buf), "%d", static_cast<int>(s));
  else
    std::snprintf(buf, sizeof(buf), "%.1f", s);
  return buf;
}

inline std::string coord_template(const CoordSpec& c) {
  char buf[160];
  switch (c.kind) {
    case CoordSpec::decimal:
      std::snprintf(buf, sizeof(buf), "{{coord|%.4f|%.4f|display=title}}",
                    c.lat, c.lon);
      return buf;
    case CoordSpec::dms:
      std::snprintf(buf, sizeof(buf), "{{coord|%d|%d|%s|%c|%d|%d|%s|%c|display=title}}",
                    c.lat_d, c.lat_m, format_seconds(c.lat_s).c_str(),
                    c.lat_hemi, c.lon_d, c.lon_m,
                    format_seconds(c.lon_s).c_str(), c.lon_hemi);
      return buf;
    case CoordSpec::none:
      return "";
  }
  return "";
}

inline std::string page_body(const PageSpec& p) {
  std::string body;
  if (p.redirect) return "#REDIRECT [[Somewhere Else]]";
  if (!p.raw_label.empty())
    body += "{{Infobox " + p.raw_label + "\n| name = " + p.title + "\n}}\n";
  body += "'''" + p.title + "''' is a place described here. ";
  body += coord_template(p.coord);
  body += "\n";
  for (const auto& w : p.body_words) {
    body += w;
    body += ' ';
  }
  body += "\n";
  for (const auto& c : p.categories) body += "[[Category:" + c + "]]\n";
  return body;
}

inline std::string page_xml(const PageSpec& p) {
  std::string title = p.technical ? "Help:" + p.title : p.title;
  std::string xml = "  <page>\n";
  xml += "    <title>" + xml_escape(title) + "</title>\n";
  xml += "    <ns>0</ns>\n";
  xml += "    <id>" + std::to_string(p.id) + "</id>\n";
  xml += "    <revision>\n";
  xml += "      <id>" + std::to_string(p.id * 10 + 1) + "</id>\n";
  xml += "      <text xml:space=\"preserve\">" + xml_escape(page_body(p)) +
         "</text>\n";
  xml += "    </revision>\n";
  xml += "  </page>\n";
  return xml;
}

inline std::string dump_xml(const std::vector<PageSpec>& pages) {
  std::string xml =
      "<mediawiki xmlns=\"http://www.mediawiki.org/xml/export-0.10/\" "
      "xml:lang=\"en\">\n  <siteinfo>\n    <sitename>Fixture</sitename>\n  "
      "</siteinfo>\n";
  for (const auto& p : pages) xml += page_xml(p);
  xml += "</mediawiki>\n";
  return xml;
}

// Filler words free of hierarchy keywords, so planted keywords stay the only
// labeling signal in a page.
inline const std::vector<std::string>& filler_words() {
  static const std::vector<std::string> words = {
      "green", "west",  "upper",   "old",   "grand",
      "royal", "north", "central", "lower", "historic"};
  return words;
}

inline std::string topic_word(const std::string& topic, std::uint64_t i) {
  return topic + "w" + std::to_string(i);
}

/// 40-80 body tokens drawn from a per-topic vocabulary of 40 words plus
/// shared stopwords, the raw material for the document embeddings.
inline std::vector<std::string> topic_words(const std::string& topic,
                                            Rng& rng) {
  static const std::vector<std::string> stop = {"the", "of",  "and",
                                                "in",  "at", "with"};
  std::vector<std::string> words;
  std::size_t len = 40 + rng.index(41);
  for (std::size_t i = 0; i < len; ++i) {
    if (rng.uniform() < 0.3)
      words.push_back(stop[rng.index(stop.size())]);
    else
      words.push_back(topic_word(topic, rng.index(40)));
  }
  return words;
}

// --------------------------------------------------------------------------
// Coordinate-extraction dump (acceptance criterion: 600 decimal / 300 DMS /
// 100 bare pages).

inline std::vector<PageSpec> coord_dump_spec(int n_decimal, int n_dms,
                                             int n_none, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<PageSpec> pages;
  std::uint64_t id = 1;
  for (int i = 0; i < n_decimal; ++i) {
    PageSpec p;
    p.id = id++;
    p.title = "Decimal Place " + std::to_string(i);
    p.coord.kind = CoordSpec::decimal;
    p.coord.lat = -85.0 + 170.0 * rng.uniform();
    p.coord.lon = -175.0 + 350.0 * rng.uniform();
    // emitted with four decimals; quantize so truth matches the template
    p.coord.lat = std::round(p.coord.lat * 1e4) / 1e4;
    p.coord.lon = std::round(p.coord.lon * 1e4) / 1e4;
    p.body_words = topic_words("geo", rng);
    pages.push_back(std::move(p));
  }
  for (int i = 0; i < n_dms; ++i) {
    PageSpec p;
    p.id = id++;
    p.title = "DMS Place " + std::to_string(i);
    p.coord.kind = CoordSpec::dms;
    p.coord.lat_d = static_cast<int>(rng.index(89));
    p.coord.lat_m = static_cast<int>(rng.index(60));
    p.coord.lat_s = static_cast<double>(rng.index(120)) / 2.0;  // 0.5" steps
    p.coord.lat_hemi = rng.uniform() < 0.5 ? 'N' : 'S';
    p.coord.lon_d = static_cast<int>(rng.index(179));
    p.coord.lon_m = static_cast<int>(rng.index(60));
    p.coord.lon_s = static_cast<double>(rng.index(120)) / 2.0;
    p.coord.lon_hemi = rng.uniform() < 0.5 ? 'E' : 'W';
    p.body_words = topic_words("geo", rng);
    pages.push_back(std::move(p));
  }
  for (int i = 0; i < n_none; ++i) {
    PageSpec p;
    p.id = id++;
    p.title = "Bare Page " + std::to_string(i);
    p.coord.kind = CoordSpec::none;
    p.body_words = topic_words("geo", rng);
    pages.push_back(std::move(p));
  }
  return pages;
}

// --------------------------------------------------------------------------
// Weak-label fixture: 500 articles with labels known by construction.
// Counts (against the default hierarchy, threshold 100):
//   airport 120, station 105, town 130 (town 50 + hamlet 40 + village 40,
//   both merged to town), lake 60 and stadium 30 (both pruned), battle 15 +
//   person 10 (discarded), 30 with no keyword at all.
// Kept histogram: airport 120, station 105, town 130. Unlabeled 30+90=120.

inline std::vector<PageSpec> weak_fixture_spec(std::uint64_t seed) {
  struct Plant {
    const char* keyword;
    const char* label_after_merge;  // "" = discarded
    int via_raw;                    // planted in the infobox term
    int via_category;               // planted in a category link
  };
  static const std::vector<Plant> plan = {
      {"airport", "airport", 80, 40}, {"station", "station", 60, 45},
      {"town", "town", 50, 0},        {"hamlet", "town", 25, 15},
      {"village", "town", 0, 40},     {"lake", "lake", 30, 30},
      {"stadium", "stadium", 30, 0},  {"battle", "", 15, 0},
      {"person", "", 0, 10},
  };

  Rng rng(seed);
  std::vector<PageSpec> pages;
  std::uint64_t id = 1;
  auto filler = [&]() { return filler_words()[rng.index(filler_words().size())]; };

  auto add = [&](const Plant& plant, bool raw) {
    PageSpec p;
    p.id = id;
    p.title = "Article " + std::to_string(id);
    ++id;
    std::string phrase = filler() + " " + plant.keyword;
    if (raw)
      p.raw_label = phrase;
    else
      p.categories = {plant.keyword[0] == 'p'  // "person" reads better bare
                          ? std::string(plant.keyword)
                          : phrase + "s of testland"};
    p.intended_label = plant.label_after_merge;
    p.coord.kind = CoordSpec::decimal;
    p.coord.lat = std::round((-60.0 + 0.01 * double(id)) * 1e4) / 1e4;
    p.coord.lon = std::round((20.0 + 0.013 * double(id)) * 1e4) / 1e4;
    std::string topic = p.intended_label.empty() ? std::string("misc")
                                                 : p.intended_label;
    p.body_words = topic_words(topic, rng);
    pages.push_back(std::move(p));
  };

  for (const auto& plant : plan) {
    for (int i = 0; i < plant.via_raw; ++i) add(plant, true);
    for (int i = 0; i < plant.via_category; ++i) add(plant, false);
  }
  for (int i = 0; i < 30; ++i) {  // keyword-free articles
    PageSpec p;
    p.id = id;
    p.title = "Article " + std::to_string(id);
    ++id;
    p.raw_label = filler() + " landmark";
    p.coord.kind = CoordSpec::decimal;
    p.coord.lat = std::round((-60.0 + 0.01 * double(id)) * 1e4) / 1e4;
    p.coord.lon = std::round((20.0 + 0.013 * double(id)) * 1e4) / 1e4;
    p.body_words = topic_words("misc", rng);
    pages.push_back(std::move(p));
  }
  return pages;
}

// --------------------------------------------------------------------------
// Two-topic corpus for the document-embedding geometry checks.

inline std::vector<std::vector<std::string>> two_topic_corpus(
    int docs_per_topic, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<std::string>> docs;
  for (int topic = 0; topic < 2; ++topic) {
    std::string name = topic == 0 ? "alpha" : "beta";
    for (int d = 0; d < docs_per_topic; ++d)
      docs.push_back(topic_words(name, rng));
  }
  return docs;
}

// --------------------------------------------------------------------------
// Paired image/embedding datasets over the synthetic tile provider.

inline const std::vector<std::string>& bench_labels() {
  static const std::vector<std::string> labels = {"airport", "stadium", "lake",
                                                  "town", "forest"};
  return labels;
}

struct MatchFixture {
  std::vector<wikisat::net::MatchSample> pairs;
  std::vector<std::vector<float>> label_dirs;  // unit target per label
};

/// `per_label` tiles per class; targets are per-label unit directions plus
/// per-sample jitter, mimicking document embeddings that cluster by topic.
inline MatchFixture gen_match_dataset(int per_label, std::uint32_t k,
                                      std::uint32_t px, std::uint64_t seed,
                                      double cloud_rate = 0.05,
                                      std::uint64_t coord_salt = 0) {
  const auto& labels = bench_labels();
  wikisat::tile::SyntheticTileProvider::Config cfg;
  cfg.seed = seed;
  cfg.cloud_rate = cloud_rate;
  wikisat::tile::SyntheticTileProvider provider(cfg);

  MatchFixture fx;
  Rng dir_rng(wikisat::hash_mix(seed, 0xD17));
  for (std::size_t l = 0; l < labels.size(); ++l) {
    std::vector<float> dir(k);
    for (float& v : dir) v = static_cast<float>(dir_rng.normal());
    wikisat::l2_normalize(std::span<float>(dir));
    fx.label_dirs.push_back(std::move(dir));
  }

  Rng rng(wikisat::hash_mix(seed, 0xA5A5 + coord_salt));
  for (std::size_t l = 0; l < labels.size(); ++l) {
    for (int i = 0; i < per_label; ++i) {
      GeoCoordinate c{-40.0 + 0.001 * double(fx.pairs.size()) +
                          0.09 * double(coord_salt),
                      10.0 + 0.0017 * double(fx.pairs.size())};
      provider.set_label(c, labels[l]);
      auto out = provider.fetch(
          wikisat::tile::make_tile_request(c, 0.3, px, px));
      wikisat::net::MatchSample s;
      s.image = std::move(out.image);
      // jitter with total norm 0.5 keeps samples ~0.9 cosine to their label
      // direction, the way topic documents cluster around a topic centroid
      std::vector<float> noise(k);
      for (float& v : noise) v = static_cast<float>(rng.normal());
      wikisat::l2_normalize(std::span<float>(noise));
      s.target = fx.label_dirs[l];
      for (std::uint32_t i = 0; i < k; ++i) s.target[i] += 0.5f * noise[i];
      wikisat::l2_normalize(std::span<float>(s.target));
      fx.pairs.push_back(std::move(s));
    }
  }
  return fx;
}

/// Labeled tiles for probing/fine-tuning; `coord_salt` moves the coordinate
/// range so train/test tiles never coincide.
inline std::vector<wikisat::net::WeakSample> gen_labeled_tiles(
    int per_label, std::uint32_t px, std::uint64_t seed, double cloud_rate,
    std::uint64_t coord_salt) {
  const auto& labels = bench_labels();
  wikisat::tile::SyntheticTileProvider::Config cfg;
  cfg.seed = seed;
  cfg.cloud_rate = cloud_rate;
  wikisat::tile::SyntheticTileProvider provider(cfg);

  std::vector<wikisat::net::WeakSample> out;
  for (std::uint32_t l = 0; l < labels.size(); ++l) {
    for (int i = 0; i < per_label; ++i) {
      GeoCoordinate c{5.0 + 0.002 * double(out.size()) +
                          3.0 * double(coord_salt),
                      -120.0 + 0.0023 * double(out.size())};
      provider.set_label(c, labels[l]);
      auto fetched = provider.fetch(
          wikisat::tile::make_tile_request(c, 0.3, px, px));
      out.push_back({std::move(fetched.image), l});
    }
  }
  return out;
}

/// Temporal stacks: T views of the same area from nearby coordinates, all of
/// the area's label. Higher cloud rates make single views noisy, which is
/// what averaging is supposed to fix.
inline std::vector<wikisat::eval::TemporalGroup> gen_temporal_groups(
    int areas_per_label, int views, std::uint32_t px, std::uint64_t seed,
    double cloud_rate, std::uint64_t coord_salt) {
  const auto& labels = bench_labels();
  wikisat::tile::SyntheticTileProvider::Config cfg;
  cfg.seed = seed;
  cfg.cloud_rate = cloud_rate;
  wikisat::tile::SyntheticTileProvider provider(cfg);

  std::vector<wikisat::eval::TemporalGroup> groups;
  std::uint64_t area_id = 1;
  for (std::uint32_t l = 0; l < labels.size(); ++l) {
    for (int a = 0; a < areas_per_label; ++a) {
      wikisat::eval::TemporalGroup g;
      g.area_id = area_id++;
      g.label = l;
      for (int t = 0; t < views; ++t) {
        GeoCoordinate c{-20.0 + 0.05 * double(g.area_id) +
                            0.003 * double(t) + 7.0 * double(coord_salt),
                        60.0 + 0.07 * double(g.area_id) + 0.004 * double(t)};
        provider.set_label(c, labels[l]);
        auto fetched = provider.fetch(
            wikisat::tile::make_tile_request(c, 0.3, px, px));
        g.images.push_back(std::move(fetched.image));
      }
      groups.push_back(std::move(g));
    }
  }
  return groups;
}

}  // namespace fixtures
