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

#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "json.hpp"
#include "wikisat/common.hpp"
#include "wikisat/corpus.hpp"

namespace wikisat::corpus {

/// One JSON-lines row of the extracted-articles file. The body itself lives
/// in an optional sidecar text file; the row carries its digest.
struct ArticleRow {
  std::uint64_t id = 0;
  std::string title;
  std::optional<std::string> raw_label;
  std::vector<std::string> categories;
  std::optional<double> lat;
  std::optional<double> lon;
  std::string body_sha256;
  std::optional<std::string> body_path;
};

inline ArticleRow make_row(const ArticleRecord& rec,
                           std::optional<std::string> body_path = {}) {
  ArticleRow row;
  row.id = rec.id;
  row.title = rec.title;
  row.raw_label = rec.raw_label;
  row.categories = rec.categories;
  if (rec.coord) {
    row.lat = rec.coord->lat;
    row.lon = rec.coord->lon;
  }
  row.body_sha256 = sha256_hex(rec.body);
  row.body_path = std::move(body_path);
  return row;
}

inline nlohmann::ordered_json to_json(const ArticleRow& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["title"] = r.title;
  if (r.raw_label)
    j["raw_label"] = *r.raw_label;
  else
    j["raw_label"] = nullptr;
  j["categories"] = r.categories;
  if (r.lat)
    j["lat"] = *r.lat;
  else
    j["lat"] = nullptr;
  if (r.lon)
    j["lon"] = *r.lon;
  else
    j["lon"] = nullptr;
  j["body_sha256"] = r.body_sha256;
  if (r.body_path) j["body_path"] = *r.body_path;
  return j;
}

inline ArticleRow row_from_json(const nlohmann::json& j) {
  ArticleRow r;
  r.id = j.at("id").get<std::uint64_t>();
  r.title = j.at("title").get<std::string>();
  if (!j.at("raw_label").is_null())
    r.raw_label = j.at("raw_label").get<std::string>();
  r.categories = j.at("categories").get<std::vector<std::string>>();
  if (!j.at("lat").is_null()) r.lat = j.at("lat").get<double>();
  if (!j.at("lon").is_null()) r.lon = j.at("lon").get<double>();
  r.body_sha256 = j.value("body_sha256", std::string());
  if (j.contains("body_path") && !j.at("body_path").is_null()) {
    std::string p = j.at("body_path").get<std::string>();
    if (!p.empty()) r.body_path = std::move(p);
  }
  return r;
}

inline void write_row(std::ostream& os, const ArticleRow& r) {
  os << to_json(r).dump() << '\n';
}

inline std::vector<ArticleRow> read_rows(std::istream& is) {
  std::vector<ArticleRow> out;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    out.push_back(row_from_json(nlohmann::json::parse(line)));
  }
  return out;
}

}  // namespace wikisat::corpus
