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
#include <cstdint>
#include <istream>
#include <optional>
#include <regex>
#include <string>
#include <string_view>
#include <vector>

#include "wikisat/common.hpp"
#include "wikisat/geo.hpp"

namespace wikisat::corpus {

struct ArticleRecord {
  std::uint64_t id = 0;
  std::string title;
  std::string body;
  std::optional<std::string> raw_label;  // infobox template term, normalized
  std::vector<std::string> categories;   // lowercase, ordered, de-duplicated
  std::optional<GeoCoordinate> coord;
};

struct CorpusStats {
  std::uint64_t total_articles = 0;  // records yielded
  std::uint64_t geolocated = 0;
  std::uint64_t with_raw_label = 0;
  std::uint64_t skipped_redirects = 0;
  std::uint64_t skipped_technical = 0;  // namespace-prefixed titles
  std::uint64_t coord_rejected = 0;     // template matched, values out of range
};

namespace detail {

inline const std::regex& decimal_coord_re() {
  static const std::regex re(
      R"(\{\{\s*coord\s*\|\s*(-?[0-9]+(?:\.[0-9]+)?)\s*\|\s*(-?[0-9]+(?:\.[0-9]+)?)\s*\|\s*display\s*=\s*title)",
      std::regex::icase | std::regex::optimize);
  return re;
}

inline const std::regex& dms_coord_re() {
  static const std::regex re(
      R"(\{\{\s*coord\s*\|\s*([0-9]+)\s*\|\s*([0-9]+)\s*\|\s*([0-9]+(?:\.[0-9]+)?)\s*\|\s*([NS])\s*\|\s*([0-9]+)\s*\|\s*([0-9]+)\s*\|\s*([0-9]+(?:\.[0-9]+)?)\s*\|\s*([EW])\s*\|\s*display\s*=\s*title)",
      std::regex::icase | std::regex::optimize);
  return re;
}

enum class CoordScan { no_template, rejected, ok };

// Earliest syntactic match of either coordinate pattern decides; later
// templates are not consulted even when the first one is out of range.
inline CoordScan scan_coordinate(std::string_view body, GeoCoordinate& out) {
  // cheap pre-filter: bodies without "coord" skip the regex entirely
  auto it = std::search(
      body.begin(), body.end(), std::begin("coord"), std::end("coord") - 1,
      [](char a, char b) { return ascii_lower(a) == ascii_lower(b); });
  if (it == body.end()) return CoordScan::no_template;

  std::cmatch dec, dms;
  bool has_dec = std::regex_search(body.data(), body.data() + body.size(), dec,
                                   decimal_coord_re());
  bool has_dms = std::regex_search(body.data(), body.data() + body.size(), dms,
                                   dms_coord_re());
  if (!has_dec && !has_dms) return CoordScan::no_template;

  bool use_dec;
  if (has_dec && has_dms)
    use_dec = dec.position(0) <= dms.position(0);
  else
    use_dec = has_dec;

  if (use_dec) {
    GeoCoordinate c{std::stod(dec[1].str()), std::stod(dec[2].str())};
    if (!c.valid()) return CoordScan::rejected;
    out = c;
    return CoordScan::ok;
  }
  try {
    GeoCoordinate c{
        dms_to_decimal(std::stoi(dms[1].str()), std::stoi(dms[2].str()),
                       std::stod(dms[3].str()), dms[4].str()[0]),
        dms_to_decimal(std::stoi(dms[5].str()), std::stoi(dms[6].str()),
                       std::stod(dms[7].str()), dms[8].str()[0])};
    if (!c.valid()) return CoordScan::rejected;
    out = c;
    return CoordScan::ok;
  } catch (const std::invalid_argument&) {
    return CoordScan::rejected;  // minutes/seconds out of range
  }
}

}  // namespace detail

/// First coordinate template in the body, decimal or DMS form, or nothing.
inline std::optional<GeoCoordinate> extract_coordinate(std::string_view body) {
  GeoCoordinate c;
  if (detail::scan_coordinate(body, c) == detail::CoordScan::ok) return c;
  return std::nullopt;
}

/// Infobox template term: the text after "{{Infobox" up to the first '|',
/// newline or "}}", normalized. Nothing when the article has no infobox.
inline std::optional<std::string> extract_raw_label(std::string_view body) {
  static const std::regex re(R"(\{\{\s*infobox([^|\n}]*))",
                             std::regex::icase | std::regex::optimize);
  std::cmatch m;
  if (!std::regex_search(body.data(), body.data() + body.size(), m, re))
    return std::nullopt;
  std::string term = normalize_text(m[1].str());
  if (term.empty()) return std::nullopt;
  return term;
}

/// All [[Category:X]] targets in order of appearance, normalized and
/// de-duplicated. Sort keys ([[Category:X|key]]) are ignored.
inline std::vector<std::string> extract_categories(std::string_view body) {
  static const std::regex re(R"(\[\[\s*category\s*:\s*([^\]|]+)(?:\|[^\]]*)?\]\])",
                             std::regex::icase | std::regex::optimize);
  std::vector<std::string> out;
  auto begin = std::cregex_iterator(body.data(), body.data() + body.size(), re);
  for (auto it = begin; it != std::cregex_iterator(); ++it) {
    std::string cat = normalize_text((*it)[1].str());
    if (cat.empty()) continue;
    if (std::find(out.begin(), out.end(), cat) == out.end())
      out.push_back(cat);
  }
  return out;
}

namespace detail {

inline std::string decode_entities(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  std::size_t i = 0;
  while (i < s.size()) {
    if (s[i] != '&') {
      out.push_back(s[i++]);
      continue;
    }
    std::size_t semi = s.find(';', i);
    if (semi == std::string_view::npos || semi - i > 10) {
      out.push_back(s[i++]);
      continue;
    }
    std::string_view ent = s.substr(i + 1, semi - i - 1);
    if (ent == "lt")
      out.push_back('<');
    else if (ent == "gt")
      out.push_back('>');
    else if (ent == "amp")
      out.push_back('&');
    else if (ent == "quot")
      out.push_back('"');
    else if (ent == "apos")
      out.push_back('\'');
    else if (!ent.empty() && ent[0] == '#') {
      long code = 0;
      try {
        code = (ent.size() > 1 && (ent[1] == 'x' || ent[1] == 'X'))
                   ? std::stol(std::string(ent.substr(2)), nullptr, 16)
                   : std::stol(std::string(ent.substr(1)));
      } catch (...) {
        code = -1;
      }
      if (code >= 0 && code < 128)
        out.push_back(static_cast<char>(code));
      else {
        out.append(s.substr(i, semi - i + 1));
      }
    } else {
      out.append(s.substr(i, semi - i + 1));  // unknown entity, keep verbatim
    }
    i = semi + 1;
  }
  return out;
}

}  // namespace detail

/// Streaming pull parser over a Wikipedia-style XML dump. Memory stays
/// bounded by the largest single page regardless of dump size: raw bytes are
/// buffered only until the enclosing </page> is seen, then released.
///
/// Redirect pages (#REDIRECT body) and technical stubs (':' in the title) are
/// skipped and counted, not yielded.
class DumpParser {
 public:
  explicit DumpParser(std::istream& in) : in_(in) {}

  /// Next article in stream order, or nothing at end of dump.
  /// Throws ParseError (with byte offset) on malformed input.
  std::optional<ArticleRecord> next() {
    for (;;) {
      std::size_t open = find_in_buffer("<page");
      while (open == npos) {
        if (eof_) {
          // keep nothing: trailing non-page content (</mediawiki>) is fine
          return std::nullopt;
        }
        trim_front_keeping_tail();
        fill();
        open = find_in_buffer("<page");
      }
      std::size_t close = find_in_buffer("</page>", open);
      while (close == npos) {
        if (eof_)
          throw ParseError("unterminated <page> element",
                           base_offset_ + open);
        fill();
        close = find_in_buffer("</page>", open);
      }
      std::uint64_t page_offset = base_offset_ + open;
      std::string page(buffer_, open, close - open);
      consume(close + 7);
      peak_buffer_bytes_ = std::max(peak_buffer_bytes_, buffer_.size());

      ++pages_seen_;
      std::optional<ArticleRecord> rec = parse_page(page, page_offset);
      if (rec) return rec;
      // skipped page: keep scanning
    }
  }

  const CorpusStats& stats() const { return stats_; }
  std::size_t peak_buffer_bytes() const { return peak_buffer_bytes_; }

 private:
  static constexpr std::size_t npos = std::string::npos;
  static constexpr std::size_t kChunk = 64 * 1024;

  void fill() {
    char tmp[kChunk];
    in_.read(tmp, kChunk);
    std::streamsize got = in_.gcount();
    if (got > 0) buffer_.append(tmp, static_cast<std::size_t>(got));
    if (got < static_cast<std::streamsize>(kChunk)) eof_ = true;
    peak_buffer_bytes_ = std::max(peak_buffer_bytes_, buffer_.size());
  }

  // Drop non-page prefix bytes, keeping a short tail so a tag split across
  // chunk boundaries is still found.
  void trim_front_keeping_tail() {
    if (buffer_.size() > 16) consume(buffer_.size() - 16);
  }

  void consume(std::size_t n) {
    base_offset_ += n;
    buffer_.erase(0, n);
  }

  std::size_t find_in_buffer(std::string_view needle, std::size_t from = 0) {
    return buffer_.find(needle.data(), from, needle.size());
  }

  // Extracts <tag ...>inner</tag> from page content. Returns false when the
  // tag is absent; self-closing tags yield an empty inner.
  static bool find_element(const std::string& page, const std::string& tag,
                           std::size_t from, std::string& inner,
                           std::size_t& elem_pos) {
    std::size_t p = from;
    for (;;) {
      p = page.find("<" + tag, p);
      if (p == npos) return false;
      char after = p + tag.size() + 1 < page.size() ? page[p + tag.size() + 1]
                                                    : '\0';
      if (after == '>' || after == ' ' || after == '\t' || after == '\n' ||
          after == '/')
        break;
      ++p;  // e.g. "<id" matching "<ident"
    }
    elem_pos = p;
    std::size_t gt = page.find('>', p);
    if (gt == npos) return false;
    if (page[gt - 1] == '/') {  // self-closing
      inner.clear();
      return true;
    }
    std::size_t end = page.find("</" + tag + ">", gt + 1);
    if (end == npos) return false;
    inner = page.substr(gt + 1, end - gt - 1);
    return true;
  }

  std::optional<ArticleRecord> parse_page(const std::string& page,
                                          std::uint64_t page_offset) {
    std::string title_raw, text_raw, id_raw;
    std::size_t pos = 0;
    if (!find_element(page, "title", 0, title_raw, pos))
      throw ParseError("<page> without <title>", page_offset);
    if (!find_element(page, "text", 0, text_raw, pos))
      throw ParseError("<page> without <text>", page_offset);
    std::string title = detail::decode_entities(title_raw);
    std::string body = detail::decode_entities(text_raw);

    if (title.find(':') != std::string::npos) {
      ++stats_.skipped_technical;
      return std::nullopt;
    }
    std::size_t first = body.find_first_not_of(" \t\r\n");
    if (first != std::string::npos) {
      std::string_view head(body.data() + first,
                            std::min<std::size_t>(9, body.size() - first));
      if (to_lower(head) == "#redirect") {
        ++stats_.skipped_redirects;
        return std::nullopt;
      }
    }

    ArticleRecord rec;
    rec.title = std::move(title);
    rec.body = std::move(body);
    if (find_element(page, "id", 0, id_raw, pos)) {
      try {
        rec.id = std::stoull(id_raw);
      } catch (...) {
        rec.id = pages_seen_;
      }
    } else {
      rec.id = pages_seen_;  // fixture dumps may omit <id>
    }

    GeoCoordinate c;
    switch (detail::scan_coordinate(rec.body, c)) {
      case detail::CoordScan::ok:
        rec.coord = c;
        ++stats_.geolocated;
        break;
      case detail::CoordScan::rejected:
        ++stats_.coord_rejected;
        break;
      case detail::CoordScan::no_template:
        break;
    }
    rec.raw_label = extract_raw_label(rec.body);
    if (rec.raw_label) ++stats_.with_raw_label;
    rec.categories = extract_categories(rec.body);
    ++stats_.total_articles;
    return rec;
  }

  std::istream& in_;
  std::string buffer_;
  std::uint64_t base_offset_ = 0;
  std::uint64_t pages_seen_ = 0;
  bool eof_ = false;
  std::size_t peak_buffer_bytes_ = 0;
  CorpusStats stats_;
};

/// Convenience wrapper: parse an entire dump into memory (tests, small runs).
inline std::vector<ArticleRecord> parse_dump_all(std::istream& in,
                                                 CorpusStats* stats = nullptr) {
  DumpParser p(in);
  std::vector<ArticleRecord> out;
  while (auto rec = p.next()) out.push_back(std::move(*rec));
  if (stats) *stats = p.stats();
  return out;
}

}  // namespace wikisat::corpus
