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

#include <istream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wikisat/common.hpp"
#include "wikisat/corpus.hpp"

namespace wikisat::weak {

/// Ordered clusters of ordered keywords. Cluster order and keyword order are
/// the labeling priority: earlier wins. Keywords in `discard_set` mark
/// articles that cannot be told apart from above (events, people, ...) and
/// void the label when matched.
struct KeywordHierarchy {
  struct Cluster {
    std::string name;
    std::vector<std::string> keywords;
  };
  std::vector<Cluster> clusters;
  std::map<std::string, std::string> merge_map;
  std::set<std::string> discard_set;

  bool has_keyword(const std::string& k) const {
    for (const auto& c : clusters)
      for (const auto& kw : c.keywords)
        if (kw == k) return true;
    return false;
  }

  std::set<std::string> merge_targets() const {
    std::set<std::string> t;
    for (const auto& [from, to] : merge_map) t.insert(to);
    return t;
  }

  /// Throws std::invalid_argument when structural invariants are violated.
  void validate() const {
    std::set<std::string> names, kws;
    for (const auto& c : clusters) {
      if (!names.insert(c.name).second)
        throw std::invalid_argument("duplicate cluster name: " + c.name);
      for (const auto& kw : c.keywords)
        if (!kws.insert(kw).second)
          throw std::invalid_argument("duplicate keyword: " + kw);
    }
    for (const auto& [from, to] : merge_map) {
      if (!kws.count(from))
        throw std::invalid_argument("merge source is not a keyword: " + from);
      if (merge_map.count(to))
        throw std::invalid_argument("merge target is itself merged: " + to);
    }
    for (const auto& d : discard_set)
      if (!kws.count(d))
        throw std::invalid_argument("discard entry is not a keyword: " + d);
  }
};

/// Whole-word substring search on normalized text, so "port" does not hit
/// "airport". A trailing plural 's' on the matched word is accepted, which
/// lets "airport" hit category strings like "airports in new york". Both
/// sides must already be in normalize_text() form.
inline bool contains_word(std::string_view haystack, std::string_view word) {
  if (word.empty()) return false;
  auto boundary = [&](std::size_t i) {
    return i == haystack.size() ||
           !is_ascii_alnum(static_cast<unsigned char>(haystack[i]));
  };
  std::size_t pos = 0;
  while ((pos = haystack.find(word, pos)) != std::string_view::npos) {
    bool left_ok = pos == 0 || !is_ascii_alnum(static_cast<unsigned char>(
                                   haystack[pos - 1]));
    std::size_t end = pos + word.size();
    bool right_ok = boundary(end) ||
                    (haystack[end] == 's' && boundary(end + 1));
    if (left_ok && right_ok) return true;
    ++pos;
  }
  return false;
}

enum class MatchKind { none, labeled, discarded };

struct AssignOutcome {
  MatchKind kind = MatchKind::none;
  std::string keyword;  // set when kind != none
};

/// Scan clusters in order, keywords top to bottom; per keyword the raw label
/// is searched before the categories. First hit anywhere decides.
inline AssignOutcome assign_label_detail(const corpus::ArticleRecord& article,
                                         const KeywordHierarchy& h) {
  std::optional<std::string> raw;
  if (article.raw_label) raw = normalize_text(*article.raw_label);
  for (const auto& cluster : h.clusters) {
    for (const auto& kw : cluster.keywords) {
      bool hit = raw && contains_word(*raw, kw);
      if (!hit) {
        for (const auto& cat : article.categories) {
          if (contains_word(cat, kw)) {
            hit = true;
            break;
          }
        }
      }
      if (hit) {
        if (h.discard_set.count(kw)) return {MatchKind::discarded, kw};
        return {MatchKind::labeled, kw};
      }
    }
  }
  return {};
}

/// The per-article weak label keyword, or nothing (no match or discarded).
inline std::optional<std::string> assign_label(
    const corpus::ArticleRecord& article, const KeywordHierarchy& h) {
  AssignOutcome o = assign_label_detail(article, h);
  if (o.kind == MatchKind::labeled) return o.keyword;
  return std::nullopt;
}

/// Map a keyword through the merge table; unmapped labels pass through.
/// Valid inputs are hierarchy keywords and merge targets, which makes the
/// operation idempotent. Anything else is an input-domain error.
inline std::string merge_label(const std::string& label,
                               const KeywordHierarchy& h) {
  auto it = h.merge_map.find(label);
  if (it != h.merge_map.end()) return it->second;
  if (h.has_keyword(label) || h.merge_targets().count(label)) return label;
  throw std::invalid_argument("merge_label: unknown label: " + label);
}

struct PrunePartition {
  std::map<std::string, std::uint64_t> kept;
  std::map<std::string, std::uint64_t> pruned;
};

/// Labels with count < threshold move to the pruned side. Exact partition.
inline PrunePartition prune_rare(
    const std::map<std::string, std::uint64_t>& histogram,
    std::uint64_t threshold) {
  PrunePartition p;
  for (const auto& [label, count] : histogram) {
    if (count < threshold)
      p.pruned[label] = count;
    else
      p.kept[label] = count;
  }
  return p;
}

struct LabeledPair {
  std::uint64_t id = 0;
  std::string label;
};

struct LabelReport {
  std::map<std::string, std::uint64_t> histogram;  // kept labels only
  std::uint64_t unlabeled = 0;   // no keyword matched, or label pruned
  std::uint64_t discarded = 0;   // matched a discard keyword
  std::vector<std::pair<std::string, std::uint64_t>> pruned_labels;
  std::uint64_t input_count = 0;

  bool balanced() const {
    std::uint64_t sum = unlabeled + discarded;
    for (const auto& [l, c] : histogram) sum += c;
    return sum == input_count;
  }
};

struct LabelCorpusResult {
  std::vector<LabeledPair> pairs;  // kept labels, in article order
  LabelReport report;
};

/// assign -> merge -> prune over a whole corpus. `jobs > 1` fans the scan out
/// over article chunks; chunk results are reduced in order, so the output is
/// identical for any job count.
inline LabelCorpusResult label_corpus(
    const std::vector<corpus::ArticleRecord>& articles,
    const KeywordHierarchy& h, std::uint64_t threshold, unsigned jobs = 1) {
  struct Partial {
    std::vector<std::pair<std::uint64_t, std::string>> merged;  // id, label
    std::uint64_t unlabeled = 0;
    std::uint64_t discarded = 0;
  };

  auto scan = [&](std::size_t begin, std::size_t end, Partial& out) {
    for (std::size_t i = begin; i < end; ++i) {
      AssignOutcome o = assign_label_detail(articles[i], h);
      switch (o.kind) {
        case MatchKind::labeled:
          out.merged.emplace_back(articles[i].id, merge_label(o.keyword, h));
          break;
        case MatchKind::discarded:
          ++out.discarded;
          break;
        case MatchKind::none:
          ++out.unlabeled;
          break;
      }
    }
  };

  std::vector<Partial> parts;
  if (jobs <= 1 || articles.size() < 2 * jobs) {
    parts.resize(1);
    scan(0, articles.size(), parts[0]);
  } else {
    parts.resize(jobs);
    std::vector<std::thread> workers;
    std::size_t chunk = (articles.size() + jobs - 1) / jobs;
    for (unsigned w = 0; w < jobs; ++w) {
      std::size_t b = w * chunk;
      std::size_t e = std::min(articles.size(), b + chunk);
      if (b >= e) break;
      workers.emplace_back(scan, b, e, std::ref(parts[w]));
    }
    for (auto& t : workers) t.join();
  }

  LabelCorpusResult res;
  res.report.input_count = articles.size();
  std::map<std::string, std::uint64_t> histogram;
  std::vector<std::pair<std::uint64_t, std::string>> merged_all;
  for (const auto& p : parts) {
    res.report.unlabeled += p.unlabeled;
    res.report.discarded += p.discarded;
    for (const auto& [id, label] : p.merged) {
      ++histogram[label];
      merged_all.emplace_back(id, label);
    }
  }

  PrunePartition pruned = prune_rare(histogram, threshold);
  res.report.histogram = pruned.kept;
  for (const auto& [label, count] : pruned.pruned) {
    res.report.pruned_labels.emplace_back(label, count);
    res.report.unlabeled += count;  // pruned articles end up unlabeled
  }
  for (auto& [id, label] : merged_all)
    if (pruned.kept.count(label)) res.pairs.push_back({id, label});
  return res;
}

inline nlohmann::ordered_json report_to_json(const LabelReport& r) {
  nlohmann::ordered_json j;
  nlohmann::ordered_json hist;
  for (const auto& [label, count] : r.histogram) hist[label] = count;
  j["histogram"] = hist;
  j["unlabeled"] = r.unlabeled;
  j["discarded"] = r.discarded;
  nlohmann::ordered_json pruned = nlohmann::ordered_json::array();
  for (const auto& [label, count] : r.pruned_labels)
    pruned.push_back({label, count});
  j["pruned"] = pruned;
  j["input_count"] = r.input_count;
  return j;
}

// ---------------------------------------------------------------------------
// Hierarchy file format:
//   [cluster <name>]   one keyword per line, priority order
//   [merge]            lines of "old -> new"
//   [discard]          one keyword per line
// Blank lines and lines starting with '#' are ignored.

inline KeywordHierarchy parse_hierarchy(std::istream& in) {
  KeywordHierarchy h;
  enum class Section { none, cluster, merge, discard };
  Section section = Section::none;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string t = normalize_text(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ParseError("unterminated section header", lineno);
      std::string head = t.substr(1, t.size() - 2);
      if (head == "merge") {
        section = Section::merge;
      } else if (head == "discard") {
        section = Section::discard;
      } else if (head.rfind("cluster ", 0) == 0) {
        h.clusters.push_back({head.substr(8), {}});
        section = Section::cluster;
      } else {
        throw ParseError("unknown section: " + head, lineno);
      }
      continue;
    }
    switch (section) {
      case Section::none:
        throw ParseError("keyword before any section header", lineno);
      case Section::cluster:
        h.clusters.back().keywords.push_back(t);
        break;
      case Section::merge: {
        std::size_t arrow = t.find("->");
        if (arrow == std::string::npos)
          throw ParseError("merge line without '->'", lineno);
        std::string from = normalize_text(t.substr(0, arrow));
        std::string to = normalize_text(t.substr(arrow + 2));
        if (from.empty() || to.empty())
          throw ParseError("empty merge side", lineno);
        h.merge_map[from] = to;
        break;
      }
      case Section::discard:
        h.discard_set.insert(t);
        break;
    }
  }
  h.validate();
  return h;
}

inline KeywordHierarchy load_hierarchy(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw std::runtime_error("cannot open hierarchy file: " + path);
  return parse_hierarchy(f);
}

inline void write_hierarchy(std::ostream& os, const KeywordHierarchy& h) {
  for (const auto& c : h.clusters) {
    os << "[cluster " << c.name << "]\n";
    for (const auto& kw : c.keywords) os << kw << '\n';
  }
  if (!h.merge_map.empty()) {
    os << "[merge]\n";
    for (const auto& [from, to] : h.merge_map) os << from << " -> " << to << '\n';
  }
  if (!h.discard_set.empty()) {
    os << "[discard]\n";
    for (const auto& d : h.discard_set) os << d << '\n';
  }
}

/// Bundled default: six clusters in scan order, with the clusters of
/// non-overhead-visible entities (ephemeral happenings, organizations) first
/// and last, mirroring how they gate the visual labels.
inline KeywordHierarchy default_hierarchy() {
  KeywordHierarchy h;
  h.clusters = {
      {"ephemeral", {"battle", "incident", "event", "election", "person"}},
      {"buildings",
       {"airport", "stadium", "school", "hospital", "church", "museum",
        "castle", "building"}},
      {"infrastructure", {"station", "bridge", "dam", "lighthouse", "harbor"}},
      {"place",
       {"city", "town", "hamlet", "village", "commune", "county", "district"}},
      {"nature", {"lake", "river", "mountain", "island", "forest", "park"}},
      {"others", {"company", "organization", "ship"}},
  };
  h.merge_map = {{"hamlet", "town"}, {"village", "town"}, {"commune", "town"}};
  h.discard_set = {"battle", "incident", "event", "election",
                   "person", "company", "organization", "ship"};
  h.validate();
  return h;
}

}  // namespace wikisat::weak
