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
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"
#include "wikisat/common.hpp"
#include "wikisat/geo.hpp"
#include "wikisat/image.hpp"
#include "wikisat/rng.hpp"

namespace wikisat::tile {

struct TileRequest {
  GeoCoordinate center;
  std::uint32_t width_px = 1000;
  std::uint32_t height_px = 1000;
  double gsd = 0.3;  // meters per pixel

  /// Ground footprint side length in meters (width_px * gsd).
  double footprint_side_m() const { return width_px * gsd; }
};

inline TileRequest make_tile_request(const GeoCoordinate& coord, double gsd,
                                     std::uint32_t width_px = 1000,
                                     std::uint32_t height_px = 1000) {
  if (!(gsd > 0.0) || gsd > 10.0)
    throw std::invalid_argument("make_tile_request: gsd out of (0, 10]");
  if (width_px == 0 || height_px == 0)
    throw std::invalid_argument("make_tile_request: zero tile dimension");
  if (!coord.valid())
    throw std::invalid_argument("make_tile_request: invalid coordinate");
  return TileRequest{coord, width_px, height_px, gsd};
}

/// Coverage miss is an expected outcome callers count and skip; transport
/// errors are provider failures.
enum class TileStatus { ok, coverage_miss, transport_error };

struct FetchOutcome {
  TileStatus status = TileStatus::transport_error;
  ImageTensor image;
  bool cloudy = false;
};

class TileProvider {
 public:
  virtual ~TileProvider() = default;
  virtual FetchOutcome fetch(const TileRequest& request) const = 0;
  virtual std::string name() const = 0;
};

inline FetchOutcome fetch_tile(const TileProvider& provider,
                               const TileRequest& request) {
  return provider.fetch(request);
}

namespace detail {

inline std::int64_t quantize_deg(double deg) {
  return static_cast<std::int64_t>(std::llround(deg * 1e6));
}

inline std::uint64_t coord_hash(const GeoCoordinate& c) {
  return hash_mix(static_cast<std::uint64_t>(quantize_deg(c.lat)),
                  static_cast<std::uint64_t>(quantize_deg(c.lon)));
}

}  // namespace detail

/// Deterministic procedural imagery: a per-label palette and stripe/blob
/// texture keyed by (label, coordinate hash, seed), optional white cloud
/// blotches at a configured rate, optional coverage gaps. Tiles for the same
/// (coordinate, seed) are bitwise identical call to call.
class SyntheticTileProvider : public TileProvider {
 public:
  struct Config {
    std::uint64_t seed = 42;
    double cloud_rate = 0.0;
    double coverage_gap_rate = 0.0;
    double grayscale_rate = 0.0;
    double brightness_jitter = 0.08;
  };

  explicit SyntheticTileProvider(Config config) : config_(config) {}

  void set_label(const GeoCoordinate& coord, const std::string& label) {
    labels_[key(coord)] = label;
  }

  std::string name() const override { return "synthetic"; }

  FetchOutcome fetch(const TileRequest& request) const override {
    if (request.width_px == 0 || request.height_px == 0)
      return {TileStatus::transport_error, {}, false};
    std::uint64_t ch = detail::coord_hash(request.center);
    if (config_.coverage_gap_rate > 0.0) {
      Rng gap(hash_mix(hash_mix(config_.seed, ch), 0xC0FFEE));
      if (gap.uniform() < config_.coverage_gap_rate)
        return {TileStatus::coverage_miss, {}, false};
    }

    std::string label = "none";
    auto it = labels_.find(key(request.center));
    if (it != labels_.end()) label = it->second;

    FetchOutcome out;
    out.status = TileStatus::ok;
    Rng img_rng(hash_mix(hash_mix(config_.seed, ch), 0x7117E));
    out.cloudy = config_.cloud_rate > 0.0 &&
                 img_rng.uniform() < config_.cloud_rate;
    bool gray = config_.grayscale_rate > 0.0 &&
                img_rng.uniform() < config_.grayscale_rate;
    out.image = render(label, request, img_rng, out.cloudy, gray);
    return out;
  }

 private:
  static std::pair<std::int64_t, std::int64_t> key(const GeoCoordinate& c) {
    return {detail::quantize_deg(c.lat), detail::quantize_deg(c.lon)};
  }

  struct LabelStyle {
    float base[3];
    double angle;        // stripe orientation
    double freq;         // cycles per tile
    double stripe_amp;
    int blob_count;
    double blob_radius;
    float blob_amp;
  };

  static LabelStyle style_for(const std::string& label) {
    Rng r(fnv1a64(label));
    LabelStyle s;
    for (float& b : s.base)
      b = static_cast<float>(0.25 + 0.4 * r.uniform());
    s.angle = 3.14159265358979 * r.index(8) / 8.0;
    s.freq = 4.0 + r.index(7);
    s.stripe_amp = 0.10 + 0.08 * r.uniform();
    s.blob_count = 2 + static_cast<int>(r.index(4));
    s.blob_radius = 0.08 + 0.08 * r.uniform();
    s.blob_amp = static_cast<float>(0.12 + 0.10 * r.uniform());
    return s;
  }

  ImageTensor render(const std::string& label, const TileRequest& req,
                     Rng& rng, bool cloudy, bool gray) const {
    LabelStyle s = style_for(label);
    double phase = rng.uniform(0.0, 6.28318530717958);
    double jitter = rng.uniform(-config_.brightness_jitter,
                                config_.brightness_jitter);
    struct Blob {
      double x, y;
      float sign;
    };
    std::vector<Blob> blobs(s.blob_count);
    for (auto& b : blobs)
      b = {rng.uniform(), rng.uniform(), rng.uniform() < 0.5 ? -1.0f : 1.0f};

    struct Cloud {
      double x, y, r;
    };
    std::vector<Cloud> clouds;
    if (cloudy) {
      // heavy cover: most of the scene disappears under the blotches
      int n = 4 + static_cast<int>(rng.index(4));
      for (int i = 0; i < n; ++i)
        clouds.push_back({rng.uniform(), rng.uniform(),
                          0.25 + 0.20 * rng.uniform()});
    }

    const double ca = std::cos(s.angle), sa = std::sin(s.angle);
    ImageTensor img = make_image(req.height_px, req.width_px, gray ? 1 : 3);
    for (std::uint32_t y = 0; y < req.height_px; ++y) {
      double ny = req.height_px > 1 ? double(y) / (req.height_px - 1) : 0.5;
      for (std::uint32_t x = 0; x < req.width_px; ++x) {
        double nx = req.width_px > 1 ? double(x) / (req.width_px - 1) : 0.5;
        double stripe =
            s.stripe_amp *
            std::sin(6.28318530717958 * s.freq * (nx * ca + ny * sa) + phase);
        double bump = 0.0;
        for (const auto& b : blobs) {
          double dx = nx - b.x, dy = ny - b.y;
          bump += b.sign * s.blob_amp *
                  std::exp(-(dx * dx + dy * dy) /
                           (2.0 * s.blob_radius * s.blob_radius));
        }
        double cloud = 0.0;
        for (const auto& c : clouds) {
          double dx = nx - c.x, dy = ny - c.y;
          double d = std::sqrt(dx * dx + dy * dy);
          if (d < c.r) cloud = std::max(cloud, 1.0 - d / c.r);
        }
        for (std::uint32_t ch = 0; ch < img.channels; ++ch) {
          double base = gray ? (s.base[0] + s.base[1] + s.base[2]) / 3.0
                             : s.base[ch];
          double v = base + jitter + stripe + bump;
          v = v + (0.97 - v) * std::min(1.0, cloud * 1.5);  // whiten clouds
          if (v < 0.0) v = 0.0;
          if (v > 1.0) v = 1.0;
          img.at(y, x, ch) = static_cast<float>(v);
        }
      }
    }
    return img;
  }

  Config config_;
  std::map<std::pair<std::int64_t, std::int64_t>, std::string> labels_;
};

struct DatasetTuple {
  std::uint64_t article_id = 0;
  GeoCoordinate coord;
  std::optional<std::string> weak_label;
  std::string image_path;  // relative to the manifest directory
  std::string provider;
  double gsd = 0.3;
};

struct DatasetManifest {
  std::vector<DatasetTuple> tuples;
  std::uint64_t coverage_misses = 0;
};

struct PairingArticle {
  std::uint64_t id = 0;
  GeoCoordinate coord;
  std::optional<std::string> weak_label;
};

struct BuildOptions {
  double gsd = 0.3;
  std::uint32_t tile_px = 1000;
  unsigned jobs = 1;
};

/// Fetch one tile per article and persist it under out_dir/images as a
/// content-addressed tensor file. Re-running over the same inputs rewrites
/// identical bytes to identical names, so the manifest is stable.
inline DatasetManifest build_dataset(const std::vector<PairingArticle>& articles,
                                     const TileProvider& provider,
                                     const std::filesystem::path& out_dir,
                                     const BuildOptions& opts = {}) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(out_dir / "images", ec);
  if (ec)
    throw std::runtime_error("cannot create dataset directory: " +
                             (out_dir / "images").string());

  std::vector<FetchOutcome> outcomes(articles.size());
  auto fetch_range = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t i = lo; i < hi; ++i)
      outcomes[i] = provider.fetch(
          make_tile_request(articles[i].coord, opts.gsd, opts.tile_px,
                            opts.tile_px));
  };
  if (opts.jobs <= 1 || articles.size() < 2 * opts.jobs) {
    fetch_range(0, articles.size());
  } else {
    std::vector<std::thread> workers;
    std::size_t chunk = (articles.size() + opts.jobs - 1) / opts.jobs;
    for (unsigned w = 0; w < opts.jobs; ++w) {
      std::size_t b = w * chunk;
      std::size_t e = std::min(articles.size(), b + chunk);
      if (b >= e) break;
      workers.emplace_back(fetch_range, b, e);
    }
    for (auto& t : workers) t.join();
  }

  DatasetManifest manifest;
  for (std::size_t i = 0; i < articles.size(); ++i) {
    const FetchOutcome& out = outcomes[i];
    if (out.status == TileStatus::coverage_miss) {
      ++manifest.coverage_misses;
      continue;
    }
    if (out.status == TileStatus::transport_error)
      throw std::runtime_error("tile provider transport error for article " +
                               std::to_string(articles[i].id));
    std::string bytes = tensor_bytes(out.image);
    std::string rel = "images/" + sha256_hex(bytes).substr(0, 16) + ".wstn";
    fs::path file = out_dir / rel;
    if (!fs::exists(file)) {
      std::ofstream f(file, std::ios::binary);
      if (!f) throw std::runtime_error("cannot write " + file.string());
      f.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    }
    manifest.tuples.push_back({articles[i].id, articles[i].coord,
                               articles[i].weak_label, rel, provider.name(),
                               opts.gsd});
  }
  return manifest;
}

// Manifest rows as JSON-lines: {article_id, lat, lon, label, image_path,
// provider, gsd}.

inline void write_manifest(std::ostream& os, const DatasetManifest& m) {
  for (const auto& t : m.tuples) {
    nlohmann::ordered_json j;
    j["article_id"] = t.article_id;
    j["lat"] = t.coord.lat;
    j["lon"] = t.coord.lon;
    if (t.weak_label)
      j["label"] = *t.weak_label;
    else
      j["label"] = nullptr;
    j["image_path"] = t.image_path;
    j["provider"] = t.provider;
    j["gsd"] = t.gsd;
    os << j.dump() << '\n';
  }
}

inline DatasetManifest read_manifest(std::istream& is) {
  DatasetManifest m;
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    nlohmann::json j = nlohmann::json::parse(line);
    DatasetTuple t;
    t.article_id = j.at("article_id").get<std::uint64_t>();
    t.coord = {j.at("lat").get<double>(), j.at("lon").get<double>()};
    if (!j.at("label").is_null())
      t.weak_label = j.at("label").get<std::string>();
    t.image_path = j.at("image_path").get<std::string>();
    t.provider = j.value("provider", std::string("synthetic"));
    t.gsd = j.value("gsd", 0.3);
    m.tuples.push_back(std::move(t));
  }
  return m;
}

}  // namespace wikisat::tile
