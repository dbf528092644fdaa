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

#include <cstdint>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "wikisat/common.hpp"

namespace wikisat::tile {

/// Row-major H x W x C float image, values in [0, 1]. C is 3 (RGB) or 1.
struct ImageTensor {
  std::uint32_t height = 0;
  std::uint32_t width = 0;
  std::uint32_t channels = 0;
  std::vector<float> data;

  float& at(std::uint32_t y, std::uint32_t x, std::uint32_t c) {
    return data[(std::size_t(y) * width + x) * channels + c];
  }
  float at(std::uint32_t y, std::uint32_t x, std::uint32_t c) const {
    return data[(std::size_t(y) * width + x) * channels + c];
  }

  bool shape_valid() const {
    return data.size() == std::size_t(height) * width * channels &&
           (channels == 1 || channels == 3);
  }
};

inline ImageTensor make_image(std::uint32_t h, std::uint32_t w,
                              std::uint32_t c, float fill = 0.0f) {
  ImageTensor img{h, w, c, {}};
  img.data.assign(std::size_t(h) * w * c, fill);
  return img;
}

/// Bilinear resample with aligned corners: output corner pixels sample input
/// corner pixels exactly, so an identity resize is bit-exact and a constant
/// image stays constant.
inline ImageTensor resize(const ImageTensor& img, std::uint32_t out_h,
                          std::uint32_t out_w) {
  if (out_h == 0 || out_w == 0)
    throw std::invalid_argument("resize: output dims must be positive");
  if (!img.shape_valid()) throw std::invalid_argument("resize: bad tensor");
  if (out_h == img.height && out_w == img.width) return img;

  ImageTensor out = make_image(out_h, out_w, img.channels);
  double sy = out_h > 1 ? double(img.height - 1) / (out_h - 1) : 0.0;
  double sx = out_w > 1 ? double(img.width - 1) / (out_w - 1) : 0.0;
  double cy0 = out_h > 1 ? 0.0 : (img.height - 1) / 2.0;
  double cx0 = out_w > 1 ? 0.0 : (img.width - 1) / 2.0;

  for (std::uint32_t oy = 0; oy < out_h; ++oy) {
    double fy = cy0 + sy * oy;
    std::uint32_t y0 = static_cast<std::uint32_t>(fy);
    std::uint32_t y1 = y0 + 1 < img.height ? y0 + 1 : y0;
    float wy = static_cast<float>(fy - y0);
    for (std::uint32_t ox = 0; ox < out_w; ++ox) {
      double fx = cx0 + sx * ox;
      std::uint32_t x0 = static_cast<std::uint32_t>(fx);
      std::uint32_t x1 = x0 + 1 < img.width ? x0 + 1 : x0;
      float wx = static_cast<float>(fx - x0);
      for (std::uint32_t c = 0; c < img.channels; ++c) {
        // lerp form keeps constants bit-exact
        float a = img.at(y0, x0, c);
        float top = a + wx * (img.at(y0, x1, c) - a);
        float b = img.at(y1, x0, c);
        float bot = b + wx * (img.at(y1, x1, c) - b);
        out.at(oy, ox, c) = top + wy * (bot - top);
      }
    }
  }
  return out;
}

// Tensor container: magic "WSTN", u32 version=1, u32 H, u32 W, u32 C,
// f32 data row-major little-endian.

inline constexpr std::uint32_t kTensorVersion = 1;

inline void save_tensor(std::ostream& os, const ImageTensor& img) {
  if (!img.shape_valid()) throw std::invalid_argument("save_tensor: bad tensor");
  os.write("WSTN", 4);
  write_u32(os, kTensorVersion);
  write_u32(os, img.height);
  write_u32(os, img.width);
  write_u32(os, img.channels);
  write_f32_array(os, img.data.data(), img.data.size());
}

inline std::string tensor_bytes(const ImageTensor& img) {
  std::ostringstream os(std::ios::binary);
  save_tensor(os, img);
  return os.str();
}

inline ImageTensor load_tensor(std::istream& is) {
  char magic[4];
  if (!is.read(magic, 4) || std::string_view(magic, 4) != "WSTN")
    throw std::runtime_error("not a tensor file");
  std::uint32_t version = read_u32(is);
  if (version != kTensorVersion)
    throw std::runtime_error("unsupported tensor version " +
                             std::to_string(version));
  ImageTensor img;
  img.height = read_u32(is);
  img.width = read_u32(is);
  img.channels = read_u32(is);
  img.data.resize(std::size_t(img.height) * img.width * img.channels);
  read_f32_array(is, img.data.data(), img.data.size());
  if (!img.shape_valid()) throw std::runtime_error("corrupt tensor file");
  return img;
}

inline ImageTensor load_tensor_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw std::runtime_error("cannot open tensor file: " + path);
  return load_tensor(f);
}

}  // namespace wikisat::tile
