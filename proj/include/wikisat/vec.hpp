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
#include <cstddef>
#include <span>
#include <stdexcept>

namespace wikisat {

template <typename T>
T dot(std::span<const T> a, std::span<const T> b) {
  if (a.size() != b.size())
    throw std::invalid_argument("dot: dimension mismatch");
  T acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T l2_norm(std::span<const T> a) {
  T acc = 0;
  for (T x : a) acc += x * x;
  return std::sqrt(acc);
}

/// cos(angle) between two nonzero vectors, in [-1, 1].
template <typename T>
T cosine(std::span<const T> a, std::span<const T> b) {
  T na = l2_norm(a);
  T nb = l2_norm(b);
  if (na == 0 || nb == 0)
    throw std::invalid_argument("cosine: undefined angle for zero vector");
  // normalize before the dot product so extreme magnitudes cannot overflow
  T acc = 0;
  for (std::size_t i = 0; i < a.size(); ++i) acc += (a[i] / na) * (b[i] / nb);
  if (acc > T(1)) acc = T(1);
  if (acc < T(-1)) acc = T(-1);
  return acc;
}

template <typename T>
void l2_normalize(std::span<T> a) {
  T n = l2_norm(std::span<const T>(a.data(), a.size()));
  if (n == 0)
    throw std::invalid_argument("l2_normalize: zero vector");
  for (T& x : a) x /= n;
}

}  // namespace wikisat
