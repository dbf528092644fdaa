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

#include <stdexcept>

namespace wikisat {

struct GeoCoordinate {
  double lat = 0.0;  // decimal degrees, [-90, 90]
  double lon = 0.0;  // decimal degrees, [-180, 180]

  bool valid() const {
    return lat >= -90.0 && lat <= 90.0 && lon >= -180.0 && lon <= 180.0;
  }
};

/// Degrees-minutes-seconds to signed decimal degrees. S and W negate.
/// Preconditions: deg >= 0, 0 <= min < 60, 0 <= sec < 60.
inline double dms_to_decimal(int deg, int min, double sec, char hemi) {
  if (deg < 0 || min < 0 || min >= 60 || sec < 0.0 || sec >= 60.0)
    throw std::invalid_argument("dms_to_decimal: component out of range");
  double v = deg + min / 60.0 + sec / 3600.0;
  switch (hemi) {
    case 'N':
    case 'n':
    case 'E':
    case 'e':
      return v;
    case 'S':
    case 's':
    case 'W':
    case 'w':
      return -v;
    default:
      throw std::invalid_argument("dms_to_decimal: bad hemisphere");
  }
}

}  // namespace wikisat
