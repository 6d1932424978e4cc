// Copyright 2026 The mpsl Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <cstdint>

#include "mpsl/image.hpp"

namespace mpsl {

/// Per-pixel camera-frame depth with a validity mask.
struct RangeImage {
  FloatImage depth;
  Mask valid;
  int projector = -1;
  int camera = -1;

  RangeImage() = default;
  RangeImage(int width, int height) : depth(width, height, 1, 0.0f), valid(width, height, 1, 0) {}

  int width() const { return depth.width(); }
  int height() const { return depth.height(); }

  bool is_valid(int x, int y) const { return valid(x, y) != 0; }

  void set(int x, int y, double z) {
    depth(x, y) = float(z);
    valid(x, y) = 1;
  }

  std::size_t valid_count() const {
    std::size_t n = 0;
    for (auto v : valid.data()) n += v != 0;
    return n;
  }

  /// Fraction of image pixels holding a valid depth.
  double coverage() const {
    return depth.pixel_count() ? double(valid_count()) / double(depth.pixel_count()) : 0.0;
  }
};

}  // namespace mpsl
