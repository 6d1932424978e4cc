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

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace mpsl {

/// Interleaved multi-channel raster. Pixel (x, y) has its center at integer
/// coordinates; x runs along columns, y along rows.
template <typename T>
class Image {
 public:
  using value_type = T;

  Image() = default;
  Image(int width, int height, int channels = 1, T fill = T{})
      : width_(width), height_(height), channels_(channels) {
    if (width < 0 || height < 0 || channels < 1) {
      throw std::invalid_argument("Image: invalid dimensions");
    }
    data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
  }

  int width() const { return width_; }
  int height() const { return height_; }
  int channels() const { return channels_; }
  std::size_t pixel_count() const { return static_cast<std::size_t>(width_) * height_; }
  bool empty() const { return data_.empty(); }

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }
  bool contains(double x, double y) const {
    return x >= 0.0 && y >= 0.0 && x <= width_ - 1.0 && y <= height_ - 1.0;
  }

  T& operator()(int x, int y, int c = 0) {
    assert(contains(x, y) && c >= 0 && c < channels_);
    return data_[index(x, y, c)];
  }
  const T& operator()(int x, int y, int c = 0) const {
    assert(contains(x, y) && c >= 0 && c < channels_);
    return data_[index(x, y, c)];
  }

  std::span<T> pixel(int x, int y) { return {data_.data() + index(x, y, 0), std::size_t(channels_)}; }
  std::span<const T> pixel(int x, int y) const {
    return {data_.data() + index(x, y, 0), std::size_t(channels_)};
  }

  std::span<T> row(int y) {
    return {data_.data() + index(0, y, 0), std::size_t(width_) * channels_};
  }
  std::span<const T> row(int y) const {
    return {data_.data() + index(0, y, 0), std::size_t(width_) * channels_};
  }

  std::vector<T>& data() { return data_; }
  const std::vector<T>& data() const { return data_; }

  void fill(T value) { std::fill(data_.begin(), data_.end(), value); }

  bool same_shape(const Image& other) const {
    return width_ == other.width_ && height_ == other.height_ && channels_ == other.channels_;
  }

  friend bool operator==(const Image&, const Image&) = default;

 private:
  std::size_t index(int x, int y, int c) const {
    return (static_cast<std::size_t>(y) * width_ + x) * channels_ + c;
  }

  int width_ = 0;
  int height_ = 0;
  int channels_ = 1;
  std::vector<T> data_;
};

using FloatImage = Image<float>;
using ByteImage = Image<std::uint8_t>;
using Mask = Image<std::uint8_t>;

/// Floating-point RGB raster in camera gray-level units (exposure 1 maps
/// directly onto the 8-bit range).
using RadianceImage = Image<float>;

inline RadianceImage make_rgb(int width, int height, float fill = 0.0f) {
  return RadianceImage(width, height, 3, fill);
}

/// Bilinear sample with clamp-to-edge addressing.
template <typename T>
double sample_bilinear(const Image<T>& img, double x, double y, int c = 0) {
  const double cx = std::clamp(x, 0.0, double(img.width() - 1));
  const double cy = std::clamp(y, 0.0, double(img.height() - 1));
  const int x0 = std::min(int(cx), img.width() - 1);
  const int y0 = std::min(int(cy), img.height() - 1);
  const int x1 = std::min(x0 + 1, img.width() - 1);
  const int y1 = std::min(y0 + 1, img.height() - 1);
  const double fx = cx - x0;
  const double fy = cy - y0;
  const double top = (1.0 - fx) * img(x0, y0, c) + fx * img(x1, y0, c);
  const double bot = (1.0 - fx) * img(x0, y1, c) + fx * img(x1, y1, c);
  return (1.0 - fy) * top + fy * bot;
}

inline std::vector<double> gaussian_kernel(double sigma) {
  const int radius = std::max(1, int(std::ceil(3.0 * sigma)));
  std::vector<double> k(2 * radius + 1);
  double sum = 0.0;
  for (int i = -radius; i <= radius; ++i) {
    k[i + radius] = std::exp(-0.5 * i * i / (sigma * sigma));
    sum += k[i + radius];
  }
  for (auto& v : k) v /= sum;
  return k;
}

/// Separable Gaussian blur, clamp-to-edge. sigma <= 0 returns a copy.
inline FloatImage gaussian_blur(const FloatImage& src, double sigma) {
  if (sigma <= 0.0 || src.empty()) return src;
  const auto k = gaussian_kernel(sigma);
  const int r = int(k.size() / 2);
  const int w = src.width(), h = src.height(), nc = src.channels();
  FloatImage tmp(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * src(std::clamp(x + i, 0, w - 1), y, c);
        tmp(x, y, c) = float(acc);
      }
    }
  }
  FloatImage out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        double acc = 0.0;
        for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp(x, std::clamp(y + i, 0, h - 1), c);
        out(x, y, c) = float(acc);
      }
    }
  }
  return out;
}

/// Mean over a (2r+1)^2 box, clipped at the image border.
inline FloatImage box_mean(const FloatImage& src, int radius) {
  const int w = src.width(), h = src.height(), nc = src.channels();
  std::vector<double> integral(std::size_t(w + 1) * (h + 1) * nc, 0.0);
  auto at = [&](int x, int y, int c) -> double& {
    return integral[(std::size_t(y) * (w + 1) + x) * nc + c];
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      for (int c = 0; c < nc; ++c) {
        at(x + 1, y + 1, c) = src(x, y, c) + at(x, y + 1, c) + at(x + 1, y, c) - at(x, y, c);
      }
    }
  }
  FloatImage out(w, h, nc);
  for (int y = 0; y < h; ++y) {
    const int y0 = std::max(0, y - radius), y1 = std::min(h, y + radius + 1);
    for (int x = 0; x < w; ++x) {
      const int x0 = std::max(0, x - radius), x1 = std::min(w, x + radius + 1);
      const double area = double(x1 - x0) * (y1 - y0);
      for (int c = 0; c < nc; ++c) {
        const double s = at(x1, y1, c) - at(x0, y1, c) - at(x1, y0, c) + at(x0, y0, c);
        out(x, y, c) = float(s / area);
      }
    }
  }
  return out;
}

}  // namespace mpsl
