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

// Netpbm (P5/P6) and PFM raster I/O. PFM rows are stored bottom-to-top and
// always written little-endian (negative scale).

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <istream>
#include <limits>
#include <ostream>
#include <stdexcept>
#include <string>

#include "mpsl/image.hpp"

namespace mpsl {

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

namespace detail {

inline void skip_ws_and_comments(std::istream& in) {
  for (;;) {
    const int ch = in.peek();
    if (ch == '#') {
      std::string line;
      std::getline(in, line);
    } else if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      in.get();
    } else {
      return;
    }
  }
}

inline int read_header_int(std::istream& in, const std::string& what) {
  skip_ws_and_comments(in);
  int v = 0;
  if (!(in >> v)) throw IoError("malformed header field: " + what);
  return v;
}

inline std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open for writing: " + path);
  return out;
}

inline std::ifstream open_in(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open for reading: " + path);
  return in;
}

inline float swap_float(float v) {
  std::uint32_t u;
  std::memcpy(&u, &v, 4);
  u = (u >> 24) | ((u >> 8) & 0xff00u) | ((u << 8) & 0xff0000u) | (u << 24);
  std::memcpy(&v, &u, 4);
  return v;
}

}  // namespace detail

/// Writes a 1-channel image as P5 or a 3-channel image as P6 (maxval 255).
inline void write_pnm(std::ostream& out, const ByteImage& img) {
  if (img.channels() != 1 && img.channels() != 3) throw IoError("PNM needs 1 or 3 channels");
  out << (img.channels() == 3 ? "P6" : "P5") << "\n" << img.width() << " " << img.height() << "\n255\n";
  out.write(reinterpret_cast<const char*>(img.data().data()), std::streamsize(img.data().size()));
  if (!out) throw IoError("PNM write failed");
}

inline void write_pnm(const std::string& path, const ByteImage& img) {
  auto out = detail::open_out(path);
  write_pnm(out, img);
}

inline ByteImage read_pnm(std::istream& in) {
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  int channels = 0;
  if (magic == "P6") {
    channels = 3;
  } else if (magic == "P5") {
    channels = 1;
  } else {
    throw IoError("unsupported PNM magic: " + magic);
  }
  const int w = detail::read_header_int(in, "width");
  const int h = detail::read_header_int(in, "height");
  const int maxval = detail::read_header_int(in, "maxval");
  if (w <= 0 || h <= 0) throw IoError("PNM: non-positive size");
  if (maxval != 255) throw IoError("PNM: only maxval 255 is supported");
  in.get();  // single whitespace before the raster
  ByteImage img(w, h, channels);
  in.read(reinterpret_cast<char*>(img.data().data()), std::streamsize(img.data().size()));
  if (in.gcount() != std::streamsize(img.data().size())) throw IoError("PNM: truncated raster");
  return img;
}

inline ByteImage read_pnm(const std::string& path) {
  auto in = detail::open_in(path);
  return read_pnm(in);
}

/// PFM with 1 ("Pf") or 3 ("PF") channels.
inline void write_pfm(std::ostream& out, const FloatImage& img) {
  if (img.channels() != 1 && img.channels() != 3) throw IoError("PFM needs 1 or 3 channels");
  out << (img.channels() == 3 ? "PF" : "Pf") << "\n" << img.width() << " " << img.height() << "\n-1.0\n";
  const bool big = std::endian::native == std::endian::big;
  for (int y = img.height() - 1; y >= 0; --y) {
    auto row = img.row(y);
    if (!big) {
      out.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    } else {
      for (float v : row) {
        const float s = detail::swap_float(v);
        out.write(reinterpret_cast<const char*>(&s), sizeof(float));
      }
    }
  }
  if (!out) throw IoError("PFM write failed");
}

inline void write_pfm(const std::string& path, const FloatImage& img) {
  auto out = detail::open_out(path);
  write_pfm(out, img);
}

inline FloatImage read_pfm(std::istream& in) {
  std::string magic(2, '\0');
  in.read(magic.data(), 2);
  int channels = 0;
  if (magic == "PF") {
    channels = 3;
  } else if (magic == "Pf") {
    channels = 1;
  } else {
    throw IoError("unsupported PFM magic: " + magic);
  }
  const int w = detail::read_header_int(in, "width");
  const int h = detail::read_header_int(in, "height");
  detail::skip_ws_and_comments(in);
  double scale = 0.0;
  if (!(in >> scale) || scale == 0.0) throw IoError("PFM: bad scale");
  in.get();
  if (w <= 0 || h <= 0) throw IoError("PFM: non-positive size");
  const bool file_little = scale < 0.0;
  const bool swap = file_little != (std::endian::native == std::endian::little);
  FloatImage img(w, h, channels);
  for (int y = h - 1; y >= 0; --y) {
    auto row = img.row(y);
    in.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size() * sizeof(float)));
    if (in.gcount() != std::streamsize(row.size() * sizeof(float))) throw IoError("PFM: truncated raster");
    if (swap) {
      for (float& v : row) v = detail::swap_float(v);
    }
  }
  return img;
}

inline FloatImage read_pfm(const std::string& path) {
  auto in = detail::open_in(path);
  return read_pfm(in);
}

/// Validity mask as P5: 255 valid, 0 invalid.
inline void write_mask(const std::string& path, const Mask& mask) {
  ByteImage out(mask.width(), mask.height(), 1);
  for (std::size_t i = 0; i < mask.data().size(); ++i) out.data()[i] = mask.data()[i] ? 255 : 0;
  write_pnm(path, out);
}

inline Mask read_mask(const std::string& path) {
  auto img = read_pnm(path);
  if (img.channels() != 1) throw IoError("mask must be single-channel PGM: " + path);
  for (auto& v : img.data()) v = v >= 128 ? 1 : 0;
  return img;
}

}  // namespace mpsl
