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
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpsl/decode.hpp"
#include "mpsl/image_io.hpp"
#include "mpsl/optics.hpp"
#include "mpsl/parallel.hpp"
#include "mpsl/range_image.hpp"

namespace mpsl {

/// Triangulates every decoded pixel against the stripe plane at its
/// fractional stripe coordinate.
inline RangeImage reconstruct(const DecodedMap& decoded, const Rig& rig, int projector, int camera, int threads = 1) {
  const auto& cam = rig.cameras.at(std::size_t(camera));
  const auto& proj = rig.projectors.at(std::size_t(projector));
  if (decoded.width() != cam.width || decoded.height() != cam.height) {
    throw std::invalid_argument("reconstruct: decoded map does not match the camera size");
  }
  RangeImage out(cam.width, cam.height);
  out.projector = projector;
  out.camera = camera;
  const double n = proj.stripe_count();
  parallel_for(0, cam.height, threads, [&](int y) {
    for (int x = 0; x < cam.width; ++x) {
      const double c = decoded.coordinate(x, y);
      if (std::isnan(c) || c < 0.0 || c > n) continue;
      const auto tri = triangulate(cam, {double(x), double(y)}, stripe_plane(proj, c), rig.min_triangulation_angle_deg);
      if (tri) out.set(x, y, tri->depth);
    }
  });
  return out;
}

/// Depth segments are 8-connected through neighbors whose depths differ by
/// at most `max_relative_step` times the depth. Segments smaller than
/// `min_segment` pixels are removed; they are mostly wrongly decoded patches
/// that triangulate far from any surface.
struct RangeFilterParams {
  double max_relative_step = 0.03;
  int min_segment = 200;
};

inline void remove_small_segments(RangeImage& range, const RangeFilterParams& p = {}) {
  if (p.min_segment <= 1) return;
  const int w = range.width(), h = range.height();
  std::vector<int> label(std::size_t(w) * std::size_t(h), -1);
  std::vector<int> stack, members;
  auto idx = [w](int x, int y) { return std::size_t(y) * std::size_t(w) + std::size_t(x); };
  for (int y0 = 0; y0 < h; ++y0)
    for (int x0 = 0; x0 < w; ++x0) {
      if (!range.is_valid(x0, y0) || label[idx(x0, y0)] >= 0) continue;
      members.clear();
      stack.assign(1, int(idx(x0, y0)));
      label[idx(x0, y0)] = 1;
      while (!stack.empty()) {
        const int cur = stack.back();
        stack.pop_back();
        members.push_back(cur);
        const int x = cur % w, y = cur / w;
        const double z = range.depth(x, y);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if ((dx == 0 && dy == 0) || xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
            if (!range.is_valid(xx, yy) || label[idx(xx, yy)] >= 0) continue;
            if (std::abs(range.depth(xx, yy) - z) > p.max_relative_step * z) continue;
            label[idx(xx, yy)] = 1;
            stack.push_back(int(idx(xx, yy)));
          }
      }
      if (int(members.size()) < p.min_segment) {
        for (int m : members) range.valid.data()[std::size_t(m)] = 0;
      }
    }
}

namespace detail {

inline double lower_median(std::vector<double>& v) {
  const auto mid = v.begin() + std::ptrdiff_t((v.size() - 1) / 2);
  std::nth_element(v.begin(), mid, v.end());
  return *mid;
}

inline void require_common_grid(std::span<const RangeImage* const> ranges) {
  for (const auto* r : ranges) {
    if (r->width() != ranges[0]->width() || r->height() != ranges[0]->height()) {
      throw std::invalid_argument("range merge: inputs must share one pixel grid");
    }
  }
}

}  // namespace detail

/// Per-pixel median of the valid values; even counts take the lower median.
inline RangeImage merge_median(std::span<const RangeImage> ranges) {
  if (ranges.empty()) throw std::invalid_argument("merge_median: no inputs");
  std::vector<const RangeImage*> ptrs;
  for (const auto& r : ranges) ptrs.push_back(&r);
  detail::require_common_grid(ptrs);
  const int w = ranges[0].width(), h = ranges[0].height();
  RangeImage out(w, h);
  out.camera = ranges[0].camera;
  std::vector<double> v;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      v.clear();
      for (const auto& r : ranges)
        if (r.is_valid(x, y)) v.push_back(r.depth(x, y));
      if (!v.empty()) out.set(x, y, detail::lower_median(v));
    }
  return out;
}

enum class MergeChoice { None, A, B, Union };

/// Population variance; a single value counts as maximally uncertain.
inline double set_variance(std::span<const double> values) {
  if (values.size() < 2) return std::numeric_limits<double>::max();
  double mean = 0.0;
  for (double x : values) mean += x;
  mean /= double(values.size());
  double s = 0.0;
  for (double x : values) s += (x - mean) * (x - mean);
  return s / double(values.size());
}

/// Set selection of the two-range merge: a count gap above `count_gap`
/// picks the larger set, otherwise the smaller variance wins and a tie
/// takes the union. Empty sets are never chosen.
inline MergeChoice select_merge_set(std::span<const double> a, std::span<const double> b, int count_gap = 3) {
  if (a.empty() && b.empty()) return MergeChoice::None;
  if (a.empty()) return MergeChoice::B;
  if (b.empty()) return MergeChoice::A;
  const int na = int(a.size()), nb = int(b.size());
  if (std::abs(na - nb) > count_gap) return na > nb ? MergeChoice::A : MergeChoice::B;
  const double va = set_variance(a), vb = set_variance(b);
  if (va < vb) return MergeChoice::A;
  if (vb < va) return MergeChoice::B;
  return MergeChoice::Union;
}

struct WindowedMergeParams {
  int radius = 1;  // 3x3 neighborhoods
  int count_gap = 3;
};

inline RangeImage merge_windowed_two(const RangeImage& a, const RangeImage& b, const WindowedMergeParams& p = {}) {
  const RangeImage* pair[] = {&a, &b};
  detail::require_common_grid(pair);
  const int w = a.width(), h = a.height();
  RangeImage out(w, h);
  out.camera = a.camera;
  std::vector<double> sa, sb, chosen;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      sa.clear();
      sb.clear();
      for (int dy = -p.radius; dy <= p.radius; ++dy)
        for (int dx = -p.radius; dx <= p.radius; ++dx) {
          const int xx = x + dx, yy = y + dy;
          if (xx < 0 || yy < 0 || xx >= w || yy >= h) continue;
          if (a.is_valid(xx, yy)) sa.push_back(a.depth(xx, yy));
          if (b.is_valid(xx, yy)) sb.push_back(b.depth(xx, yy));
        }
      switch (select_merge_set(sa, sb, p.count_gap)) {
        case MergeChoice::None:
          continue;
        case MergeChoice::A:
          chosen = sa;
          break;
        case MergeChoice::B:
          chosen = sb;
          break;
        case MergeChoice::Union:
          chosen = sa;
          chosen.insert(chosen.end(), sb.begin(), sb.end());
          break;
      }
      out.set(x, y, detail::lower_median(chosen));
    }
  return out;
}

/// Forward-warps a range image from its camera into `reference` with
/// nearest-pixel splatting and a z-buffer.
inline RangeImage warp_to_camera(const RangeImage& range, const PinholeModel& source, const PinholeModel& reference) {
  if (range.width() != source.width || range.height() != source.height) {
    throw std::invalid_argument("warp_to_camera: range does not match the source camera");
  }
  RangeImage out(reference.width, reference.height);
  out.projector = range.projector;
  out.camera = range.camera;
  const Vec3 axis = source.optical_axis();
  for (int y = 0; y < range.height(); ++y)
    for (int x = 0; x < range.width(); ++x) {
      if (!range.is_valid(x, y)) continue;
      const Ray r = backproject_ray(source, {double(x), double(y)});
      const Vec3 X = r.at(range.depth(x, y) / dot(r.direction, axis));
      const auto q = reference.project(X);
      if (!q) continue;
      const int u = int(std::lround(q->x)), v = int(std::lround(q->y));
      if (u < 0 || v < 0 || u >= reference.width || v >= reference.height) continue;
      const double z = reference.to_device(X).z;
      if (!(z > 0.0)) continue;
      if (!out.is_valid(u, v) || z < out.depth(u, v)) out.set(u, v, z);
    }
  return out;
}

struct ErrorMetrics {
  bool overlap = false;
  double rms = std::numeric_limits<double>::quiet_NaN();
  double mean_abs = std::numeric_limits<double>::quiet_NaN();
  double outlier_fraction = std::numeric_limits<double>::quiet_NaN();
  /// Fraction of image pixels valid in the evaluated range.
  double coverage = 0.0;
  /// Fraction of truth-valid pixels that the range also covers.
  double truth_coverage = 0.0;
  double truth_depth_range = 0.0;
  std::size_t compared = 0;
};

/// Statistics over pixels valid in both images; an outlier deviates by more
/// than 1% of the truth depth range.
inline ErrorMetrics error_metrics(const RangeImage& range, const RangeImage& truth) {
  const RangeImage* pair[] = {&range, &truth};
  detail::require_common_grid(pair);
  ErrorMetrics m;
  m.coverage = range.coverage();
  double lo = std::numeric_limits<double>::max(), hi = std::numeric_limits<double>::lowest();
  std::size_t truth_valid = 0;
  for (int y = 0; y < truth.height(); ++y)
    for (int x = 0; x < truth.width(); ++x) {
      if (!truth.is_valid(x, y)) continue;
      ++truth_valid;
      lo = std::min(lo, double(truth.depth(x, y)));
      hi = std::max(hi, double(truth.depth(x, y)));
    }
  m.truth_depth_range = truth_valid ? hi - lo : 0.0;
  double se = 0.0, ae = 0.0;
  std::size_t outliers = 0;
  for (int y = 0; y < truth.height(); ++y)
    for (int x = 0; x < truth.width(); ++x) {
      if (!truth.is_valid(x, y) || !range.is_valid(x, y)) continue;
      const double e = double(range.depth(x, y)) - double(truth.depth(x, y));
      se += e * e;
      ae += std::abs(e);
      if (std::abs(e) > 0.01 * m.truth_depth_range) ++outliers;
      ++m.compared;
    }
  m.truth_coverage = truth_valid ? double(m.compared) / double(truth_valid) : 0.0;
  if (m.compared == 0) return m;
  m.overlap = true;
  m.rms = std::sqrt(se / double(m.compared));
  m.mean_abs = ae / double(m.compared);
  m.outlier_fraction = double(outliers) / double(m.compared);
  return m;
}

/// Writes `stem`.pfm (depth, 0 where invalid) and `stem`_valid.pgm.
inline void write_range(const std::string& stem, const RangeImage& range) {
  FloatImage depth = range.depth;
  for (std::size_t i = 0; i < depth.data().size(); ++i)
    if (!range.valid.data()[i]) depth.data()[i] = 0.0f;
  write_pfm(stem + ".pfm", depth);
  write_mask(stem + "_valid.pgm", range.valid);
}

/// Reads a depth PFM; the validity mask comes from the sibling _valid.pgm
/// when present, otherwise from finite positive depths.
inline RangeImage read_range(const std::string& pfm_path) {
  RangeImage r;
  r.depth = read_pfm(pfm_path);
  if (r.depth.channels() != 1) throw IoError("range must be a single-channel PFM: " + pfm_path);
  std::string stem = pfm_path;
  if (stem.size() > 4 && stem.substr(stem.size() - 4) == ".pfm") stem.resize(stem.size() - 4);
  const std::string mask_path = stem + "_valid.pgm";
  if (std::filesystem::exists(mask_path)) {
    r.valid = read_mask(mask_path);
    if (r.valid.width() != r.depth.width() || r.valid.height() != r.depth.height()) {
      throw IoError("mask size does not match range: " + mask_path);
    }
  } else {
    r.valid = Mask(r.depth.width(), r.depth.height(), 1, 0);
    for (std::size_t i = 0; i < r.depth.data().size(); ++i) {
      const float z = r.depth.data()[i];
      r.valid.data()[i] = std::isfinite(z) && z > 0.0f ? 1 : 0;
    }
  }
  return r;
}

}  // namespace mpsl
