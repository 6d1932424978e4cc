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

// Per-camera processing chain: direction estimation, separation, decoding,
// triangulation and merging.

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpsl/decode.hpp"
#include "mpsl/demux.hpp"
#include "mpsl/optics.hpp"
#include "mpsl/range.hpp"

namespace mpsl {

/// Error raised by a pipeline stage; `stage` names it for reporting.
class StageError : public std::runtime_error {
 public:
  StageError(std::string stage, const std::string& what)
      : std::runtime_error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

enum class MergePolicy { Median, WindowedTwo };

inline MergePolicy merge_policy_from_string(const std::string& s) {
  if (s == "median") return MergePolicy::Median;
  if (s == "windowed_two") return MergePolicy::WindowedTwo;
  throw std::invalid_argument("unknown merge policy '" + s + "' (expected median or windowed_two)");
}

inline std::string to_string(MergePolicy p) { return p == MergePolicy::Median ? "median" : "windowed_two"; }

struct PipelineParams {
  /// Image noise per channel, gray levels; sets detection thresholds.
  std::array<double, 3> noise_sigma{1.8138, 1.2923, 1.6745};
  /// Skip per-block estimation and use the nominal rig directions.
  bool global_directions = false;
  OrientationParams orientation;
  AssociationParams association;
  SeparationParams separation;
  DecodeParams decode;
  /// Local color normalization radius in pixels; 0 disables it.
  int normalize_radius = 0;
  double normalize_epsilon = 1.0;
  RangeFilterParams range_filter;
  MergePolicy merge = MergePolicy::Median;
  int reference_camera = 0;
  int threads = 1;
};

struct CameraDecoding {
  EncodingDirections directions;
  std::vector<SeparatedDerivative> separated;
  std::vector<DecodedMap> decoded;
};

/// Standard deviation of image noise after 8-bit quantization.
inline std::array<double, 3> effective_noise(const std::array<double, 3>& sigma) {
  std::array<double, 3> out{};
  for (std::size_t c = 0; c < 3; ++c) out[c] = std::sqrt(sigma[c] * sigma[c] + 1.0 / 12.0);
  return out;
}

inline CameraDecoding decode_camera(const FloatImage& image, const Rig& rig, int camera, const PipelineParams& p) {
  const auto& cam = rig.cameras.at(std::size_t(camera));
  if (image.width() != cam.width || image.height() != cam.height || image.channels() != 3) {
    throw StageError("demux", "image does not match camera '" + cam.name + "'");
  }
  const int np = int(rig.projectors.size());
  const auto noise = effective_noise(p.noise_sigma);
  CameraDecoding out;
  NominalDirections nominal;
  try {
    nominal = nominal_directions(rig, camera);
  } catch (const std::exception& e) {
    throw StageError("demux", e.what());
  }
  if (p.global_directions) {
    std::vector<double> angles;
    for (int i = 0; i < np; ++i) {
      const Vec2 d = nominal.at(i, cam.width / 2, cam.height / 2);
      angles.push_back(rad2deg(std::atan2(d.y, d.x)));
    }
    out.directions = global_directions(cam.width, cam.height, angles);
  } else {
    OrientationParams op = p.orientation;
    op.threads = p.threads;
    const auto grad = compute_gradients(image, 0.0, GradientOperator::Scharr);
    out.directions = assign_directions(estimate_directions(grad, op), nominal, p.association);
  }
  out.separated = separate(image, out.directions, p.separation);

  std::optional<CodeTable> table2;
  FloatImage local_mean;
  double mean_level = 1.0;
  if (p.normalize_radius > 0) {
    local_mean = box_mean(image, p.normalize_radius);
    double s = 0.0;
    for (float v : local_mean.data()) s += std::max<double>(v, p.normalize_epsilon);
    mean_level = s / double(local_mean.data().size());
  }
  for (int i = 0; i < np; ++i) {
    const auto& sd = out.separated[std::size_t(i)];
    const auto& pattern = *rig.projectors[std::size_t(i)].pattern;
    if (sd.order == 2 && !table2) table2 = build_code_table(pattern, 2);
    std::vector<Vec2> dirs;
    if (np == 1) {
      const double a = deg2rad(out.directions.global_deg[0]);
      dirs.push_back({std::cos(a), std::sin(a)});
    } else {
      for (int j = 0; j < np; ++j) {
        if (j == i) continue;
        const double a = deg2rad(out.directions.global_deg[std::size_t(j)] + 90.0);
        dirs.push_back({std::cos(a), std::sin(a)});
      }
    }
    const double gain = derivative_noise_gain(sd.order, p.separation.presmooth_sigma, dirs);
    DecodeParams dp = p.decode;
    dp.threads = p.threads;
    for (std::size_t c = 0; c < 3; ++c) dp.detection.derivative_sigma[c] = noise[c] * gain / mean_level;
    dp.detection.min_strength = p.decode.detection.min_strength / mean_level;
    const CodeTable* table = sd.order == 2 ? &*table2 : nullptr;
    if (p.normalize_radius > 0) {
      FloatImage normalized(sd.values.width(), sd.values.height(), 3);
      for (std::size_t k = 0; k < normalized.data().size(); ++k) {
        normalized.data()[k] =
            float(sd.values.data()[k] / std::max<double>(local_mean.data()[k], p.normalize_epsilon));
      }
      out.decoded.push_back(decode_pattern(sd, out.directions.global_deg[std::size_t(i)], pattern, table, dp,
                                           &normalized));
    } else {
      out.decoded.push_back(decode_pattern(sd, out.directions.global_deg[std::size_t(i)], pattern, table, dp));
    }
    out.decoded.back().projector = i;
  }
  return out;
}

/// Range images for every (projector, camera) pair, in camera order then
/// projector order, with small depth segments removed.
inline std::vector<RangeImage> reconstruct_camera(const CameraDecoding& decoding, const Rig& rig, int camera,
                                                  int threads = 1, const RangeFilterParams& filter = {}) {
  std::vector<RangeImage> out;
  for (const auto& d : decoding.decoded) {
    out.push_back(reconstruct(d, rig, d.projector, camera, threads));
    remove_small_segments(out.back(), filter);
  }
  return out;
}

/// Warps every range into the reference camera and merges per policy. The
/// two-range windowed rule needs exactly two inputs; a single input is
/// returned unchanged.
inline RangeImage merge_ranges(const std::vector<RangeImage>& ranges, const Rig& rig, MergePolicy policy,
                               int reference_camera = 0) {
  if (ranges.empty()) throw StageError("merge", "no range images");
  const auto& ref = rig.cameras.at(std::size_t(reference_camera));
  std::vector<RangeImage> common;
  for (const auto& r : ranges) {
    if (r.camera == reference_camera || r.camera < 0) {
      common.push_back(r);
    } else {
      common.push_back(warp_to_camera(r, rig.cameras.at(std::size_t(r.camera)), ref));
    }
  }
  if (common.size() == 1) return common.front();
  if (policy == MergePolicy::WindowedTwo) {
    if (common.size() != 2) throw StageError("merge", "windowed_two merging needs exactly two ranges");
    return merge_windowed_two(common[0], common[1]);
  }
  return merge_median(common);
}

}  // namespace mpsl
