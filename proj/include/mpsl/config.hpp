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

// JSON experiment configuration: rig, scene, rendering, noise and pipeline
// parameters. Missing keys keep the library defaults.

#include <array>
#include <fstream>
#include <map>
#include <memory>
#include <sstream>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "json.hpp"
#include "mpsl/pattern.hpp"
#include "mpsl/pipeline.hpp"
#include "mpsl/scene.hpp"

namespace mpsl {

class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ExperimentConfig {
  Rig rig;
  SceneSurface scene;
  AmbientLight ambient;
  RenderOptions render;
  NoiseModel noise;
  double exposure = 1.0;
  PipelineParams pipeline;
};

namespace detail {

using nlohmann::json;

inline const json* find_key(const json& j, const char* key) {
  if (!j.is_object()) return nullptr;
  const auto it = j.find(key);
  return it == j.end() ? nullptr : &*it;
}

template <typename T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  const json* v = find_key(j, key);
  if (!v) return;
  try {
    out = v->get<T>();
  } catch (const json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline Vec3 read_vec3(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected an array of three numbers");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline void read_vec3_opt(const json& j, const char* key, Vec3& out, const std::string& where) {
  if (const json* v = find_key(j, key)) out = read_vec3(*v, where + "." + key);
}

inline Vec2 read_vec2(const json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(where + ": expected an array of two numbers");
  try {
    return {j[0].get<double>(), j[1].get<double>()};
  } catch (const json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

inline const json& require(const json& j, const char* key, const std::string& where) {
  const json* v = find_key(j, key);
  if (!v) throw ConfigError(where + ": missing required key '" + key + "'");
  return *v;
}

/// Camera or projector pinhole: either position/target/up or an explicit
/// world-to-device rotation (row-major) and translation.
inline PinholeModel read_pinhole(const json& j, const std::string& where, const std::string& default_name) {
  PinholeModel m;
  std::string name = default_name;
  read_opt(j, "name", name, where);
  int width = 0, height = 0;
  read_opt(j, "width", width, where);
  read_opt(j, "height", height, where);
  double f = 0.0;
  read_opt(j, "focal", f, where);
  double fx = f, fy = f;
  read_opt(j, "fx", fx, where);
  read_opt(j, "fy", fy, where);
  if (const json* rot = find_key(j, "rotation")) {
    if (!rot->is_array() || rot->size() != 3) throw ConfigError(where + ".rotation: expected 3 rows");
    m.name = name;
    m.width = width;
    m.height = height;
    m.rotation = Mat3::from_rows(read_vec3((*rot)[0], where + ".rotation[0]"), read_vec3((*rot)[1], where + ".rotation[1]"),
                                 read_vec3((*rot)[2], where + ".rotation[2]"));
    m.translation = read_vec3(require(j, "translation", where), where + ".translation");
  } else {
    const Vec3 position = read_vec3(require(j, "position", where), where + ".position");
    const Vec3 target = read_vec3(require(j, "target", where), where + ".target");
    Vec3 up{0.0, -1.0, 0.0};
    read_vec3_opt(j, "up", up, where);
    try {
      m = make_pinhole(name, 1.0, std::max(width, 1), std::max(height, 1), position, target, up);
    } catch (const CalibrationError& e) {
      throw ConfigError(where + ": " + e.what());
    }
    m.width = width;
    m.height = height;
  }
  m.fx = fx;
  m.fy = fy;
  m.cx = (width - 1) / 2.0;
  m.cy = (height - 1) / 2.0;
  read_opt(j, "cx", m.cx, where);
  read_opt(j, "cy", m.cy, where);
  try {
    m.validate();
  } catch (const CalibrationError& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return m;
}

/// Patterns are shared between projectors with identical settings.
class PatternCache {
 public:
  explicit PatternCache(std::string base_dir) : base_(std::move(base_dir)) {}

  std::shared_ptr<const StripePattern> get(const json& j, const std::string& where) {
    int k = 7, colors = 3, width = 4;
    std::string file;
    read_opt(j, "k", k, where);
    read_opt(j, "colors", colors, where);
    read_opt(j, "stripe_width_px", width, where);
    read_opt(j, "file", file, where);
    const auto key = std::make_tuple(k, colors, width, file);
    if (auto it = cache_.find(key); it != cache_.end()) return it->second;
    std::shared_ptr<const StripePattern> p;
    try {
      if (file.empty()) {
        p = std::make_shared<StripePattern>(generate_pattern(k, colors, width));
      } else {
        const std::string path = file.front() == '/' || base_.empty() ? file : base_ + "/" + file;
        std::ifstream in(path);
        if (!in) throw ConfigError(where + ".file: cannot open '" + path + "'");
        std::stringstream ss;
        ss << in.rdbuf();
        p = std::make_shared<StripePattern>(parse_pattern(ss.str(), k, width));
      }
    } catch (const ConfigError&) {
      throw;
    } catch (const std::exception& e) {
      throw ConfigError(where + ": " + e.what());
    }
    cache_[key] = p;
    return p;
  }

 private:
  std::string base_;
  std::map<std::tuple<int, int, int, std::string>, std::shared_ptr<const StripePattern>> cache_;
};

inline Albedo read_albedo(const json& j, const std::string& where) {
  if (j.is_array()) return Albedo::constant(read_vec3(j, where));
  std::string type = "constant";
  read_opt(j, "type", type, where);
  Albedo a;
  if (type == "constant") {
    read_vec3_opt(j, "color", a.color, where);
  } else if (type == "checker") {
    a.kind = Albedo::Kind::Checker;
    read_vec3_opt(j, "color", a.color, where);
    read_vec3_opt(j, "color2", a.color2, where);
    read_opt(j, "cell", a.cell, where);
  } else if (type == "rgbcmy") {
    double strong = 0.9, weak = 0.1;
    read_opt(j, "strong", strong, where);
    read_opt(j, "weak", weak, where);
    a = Albedo::rgbcmy_panel(strong, weak);
  } else if (type == "panel") {
    a.kind = Albedo::Kind::Panel;
    read_opt(j, "cols", a.cols, where);
    read_opt(j, "rows", a.rows, where);
    const json& colors = require(j, "colors", where);
    if (!colors.is_array()) throw ConfigError(where + ".colors: expected an array");
    a.colors.clear();
    for (std::size_t i = 0; i < colors.size(); ++i) {
      a.colors.push_back(read_vec3(colors[i], where + ".colors[" + std::to_string(i) + "]"));
    }
  } else {
    throw ConfigError(where + ".type: unknown albedo type '" + type + "'");
  }
  try {
    a.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(where + ": " + e.what());
  }
  return a;
}

inline Primitive read_primitive(const json& j, const std::string& where) {
  std::string type;
  read_opt(j, "type", type, where);
  Primitive p;
  if (const json* a = find_key(j, "albedo")) p.albedo = read_albedo(*a, where + ".albedo");
  if (type == "plane") {
    PlaneSurface s;
    s.origin = read_vec3(require(j, "origin", where), where + ".origin");
    read_vec3_opt(j, "normal", s.normal, where);
    read_vec3_opt(j, "u_axis", s.u_axis, where);
    read_opt(j, "half_u", s.half_u, where);
    read_opt(j, "half_v", s.half_v, where);
    if (norm(s.normal) < 1e-12) throw ConfigError(where + ".normal: zero vector");
    s.normal = normalized(s.normal);
    p.geometry = s;
  } else if (type == "sphere") {
    SphereSurface s;
    s.center = read_vec3(require(j, "center", where), where + ".center");
    read_opt(j, "radius", s.radius, where);
    p.geometry = s;
  } else if (type == "cylinder") {
    CylinderSurface s;
    s.base = read_vec3(require(j, "base", where), where + ".base");
    read_vec3_opt(j, "axis", s.axis, where);
    read_opt(j, "radius", s.radius, where);
    read_opt(j, "height", s.height, where);
    if (norm(s.axis) < 1e-12) throw ConfigError(where + ".axis: zero vector");
    s.axis = normalized(s.axis);
    p.geometry = s;
  } else if (type == "bump_field") {
    Vec3 origin = read_vec3(require(j, "origin", where), where + ".origin");
    Vec3 u_axis{1, 0, 0}, v_axis{0, 1, 0};
    read_vec3_opt(j, "u_axis", u_axis, where);
    read_vec3_opt(j, "v_axis", v_axis, where);
    double size_u = 1.0, size_v = 1.0;
    int nu = 129, nv = 129;
    read_opt(j, "size_u", size_u, where);
    read_opt(j, "size_v", size_v, where);
    read_opt(j, "nu", nu, where);
    read_opt(j, "nv", nv, where);
    if (nu < 2 || nv < 2) throw ConfigError(where + ": nu and nv must be at least 2");
    std::vector<GaussianBump> bumps;
    if (const json* bs = find_key(j, "bumps")) {
      for (std::size_t i = 0; i < bs->size(); ++i) {
        const std::string w = where + ".bumps[" + std::to_string(i) + "]";
        GaussianBump b;
        b.center = read_vec2(require((*bs)[i], "center", w), w + ".center");
        if (const json* s = find_key((*bs)[i], "sigma")) b.sigma = read_vec2(*s, w + ".sigma");
        read_opt((*bs)[i], "height", b.height, w);
        bumps.push_back(b);
      }
    }
    p.geometry = make_bump_field(origin, u_axis, v_axis, size_u, size_v, nu, nv, bumps);
  } else {
    throw ConfigError(where + ".type: unknown primitive type '" + type + "'");
  }
  return p;
}

inline void read_orientation(const json& j, OrientationParams& o, const std::string& where) {
  read_opt(j, "window", o.window, where);
  read_opt(j, "bins", o.bins, where);
  read_opt(j, "magnitude_threshold", o.magnitude_threshold, where);
  read_opt(j, "merge_deg", o.merge_deg, where);
  read_opt(j, "min_relative_population", o.min_relative_population, where);
  read_opt(j, "max_lobes", o.max_lobes, where);
  read_opt(j, "stride", o.stride, where);
  read_opt(j, "fringe_tolerance_deg", o.fringe_tolerance_deg, where);
  read_opt(j, "fringe_max_pair_deg", o.fringe_max_pair_deg, where);
  read_opt(j, "magnitude_power", o.magnitude_power, where);
}

inline void read_pipeline(const json& j, PipelineParams& p, const std::string& where) {
  if (const json* v = find_key(j, "noise_sigma")) {
    const Vec3 s = read_vec3(*v, where + ".noise_sigma");
    p.noise_sigma = {s.x, s.y, s.z};
  }
  read_opt(j, "global_directions", p.global_directions, where);
  read_opt(j, "presmooth_sigma", p.separation.presmooth_sigma, where);
  read_opt(j, "min_separation_deg", p.separation.min_separation_deg, where);
  read_opt(j, "normalize_radius", p.normalize_radius, where);
  read_opt(j, "normalize_epsilon", p.normalize_epsilon, where);
  read_opt(j, "reference_camera", p.reference_camera, where);
  if (const json* m = find_key(j, "merge")) {
    try {
      p.merge = merge_policy_from_string(m->get<std::string>());
    } catch (const std::exception& e) {
      throw ConfigError(where + ".merge: " + e.what());
    }
  }
  if (const json* o = find_key(j, "orientation")) read_orientation(*o, p.orientation, where + ".orientation");
  if (const json* a = find_key(j, "association")) {
    read_opt(*a, "max_association_deg", p.association.max_association_deg, where + ".association");
    read_opt(*a, "smoothing_radius", p.association.smoothing_radius, where + ".association");
  }
  if (const json* d = find_key(j, "detection")) {
    const std::string w = where + ".detection";
    read_opt(*d, "snr_threshold", p.decode.detection.snr_threshold, w);
    read_opt(*d, "min_strength", p.decode.detection.min_strength, w);
    read_opt(*d, "min_cosine", p.decode.detection.min_cosine, w);
    read_opt(*d, "min_relative_strength", p.decode.detection.min_relative_strength, w);
  }
  if (const json* v = find_key(j, "voting")) {
    const std::string w = where + ".voting";
    read_opt(*v, "vote_min", p.decode.voting.vote_min, w);
    read_opt(*v, "min_agreement", p.decode.voting.min_agreement, w);
    read_opt(*v, "min_streak", p.decode.voting.min_streak, w);
  }
  if (const json* c = find_key(j, "continuity")) {
    const std::string w = where + ".continuity";
    read_opt(*c, "max_jump", p.decode.continuity.max_jump, w);
    read_opt(*c, "edge_radius", p.decode.continuity.edge_radius, w);
    read_opt(*c, "min_neighbors", p.decode.continuity.min_neighbors, w);
    read_opt(*c, "min_component", p.decode.continuity.min_component, w);
  }
  if (const json* r = find_key(j, "range_filter")) {
    read_opt(*r, "max_relative_step", p.range_filter.max_relative_step, where + ".range_filter");
    read_opt(*r, "min_segment", p.range_filter.min_segment, where + ".range_filter");
  }
  read_opt(j, "gap_factor", p.decode.gap_factor, where);
  read_opt(j, "border", p.decode.border, where);
}

}  // namespace detail

/// Parses a configuration document. `base_dir` resolves relative pattern
/// file paths.
inline ExperimentConfig parse_config(const nlohmann::json& j, const std::string& base_dir = "") {
  using detail::find_key;
  using detail::read_opt;
  ExperimentConfig cfg;
  if (!j.is_object()) throw ConfigError("config: top level must be an object");

  const auto& rig = detail::require(j, "rig", "config");
  read_opt(rig, "world_units", cfg.rig.world_units, "rig");
  read_opt(rig, "min_triangulation_angle_deg", cfg.rig.min_triangulation_angle_deg, "rig");
  read_opt(rig, "nominal_depth", cfg.rig.nominal_depth, "rig");
  const auto& cams = detail::require(rig, "cameras", "rig");
  for (std::size_t i = 0; i < cams.size(); ++i) {
    cfg.rig.cameras.push_back(
        detail::read_pinhole(cams[i], "rig.cameras[" + std::to_string(i) + "]", "cam" + std::to_string(i)));
  }
  detail::PatternCache patterns(base_dir);
  const auto& projs = detail::require(rig, "projectors", "rig");
  for (std::size_t i = 0; i < projs.size(); ++i) {
    const std::string where = "rig.projectors[" + std::to_string(i) + "]";
    ProjectorModel p;
    p.pinhole = detail::read_pinhole(projs[i], where, "proj" + std::to_string(i));
    read_opt(projs[i], "roll_deg", p.roll_deg, where);
    read_opt(projs[i], "intensity", p.intensity, where);
    const nlohmann::json* pat = find_key(projs[i], "pattern");
    p.pattern = patterns.get(pat ? *pat : nlohmann::json::object(), where + ".pattern");
    cfg.rig.projectors.push_back(std::move(p));
  }
  try {
    cfg.rig.validate();
  } catch (const CalibrationError& e) {
    throw ConfigError(std::string("rig: ") + e.what());
  }

  if (const auto* scene = find_key(j, "scene")) {
    const auto* prims = find_key(*scene, "primitives");
    if (prims) {
      for (std::size_t i = 0; i < prims->size(); ++i) {
        cfg.scene.primitives.push_back(
            detail::read_primitive((*prims)[i], "scene.primitives[" + std::to_string(i) + "]"));
      }
    }
    if (const auto* amb = find_key(*scene, "ambient")) {
      detail::read_vec3_opt(*amb, "color", cfg.ambient.color, "scene.ambient");
      read_opt(*amb, "shading_factor", cfg.ambient.shading_factor, "scene.ambient");
    }
    try {
      cfg.scene.validate();
      cfg.ambient.validate();
    } catch (const std::invalid_argument& e) {
      throw ConfigError(std::string("scene: ") + e.what());
    }
  }

  if (const auto* r = find_key(j, "render")) {
    read_opt(*r, "supersample", cfg.render.supersample, "render");
    read_opt(*r, "psf_sigma", cfg.render.psf_sigma, "render");
    read_opt(*r, "shadow_tolerance_px", cfg.render.shadow_tolerance_px, "render");
    read_opt(*r, "ambient", cfg.render.ambient, "render");
    read_opt(*r, "exposure", cfg.exposure, "render");
  }
  if (!(cfg.exposure > 0.0)) throw ConfigError("render.exposure: must be positive");

  bool pipeline_noise = false;
  if (const auto* n = find_key(j, "noise")) {
    if (const auto* s = find_key(*n, "sigma_rgb")) {
      const Vec3 v = detail::read_vec3(*s, "noise.sigma_rgb");
      cfg.noise.sigma_rgb = {v.x, v.y, v.z};
    }
    read_opt(*n, "seed", cfg.noise.seed, "noise");
  }
  for (double s : cfg.noise.sigma_rgb)
    if (!(s >= 0.0)) throw ConfigError("noise.sigma_rgb: values must be non-negative");
  if (const auto* p = find_key(j, "pipeline")) {
    pipeline_noise = find_key(*p, "noise_sigma") != nullptr;
    detail::read_pipeline(*p, cfg.pipeline, "pipeline");
    if (!find_key(*p, "orientation") || !find_key(*find_key(*p, "orientation"), "magnitude_threshold")) {
      cfg.pipeline.orientation.magnitude_threshold = -1.0;
    }
  } else {
    cfg.pipeline.orientation.magnitude_threshold = -1.0;
  }
  if (!pipeline_noise) cfg.pipeline.noise_sigma = cfg.noise.sigma_rgb;
  if (cfg.pipeline.orientation.magnitude_threshold < 0.0) {
    const auto& s = cfg.pipeline.noise_sigma;
    cfg.pipeline.orientation.magnitude_threshold = std::max(1.0, 3.0 * std::max({s[0], s[1], s[2]}));
  }
  if (cfg.pipeline.reference_camera < 0 || cfg.pipeline.reference_camera >= int(cfg.rig.cameras.size())) {
    throw ConfigError("pipeline.reference_camera: no such camera");
  }
  return cfg;
}

inline ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config '" + path + "'");
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(path + ": " + e.what());
  }
  const auto slash = path.find_last_of('/');
  return parse_config(j, slash == std::string::npos ? "" : path.substr(0, slash));
}

}  // namespace mpsl
