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

// Pinhole cameras and stripe projectors in a shared world frame, stripe
// plane construction, and ray-plane triangulation. No lens distortion.

#include <cmath>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpsl/geometry.hpp"
#include "mpsl/pattern.hpp"

namespace mpsl {

class CalibrationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

struct Ray {
  Vec3 origin;
  Vec3 direction;  // unit length
  Vec3 at(double t) const { return origin + t * direction; }
};

/// Points X with dot(normal, X) == offset; normal is unit length.
struct Plane {
  Vec3 normal;
  double offset = 0.0;
  double signed_distance(Vec3 p) const { return dot(normal, p) - offset; }
};

struct PinholeModel {
  std::string name;
  double fx = 1.0, fy = 1.0;
  double cx = 0.0, cy = 0.0;
  Mat3 rotation;      // world -> device
  Vec3 translation;   // device = rotation * world + translation
  int width = 0, height = 0;

  Vec3 center() const { return -(rotation.transposed() * translation); }
  Vec3 to_device(Vec3 world) const { return rotation * world + translation; }
  Vec3 direction_to_world(Vec3 device_dir) const { return rotation.transposed() * device_dir; }
  Vec3 optical_axis() const { return rotation.row(2); }

  /// Image coordinates of a world point, nullopt when it is not in front.
  std::optional<Vec2> project(Vec3 world) const {
    const Vec3 d = to_device(world);
    if (d.z <= 1e-12) return std::nullopt;
    return Vec2{fx * d.x / d.z + cx, fy * d.y / d.z + cy};
  }

  bool in_image(Vec2 p) const { return p.x >= -0.5 && p.y >= -0.5 && p.x < width - 0.5 && p.y < height - 0.5; }

  void validate() const {
    if (!(fx > 0.0) || !(fy > 0.0)) throw CalibrationError(name + ": focal lengths must be positive");
    if (width <= 0 || height <= 0) throw CalibrationError(name + ": image size must be positive");
    const Mat3 rrt = rotation * rotation.transposed();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 3; ++c) {
        if (std::abs(rrt(r, c) - (r == c ? 1.0 : 0.0)) > 1e-9) {
          throw CalibrationError(name + ": rotation is not orthonormal");
        }
      }
    if (std::abs(rotation.determinant() - 1.0) > 1e-9) {
      throw CalibrationError(name + ": rotation determinant is not +1");
    }
  }
};

/// Device frame with z toward `target`, x to the right and y down relative
/// to the `up` hint.
inline Mat3 look_at_rotation(Vec3 position, Vec3 target, Vec3 up) {
  const Vec3 z = normalized(target - position);
  const Vec3 xr = cross(z, up);
  if (norm(xr) < 1e-12) throw CalibrationError("look_at: up vector parallel to viewing direction");
  const Vec3 x = normalized(xr);
  const Vec3 y = cross(z, x);
  return Mat3::from_rows(x, y, z);
}

inline PinholeModel make_pinhole(std::string name, double f, int width, int height, Vec3 position,
                                 Vec3 target, Vec3 up = {0.0, -1.0, 0.0}) {
  PinholeModel m;
  m.name = std::move(name);
  m.fx = m.fy = f;
  m.cx = (width - 1) / 2.0;
  m.cy = (height - 1) / 2.0;
  m.width = width;
  m.height = height;
  m.rotation = look_at_rotation(position, target, up);
  m.translation = -(m.rotation * position);
  return m;
}

struct ProjectorModel {
  PinholeModel pinhole;
  /// Pattern roll about the optical axis; 0 encodes along device +x.
  double roll_deg = 0.0;
  std::shared_ptr<const StripePattern> pattern;
  /// Peak channel irradiance of a primary stripe, in camera gray levels for a
  /// frontal unit-albedo surface.
  double intensity = 110.0;

  Vec2 encoding_axis() const { return {std::cos(deg2rad(roll_deg)), std::sin(deg2rad(roll_deg))}; }

  double stripe_width() const { return pattern ? pattern->stripe_width_px : 1.0; }
  int stripe_count() const { return pattern ? pattern->size() : 0; }

  /// Fractional stripe coordinate of a projector pixel: stripe i spans
  /// [i, i+1); the pattern is centered on the principal point.
  double pattern_coordinate(Vec2 px) const {
    const Vec2 a = encoding_axis();
    const double along = (px.x - pinhole.cx) * a.x + (px.y - pinhole.cy) * a.y;
    return along / stripe_width() + stripe_count() / 2.0;
  }

  std::optional<ColorLabel> color_at(Vec2 px) const {
    if (!pattern || !pinhole.in_image(px)) return std::nullopt;
    const double p = pattern_coordinate(px);
    if (p < 0.0 || p >= stripe_count()) return std::nullopt;
    return pattern->stripes[std::size_t(std::min(int(std::floor(p)), stripe_count() - 1))];
  }
};

struct Rig {
  std::vector<ProjectorModel> projectors;
  std::vector<PinholeModel> cameras;
  std::string world_units = "m";
  double min_triangulation_angle_deg = 1.0;
  /// Working distance used for nominal per-projector image directions; 0
  /// derives it from the closest approach of camera and projector axes.
  double nominal_depth = 0.0;

  void validate() const {
    if (projectors.empty() || cameras.empty()) {
      throw CalibrationError("rig needs at least one projector and one camera");
    }
    if (projectors.size() > 3) throw CalibrationError("rig supports at most three projectors");
    for (const auto& c : cameras) c.validate();
    for (const auto& p : projectors) {
      p.pinhole.validate();
      if (!p.pattern) throw CalibrationError(p.pinhole.name + ": projector has no pattern");
    }
  }
};

inline Ray backproject_ray(const PinholeModel& camera, Vec2 pixel) {
  const Vec3 d{(pixel.x - camera.cx) / camera.fx, (pixel.y - camera.cy) / camera.fy, 1.0};
  return {camera.center(), normalized(camera.direction_to_world(d))};
}

/// World plane through the projector center and the boundary line at
/// fractional stripe coordinate `boundary_index` of the rolled pattern.
inline Plane stripe_plane(const ProjectorModel& projector, double boundary_index) {
  const auto& pin = projector.pinhole;
  if (!(pin.fx > 0.0) || !(pin.fy > 0.0)) throw CalibrationError("stripe_plane: invalid projector focal");
  if (!(boundary_index >= 0.0 && boundary_index <= projector.stripe_count())) {
    throw std::out_of_range("stripe_plane: boundary index outside the pattern");
  }
  const Vec2 a = projector.encoding_axis();
  const double m = (boundary_index - projector.stripe_count() / 2.0) * projector.stripe_width();
  // a . (p - c) = m in pixels  <=>  (a.x fx, a.y fy, -m) . (x/z, y/z, 1) = 0
  const Vec3 n_dev{a.x * pin.fx, a.y * pin.fy, -m};
  const Vec3 n = normalized(pin.direction_to_world(n_dev));
  return {n, dot(n, pin.center())};
}

struct Triangulation {
  Vec3 point;
  double depth = 0.0;  // camera-frame z
};

/// Intersects the ray through `pixel` with `plane`. Returns nullopt when the
/// ray-plane angle is below `min_angle_deg` or the point is not in front.
inline std::optional<Triangulation> triangulate(const PinholeModel& camera, Vec2 pixel, const Plane& plane,
                                                double min_angle_deg = 1.0) {
  const Ray ray = backproject_ray(camera, pixel);
  const double denom = dot(plane.normal, ray.direction);
  if (std::abs(denom) < std::sin(deg2rad(min_angle_deg))) return std::nullopt;
  const double t = -plane.signed_distance(ray.origin) / denom;
  if (!(t > 1e-9)) return std::nullopt;
  Triangulation out;
  out.point = ray.at(t);
  out.depth = camera.to_device(out.point).z;
  if (!(out.depth > 0.0)) return std::nullopt;
  return out;
}

inline double closest_axis_depth(const PinholeModel& camera, const PinholeModel& other) {
  const Vec3 p = camera.center(), u = camera.optical_axis();
  const Vec3 q = other.center(), v = other.optical_axis();
  const Vec3 w = p - q;
  const double a = dot(u, u), b = dot(u, v), c = dot(v, v), d = dot(u, w), e = dot(v, w);
  const double den = a * c - b * b;
  if (den < 1e-12) return 1.0;
  const double s = (b * e - c * d) / den;
  return s > 1e-6 ? s : 1.0;
}

/// Image direction (unit, oriented toward increasing stripe coordinate) of a
/// projector's encoding axis as seen at the center of a camera, assuming a
/// fronto-parallel surface at the rig's nominal depth.
inline Vec2 nominal_encoding_direction(const Rig& rig, int projector, int camera) {
  const auto& cam = rig.cameras.at(std::size_t(camera));
  const auto& proj = rig.projectors.at(std::size_t(projector));
  const double depth = rig.nominal_depth > 0.0 ? rig.nominal_depth : closest_axis_depth(cam, proj.pinhole);
  const Vec2 c{cam.cx, cam.cy};
  const Ray r0 = backproject_ray(cam, c);
  const Vec3 x0 = r0.at(depth / dot(r0.direction, cam.optical_axis()));
  const Plane surface{cam.optical_axis(), dot(cam.optical_axis(), x0)};
  const auto q = proj.pinhole.project(x0);
  if (!q) throw CalibrationError("nominal_encoding_direction: surface point behind projector");
  const Vec2 a = proj.encoding_axis();
  const Vec2 q1 = *q + proj.stripe_width() * a;
  const Ray pr = backproject_ray(proj.pinhole, q1);
  const double den = dot(surface.normal, pr.direction);
  if (std::abs(den) < 1e-9) throw CalibrationError("nominal_encoding_direction: degenerate geometry");
  const Vec3 x1 = pr.at(-surface.signed_distance(pr.origin) / den);
  const auto u1 = cam.project(x1);
  if (!u1) throw CalibrationError("nominal_encoding_direction: shifted point behind camera");
  const Vec2 d = *u1 - c;
  const double len = norm(d);
  if (len < 1e-12) throw CalibrationError("nominal_encoding_direction: zero image motion");
  return (1.0 / len) * d;
}

}  // namespace mpsl
