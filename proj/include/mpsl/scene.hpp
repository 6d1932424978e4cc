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

// Lambertian scene simulator: analytic primitives lit by superposed stripe
// projectors plus ambient light, with projector-side shadow maps, Gaussian
// sensor noise and 8-bit quantization.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <memory>
#include <numbers>
#include <optional>
#include <stdexcept>
#include <variant>
#include <vector>

#include "mpsl/geometry.hpp"
#include "mpsl/image.hpp"
#include "mpsl/optics.hpp"
#include "mpsl/parallel.hpp"
#include "mpsl/range_image.hpp"

namespace mpsl {

/// Surface reflectance S(lambda), evaluated in primitive-local coordinates.
struct Albedo {
  enum class Kind { Constant, Checker, Panel };
  Kind kind = Kind::Constant;
  Vec3 color{0.8, 0.8, 0.8};
  Vec3 color2{0.2, 0.2, 0.2};  // checker only
  double cell = 0.1;           // checker cell size, world units
  int cols = 3, rows = 2;      // panel grid
  std::vector<Vec3> colors;    // panel colors, row-major

  static Albedo constant(Vec3 c) {
    Albedo a;
    a.color = c;
    return a;
  }

  /// Strong red/green/blue/cyan/magenta/yellow squares in a 3x2 grid.
  static Albedo rgbcmy_panel(double strong = 0.9, double weak = 0.1) {
    Albedo a;
    a.kind = Kind::Panel;
    a.cols = 3;
    a.rows = 2;
    a.colors = {{strong, weak, weak},   {weak, strong, weak},   {weak, weak, strong},
                {weak, strong, strong}, {strong, weak, strong}, {strong, strong, weak}};
    return a;
  }

  void validate() const {
    auto ok = [](Vec3 c) {
      return c.x >= 0.0 && c.x <= 1.0 && c.y >= 0.0 && c.y <= 1.0 && c.z >= 0.0 && c.z <= 1.0;
    };
    if (!ok(color) || !ok(color2)) throw std::invalid_argument("albedo channels must lie in [0, 1]");
    for (const auto& c : colors)
      if (!ok(c)) throw std::invalid_argument("albedo channels must lie in [0, 1]");
    if (kind == Kind::Panel && (cols < 1 || rows < 1 || int(colors.size()) != cols * rows)) {
      throw std::invalid_argument("panel albedo needs cols*rows colors");
    }
    if (kind == Kind::Checker && !(cell > 0.0)) throw std::invalid_argument("checker cell must be positive");
  }

  /// `uv` in world units; `extent` is the half size of the primitive's local
  /// domain (used to normalize panel coordinates).
  int region(Vec2 uv, Vec2 extent) const {
    switch (kind) {
      case Kind::Constant:
        return 0;
      case Kind::Checker:
        return int(std::floor(uv.x / cell) + std::floor(uv.y / cell)) & 1;
      case Kind::Panel: {
        const double su = extent.x > 0 ? (uv.x + extent.x) / (2 * extent.x) : 0.5;
        const double sv = extent.y > 0 ? (uv.y + extent.y) / (2 * extent.y) : 0.5;
        const int c = std::clamp(int(std::floor(su * cols)), 0, cols - 1);
        const int r = std::clamp(int(std::floor(sv * rows)), 0, rows - 1);
        return r * cols + c;
      }
    }
    return 0;
  }

  Vec3 evaluate(int region_id) const {
    switch (kind) {
      case Kind::Constant: return color;
      case Kind::Checker: return region_id ? color2 : color;
      case Kind::Panel: return colors[std::size_t(region_id)];
    }
    return color;
  }
};

/// Plane through `origin`; bounded to |u| <= half_u, |v| <= half_v when the
/// half sizes are positive.
struct PlaneSurface {
  Vec3 origin;
  Vec3 normal{0, 0, -1};
  Vec3 u_axis{1, 0, 0};
  double half_u = 0.0, half_v = 0.0;
};

struct SphereSurface {
  Vec3 center;
  double radius = 1.0;
};

/// Closed cylinder from `base` along unit `axis` for `height`.
struct CylinderSurface {
  Vec3 base;
  Vec3 axis{0, -1, 0};
  double radius = 0.1;
  double height = 0.3;
};

/// Height field h(u, v) sampled on a regular grid over
/// [-size_u/2, size_u/2] x [-size_v/2, size_v/2], displaced along `normal`.
struct HeightFieldSurface {
  Vec3 origin;
  Vec3 u_axis{1, 0, 0};
  Vec3 v_axis{0, 1, 0};
  Vec3 normal{0, 0, -1};
  double size_u = 1.0, size_v = 1.0;
  int nu = 2, nv = 2;
  std::vector<double> heights;  // nv rows of nu samples
  /// Cached extremes of `heights`; NaN means not computed.
  double min_height = std::numeric_limits<double>::quiet_NaN();
  double max_height = std::numeric_limits<double>::quiet_NaN();

  void update_bounds() {
    const auto [lo, hi] = std::minmax_element(heights.begin(), heights.end());
    min_height = *lo;
    max_height = *hi;
  }

  double height_at(double u, double v, double* du = nullptr, double* dv = nullptr) const {
    const double gu = (u / size_u + 0.5) * (nu - 1);
    const double gv = (v / size_v + 0.5) * (nv - 1);
    const int i = std::clamp(int(std::floor(gu)), 0, nu - 2);
    const int j = std::clamp(int(std::floor(gv)), 0, nv - 2);
    const double fu = gu - i, fv = gv - j;
    const double h00 = heights[std::size_t(j * nu + i)], h10 = heights[std::size_t(j * nu + i + 1)];
    const double h01 = heights[std::size_t((j + 1) * nu + i)], h11 = heights[std::size_t((j + 1) * nu + i + 1)];
    if (du) *du = ((1 - fv) * (h10 - h00) + fv * (h11 - h01)) * (nu - 1) / size_u;
    if (dv) *dv = ((1 - fu) * (h01 - h00) + fu * (h11 - h10)) * (nv - 1) / size_v;
    return (1 - fv) * ((1 - fu) * h00 + fu * h10) + fv * ((1 - fu) * h01 + fu * h11);
  }
};

struct GaussianBump {
  Vec2 center;
  Vec2 sigma{0.1, 0.1};
  double height = 0.1;
};

/// Samples a sum of anisotropic Gaussian bumps onto a height-field grid.
inline HeightFieldSurface make_bump_field(Vec3 origin, Vec3 u_axis, Vec3 v_axis, double size_u, double size_v,
                                          int nu, int nv, const std::vector<GaussianBump>& bumps) {
  HeightFieldSurface hf;
  hf.origin = origin;
  hf.u_axis = normalized(u_axis);
  hf.v_axis = normalized(v_axis);
  hf.normal = normalized(cross(hf.v_axis, hf.u_axis));
  hf.size_u = size_u;
  hf.size_v = size_v;
  hf.nu = nu;
  hf.nv = nv;
  hf.heights.resize(std::size_t(nu * nv));
  for (int j = 0; j < nv; ++j) {
    for (int i = 0; i < nu; ++i) {
      const double u = (double(i) / (nu - 1) - 0.5) * size_u;
      const double v = (double(j) / (nv - 1) - 0.5) * size_v;
      double h = 0.0;
      for (const auto& b : bumps) {
        const double du = (u - b.center.x) / b.sigma.x, dv = (v - b.center.y) / b.sigma.y;
        h += b.height * std::exp(-0.5 * (du * du + dv * dv));
      }
      hf.heights[std::size_t(j * nu + i)] = h;
    }
  }
  hf.update_bounds();
  return hf;
}

using Geometry = std::variant<PlaneSurface, SphereSurface, CylinderSurface, HeightFieldSurface>;

struct Primitive {
  Geometry geometry;
  Albedo albedo;
};

struct Hit {
  double t = 0.0;
  Vec3 point;
  Vec3 normal;  // unit, facing the ray origin
  Vec3 albedo;
  int surface_id = -1;
};

namespace detail {

struct LocalHit {
  double t;
  Vec3 normal;
  Vec2 uv;
  Vec2 extent;
};

inline std::optional<LocalHit> intersect(const PlaneSurface& s, const Ray& ray, double tmin) {
  const Vec3 n = normalized(s.normal);
  const double den = dot(n, ray.direction);
  if (std::abs(den) < 1e-12) return std::nullopt;
  const double t = dot(n, s.origin - ray.origin) / den;
  if (!(t > tmin)) return std::nullopt;
  const Vec3 u = normalized(s.u_axis - dot(s.u_axis, n) * n);
  const Vec3 v = cross(n, u);
  const Vec3 rel = ray.at(t) - s.origin;
  const Vec2 uv{dot(rel, u), dot(rel, v)};
  if (s.half_u > 0 && std::abs(uv.x) > s.half_u) return std::nullopt;
  if (s.half_v > 0 && std::abs(uv.y) > s.half_v) return std::nullopt;
  return LocalHit{t, n, uv, {s.half_u, s.half_v}};
}

inline std::optional<LocalHit> intersect(const SphereSurface& s, const Ray& ray, double tmin) {
  const Vec3 oc = ray.origin - s.center;
  const double b = dot(oc, ray.direction);
  const double c = dot(oc, oc) - s.radius * s.radius;
  const double disc = b * b - c;
  if (disc < 0.0) return std::nullopt;
  const double sq = std::sqrt(disc);
  double t = -b - sq;
  if (!(t > tmin)) t = -b + sq;
  if (!(t > tmin)) return std::nullopt;
  const Vec3 n = (ray.at(t) - s.center) / s.radius;
  const Vec2 uv{std::atan2(n.x, -n.z) * s.radius, std::asin(std::clamp(n.y, -1.0, 1.0)) * s.radius};
  return LocalHit{t, n, uv, {0, 0}};
}

inline std::optional<LocalHit> intersect(const CylinderSurface& s, const Ray& ray, double tmin) {
  const Vec3 a = normalized(s.axis);
  std::optional<LocalHit> best;
  auto consider = [&](double t, Vec3 n, Vec2 uv) {
    if (t > tmin && (!best || t < best->t)) best = LocalHit{t, n, uv, {0, 0}};
  };
  const Vec3 w = ray.origin - s.base;
  const Vec3 dp = ray.direction - dot(ray.direction, a) * a;
  const Vec3 wp = w - dot(w, a) * a;
  const double qa = dot(dp, dp), qb = dot(dp, wp), qc = dot(wp, wp) - s.radius * s.radius;
  if (qa > 1e-14) {
    const double disc = qb * qb - qa * qc;
    if (disc >= 0.0) {
      const double sq = std::sqrt(disc);
      for (double t : {(-qb - sq) / qa, (-qb + sq) / qa}) {
        const double h = dot(w + t * ray.direction, a);
        if (h >= 0.0 && h <= s.height) {
          const Vec3 radial = wp + t * dp;
          consider(t, radial / s.radius, {std::atan2(radial.x, radial.z) * s.radius, h});
        }
      }
    }
  }
  const double den = dot(ray.direction, a);
  if (std::abs(den) > 1e-12) {
    for (double h : {0.0, s.height}) {
      const double t = (h - dot(w, a)) / den;
      const Vec3 rel = w + t * ray.direction - h * a;
      if (dot(rel, rel) <= s.radius * s.radius) consider(t, h == 0.0 ? -a : a, {rel.x, rel.z});
    }
  }
  return best;
}

inline std::optional<LocalHit> intersect(const HeightFieldSurface& s, const Ray& ray, double tmin) {
  // Local ray: u, v along the grid axes, w along the displacement normal.
  const Vec3 rel = ray.origin - s.origin;
  const double ou = dot(rel, s.u_axis), ov = dot(rel, s.v_axis), ow = dot(rel, s.normal);
  const double du = dot(ray.direction, s.u_axis), dv = dot(ray.direction, s.v_axis), dw = dot(ray.direction, s.normal);
  double hmin = s.min_height, hmax = s.max_height;
  if (std::isnan(hmin) || std::isnan(hmax)) {
    const auto [lo_it, hi_it] = std::minmax_element(s.heights.begin(), s.heights.end());
    hmin = *lo_it;
    hmax = *hi_it;
  }
  const double lo[3] = {-s.size_u / 2, -s.size_v / 2, std::min(0.0, hmin) - 1e-9};
  const double hi[3] = {s.size_u / 2, s.size_v / 2, hmax + 1e-9};
  const double o[3] = {ou, ov, ow}, d[3] = {du, dv, dw};
  double t0 = tmin, t1 = std::numeric_limits<double>::infinity();
  for (int k = 0; k < 3; ++k) {
    if (std::abs(d[k]) < 1e-15) {
      if (o[k] < lo[k] || o[k] > hi[k]) return std::nullopt;
      continue;
    }
    double ta = (lo[k] - o[k]) / d[k], tb = (hi[k] - o[k]) / d[k];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (!(t0 < t1)) return std::nullopt;
  auto f = [&](double t) { return (ow + t * dw) - s.height_at(ou + t * du, ov + t * dv); };
  const double cell = std::min(s.size_u / (s.nu - 1), s.size_v / (s.nv - 1));
  const double lateral = std::hypot(du, dv);
  const double range = hi[2] - lo[2];
  double step = std::numeric_limits<double>::infinity();
  if (lateral > 1e-12) step = 0.25 * cell / lateral;
  if (std::abs(dw) > 1e-12) step = std::min(step, range / 256.0 / std::abs(dw));
  step = std::min(step, (t1 - t0) / 4.0);
  double ta = t0, fa = f(ta);
  for (double tb = t0 + step;; tb += step) {
    tb = std::min(tb, t1);
    const double fb = f(tb);
    if ((fa > 0.0) != (fb > 0.0)) {
      double a = ta, b = tb, fa2 = fa;
      for (int it = 0; it < 50; ++it) {
        const double m = 0.5 * (a + b), fm = f(m);
        if ((fm > 0.0) == (fa2 > 0.0)) {
          a = m;
          fa2 = fm;
        } else {
          b = m;
        }
      }
      const double t = 0.5 * (a + b);
      double hu = 0.0, hv = 0.0;
      const double u = ou + t * du, v = ov + t * dv;
      s.height_at(u, v, &hu, &hv);
      const Vec3 n = normalized(s.normal - hu * s.u_axis - hv * s.v_axis);
      return LocalHit{t, n, {u, v}, {s.size_u / 2, s.size_v / 2}};
    }
    if (tb >= t1) break;
    ta = tb;
    fa = fb;
  }
  return std::nullopt;
}

}  // namespace detail

struct AmbientLight {
  Vec3 color{12.75, 12.75, 12.75};  // 5% of full scale
  double shading_factor = 1.0;

  void validate() const {
    if (color.x < 0 || color.y < 0 || color.z < 0 || shading_factor < 0) {
      throw std::invalid_argument("ambient light must be non-negative");
    }
  }
};

struct SceneSurface {
  std::vector<Primitive> primitives;

  void validate() const {
    for (const auto& p : primitives) {
      p.albedo.validate();
      if (const auto* s = std::get_if<SphereSurface>(&p.geometry); s && !(s->radius > 0)) {
        throw std::invalid_argument("sphere radius must be positive");
      }
      if (const auto* c = std::get_if<CylinderSurface>(&p.geometry); c && !(c->radius > 0 && c->height > 0)) {
        throw std::invalid_argument("cylinder radius and height must be positive");
      }
      if (const auto* h = std::get_if<HeightFieldSurface>(&p.geometry);
          h && (h->nu < 2 || h->nv < 2 || int(h->heights.size()) != h->nu * h->nv)) {
        throw std::invalid_argument("height field grid is malformed");
      }
    }
  }

  std::optional<Hit> intersect(const Ray& ray, double tmin = 1e-9) const {
    std::optional<Hit> best;
    for (std::size_t i = 0; i < primitives.size(); ++i) {
      const auto& prim = primitives[i];
      const auto local = std::visit([&](const auto& g) { return detail::intersect(g, ray, tmin); }, prim.geometry);
      if (!local || (best && local->t >= best->t)) continue;
      Hit h;
      h.t = local->t;
      h.point = ray.at(local->t);
      h.normal = dot(local->normal, ray.direction) > 0.0 ? -local->normal : local->normal;
      const int region = prim.albedo.region(local->uv, local->extent);
      h.albedo = prim.albedo.evaluate(region);
      h.surface_id = int(i) * 256 + region;
      best = h;
    }
    return best;
  }
};

struct RenderOptions {
  int supersample = 3;               // n x n samples per pixel
  double psf_sigma = 0.5;            // optical blur in pixels after integration
  double shadow_tolerance_px = 1.5;  // projector-map depth test slack
  std::vector<bool> active_projectors;  // empty = all
  bool ambient = true;
  int threads = 1;
};

struct CameraTruth {
  RangeImage depth;
  /// Per projector: fractional stripe coordinate where lit, NaN elsewhere.
  std::vector<FloatImage> stripe_coordinate;
  Image<std::int32_t> surface_id;
};

struct CameraRender {
  RadianceImage radiance;
  CameraTruth truth;
};

/// Distance from the projector center to the first surface along each
/// projector pixel ray (+inf where nothing is hit).
inline FloatImage projector_depth_map(const SceneSurface& scene, const ProjectorModel& projector, int threads = 1) {
  const auto& pin = projector.pinhole;
  FloatImage dist(pin.width, pin.height, 1, std::numeric_limits<float>::infinity());
  parallel_for(0, pin.height, threads, [&](int y) {
    for (int x = 0; x < pin.width; ++x) {
      const Ray r = backproject_ray(pin, {double(x), double(y)});
      if (const auto hit = scene.intersect(r)) dist(x, y) = float(hit->t);
    }
  });
  return dist;
}

namespace detail {

struct Lighting {
  Vec3 irradiance;
  std::array<double, 3> coordinate;  // per projector stripe coordinate or NaN
};

inline Lighting illuminate(const Hit& hit, const Rig& rig, const std::vector<FloatImage>& depth_maps,
                           const RenderOptions& opt) {
  Lighting out{{0, 0, 0}, {NAN, NAN, NAN}};
  for (std::size_t i = 0; i < rig.projectors.size(); ++i) {
    if (!opt.active_projectors.empty() && !opt.active_projectors[i]) continue;
    const auto& proj = rig.projectors[i];
    const Vec3 to_light = proj.pinhole.center() - hit.point;
    const double dist = norm(to_light);
    const double g = dot(hit.normal, to_light / dist);
    if (g <= 0.0) continue;  // self shadow
    const auto q = proj.pinhole.project(hit.point);
    if (!q) continue;
    const auto color = proj.color_at(*q);
    if (!color) continue;
    const auto& map = depth_maps[i];
    const int mx = std::clamp(int(std::lround(q->x)), 0, map.width() - 1);
    const int my = std::clamp(int(std::lround(q->y)), 0, map.height() - 1);
    const double footprint = dist / proj.pinhole.fx;
    const double tan_incidence = std::sqrt(std::max(0.0, 1.0 - g * g)) / std::max(g, 0.02);
    const double tol = opt.shadow_tolerance_px * footprint * (1.0 + tan_incidence) + 1e-6 * dist;
    if (dist > map(mx, my) + tol) continue;  // cast shadow
    out.irradiance[static_cast<int>(*color)] += g * proj.intensity;
    if (i < 3) out.coordinate[i] = proj.pattern_coordinate(*q);
  }
  return out;
}

}  // namespace detail

/// Renders one camera of the rig. I = S * (sum_i g_i E_i + g_A A), box
/// integrated over the pixel and blurred by the optical PSF.
inline CameraRender render_camera(const SceneSurface& scene, const Rig& rig, const AmbientLight& ambient, int camera,
                                  const std::vector<FloatImage>& depth_maps, const RenderOptions& opt = {}) {
  const auto& cam = rig.cameras.at(std::size_t(camera));
  const int w = cam.width, h = cam.height;
  const int n = std::max(1, opt.supersample);
  const std::size_t np = rig.projectors.size();
  CameraRender out;
  out.radiance = make_rgb(w, h);
  out.truth.depth = RangeImage(w, h);
  out.truth.depth.camera = camera;
  out.truth.surface_id = Image<std::int32_t>(w, h, 1, -1);
  out.truth.stripe_coordinate.assign(np, FloatImage(w, h, 1, NAN));
  const Vec3 amb = opt.ambient ? ambient.shading_factor * ambient.color : Vec3{0, 0, 0};

  parallel_for(0, h, opt.threads, [&](int y) {
    for (int x = 0; x < w; ++x) {
      Vec3 acc{0, 0, 0};
      for (int sy = 0; sy < n; ++sy) {
        for (int sx = 0; sx < n; ++sx) {
          const Vec2 p{x + (sx + 0.5) / n - 0.5, y + (sy + 0.5) / n - 0.5};
          const auto hit = scene.intersect(backproject_ray(cam, p));
          if (!hit) continue;
          const auto light = detail::illuminate(*hit, rig, depth_maps, opt);
          acc += hadamard(hit->albedo, light.irradiance + amb);
        }
      }
      acc = acc / double(n * n);
      out.radiance(x, y, 0) = float(acc.x);
      out.radiance(x, y, 1) = float(acc.y);
      out.radiance(x, y, 2) = float(acc.z);

      const auto hit = scene.intersect(backproject_ray(cam, {double(x), double(y)}));
      if (!hit) continue;
      out.truth.depth.set(x, y, cam.to_device(hit->point).z);
      out.truth.surface_id(x, y) = hit->surface_id;
      const auto light = detail::illuminate(*hit, rig, depth_maps, opt);
      for (std::size_t i = 0; i < np && i < 3; ++i) out.truth.stripe_coordinate[i](x, y) = float(light.coordinate[i]);
    }
  });
  out.radiance = gaussian_blur(out.radiance, opt.psf_sigma);
  return out;
}

inline std::vector<CameraRender> render(const SceneSurface& scene, const Rig& rig, const AmbientLight& ambient,
                                        const RenderOptions& opt = {}) {
  rig.validate();
  scene.validate();
  ambient.validate();
  std::vector<FloatImage> maps;
  for (const auto& p : rig.projectors) maps.push_back(projector_depth_map(scene, p, opt.threads));
  std::vector<CameraRender> out;
  for (int c = 0; c < int(rig.cameras.size()); ++c) out.push_back(render_camera(scene, rig, ambient, c, maps, opt));
  return out;
}

struct NoiseModel {
  std::array<double, 3> sigma_rgb{1.8138, 1.2923, 1.6745};  // gray levels
  std::uint64_t seed = 1;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

/// Standard normal variate keyed by (seed, frame, x, y, channel).
inline double keyed_gaussian(std::uint64_t seed, std::uint64_t frame, int x, int y, int c) {
  std::uint64_t k = splitmix64(seed ^ splitmix64(frame + 0x632be59bd9b4e019ull));
  k = splitmix64(k ^ (std::uint64_t(std::uint32_t(x)) << 32 | std::uint32_t(y)));
  k = splitmix64(k + std::uint64_t(c));
  const std::uint64_t k2 = splitmix64(k);
  const double u1 = (double(k >> 11) + 1.0) * 0x1.0p-53;
  const double u2 = double(k2 >> 11) * 0x1.0p-53;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace detail

/// Adds zero-mean i.i.d. Gaussian noise per channel. The noise at a pixel is
/// a function of (seed, frame, x, y, channel) only.
inline RadianceImage add_noise(const RadianceImage& image, const NoiseModel& noise, std::uint64_t frame = 0) {
  for (double s : noise.sigma_rgb)
    if (s < 0.0) throw std::invalid_argument("noise sigma must be non-negative");
  RadianceImage out = image;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x)
      for (int c = 0; c < image.channels(); ++c) {
        const double s = noise.sigma_rgb[std::size_t(std::min(c, 2))];
        if (s > 0.0) out(x, y, c) = float(out(x, y, c) + s * detail::keyed_gaussian(noise.seed, frame, x, y, c));
      }
  return out;
}

struct QuantizedImage {
  ByteImage image;
  double clipped_fraction = 0.0;  // pixels with any channel above 255
};

inline QuantizedImage quantize(const RadianceImage& image, double exposure = 1.0) {
  if (!(exposure > 0.0)) throw std::invalid_argument("quantize: exposure must be positive");
  QuantizedImage out{ByteImage(image.width(), image.height(), image.channels()), 0.0};
  std::size_t clipped = 0;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      bool clip = false;
      for (int c = 0; c < image.channels(); ++c) {
        const double v = std::round(exposure * image(x, y, c));
        clip |= v > 255.0;
        out.image(x, y, c) = std::uint8_t(std::clamp(v, 0.0, 255.0));
      }
      clipped += clip;
    }
  out.clipped_fraction = image.pixel_count() ? double(clipped) / double(image.pixel_count()) : 0.0;
  return out;
}

inline RadianceImage to_radiance(const ByteImage& image) {
  RadianceImage out(image.width(), image.height(), image.channels());
  for (std::size_t i = 0; i < image.data().size(); ++i) out.data()[i] = float(image.data()[i]);
  return out;
}

/// (r, g) = (R, G) / (R + G + B) for masked, non-black pixels.
inline std::vector<Vec2> chromaticity_scatter(const ByteImage& image, const Mask* mask = nullptr) {
  if (image.channels() != 3) throw std::invalid_argument("chromaticity_scatter needs an RGB image");
  std::vector<Vec2> points;
  for (int y = 0; y < image.height(); ++y)
    for (int x = 0; x < image.width(); ++x) {
      if (mask && !(*mask)(x, y)) continue;
      const double r = image(x, y, 0), g = image(x, y, 1), b = image(x, y, 2);
      const double s = r + g + b;
      if (s <= 0.0) continue;
      points.push_back({r / s, g / s});
    }
  return points;
}

/// One stripe pattern laid directly on the image plane (no perspective).
struct PlanarStripeLayer {
  std::shared_ptr<const StripePattern> pattern;
  double angle_deg = 0.0;   // encoding direction in the image
  double stripe_px = 4.0;   // stripe width in camera pixels
  double phase_px = 0.0;    // shift of the pattern center along the encoding direction
  double intensity = 110.0;

  double coordinate(Vec2 p, Vec2 center) const {
    const double a = deg2rad(angle_deg);
    const double along = (p.x - center.x) * std::cos(a) + (p.y - center.y) * std::sin(a) - phase_px;
    return along / stripe_px + pattern->size() / 2.0;
  }
};

struct PlanarStripeRender {
  RadianceImage radiance;
  std::vector<FloatImage> coordinate;  // per layer, NaN outside the pattern
};

/// Image-space superposition of stripe layers on a uniform surface; the
/// ground truth orientation of every layer is exactly its angle.
inline PlanarStripeRender render_planar_stripes(int width, int height, const std::vector<PlanarStripeLayer>& layers,
                                                Vec3 albedo = {1, 1, 1}, double ambient = 12.75,
                                                int supersample = 3, double psf_sigma = 0.5) {
  PlanarStripeRender out;
  out.radiance = make_rgb(width, height);
  out.coordinate.assign(layers.size(), FloatImage(width, height, 1, NAN));
  const Vec2 center{(width - 1) / 2.0, (height - 1) / 2.0};
  const int n = std::max(1, supersample);
  for (int y = 0; y < height; ++y)
    for (int x = 0; x < width; ++x) {
      Vec3 acc{0, 0, 0};
      for (int sy = 0; sy < n; ++sy)
        for (int sx = 0; sx < n; ++sx) {
          const Vec2 p{x + (sx + 0.5) / n - 0.5, y + (sy + 0.5) / n - 0.5};
          Vec3 e{ambient, ambient, ambient};
          for (const auto& layer : layers) {
            const double c = layer.coordinate(p, center);
            if (c < 0.0 || c >= layer.pattern->size()) continue;
            e[static_cast<int>(layer.pattern->stripes[std::size_t(c)])] += layer.intensity;
          }
          acc += hadamard(albedo, e);
        }
      acc = acc / double(n * n);
      for (int c = 0; c < 3; ++c) out.radiance(x, y, c) = float(acc[c]);
      for (std::size_t i = 0; i < layers.size(); ++i) {
        const double c = layers[i].coordinate({double(x), double(y)}, center);
        if (c >= 0.0 && c < layers[i].pattern->size()) out.coordinate[i](x, y) = float(c);
      }
    }
  out.radiance = gaussian_blur(out.radiance, psf_sigma);
  return out;
}

}  // namespace mpsl
