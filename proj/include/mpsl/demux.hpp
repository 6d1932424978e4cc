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

// Orientation demultiplexing. Superposed stripe patterns are told apart by
// their encoding directions: a directional derivative taken perpendicular to
// one pattern's encoding direction removes that pattern's term. Directions
// are estimated locally from magnitude-weighted double-angle gradient
// histograms.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpsl/geometry.hpp"
#include "mpsl/image.hpp"
#include "mpsl/optics.hpp"
#include "mpsl/parallel.hpp"

namespace mpsl {

struct GradientField {
  FloatImage du;  // d/dx per channel, gray levels per pixel
  FloatImage dv;  // d/dy per channel
  Mask reliable;  // zero on the one-pixel image border

  int width() const { return du.width(); }
  int height() const { return du.height(); }
  int channels() const { return du.channels(); }

  double magnitude(int x, int y, int c) const { return std::hypot(du(x, y, c), dv(x, y, c)); }

  /// Gradient angle doubled so opposite gradients coincide, in [0, 2pi).
  double double_angle(int x, int y, int c) const {
    double a = 2.0 * std::atan2(dv(x, y, c), du(x, y, c));
    a = std::fmod(a, 2.0 * std::numbers::pi);
    if (a < 0.0) a += 2.0 * std::numbers::pi;
    return a >= 2.0 * std::numbers::pi ? 0.0 : a;
  }
};

enum class GradientOperator {
  Central,  // (I[x+1] - I[x-1]) / 2
  Scharr,   // central difference smoothed across by (3, 10, 3) / 16; nearly isotropic
};

/// Differences after optional Gaussian pre-smoothing.
inline GradientField compute_gradients(const FloatImage& image, double presmooth_sigma = 0.0,
                                       GradientOperator op = GradientOperator::Central) {
  if (image.width() < 3 || image.height() < 3) throw std::invalid_argument("compute_gradients: image smaller than 3x3");
  const FloatImage src = gaussian_blur(image, presmooth_sigma);
  const int w = src.width(), h = src.height(), nc = src.channels();
  GradientField g{FloatImage(w, h, nc), FloatImage(w, h, nc), Mask(w, h, 1, 0)};
  for (int y = 0; y < h; ++y) {
    const int ym = std::max(0, y - 1), yp = std::min(h - 1, y + 1);
    for (int x = 0; x < w; ++x) {
      const int xm = std::max(0, x - 1), xp = std::min(w - 1, x + 1);
      for (int c = 0; c < nc; ++c) {
        if (op == GradientOperator::Central) {
          g.du(x, y, c) = float((src(xp, y, c) - src(xm, y, c)) / std::max(1, xp - xm));
          g.dv(x, y, c) = float((src(x, yp, c) - src(x, ym, c)) / std::max(1, yp - ym));
        } else {
          auto dx = [&](int yy) { return (src(xp, yy, c) - src(xm, yy, c)) / std::max(1, xp - xm); };
          auto dy = [&](int xx) { return (src(xx, yp, c) - src(xx, ym, c)) / std::max(1, yp - ym); };
          g.du(x, y, c) = float((3.0 * dx(ym) + 10.0 * dx(y) + 3.0 * dx(yp)) / 16.0);
          g.dv(x, y, c) = float((3.0 * dy(xm) + 10.0 * dy(x) + 3.0 * dy(xp)) / 16.0);
        }
      }
      g.reliable(x, y) = (x > 0 && y > 0 && x < w - 1 && y < h - 1) ? 1 : 0;
    }
  }
  return g;
}

struct HessianField {
  FloatImage xx, xy, yy;
  Mask reliable;  // zero on the one-pixel border
};

inline HessianField compute_hessian(const FloatImage& image, double presmooth_sigma = 0.0) {
  if (image.width() < 3 || image.height() < 3) throw std::invalid_argument("compute_hessian: image smaller than 3x3");
  const FloatImage s = gaussian_blur(image, presmooth_sigma);
  const int w = s.width(), h = s.height(), nc = s.channels();
  HessianField H{FloatImage(w, h, nc), FloatImage(w, h, nc), FloatImage(w, h, nc), Mask(w, h, 1, 0)};
  for (int y = 1; y < h - 1; ++y)
    for (int x = 1; x < w - 1; ++x) {
      for (int c = 0; c < nc; ++c) {
        H.xx(x, y, c) = s(x + 1, y, c) - 2.0f * s(x, y, c) + s(x - 1, y, c);
        H.yy(x, y, c) = s(x, y + 1, c) - 2.0f * s(x, y, c) + s(x, y - 1, c);
        H.xy(x, y, c) = 0.25f * (s(x + 1, y + 1, c) - s(x + 1, y - 1, c) - s(x - 1, y + 1, c) + s(x - 1, y - 1, c));
      }
      H.reliable(x, y) = 1;
    }
  return H;
}

/// Per-channel derivative along a unit image direction.
inline FloatImage directional_derivative(const GradientField& g, Vec2 direction) {
  if (std::abs(norm(direction) - 1.0) > 1e-6) throw std::invalid_argument("directional_derivative: direction must be unit");
  FloatImage out(g.width(), g.height(), g.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = float(g.du.data()[i] * direction.x + g.dv.data()[i] * direction.y);
  }
  return out;
}

inline FloatImage directional_derivative(const FloatImage& image, Vec2 direction, double presmooth_sigma = 0.0) {
  return directional_derivative(compute_gradients(image, presmooth_sigma), direction);
}

/// |cos(a - phi1)| - |cos(a - phi2)| for a differentiation direction a; all
/// angles in degrees.
inline double separability(double phi1_deg, double phi2_deg, double phi_alpha_deg) {
  return std::abs(std::cos(deg2rad(phi_alpha_deg - phi1_deg))) - std::abs(std::cos(deg2rad(phi_alpha_deg - phi2_deg)));
}

/// Grid search for the differentiation direction in [0, 180) maximizing D.
inline double separability_argmax(double phi1_deg, double phi2_deg, double step_deg = 0.1) {
  double best = -2.0, arg = 0.0;
  const int n = int(std::lround(180.0 / step_deg));
  for (int i = 0; i < n; ++i) {
    const double a = i * step_deg;
    const double d = separability(phi1_deg, phi2_deg, a);
    if (d > best + 1e-15) {
      best = d;
      arg = a;
    }
  }
  return arg;
}

struct OrientationParams {
  int window = 7;
  int bins = 64;
  /// Gradients weaker than this (gray levels per pixel) stay out of the
  /// histogram; 3x the largest configured channel noise sigma by default.
  double magnitude_threshold = 3.0 * 1.8138;
  double merge_deg = 10.0;
  double min_relative_population = 0.25;
  int max_lobes = 3;
  int stride = 1;
  double fit_sigma_bins = 1.0;
  /// Half width, in bins, of the window that counts a lobe's population.
  double population_halfwidth_bins = 3.0;
  /// A lobe within this distance of the acute bisector of two other lobes
  /// with a larger combined population is taken for the crossing-edge fringe
  /// and ranked after the rest; 0 disables the rule.
  double fringe_tolerance_deg = 4.0;
  /// Pairs further apart than this have no distinct acute bisector.
  double fringe_max_pair_deg = 75.0;
  /// Histogram weight is magnitude^power; below 1 it keeps a few very strong
  /// crossing-edge gradients from outvoting the stripe edges.
  double magnitude_power = 0.3;
  int threads = 1;
};

struct Lobe {
  double angle_deg = 0.0;  // encoding direction, mod 180
  double population = 0.0;
  double peak_height = 0.0;
};

struct OrientationEstimate {
  int x0 = 0, y0 = 0, size = 0;
  std::vector<Lobe> lobes;  // strongest first
};

namespace detail {

inline double wrap_pi(double a) {
  const double two_pi = 2.0 * std::numbers::pi;
  a = std::fmod(a + std::numbers::pi, two_pi);
  if (a < 0.0) a += two_pi;
  return a - std::numbers::pi;
}

/// Whether `l` lies at the acute bisector of orientations a and b. Pairs
/// further apart than `max_pair_deg` have no well-defined acute bisector and
/// never match.
inline bool near_fringe_direction(double l, double a, double b, double tolerance, double max_pair_deg = 75.0) {
  const double sep = orientation_distance(a, b);
  if (sep < 2.0 * tolerance || sep > max_pair_deg) return false;
  const double mid = wrap180(a + 0.5 * (wrap180(b - a + 90.0) - 90.0));
  return orientation_distance(l, mid) <= tolerance;
}

struct AngleSample {
  float angle2;
  float weight;
};

}  // namespace detail

/// Lobes of the double-angle histogram of one block. Eight angle windows of
/// width pi/2 at pi/4 steps are scanned; in each, the maximum bin (if it is
/// a local maximum) seeds a Gaussian-weighted refinement over neighboring
/// samples.
inline OrientationEstimate estimate_block(const GradientField& g, int x0, int y0, const OrientationParams& p,
                                          std::vector<detail::AngleSample>* scratch = nullptr) {
  OrientationEstimate est;
  est.x0 = x0;
  est.y0 = y0;
  est.size = p.window;
  std::vector<detail::AngleSample> local;
  auto& samples = scratch ? *scratch : local;
  samples.clear();
  const int nb = p.bins;
  const double two_pi = 2.0 * std::numbers::pi;
  const double bin_w = two_pi / nb;
  std::vector<double> hist(std::size_t(nb), 0.0);
  for (int y = y0; y < y0 + p.window; ++y) {
    for (int x = x0; x < x0 + p.window; ++x) {
      if (!g.du.contains(x, y) || !g.reliable(x, y)) continue;
      for (int c = 0; c < g.channels(); ++c) {
        const double m = g.magnitude(x, y, c);
        if (m < p.magnitude_threshold) continue;
        const double a2 = g.double_angle(x, y, c);
        const double wgt = p.magnitude_power == 1.0 ? m : std::pow(m, p.magnitude_power);
        samples.push_back({float(a2), float(wgt)});
        hist[std::size_t(std::min(nb - 1, int(a2 / bin_w)))] += wgt;
      }
    }
  }
  if (samples.empty()) return est;

  std::vector<Lobe> found;
  const int win = nb / 4, step = nb / 8;
  for (int wdx = 0; wdx < 8; ++wdx) {
    int best = -1;
    for (int i = 0; i < win; ++i) {
      const int b = (wdx * step + i) % nb;
      if (best < 0 || hist[std::size_t(b)] > hist[std::size_t(best)]) best = b;
    }
    const double hb = hist[std::size_t(best)];
    if (hb <= 0.0 || hb < hist[std::size_t((best + nb - 1) % nb)] || hb < hist[std::size_t((best + 1) % nb)]) continue;
    double mu = (best + 0.5) * bin_w;
    const double sig = p.fit_sigma_bins * bin_w;
    double height = 0.0;
    for (int it = 0; it < 4; ++it) {
      double sw = 0.0, swd = 0.0;
      for (const auto& s : samples) {
        const double d = detail::wrap_pi(s.angle2 - mu);
        if (std::abs(d) > 2.5 * bin_w) continue;
        const double wgt = s.weight * std::exp(-0.5 * d * d / (sig * sig));
        sw += wgt;
        swd += wgt * d;
      }
      if (sw <= 0.0) break;
      mu += swd / sw;
      height = sw;
    }
    double population = 0.0;
    for (const auto& s : samples)
      if (std::abs(detail::wrap_pi(s.angle2 - mu)) <= p.population_halfwidth_bins * bin_w) population += s.weight;
    mu = std::fmod(mu + two_pi, two_pi);
    found.push_back({wrap180(rad2deg(mu / 2.0)), population, height});
  }
  std::sort(found.begin(), found.end(), [](const Lobe& a, const Lobe& b) { return a.population > b.population; });
  std::vector<Lobe> distinct;
  for (const auto& lobe : found) {
    if (lobe.population < p.min_relative_population * found.front().population) break;
    const bool dup = std::any_of(distinct.begin(), distinct.end(), [&](const Lobe& kept) {
      return orientation_distance(kept.angle_deg, lobe.angle_deg) <= p.merge_deg;
    });
    if (!dup) distinct.push_back(lobe);
  }
  if (p.fringe_tolerance_deg > 0.0 && distinct.size() >= 3) {
    std::vector<bool> fringe(distinct.size(), false);
    for (std::size_t l = 0; l < distinct.size(); ++l)
      for (std::size_t a = 0; a < distinct.size() && !fringe[l]; ++a)
        for (std::size_t b = a + 1; b < distinct.size() && !fringe[l]; ++b) {
          if (a == l || b == l) continue;
          if (distinct[a].population + distinct[b].population <= distinct[l].population) continue;
          fringe[l] = detail::near_fringe_direction(distinct[l].angle_deg, distinct[a].angle_deg,
                                                    distinct[b].angle_deg, p.fringe_tolerance_deg,
                                                    p.fringe_max_pair_deg);
        }
    std::vector<Lobe> ordered;
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t l = 0; l < distinct.size(); ++l)
        if (fringe[l] == (pass == 1)) ordered.push_back(distinct[l]);
    distinct = std::move(ordered);
  }
  if (int(distinct.size()) > p.max_lobes) distinct.resize(std::size_t(p.max_lobes));
  est.lobes = std::move(distinct);
  return est;
}

/// Sliding-window orientation estimates on a grid of block centers.
struct OrientationField {
  int width = 0, height = 0;  // image size
  int stride = 1;
  int grid_w = 0, grid_h = 0;
  std::vector<OrientationEstimate> blocks;

  const OrientationEstimate& at_grid(int gx, int gy) const { return blocks[std::size_t(gy * grid_w + gx)]; }
  const OrientationEstimate& at_pixel(int x, int y) const {
    const int gx = std::clamp((x + stride / 2) / stride, 0, grid_w - 1);
    const int gy = std::clamp((y + stride / 2) / stride, 0, grid_h - 1);
    return at_grid(gx, gy);
  }
};

inline OrientationField estimate_directions(const GradientField& g, const OrientationParams& p = {}) {
  if (p.window < 3 || p.bins < 8 || p.bins % 8 != 0 || p.stride < 1) {
    throw std::invalid_argument("estimate_directions: bad parameters");
  }
  OrientationField f;
  f.width = g.width();
  f.height = g.height();
  f.stride = p.stride;
  f.grid_w = (f.width + p.stride - 1) / p.stride;
  f.grid_h = (f.height + p.stride - 1) / p.stride;
  f.blocks.resize(std::size_t(f.grid_w * f.grid_h));
  const int half = p.window / 2;
  parallel_for(0, f.grid_h, p.threads, [&](int gy) {
    std::vector<detail::AngleSample> scratch;
    for (int gx = 0; gx < f.grid_w; ++gx) {
      const int cx = gx * p.stride, cy = gy * p.stride;
      f.blocks[std::size_t(gy * f.grid_w + gx)] = estimate_block(g, cx - half, cy - half, p, &scratch);
    }
  });
  return f;
}

/// Nominal encoding direction of each projector over the camera image,
/// sampled on a coarse grid assuming a fronto-parallel surface.
struct NominalDirections {
  int width = 0, height = 0, step = 16;
  int grid_w = 0, grid_h = 0;
  std::vector<std::vector<Vec2>> per_pattern;  // [pattern][grid cell]

  Vec2 at(int pattern, int x, int y) const {
    const int gx = std::clamp((x + step / 2) / step, 0, grid_w - 1);
    const int gy = std::clamp((y + step / 2) / step, 0, grid_h - 1);
    return per_pattern[std::size_t(pattern)][std::size_t(gy * grid_w + gx)];
  }
  std::size_t pattern_count() const { return per_pattern.size(); }
};

/// Image direction of increasing stripe coordinate at `pixel`, for a
/// surface through the nominal working distance facing the camera.
inline Vec2 nominal_encoding_direction_at(const Rig& rig, int projector, int camera, Vec2 pixel) {
  const auto& cam = rig.cameras.at(std::size_t(camera));
  const auto& proj = rig.projectors.at(std::size_t(projector));
  const double depth = rig.nominal_depth > 0.0 ? rig.nominal_depth : closest_axis_depth(cam, proj.pinhole);
  const Ray r0 = backproject_ray(cam, pixel);
  const Vec3 x0 = r0.at(depth / dot(r0.direction, cam.optical_axis()));
  const Plane surface{cam.optical_axis(), dot(cam.optical_axis(), x0)};
  const auto q = proj.pinhole.project(x0);
  if (!q) return nominal_encoding_direction(rig, projector, camera);
  const Ray pr = backproject_ray(proj.pinhole, *q + proj.stripe_width() * proj.encoding_axis());
  const double den = dot(surface.normal, pr.direction);
  if (std::abs(den) < 1e-9) return nominal_encoding_direction(rig, projector, camera);
  const auto u1 = cam.project(pr.at(-surface.signed_distance(pr.origin) / den));
  if (!u1) return nominal_encoding_direction(rig, projector, camera);
  const Vec2 d = *u1 - pixel;
  return (1.0 / norm(d)) * d;
}

inline NominalDirections nominal_directions(const Rig& rig, int camera, int step = 16) {
  const auto& cam = rig.cameras.at(std::size_t(camera));
  NominalDirections n;
  n.width = cam.width;
  n.height = cam.height;
  n.step = step;
  n.grid_w = (cam.width + step - 1) / step + 1;
  n.grid_h = (cam.height + step - 1) / step + 1;
  for (int p = 0; p < int(rig.projectors.size()); ++p) {
    std::vector<Vec2> dirs;
    for (int gy = 0; gy < n.grid_h; ++gy)
      for (int gx = 0; gx < n.grid_w; ++gx) {
        dirs.push_back(nominal_encoding_direction_at(rig, p, camera, {double(gx * step), double(gy * step)}));
      }
    n.per_pattern.push_back(std::move(dirs));
  }
  return n;
}

/// Uniform nominal directions (image-space synthetic scenes), angles in
/// degrees pointing toward increasing stripe coordinate.
inline NominalDirections uniform_directions(int width, int height, std::span<const double> angles_deg) {
  NominalDirections n;
  n.width = width;
  n.height = height;
  n.step = std::max(width, height);
  n.grid_w = n.grid_h = 1;
  for (double a : angles_deg) n.per_pattern.push_back({Vec2{std::cos(deg2rad(a)), std::sin(deg2rad(a))}});
  return n;
}

/// Per-pattern encoding direction over the image, oriented toward increasing
/// stripe coordinate.
struct EncodingDirections {
  std::vector<FloatImage> angle_deg;  // [pattern] angle in [0, 360)
  std::vector<Mask> local;            // 1 where a local lobe supports the angle
  std::vector<double> global_deg;     // fallback per pattern

  std::size_t pattern_count() const { return angle_deg.size(); }
};

struct AssociationParams {
  double max_association_deg = 30.0;
  int smoothing_radius = 3;
};

namespace detail {

/// Assigns lobes to patterns (injective, partial) maximizing the number of
/// matches and then minimizing total angular distance.
inline std::vector<int> associate_lobes(const std::vector<Lobe>& lobes, const std::vector<double>& nominal_deg,
                                        double max_deg) {
  const int np = int(nominal_deg.size()), nl = int(lobes.size());
  std::vector<int> best(std::size_t(np), -1), cur(std::size_t(np), -1);
  int best_count = 0;
  double best_cost = 1e300;
  std::vector<bool> used(std::size_t(nl), false);
  auto rec = [&](auto&& self, int p, int count, double cost) -> void {
    if (p == np) {
      if (count > best_count || (count == best_count && cost < best_cost)) {
        best_count = count;
        best_cost = cost;
        best = cur;
      }
      return;
    }
    cur[std::size_t(p)] = -1;
    self(self, p + 1, count, cost);
    for (int l = 0; l < nl; ++l) {
      if (used[std::size_t(l)]) continue;
      const double d = orientation_distance(lobes[std::size_t(l)].angle_deg, nominal_deg[std::size_t(p)]);
      if (d > max_deg) continue;
      used[std::size_t(l)] = true;
      cur[std::size_t(p)] = l;
      self(self, p + 1, count + 1, cost + d);
      used[std::size_t(l)] = false;
      cur[std::size_t(p)] = -1;
    }
  };
  rec(rec, 0, 0, 0.0);
  return best;
}

inline double orient_toward(double angle_mod180, Vec2 reference) {
  const double a = deg2rad(angle_mod180);
  return (std::cos(a) * reference.x + std::sin(a) * reference.y) >= 0.0 ? wrap360(angle_mod180)
                                                                         : wrap360(angle_mod180 + 180.0);
}

}  // namespace detail

/// Matches each block's lobes to the patterns' nominal directions, smooths
/// the matched orientations (double-angle averaging) and falls back to the
/// per-pattern global estimate where no lobe was matched nearby.
inline EncodingDirections assign_directions(const OrientationField& field, const NominalDirections& nominal,
                                            const AssociationParams& p = {}) {
  const int w = field.width, h = field.height;
  const int np = int(nominal.pattern_count());
  EncodingDirections out;
  std::vector<FloatImage> vec(std::size_t(np), FloatImage(w, h, 3, 0.0f));  // cos2a, sin2a, weight
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const auto& est = field.at_pixel(x, y);
      if (est.lobes.empty()) continue;
      std::vector<double> nom(static_cast<std::size_t>(np));
      for (int i = 0; i < np; ++i) {
        const Vec2 d = nominal.at(i, x, y);
        nom[std::size_t(i)] = wrap180(rad2deg(std::atan2(d.y, d.x)));
      }
      const auto match = detail::associate_lobes(est.lobes, nom, p.max_association_deg);
      for (int i = 0; i < np; ++i) {
        const int l = match[std::size_t(i)];
        if (l < 0) continue;
        const double a2 = 2.0 * deg2rad(est.lobes[std::size_t(l)].angle_deg);
        vec[std::size_t(i)](x, y, 0) = float(std::cos(a2));
        vec[std::size_t(i)](x, y, 1) = float(std::sin(a2));
        vec[std::size_t(i)](x, y, 2) = 1.0f;
      }
    }
  for (int i = 0; i < np; ++i) {
    double sc = 0.0, ss = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        sc += vec[std::size_t(i)](x, y, 0);
        ss += vec[std::size_t(i)](x, y, 1);
      }
    const Vec2 center_nominal = nominal.at(i, w / 2, h / 2);
    const double global = (sc * sc + ss * ss) > 1e-12
                              ? detail::orient_toward(wrap180(rad2deg(std::atan2(ss, sc) / 2.0)), center_nominal)
                              : wrap360(rad2deg(std::atan2(center_nominal.y, center_nominal.x)));
    out.global_deg.push_back(global);
    const FloatImage smooth = box_mean(vec[std::size_t(i)], p.smoothing_radius);
    FloatImage angle(w, h, 1, 0.0f);
    Mask local(w, h, 1, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double c = smooth(x, y, 0), s = smooth(x, y, 1), wt = smooth(x, y, 2);
        const Vec2 ref = nominal.at(i, x, y);
        if (wt > 0.0 && (c * c + s * s) > 1e-6) {
          angle(x, y) = float(detail::orient_toward(wrap180(rad2deg(std::atan2(s, c) / 2.0)), ref));
          local(x, y) = 1;
        } else {
          angle(x, y) = float(global);
        }
      }
    out.angle_deg.push_back(std::move(angle));
    out.local.push_back(std::move(local));
  }
  return out;
}

/// Globally constant encoding directions (near-planar fast path).
inline EncodingDirections global_directions(int width, int height, std::span<const double> oriented_deg) {
  EncodingDirections out;
  for (double a : oriented_deg) {
    out.angle_deg.emplace_back(width, height, 1, float(wrap360(a)));
    out.local.emplace_back(width, height, 1, 0);
    out.global_deg.push_back(wrap360(a));
  }
  return out;
}

/// Derivative raster isolating one pattern. Order 1: d/dy_j for the other
/// pattern j (or d/dx_i when alone). Order 2: d2/(dy_j dy_l) for the two
/// others. Values are sign-normalized so they follow the pattern's own
/// derivative along its oriented encoding direction; magnitudes keep the
/// cosine scale factors.
struct SeparatedDerivative {
  int pattern = 0;
  int order = 1;
  FloatImage values;                            // 3 channels
  FloatImage encoding_deg;                      // oriented x_i per pixel
  std::vector<FloatImage> differentiation_deg;  // y_j per pixel, one per order
  Mask separable;

  int width() const { return values.width(); }
  int height() const { return values.height(); }
};

struct SeparationParams {
  double presmooth_sigma = 0.5;
  double min_separation_deg = 20.0;
  int border = 2;
};

inline std::vector<SeparatedDerivative> separate(const FloatImage& image, const EncodingDirections& dirs,
                                                 const SeparationParams& p = {}) {
  const int np = int(dirs.pattern_count());
  if (np < 1 || np > 3) throw std::invalid_argument("separate: between one and three patterns are supported");
  const int w = image.width(), h = image.height(), nc = image.channels();
  const int order = np == 3 ? 2 : 1;
  std::optional<GradientField> grad;
  std::optional<HessianField> hess;
  if (order == 1) {
    grad = compute_gradients(image, p.presmooth_sigma);
  } else {
    hess = compute_hessian(image, p.presmooth_sigma);
  }
  std::vector<SeparatedDerivative> out;
  for (int i = 0; i < np; ++i) {
    SeparatedDerivative sd;
    sd.pattern = i;
    sd.order = order;
    sd.values = FloatImage(w, h, nc, 0.0f);
    sd.encoding_deg = dirs.angle_deg[std::size_t(i)];
    sd.separable = Mask(w, h, 1, 0);
    std::vector<int> others;
    for (int j = 0; j < np; ++j)
      if (j != i) others.push_back(j);
    const int nd = np == 1 ? 1 : int(others.size());
    sd.differentiation_deg.assign(std::size_t(nd), FloatImage(w, h, 1, 0.0f));
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const double ai = dirs.angle_deg[std::size_t(i)](x, y);
        const Vec2 xi{std::cos(deg2rad(ai)), std::sin(deg2rad(ai))};
        bool ok = x >= p.border && y >= p.border && x < w - p.border && y < h - p.border;
        std::array<Vec2, 2> ys{};
        double sign = 1.0;
        if (np == 1) {
          ys[0] = xi;
          sd.differentiation_deg[0](x, y) = float(ai);
        } else {
          for (std::size_t k = 0; k < others.size(); ++k) {
            const double aj = dirs.angle_deg[std::size_t(others[k])](x, y);
            if (orientation_distance(ai, aj) < p.min_separation_deg) ok = false;
            const double yj = aj + 90.0;
            ys[k] = {std::cos(deg2rad(yj)), std::sin(deg2rad(yj))};
            const double scale = dot(xi, ys[k]);
            sign *= scale >= 0.0 ? 1.0 : -1.0;
            sd.differentiation_deg[k](x, y) = float(wrap360(yj));
          }
        }
        if (!ok) continue;
        sd.separable(x, y) = 1;
        for (int c = 0; c < nc; ++c) {
          double v;
          if (order == 1) {
            v = grad->du(x, y, c) * ys[0].x + grad->dv(x, y, c) * ys[0].y;
          } else {
            const Vec2 a = ys[0], b = ys[1];
            v = hess->xx(x, y, c) * a.x * b.x + hess->xy(x, y, c) * (a.x * b.y + a.y * b.x) +
                hess->yy(x, y, c) * a.y * b.y;
          }
          sd.values(x, y, c) = float(sign * v);
        }
      }
    out.push_back(std::move(sd));
  }
  return out;
}

}  // namespace mpsl
