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

#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <memory>
#include <sstream>

#include "mpsl/image_io.hpp"
#include "mpsl/optics.hpp"
#include "mpsl/scene.hpp"

namespace {

using mpsl::Vec2;
using mpsl::Vec3;

std::shared_ptr<const mpsl::StripePattern> pattern73() {
  static const auto p = std::make_shared<const mpsl::StripePattern>(mpsl::generate_pattern(7, 3, 4));
  return p;
}

mpsl::Rig one_pair_rig(double roll = 0.0) {
  mpsl::Rig rig;
  rig.cameras.push_back(mpsl::make_pinhole("cam0", 600, 160, 120, {0, 0, 0}, {0, 0, 1}));
  rig.projectors.push_back({mpsl::make_pinhole("proj0", 700, 800, 800, {-0.25, 0, 0}, {0, 0, 1}), roll, pattern73(), 110});
  return rig;
}

TEST(Angles, Wrapping) {
  EXPECT_DOUBLE_EQ(mpsl::wrap180(190.0), 10.0);
  EXPECT_DOUBLE_EQ(mpsl::wrap360(-30.0), 330.0);
  EXPECT_NEAR(mpsl::orientation_distance(179.0, 1.0), 2.0, 1e-12);
  EXPECT_NEAR(mpsl::orientation_distance(10.0, 190.0), 0.0, 1e-12);
}

TEST(Pinhole, LookAtIsARotation) {
  const auto cam = mpsl::make_pinhole("c", 500, 64, 48, {0.3, -0.2, 0.1}, {0, 0, 2});
  EXPECT_NO_THROW(cam.validate());
  const auto c = cam.center();
  EXPECT_NEAR(c.x, 0.3, 1e-12);
  EXPECT_NEAR(c.y, -0.2, 1e-12);
  const auto p = cam.project({0, 0, 2});
  ASSERT_TRUE(p);
  EXPECT_NEAR(p->x, cam.cx, 1e-9);
  EXPECT_NEAR(p->y, cam.cy, 1e-9);
  EXPECT_FALSE(cam.project({0.3, -0.2, -1.0}));
}

TEST(Pinhole, BackprojectionInvertsProjection) {
  const auto cam = mpsl::make_pinhole("c", 600, 640, 480, {0.1, 0.05, 0}, {0, 0, 1});
  const Vec3 x{0.07, -0.12, 0.95};
  const auto px = cam.project(x);
  ASSERT_TRUE(px);
  const auto ray = mpsl::backproject_ray(cam, *px);
  const Vec3 d = x - ray.origin;
  EXPECT_NEAR(mpsl::norm(mpsl::cross(d, ray.direction)), 0.0, 1e-9);
}

TEST(Pinhole, ValidationRejectsBrokenModels) {
  auto cam = mpsl::make_pinhole("c", 600, 64, 48, {0, 0, 0}, {0, 0, 1});
  cam.fx = -1;
  EXPECT_THROW(cam.validate(), mpsl::CalibrationError);
  cam = mpsl::make_pinhole("c", 600, 64, 48, {0, 0, 0}, {0, 0, 1});
  cam.rotation(0, 0) = 2.0;
  EXPECT_THROW(cam.validate(), mpsl::CalibrationError);
  EXPECT_THROW(mpsl::make_pinhole("c", 600, 64, 48, {0, 0, 0}, {0, 1, 0}, {0, 1, 0}), mpsl::CalibrationError);
}

TEST(Triangulation, RecoversAWorldPoint) {
  // Roll 90 would put the camera center on every stripe plane of this rig.
  for (double roll : {0.0, 37.0, -20.0}) {
    const auto rig = one_pair_rig(roll);
    const auto& cam = rig.cameras[0];
    const auto& proj = rig.projectors[0];
    const Vec3 x{0.02, -0.03, 0.9};
    const auto q = proj.pinhole.project(x);
    ASSERT_TRUE(q);
    const double coord = proj.pattern_coordinate(*q);
    const auto plane = mpsl::stripe_plane(proj, coord);
    EXPECT_NEAR(plane.signed_distance(x), 0.0, 1e-9);
    EXPECT_NEAR(plane.signed_distance(proj.pinhole.center()), 0.0, 1e-9);
    const auto t = mpsl::triangulate(cam, *cam.project(x), plane);
    ASSERT_TRUE(t);
    EXPECT_NEAR(t->depth, 0.9, 1e-9);
    EXPECT_NEAR(t->point.x, x.x, 1e-9);
  }
}

TEST(Triangulation, GrazingRaysAreRejected) {
  const auto rig = one_pair_rig(90.0);
  const auto& proj = rig.projectors[0];
  EXPECT_THROW(mpsl::stripe_plane(proj, -1.0), std::out_of_range);
  // Stripe planes of a projector rolled along the baseline contain the camera center.
  const auto plane = mpsl::stripe_plane(proj, 120.0);
  EXPECT_FALSE(mpsl::triangulate(rig.cameras[0], {rig.cameras[0].cx, 10.0}, plane));
}

TEST(Triangulation, NominalDirectionFollowsRoll) {
  for (double roll : {0.0, 90.0}) {
    const auto rig = one_pair_rig(roll);
    const auto d = mpsl::nominal_encoding_direction(rig, 0, 0);
    EXPECT_NEAR(d.x, std::cos(mpsl::deg2rad(roll)), 1e-6);
    EXPECT_NEAR(d.y, std::sin(mpsl::deg2rad(roll)), 1e-6);
  }
}

TEST(Scene, SphereAndPlaneIntersections) {
  mpsl::SceneSurface scene;
  scene.primitives.push_back({mpsl::PlaneSurface{{0, 0, 2}, {0, 0, -1}, {1, 0, 0}}, mpsl::Albedo::constant({0.5, 0.5, 0.5})});
  scene.primitives.push_back({mpsl::SphereSurface{{0, 0, 1}, 0.25}, mpsl::Albedo::constant({0.8, 0.8, 0.8})});
  const auto hit = scene.intersect({{0, 0, 0}, {0, 0, 1}});
  ASSERT_TRUE(hit);
  EXPECT_NEAR(hit->t, 0.75, 1e-12);
  EXPECT_NEAR(hit->normal.z, -1.0, 1e-12);
  EXPECT_EQ(hit->surface_id, 256);
  const auto miss = scene.intersect({{0.5, 0, 0}, {0, 0, 1}});
  ASSERT_TRUE(miss);
  EXPECT_NEAR(miss->t, 2.0, 1e-12);
  EXPECT_EQ(miss->surface_id, 0);
}

TEST(Scene, CylinderSideAndCap) {
  mpsl::SceneSurface scene;
  scene.primitives.push_back({mpsl::CylinderSurface{{0, 0.1, 1}, {0, -1, 0}, 0.1, 0.2}, mpsl::Albedo::constant({0.5, 0.5, 0.5})});
  const auto side = scene.intersect({{0, 0, 0}, {0, 0, 1}});
  ASSERT_TRUE(side);
  EXPECT_NEAR(side->t, 0.9, 1e-9);
  const auto cap = scene.intersect({{0, -1, 1}, {0, 1, 0}});
  ASSERT_TRUE(cap);
  EXPECT_NEAR(cap->t, 0.9, 1e-9);
}

TEST(Scene, BumpFieldPeak) {
  const auto hf = mpsl::make_bump_field({0, 0, 1}, {1, 0, 0}, {0, 1, 0}, 0.4, 0.4, 81, 81,
                                        {mpsl::GaussianBump{{0, 0}, {0.05, 0.05}, 0.1}});
  EXPECT_NEAR(hf.max_height, 0.1, 1e-6);
  mpsl::SceneSurface scene;
  scene.primitives.push_back({hf, mpsl::Albedo::constant({0.5, 0.5, 0.5})});
  const auto top = scene.intersect({{0, 0, 0}, {0, 0, 1}});
  ASSERT_TRUE(top);
  EXPECT_NEAR(top->t, 0.9, 1e-4);
  const auto flat = scene.intersect({{0.19, 0.19, 0}, {0, 0, 1}});
  ASSERT_TRUE(flat);
  EXPECT_NEAR(flat->t, 1.0, 1e-4);
}

TEST(Scene, RgbcmyPanelRegions) {
  const auto a = mpsl::Albedo::rgbcmy_panel(0.9, 0.1);
  EXPECT_NO_THROW(a.validate());
  EXPECT_EQ(a.region({-0.5, -0.3}, {0.6, 0.4}), 0);
  EXPECT_EQ(a.region({0.5, 0.3}, {0.6, 0.4}), 5);
  EXPECT_DOUBLE_EQ(a.evaluate(3).x, 0.1);
  EXPECT_DOUBLE_EQ(a.evaluate(3).y, 0.9);
}

TEST(Render, FlatPlaneTruth) {
  auto rig = one_pair_rig();
  mpsl::SceneSurface scene;
  scene.primitives.push_back({mpsl::PlaneSurface{{0, 0, 1}, {0, 0, -1}, {1, 0, 0}}, mpsl::Albedo::constant({1, 1, 1})});
  const auto renders = mpsl::render(scene, rig, mpsl::AmbientLight{}, mpsl::RenderOptions{});
  ASSERT_EQ(renders.size(), 1u);
  const auto& t = renders[0].truth;
  for (int y = 0; y < 120; y += 7)
    for (int x = 0; x < 160; x += 7) {
      ASSERT_TRUE(t.depth.is_valid(x, y));
      EXPECT_NEAR(t.depth.depth(x, y), 1.0, 1e-5);
      const float c = t.stripe_coordinate[0](x, y);
      ASSERT_FALSE(std::isnan(c));
      // Oracle: project the surface point into the projector directly.
      const auto ray = mpsl::backproject_ray(rig.cameras[0], {double(x), double(y)});
      const auto q = rig.projectors[0].pinhole.project(ray.at(1.0 / ray.direction.z));
      EXPECT_NEAR(c, rig.projectors[0].pattern_coordinate(*q), 1e-3);
    }
  // Lit stripe channel dominates near stripe centers.
  int checked = 0;
  for (int x = 10; x < 150; ++x) {
    const double c = t.stripe_coordinate[0](x, 60);
    if (std::abs(c - std::floor(c) - 0.5) > 0.15) continue;
    const int ch = int(pattern73()->stripes[std::size_t(c)]);
    for (int k = 0; k < 3; ++k) {
      if (k == ch) continue;
      EXPECT_GT(renders[0].radiance(x, 60, ch), renders[0].radiance(x, 60, k) + 50) << "x " << x;
    }
    ++checked;
  }
  EXPECT_GT(checked, 20);
}

TEST(Render, ShadowedRegionHasNoCoordinate) {
  auto rig = one_pair_rig();
  mpsl::SceneSurface scene;
  scene.primitives.push_back({mpsl::PlaneSurface{{0, 0, 1.1}, {0, 0, -1}, {1, 0, 0}}, mpsl::Albedo::constant({1, 1, 1})});
  scene.primitives.push_back({mpsl::SphereSurface{{0, 0, 0.9}, 0.05}, mpsl::Albedo::constant({1, 1, 1})});
  const auto r = mpsl::render(scene, rig, mpsl::AmbientLight{}, mpsl::RenderOptions{})[0];
  // The sphere shadows the plane on the side away from the projector (+x).
  const auto px = rig.cameras[0].project({0.0 + 0.075, 0, 1.1});
  ASSERT_TRUE(px);
  const int x = int(std::lround(px->x)), y = int(std::lround(px->y));
  EXPECT_EQ(r.truth.surface_id(x, y), 0);
  EXPECT_TRUE(std::isnan(r.truth.stripe_coordinate[0](x, y)));
  EXPECT_FALSE(std::isnan(r.truth.stripe_coordinate[0](80, 5)));
}

TEST(Noise, KeyedAndReproducible) {
  const auto flat = mpsl::make_rgb(16, 16, 100.0f);
  mpsl::NoiseModel nm;
  const auto a = mpsl::add_noise(flat, nm, 3);
  const auto b = mpsl::add_noise(flat, nm, 3);
  const auto c = mpsl::add_noise(flat, nm, 4);
  EXPECT_EQ(a.data(), b.data());
  EXPECT_NE(a.data(), c.data());
  nm.sigma_rgb = {0, 0, 0};
  EXPECT_EQ(mpsl::add_noise(flat, nm).data(), flat.data());
  nm.sigma_rgb = {-1, 0, 0};
  EXPECT_THROW(mpsl::add_noise(flat, nm), std::invalid_argument);
}

TEST(Noise, QuantizeClipsAndRounds) {
  auto img = mpsl::make_rgb(2, 1, 0.0f);
  img(0, 0, 0) = 300.0f;
  img(1, 0, 1) = 10.4f;
  const auto q = mpsl::quantize(img);
  EXPECT_EQ(q.image(0, 0, 0), 255);
  EXPECT_EQ(q.image(1, 0, 1), 10);
  EXPECT_DOUBLE_EQ(q.clipped_fraction, 0.5);
  EXPECT_EQ(mpsl::quantize(img, 2.0).image(1, 0, 1), 21);
  EXPECT_THROW(mpsl::quantize(img, 0.0), std::invalid_argument);
}

TEST(Chromaticity, PrimariesLandOnCorners) {
  mpsl::ByteImage img(3, 1, 3, 0);
  img(0, 0, 0) = 200;
  img(1, 0, 1) = 50;
  const auto pts = mpsl::chromaticity_scatter(img);
  ASSERT_EQ(pts.size(), 2u);
  EXPECT_DOUBLE_EQ(pts[0].x, 1.0);
  EXPECT_DOUBLE_EQ(pts[1].y, 1.0);
}

TEST(ImageIo, PfmRoundTripKeepsOrientation) {
  mpsl::FloatImage img(5, 3, 3);
  for (int y = 0; y < 3; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 3; ++c) img(x, y, c) = float(100 * y + 10 * x + c) + 0.25f;
  std::stringstream ss;
  mpsl::write_pfm(ss, img);
  const auto back = mpsl::read_pfm(ss);
  EXPECT_EQ(back.data(), img.data());
}

TEST(ImageIo, PnmRoundTripAndErrors) {
  mpsl::ByteImage img(4, 2, 3);
  for (std::size_t i = 0; i < img.data().size(); ++i) img.data()[i] = std::uint8_t(i * 7);
  std::stringstream ss;
  mpsl::write_pnm(ss, img);
  EXPECT_EQ(mpsl::read_pnm(ss).data(), img.data());
  std::stringstream bad("P6\n4 2\n65535\n");
  EXPECT_THROW(mpsl::read_pnm(bad), mpsl::IoError);
  EXPECT_THROW(mpsl::read_pfm("/nonexistent/x.pfm"), mpsl::IoError);
}

TEST(ImageFilters, BlurPreservesConstantsAndBoxMeanAverages) {
  mpsl::FloatImage img(9, 9, 1, 4.0f);
  const auto b = mpsl::gaussian_blur(img, 1.5);
  for (float v : b.data()) EXPECT_NEAR(v, 4.0f, 1e-5);
  mpsl::FloatImage ramp(9, 1, 1);
  for (int x = 0; x < 9; ++x) ramp(x, 0) = float(x);
  EXPECT_NEAR(mpsl::box_mean(ramp, 2)(4, 0), 4.0f, 1e-5);
}

}  // namespace
