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
#include <vector>

#include "mpsl/pipeline.hpp"
#include "mpsl/range.hpp"
#include "mpsl/scene.hpp"

namespace {

using mpsl::MergeChoice;

mpsl::RangeImage constant_range(int w, int h, double z) {
  mpsl::RangeImage r(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) r.set(x, y, z);
  return r;
}

TEST(MergeSelection, LargerSetWinsOnACountGap) {
  const std::vector<double> a(9, 1.0), b{1.0, 1.0, 1.0, 1.0};
  EXPECT_EQ(mpsl::select_merge_set(a, b), MergeChoice::A);
  EXPECT_EQ(mpsl::select_merge_set(b, a), MergeChoice::B);
}

TEST(MergeSelection, SmallerVarianceWinsOnSimilarCounts) {
  // Five values each, population variance 0.1 and 0.2.
  const double s1 = std::sqrt(0.1 * 5.0 / 2.0), s2 = std::sqrt(0.2 * 5.0 / 2.0);
  const std::vector<double> a{1.0 - s1, 1.0, 1.0, 1.0, 1.0 + s1};
  const std::vector<double> b{1.0 - s2, 1.0, 1.0, 1.0, 1.0 + s2};
  ASSERT_NEAR(mpsl::set_variance(a), 0.1, 1e-12);
  ASSERT_NEAR(mpsl::set_variance(b), 0.2, 1e-12);
  EXPECT_EQ(mpsl::select_merge_set(a, b), MergeChoice::A);
  EXPECT_EQ(mpsl::select_merge_set(b, a), MergeChoice::B);
}

TEST(MergeSelection, SingletonCountsAsMaximallyUncertain) {
  const std::vector<double> a{1.0}, b{1.0, 1.2, 0.8};
  EXPECT_EQ(mpsl::select_merge_set(a, b), MergeChoice::B);
}

TEST(MergeSelection, EqualVarianceTakesTheUnion) {
  const std::vector<double> a{1.0, 2.0}, b{5.0, 6.0};
  EXPECT_EQ(mpsl::select_merge_set(a, b), MergeChoice::Union);
}

TEST(MergeSelection, EmptySetsAreNeverChosen) {
  const std::vector<double> none, one{2.0};
  EXPECT_EQ(mpsl::select_merge_set(none, none), MergeChoice::None);
  EXPECT_EQ(mpsl::select_merge_set(none, one), MergeChoice::B);
  EXPECT_EQ(mpsl::select_merge_set(one, none), MergeChoice::A);
}

TEST(MergeMedian, LowerMedianOfValidValues) {
  std::vector<mpsl::RangeImage> r{constant_range(2, 1, 1.0), constant_range(2, 1, 3.0), constant_range(2, 1, 2.0),
                                  constant_range(2, 1, 4.0)};
  r[3].valid(1, 0) = 0;
  r[1].valid(1, 0) = 0;
  r[2].valid(1, 0) = 0;
  r[0].valid(1, 0) = 0;
  r[2].valid(0, 0) = 0;
  const auto m = mpsl::merge_median(r);
  // Valid values 1, 3, 4 -> 3.
  EXPECT_FLOAT_EQ(m.depth(0, 0), 3.0f);
  EXPECT_FALSE(m.is_valid(1, 0));
  r[3].valid(0, 0) = 0;
  // 1, 3 -> lower median 1.
  EXPECT_FLOAT_EQ(mpsl::merge_median(r).depth(0, 0), 1.0f);
  std::vector<mpsl::RangeImage> bad{constant_range(2, 1, 1.0), constant_range(3, 1, 1.0)};
  EXPECT_THROW(mpsl::merge_median(bad), std::invalid_argument);
}

TEST(MergeWindowed, PrefersTheDenserNeighborhood) {
  auto a = constant_range(5, 5, 1.0);
  mpsl::RangeImage b(5, 5);
  b.set(2, 2, 9.0);
  const auto m = mpsl::merge_windowed_two(a, b);
  EXPECT_FLOAT_EQ(m.depth(2, 2), 1.0f);
  EXPECT_EQ(m.valid_count(), 25u);
  // Only b covers the pixel: its singleton is chosen over an empty set.
  mpsl::RangeImage c(5, 5);
  const auto n = mpsl::merge_windowed_two(c, b);
  EXPECT_FLOAT_EQ(n.depth(2, 2), 9.0f);
  EXPECT_EQ(n.valid_count(), 9u);
}

TEST(MergeWindowed, MergedCoverageIsAtLeastEachInput) {
  auto a = constant_range(20, 20, 1.0), b = constant_range(20, 20, 1.01);
  for (int y = 0; y < 20; ++y)
    for (int x = 0; x < 20; ++x) {
      if (x < 8) a.valid(x, y) = 0;
      if (y > 12) b.valid(x, y) = 0;
    }
  const auto m = mpsl::merge_windowed_two(a, b);
  EXPECT_GE(m.valid_count(), a.valid_count());
  EXPECT_GE(m.valid_count(), b.valid_count());
}

TEST(SegmentFilter, RemovesSmallIslands) {
  auto r = constant_range(30, 30, 1.0);
  for (int y = 10; y < 13; ++y)
    for (int x = 10; x < 13; ++x) r.set(x, y, 1.5);
  mpsl::remove_small_segments(r, {0.03, 50});
  EXPECT_FALSE(r.is_valid(11, 11));
  EXPECT_TRUE(r.is_valid(0, 0));
  EXPECT_EQ(r.valid_count(), 900u - 9u);
}

TEST(Metrics, AgainstKnownErrors) {
  auto truth = constant_range(4, 1, 1.0);
  truth.set(3, 0, 2.0);
  auto r = truth;
  r.set(0, 0, 1.03);
  r.valid(1, 0) = 0;
  const auto m = mpsl::error_metrics(r, truth);
  EXPECT_TRUE(m.overlap);
  EXPECT_EQ(m.compared, 3u);
  EXPECT_NEAR(m.truth_depth_range, 1.0, 1e-6);
  EXPECT_NEAR(m.rms, 0.03 / std::sqrt(3.0), 1e-6);
  EXPECT_NEAR(m.outlier_fraction, 1.0 / 3.0, 1e-9);
  EXPECT_DOUBLE_EQ(m.coverage, 0.75);
  EXPECT_DOUBLE_EQ(m.truth_coverage, 0.75);
}

TEST(RangeIo, RoundTripWithMask) {
  const auto dir = std::filesystem::temp_directory_path() / "mpsl_range_io";
  std::filesystem::create_directories(dir);
  auto r = constant_range(6, 4, 0.75);
  r.valid(2, 1) = 0;
  mpsl::write_range((dir / "r").string(), r);
  const auto back = mpsl::read_range((dir / "r.pfm").string());
  EXPECT_EQ(back.valid.data(), r.valid.data());
  EXPECT_FLOAT_EQ(back.depth(0, 0), 0.75f);
  std::filesystem::remove((dir / "r_valid.pgm"));
  const auto no_mask = mpsl::read_range((dir / "r.pfm").string());
  EXPECT_EQ(no_mask.valid.data(), r.valid.data());
  std::filesystem::remove_all(dir);
}

mpsl::Rig plane_rig() {
  const auto pat = std::make_shared<const mpsl::StripePattern>(mpsl::generate_pattern(7, 3, 4));
  mpsl::Rig rig;
  rig.cameras.push_back(mpsl::make_pinhole("cam0", 300, 160, 120, {0, 0, 0}, {0, 0, 1}));
  rig.cameras.push_back(mpsl::make_pinhole("cam1", 300, 160, 120, {0.1, 0.05, 0}, {0, 0, 1}));
  rig.projectors.push_back({mpsl::make_pinhole("proj0", 350, 400, 400, {-0.25, 0, 0}, {0, 0, 1}), 0.0, pat, 110});
  return rig;
}

mpsl::SceneSurface tilted_plane() {
  mpsl::SceneSurface scene;
  scene.primitives.push_back(
      {mpsl::PlaneSurface{{0, 0, 1.0}, mpsl::normalized(mpsl::Vec3{0.2, 0.1, -1}), {1, 0, 0}}, mpsl::Albedo::constant({1, 1, 1})});
  return scene;
}

TEST(Reconstruct, TruthCoordinatesGiveTruthDepth) {
  const auto rig = plane_rig();
  const auto renders = mpsl::render(tilted_plane(), rig, mpsl::AmbientLight{}, mpsl::RenderOptions{});
  mpsl::DecodedMap d;
  d.coordinate = renders[0].truth.stripe_coordinate[0];
  const auto r = mpsl::reconstruct(d, rig, 0, 0);
  const auto m = mpsl::error_metrics(r, renders[0].truth.depth);
  EXPECT_GT(m.truth_coverage, 0.95);
  EXPECT_LT(m.rms, 1e-4);
  mpsl::DecodedMap small;
  small.coordinate = mpsl::FloatImage(10, 10, 1);
  EXPECT_THROW(mpsl::reconstruct(small, rig, 0, 0), std::invalid_argument);
}

TEST(Warp, SecondCameraTruthLandsOnReferenceTruth) {
  const auto rig = plane_rig();
  const auto renders = mpsl::render(tilted_plane(), rig, mpsl::AmbientLight{}, mpsl::RenderOptions{});
  const auto warped = mpsl::warp_to_camera(renders[1].truth.depth, rig.cameras[1], rig.cameras[0]);
  const auto m = mpsl::error_metrics(warped, renders[0].truth.depth);
  EXPECT_GT(m.compared, 10000u);
  // Nearest-pixel splatting: half a pixel times the depth slope of the plane.
  EXPECT_LT(m.rms, 1e-3);
  const auto same = mpsl::warp_to_camera(renders[0].truth.depth, rig.cameras[0], rig.cameras[0]);
  EXPECT_EQ(same.valid.data(), renders[0].truth.depth.valid.data());
}

TEST(Warp, NearerSurfaceWinsTheZBuffer) {
  const auto cam = mpsl::make_pinhole("c", 100, 21, 21, {0, 0, 0}, {0, 0, 1});
  const auto wide = mpsl::make_pinhole("w", 40, 21, 21, {0, 0, 0}, {0, 0, 1});
  mpsl::RangeImage r(21, 21);
  r.set(10, 10, 2.0);
  r.set(11, 10, 1.0);
  // Both samples land on pixel (10, 10) of the wide camera.
  const auto w = mpsl::warp_to_camera(r, cam, wide);
  EXPECT_EQ(w.valid_count(), 1u);
  EXPECT_FLOAT_EQ(w.depth(10, 10), 1.0f);
  EXPECT_THROW(mpsl::warp_to_camera(mpsl::RangeImage(5, 5), cam, wide), std::invalid_argument);
}

TEST(MergeRanges, PolicyNamesAndArity) {
  EXPECT_EQ(mpsl::merge_policy_from_string("median"), mpsl::MergePolicy::Median);
  EXPECT_EQ(mpsl::merge_policy_from_string("windowed_two"), mpsl::MergePolicy::WindowedTwo);
  EXPECT_THROW(mpsl::merge_policy_from_string("mean"), std::invalid_argument);
  const auto rig = plane_rig();
  std::vector<mpsl::RangeImage> three(3, constant_range(160, 120, 1.0));
  for (auto& r : three) r.camera = 0;
  EXPECT_THROW(mpsl::merge_ranges(three, rig, mpsl::MergePolicy::WindowedTwo), mpsl::StageError);
  EXPECT_EQ(mpsl::merge_ranges(three, rig, mpsl::MergePolicy::Median).valid_count(), 160u * 120u);
  EXPECT_THROW(mpsl::merge_ranges({}, rig, mpsl::MergePolicy::Median), mpsl::StageError);
}

}  // namespace
