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

#include <algorithm>
#include <cmath>
#include <memory>
#include <numbers>
#include <random>
#include <vector>

#include "mpsl/decode.hpp"
#include "mpsl/demux.hpp"
#include "mpsl/pipeline.hpp"
#include "mpsl/scene.hpp"

namespace {

using mpsl::ColorLabel;

std::shared_ptr<const mpsl::StripePattern> pattern73() {
  static const auto p = std::make_shared<const mpsl::StripePattern>(mpsl::generate_pattern(7, 3, 4));
  return p;
}

double interior_rms(const mpsl::FloatImage& v, int border) {
  double s = 0.0;
  std::size_t n = 0;
  for (int y = border; y < v.height() - border; ++y)
    for (int x = border; x < v.width() - border; ++x)
      for (int c = 0; c < v.channels(); ++c) {
        s += double(v(x, y, c)) * v(x, y, c);
        ++n;
      }
  return std::sqrt(s / double(n));
}

TEST(Separability, ClosedFormValues) {
  EXPECT_NEAR(mpsl::separability(30, 30, 77), 0.0, 1e-12);
  EXPECT_NEAR(mpsl::separability(0, 90, 0), 1.0, 1e-12);
  EXPECT_NEAR(mpsl::separability(0, 90, 90), -1.0, 1e-12);
  EXPECT_NEAR(mpsl::separability_argmax(30, 100), 10.0, 1e-9);
}

TEST(Separability, ArgmaxIsPerpendicularToTheOtherPattern) {
  std::mt19937 rng(11);
  std::uniform_real_distribution<double> angle(0.0, 180.0);
  for (int i = 0; i < 200; ++i) {
    const double a = angle(rng), b = angle(rng);
    if (mpsl::orientation_distance(a, b) < 5.0) continue;
    const double arg = mpsl::separability_argmax(a, b);
    EXPECT_LE(mpsl::orientation_distance(arg, b + 90.0), 0.1 + 1e-9) << a << " " << b;
  }
}

TEST(Gradients, ScharrOnARamp) {
  mpsl::FloatImage ramp(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) ramp(x, y) = float(2 * x - 3 * y);
  const auto g = mpsl::compute_gradients(ramp, 0.0, mpsl::GradientOperator::Scharr);
  EXPECT_NEAR(g.du(4, 4), 2.0, 1e-5);
  EXPECT_NEAR(g.dv(4, 4), -3.0, 1e-5);
  EXPECT_EQ(g.reliable(0, 0), 0);
  EXPECT_EQ(g.reliable(4, 4), 1);
}

// Smooth gratings: the image is constant along each pattern's stripes.
mpsl::FloatImage gratings(int size, const std::vector<double>& angles, const std::vector<double>& weights) {
  mpsl::FloatImage img(size, size, 3, 100.0f);
  for (int y = 0; y < size; ++y)
    for (int x = 0; x < size; ++x)
      for (std::size_t i = 0; i < angles.size(); ++i) {
        const double a = mpsl::deg2rad(angles[i]);
        const double phase = 2.0 * std::numbers::pi * (x * std::cos(a) + y * std::sin(a)) / 20.0;
        for (int c = 0; c < 3; ++c) img(x, y, c) += float(weights[i] * std::sin(phase + c));
      }
  return img;
}

TEST(Demux, FirstOrderDerivativeCancelsTheOtherPattern) {
  const std::vector<double> angles{20.0, 110.0};
  const auto dirs = mpsl::global_directions(96, 96, angles);
  const auto only1 = mpsl::separate(gratings(96, angles, {0.0, 40.0}), dirs);
  const auto both = mpsl::separate(gratings(96, angles, {40.0, 40.0}), dirs);
  ASSERT_EQ(only1.size(), 2u);
  EXPECT_EQ(only1[0].order, 1);
  // Pattern 0 is isolated by differentiating along the stripes of pattern 1.
  EXPECT_LT(interior_rms(only1[0].values, 6), 0.02 * interior_rms(both[0].values, 6));
}

TEST(Demux, SecondOrderDerivativeCancelsBothOthers) {
  const std::vector<double> angles{10.0, 70.0, 130.0};
  const auto dirs = mpsl::global_directions(96, 96, angles);
  const auto mine = mpsl::separate(gratings(96, angles, {40.0, 0.0, 0.0}), dirs);
  EXPECT_EQ(mine[0].order, 2);
  for (int keep = 1; keep < 3; ++keep) {
    std::vector<double> w{0.0, 0.0, 0.0};
    w[std::size_t(keep)] = 40.0;
    const auto other = mpsl::separate(gratings(96, angles, w), dirs);
    EXPECT_LT(interior_rms(other[0].values, 6), 0.02 * interior_rms(mine[0].values, 6));
  }
}

TEST(Demux, TooCloseDirectionsAreNotSeparable) {
  const auto img = mpsl::make_rgb(32, 32, 10.0f);
  const std::vector<double> angles{20.0, 30.0};
  const auto seps = mpsl::separate(img, mpsl::global_directions(32, 32, angles));
  for (auto v : seps[0].separable.data()) EXPECT_EQ(v, 0);
}

TEST(Orientation, SinglePatternLobe) {
  const auto pat = pattern73();
  for (double a : {0.0, 35.0, 120.0}) {
    const auto r = mpsl::render_planar_stripes(96, 96, {{pat, a, 3.5, 0, 110}});
    mpsl::OrientationParams op;
    op.magnitude_threshold = 1.0;
    const auto field = mpsl::estimate_directions(mpsl::compute_gradients(r.radiance, 0.0, mpsl::GradientOperator::Scharr), op);
    std::vector<double> err;
    for (const auto& b : field.blocks) {
      if (b.lobes.empty() || b.x0 < 8 || b.y0 < 8 || b.x0 > 80 || b.y0 > 80) continue;
      err.push_back(mpsl::orientation_distance(b.lobes[0].angle_deg, a));
    }
    ASSERT_GT(err.size(), 100u);
    std::sort(err.begin(), err.end());
    EXPECT_LT(err[err.size() / 2], 1.0) << a;
    EXPECT_LT(err.back(), 5.0) << a;
  }
}

TEST(Orientation, GlobalAssignmentOfTwoPatterns) {
  const auto pat = pattern73();
  const std::vector<double> angles{20.0, 90.0};
  const auto r = mpsl::render_planar_stripes(160, 120, {{pat, angles[0], 3.5, 0, 110}, {pat, angles[1], 3.5, 0, 110}});
  mpsl::OrientationParams op;
  op.magnitude_threshold = 1.0;
  const auto field = mpsl::estimate_directions(mpsl::compute_gradients(r.radiance, 0.0, mpsl::GradientOperator::Scharr), op);
  const auto dirs = mpsl::assign_directions(field, mpsl::uniform_directions(160, 120, angles));
  ASSERT_EQ(dirs.global_deg.size(), 2u);
  EXPECT_NEAR(dirs.global_deg[0], 20.0, 1.0);
  EXPECT_NEAR(dirs.global_deg[1], 90.0, 1.0);
}

TEST(Signature, NearestCode) {
  const auto m = mpsl::classify_signature({-1.0, 1.0, 0.05}, 0.8);
  ASSERT_TRUE(m);
  EXPECT_EQ(m->symbol, std::uint8_t(mpsl::TransitionCode::PlusRG));
  EXPECT_GT(m->cosine, 0.99);
  EXPECT_FALSE(mpsl::classify_signature({1.0, 1.0, 1.0}, 0.8));
  EXPECT_FALSE(mpsl::classify_signature({0.0, 0.0, 0.0}, 0.8));
}

// Scanline of first derivatives for stripes [first, first+count) of the
// pattern, `width` samples per stripe, boundaries between samples.
mpsl::Scanline first_derivative_line(const mpsl::StripePattern& p, int first, int count, int width,
                                     std::vector<double>* boundaries) {
  mpsl::Scanline line;
  const int n = count * width;
  line.values.assign(std::size_t(n), {0, 0, 0});
  line.valid.assign(std::size_t(n), 1);
  for (int i = 1; i < count; ++i) {
    const double pos = i * width - 0.5;
    boundaries->push_back(pos);
    const auto sig = mpsl::code_signature(mpsl::transition_between(p.stripes[first + i - 1], p.stripes[first + i]));
    for (int s = 0; s < n; ++s) {
      const double g = 100.0 * std::exp(-(s - pos) * (s - pos) / (2 * 0.8 * 0.8));
      for (int c = 0; c < 3; ++c) line.values[std::size_t(s)][std::size_t(c)] += float(g * sig[c]);
    }
  }
  return line;
}

TEST(Boundaries, FirstOrderDetectionAndDecoding) {
  const auto& p = *pattern73();
  const int first = 40, count = 30;
  std::vector<double> truth;
  const auto line = first_derivative_line(p, first, count, 4, &truth);
  mpsl::DetectionParams dp;
  const auto samples = mpsl::classify_boundaries(line, 1, dp);
  ASSERT_EQ(samples.size(), truth.size());
  for (std::size_t i = 0; i < samples.size(); ++i) {
    EXPECT_NEAR(samples[i].position, truth[i], 0.05);
    EXPECT_EQ(samples[i].code(), mpsl::transition_between(p.stripes[first + i], p.stripes[first + i + 1]));
  }
  const auto runs = mpsl::segment_stripes(samples, 1);
  ASSERT_EQ(runs.size(), 1u);
  const auto d = mpsl::decode_run(runs[0], p, nullptr);
  ASSERT_EQ(d.coordinate.size(), samples.size());
  for (std::size_t j = 0; j < d.coordinate.size(); ++j) EXPECT_EQ(d.coordinate[j], first + 1 + int(j));
}

TEST(Boundaries, WeakAndUnclassifiablePeaksAreDropped) {
  const auto& p = *pattern73();
  std::vector<double> truth;
  auto line = first_derivative_line(p, 0, 10, 4, &truth);
  mpsl::DetectionParams dp;
  dp.derivative_sigma = {50.0, 50.0, 50.0};
  EXPECT_TRUE(mpsl::classify_boundaries(line, 1, dp).empty());
  for (auto& v : line.values) v = {v[0] + std::abs(v[0]), v[0] + std::abs(v[0]), v[0] + std::abs(v[0])};
  EXPECT_TRUE(mpsl::classify_boundaries(line, 1, mpsl::DetectionParams{}).empty());
}

TEST(Voting, SecondOrderRunDecodesStripeCenters) {
  const auto& p = *pattern73();
  const auto table = mpsl::build_code_table(p, 2);
  const int first = 100, count = 25;
  mpsl::StripeRun run;
  run.order = 2;
  for (int i = 0; i < count; ++i) {
    run.positions.push_back(4.0 * i + 1.5);
    run.colors.push_back(p.stripes[first + i]);
    run.symbols.push_back(i == 0 || i == count - 1 ? mpsl::kNoSymbol
                                                   : mpsl::second_difference_symbol(p.stripes[first + i - 1],
                                                                                    p.stripes[first + i],
                                                                                    p.stripes[first + i + 1]));
  }
  const auto d = mpsl::decode_run(run, p, &table);
  int decoded = 0;
  for (int j = 0; j < count; ++j) {
    if (std::isnan(d.coordinate[std::size_t(j)])) continue;
    ++decoded;
    EXPECT_EQ(d.coordinate[std::size_t(j)], first + j + 0.5);
  }
  EXPECT_GE(decoded, count - 4);
  EXPECT_THROW(mpsl::decode_run(run, p, nullptr), std::invalid_argument);
}

TEST(Voting, CorruptedStripeIsOutvoted) {
  const auto& p = *pattern73();
  mpsl::StripeRun run;
  run.order = 1;
  const int first = 20, count = 24;
  for (int i = 0; i <= count; ++i) run.colors.push_back(p.stripes[first + i]);
  for (int i = 0; i < count; ++i) run.positions.push_back(4.0 * i);
  run.symbols = mpsl::transition_symbols(run.colors);
  // One wrong color only breaks the windows that contain it.
  run.colors[12] = run.colors[12] == ColorLabel::R ? ColorLabel::B : ColorLabel::R;
  const auto d = mpsl::decode_run(run, p, nullptr);
  int right = 0, wrong = 0;
  for (int j = 0; j < count; ++j) {
    if (std::isnan(d.coordinate[std::size_t(j)])) continue;
    (d.coordinate[std::size_t(j)] == first + 1 + j ? right : wrong) += 1;
  }
  EXPECT_EQ(wrong, 0);
  EXPECT_GT(right, 12);
}

TEST(Voting, ShortStreaksAreRemoved) {
  mpsl::RunDecoding d;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  d.coordinate = {10, 11, 12, nan, 50, 51, 52, 53, 54, 55, 56, 90};
  d.votes.assign(d.coordinate.size(), 3);
  d.cast.assign(d.coordinate.size(), 3);
  mpsl::detail::drop_short_streaks(d, 6);
  for (int j : {0, 1, 2, 11}) EXPECT_TRUE(std::isnan(d.coordinate[std::size_t(j)]));
  for (int j = 4; j <= 10; ++j) EXPECT_EQ(d.coordinate[std::size_t(j)], 46 + j);
  EXPECT_EQ(d.votes[0], 0);
}

TEST(Decoding, PlanarTwoPatternsNoiseless) {
  const auto pat = pattern73();
  const std::vector<double> angles{20.0, 110.0};
  const auto r = mpsl::render_planar_stripes(160, 120, {{pat, angles[0], 3.5, 0, 110}, {pat, angles[1], 3.5, 0, 110}});
  const auto img = mpsl::to_radiance(mpsl::quantize(r.radiance).image);
  const auto dirs = mpsl::global_directions(160, 120, angles);
  const auto seps = mpsl::separate(img, dirs);
  for (int i = 0; i < 2; ++i) {
    const double other = mpsl::deg2rad(angles[std::size_t(1 - i)] + 90.0);
    const std::vector<mpsl::Vec2> d{{std::cos(other), std::sin(other)}};
    const double gain = mpsl::derivative_noise_gain(1, 0.5, d);
    mpsl::DecodeParams dp;
    const auto noise = mpsl::effective_noise({0, 0, 0});
    for (int c = 0; c < 3; ++c) dp.detection.derivative_sigma[std::size_t(c)] = noise[std::size_t(c)] * gain;
    const auto dec = mpsl::decode_pattern(seps[std::size_t(i)], angles[std::size_t(i)], *pat, nullptr, dp);
    const auto acc = mpsl::decode_accuracy(dec, r.coordinate[std::size_t(i)]);
    EXPECT_GT(acc.accuracy, 0.99) << "pattern " << i;
    EXPECT_GT(acc.coverage, 0.5) << "pattern " << i;
  }
}

TEST(Decoding, AccuracyCountsAgainstTruth) {
  mpsl::DecodedMap m;
  m.coordinate = mpsl::FloatImage(3, 1, 1, mpsl::kUndecoded);
  m.coordinate(0, 0) = 10.2f;
  m.coordinate(1, 0) = 14.0f;
  mpsl::FloatImage truth(3, 1, 1);
  truth(0, 0) = 10.0f;
  truth(1, 0) = 11.0f;
  truth(2, 0) = 12.0f;
  const auto a = mpsl::decode_accuracy(m, truth);
  EXPECT_EQ(a.decoded, 2u);
  EXPECT_EQ(a.correct, 1u);
  EXPECT_EQ(a.illuminated, 3u);
  EXPECT_DOUBLE_EQ(a.accuracy, 0.5);
  EXPECT_DOUBLE_EQ(a.coverage, 2.0 / 3.0);
}

TEST(Decoding, EffectiveNoiseAddsQuantization) {
  const auto n = mpsl::effective_noise({0.0, 1.0, 2.0});
  EXPECT_NEAR(n[0], std::sqrt(1.0 / 12.0), 1e-12);
  EXPECT_NEAR(n[2], std::sqrt(4.0 + 1.0 / 12.0), 1e-12);
}

}  // namespace
