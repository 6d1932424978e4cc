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

#include <set>
#include <string>
#include <vector>

#include "mpsl/pattern.hpp"

namespace {

using mpsl::ColorLabel;
using mpsl::TransitionCode;

std::string window_string(const mpsl::StripePattern& p, int i) {
  std::string s;
  for (auto c : p.window_at(i)) s.push_back(mpsl::to_char(c));
  return s;
}

TEST(Pattern, SubpatternCount) {
  EXPECT_EQ(mpsl::count_subpatterns(7, 3), 3 * 64);
  EXPECT_EQ(mpsl::count_subpatterns(3, 3), 12);
  EXPECT_EQ(mpsl::count_subpatterns(4, 2), 2);
}

TEST(Pattern, SevenThreeHasEveryWindowOnce) {
  const auto p = mpsl::generate_pattern(7, 3);
  EXPECT_EQ(p.size(), 198);
  EXPECT_EQ(p.window_count(), 192);
  std::set<std::string> seen;
  for (int i = 0; i < p.window_count(); ++i) seen.insert(window_string(p, i));
  EXPECT_EQ(seen.size(), 192u);
  for (int i = 1; i < p.size(); ++i) EXPECT_NE(p.stripes[i], p.stripes[i - 1]) << "at " << i;
}

TEST(Pattern, WindowsAreFoundAtTheirStart) {
  const auto p = mpsl::generate_pattern(5, 3);
  for (int i = 0; i < p.window_count(); ++i) {
    const auto found = mpsl::window_lookup(p, p.window_at(i));
    ASSERT_TRUE(found);
    EXPECT_EQ(*found, i);
  }
  const std::vector<ColorLabel> repeat{ColorLabel::R, ColorLabel::R, ColorLabel::G, ColorLabel::B, ColorLabel::R};
  EXPECT_FALSE(mpsl::window_lookup(p, repeat));
  EXPECT_THROW(mpsl::window_lookup(p, std::span(repeat).first(3)), std::invalid_argument);
}

TEST(Pattern, GenerationIsDeterministic) {
  EXPECT_EQ(mpsl::to_text(mpsl::generate_pattern(7, 3)), mpsl::to_text(mpsl::generate_pattern(7, 3)));
}

TEST(Pattern, TwoColorsAlternate) {
  const auto p = mpsl::generate_pattern(4, 2);
  EXPECT_EQ(p.window_count(), 2);
}

TEST(Pattern, RejectsBadArguments) {
  EXPECT_THROW(mpsl::generate_pattern(1, 3), std::invalid_argument);
  EXPECT_THROW(mpsl::generate_pattern(5, 4), std::invalid_argument);
  EXPECT_THROW(mpsl::generate_pattern(5, 3, 0), std::invalid_argument);
}

TEST(Pattern, TextRoundTrip) {
  const auto p = mpsl::generate_pattern(7, 3);
  const auto q = mpsl::parse_pattern(mpsl::to_text(p), 7);
  EXPECT_EQ(p.stripes, q.stripes);
  EXPECT_EQ(q.window_count(), 192);
  EXPECT_THROW(mpsl::parse_pattern("RGGB", 2), std::invalid_argument);
  EXPECT_THROW(mpsl::parse_pattern("RGBRGB", 3), std::invalid_argument);
  EXPECT_THROW(mpsl::parse_pattern("RGX", 2), std::invalid_argument);
}

TEST(TransitionCodes, SixDistinctCodes) {
  std::set<int> codes;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      if (a == b) continue;
      const auto code = mpsl::transition_between(ColorLabel(a), ColorLabel(b));
      codes.insert(int(code));
      EXPECT_EQ(mpsl::exited_color(code), ColorLabel(a));
      EXPECT_EQ(mpsl::entered_color(code), ColorLabel(b));
      EXPECT_EQ(mpsl::reversed(code), mpsl::transition_between(ColorLabel(b), ColorLabel(a)));
      const auto s = mpsl::code_signature(code);
      EXPECT_EQ(s[a], -1.0);
      EXPECT_EQ(s[b], 1.0);
      EXPECT_EQ(s[3 - a - b], 0.0);
    }
  EXPECT_EQ(codes.size(), 6u);
  EXPECT_EQ(*codes.begin(), 0);
  EXPECT_EQ(*codes.rbegin(), 5);
  EXPECT_THROW(mpsl::transition_between(ColorLabel::G, ColorLabel::G), std::invalid_argument);
}

TEST(TransitionCodes, Names) {
  EXPECT_EQ(mpsl::to_string(mpsl::transition_between(ColorLabel::R, ColorLabel::G)), "+RG");
  EXPECT_EQ(mpsl::to_string(mpsl::transition_between(ColorLabel::G, ColorLabel::R)), "-RG");
  EXPECT_EQ(mpsl::to_string(mpsl::transition_between(ColorLabel::B, ColorLabel::R)), "+BR");
}

TEST(TransitionCodes, ColorsReplayFromCodes) {
  const auto p = mpsl::generate_pattern(6, 3);
  const auto codes = mpsl::transition_symbols(p.stripes);
  EXPECT_EQ(mpsl::colors_from_transitions(p.stripes.front(), codes), p.stripes);
  EXPECT_THROW(mpsl::colors_from_transitions(ColorLabel::B, codes), std::invalid_argument);
}

TEST(SecondDifference, MatchesOneHotArithmetic) {
  std::set<int> symbols;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b)
      for (int c = 0; c < 3; ++c) {
        if (a == b || b == c) continue;
        const auto s = mpsl::second_difference_symbol(ColorLabel(a), ColorLabel(b), ColorLabel(c));
        symbols.insert(s);
        const auto v = mpsl::second_difference_vector(s);
        for (int ch = 0; ch < 3; ++ch) {
          EXPECT_EQ(v[ch], int(a == ch) - 2 * int(b == ch) + int(c == ch));
        }
      }
  EXPECT_EQ(symbols.size(), 9u);
}

TEST(CodeTable, BothOrdersAreUnique) {
  const auto p = mpsl::generate_pattern(7, 3);
  for (int order : {1, 2}) {
    const auto table = mpsl::build_code_table(p, order);
    EXPECT_EQ(table.size(), 192u);
    for (int i = 0; i < p.window_count(); ++i) {
      const auto w = p.window_at(i);
      const auto sym = order == 1 ? mpsl::transition_symbols(w) : mpsl::second_difference_symbols(w);
      ASSERT_EQ(int(sym.size()), 7 - order);
      EXPECT_EQ(table.lookup(sym), i);
    }
  }
  EXPECT_THROW(mpsl::build_code_table(p, 3), std::invalid_argument);
}

TEST(Raster, StripeColumnsAndDerivative) {
  const auto p = mpsl::generate_pattern(3, 3);
  const auto r = mpsl::rasterize_pattern(p, p.size() * 4 + 3, 2, 4);
  for (int x = 0; x < r.width(); ++x) {
    const int stripe = x / 4;
    for (int c = 0; c < 3; ++c) {
      const float want = stripe < p.size() && int(p.stripes[stripe]) == c ? 255.0f : 0.0f;
      EXPECT_EQ(r(x, 1, c), want);
    }
  }
  const auto d = mpsl::derivative_visualization(r);
  const int c0 = int(p.stripes[0]), c1 = int(p.stripes[1]);
  EXPECT_EQ(d(0, 0, c0), 128);
  EXPECT_EQ(d(3, 0, c0), 0);
  EXPECT_EQ(d(3, 0, c1), 255);
}

}  // namespace
