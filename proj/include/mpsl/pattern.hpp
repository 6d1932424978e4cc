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

// Color-stripe permutation pattern: generation, window lookup, and the
// first/second-order derivative code tables used for decoding.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mpsl/image.hpp"

namespace mpsl {

enum class ColorLabel : std::uint8_t { R = 0, G = 1, B = 2 };

inline constexpr int kColorCount = 3;

inline char to_char(ColorLabel c) {
  static constexpr char kNames[] = {'R', 'G', 'B'};
  return kNames[static_cast<int>(c)];
}

inline ColorLabel color_from_char(char ch) {
  switch (ch) {
    case 'R': case 'r': return ColorLabel::R;
    case 'G': case 'g': return ColorLabel::G;
    case 'B': case 'b': return ColorLabel::B;
    default: throw std::invalid_argument(std::string("not a stripe color: ") + ch);
  }
}

/// Signed color transition at a stripe boundary. +XY: channel X falls and
/// channel Y rises along the encoding direction (X -> Y); -XY is Y -> X.
enum class TransitionCode : std::uint8_t { PlusRG = 0, MinusRG, PlusGB, MinusGB, PlusBR, MinusBR };

inline constexpr int kTransitionCodeCount = 6;

inline std::string_view to_string(TransitionCode code) {
  static constexpr std::string_view kNames[] = {"+RG", "-RG", "+GB", "-GB", "+BR", "-BR"};
  return kNames[static_cast<int>(code)];
}

inline TransitionCode transition_between(ColorLabel from, ColorLabel to) {
  const int f = static_cast<int>(from), t = static_cast<int>(to);
  if (f == t) throw std::invalid_argument("transition_between: identical colors");
  // Forward pairs in cyclic order R->G, G->B, B->R carry the '+' sign.
  if ((f + 1) % 3 == t) return static_cast<TransitionCode>(2 * f);
  return static_cast<TransitionCode>(2 * t + 1);
}

/// Color on the far side of the boundary: R={+BR,-RG}, G={+RG,-GB}, B={+GB,-BR}.
inline ColorLabel entered_color(TransitionCode code) {
  const int v = static_cast<int>(code);
  const int pair = v / 2;  // RG=0, GB=1, BR=2
  return v % 2 == 0 ? static_cast<ColorLabel>((pair + 1) % 3) : static_cast<ColorLabel>(pair);
}

inline ColorLabel exited_color(TransitionCode code) {
  const int v = static_cast<int>(code);
  const int pair = v / 2;
  return v % 2 == 0 ? static_cast<ColorLabel>(pair) : static_cast<ColorLabel>((pair + 1) % 3);
}

inline TransitionCode reversed(TransitionCode code) {
  const int v = static_cast<int>(code);
  return static_cast<TransitionCode>(v ^ 1);
}

/// Per-channel derivative signature of an ideal boundary, e.g. +RG -> (-1, +1, 0).
inline std::array<double, 3> code_signature(TransitionCode code) {
  std::array<double, 3> s{0.0, 0.0, 0.0};
  s[static_cast<int>(exited_color(code))] = -1.0;
  s[static_cast<int>(entered_color(code))] = 1.0;
  return s;
}

// Second differences c[i] - 2 c[i+1] + c[i+2] of one-hot stripe colors take
// nine distinct values: 2(X - Y) when the outer colors agree (X Y X), and
// (1,1,1) - 3Y when all three differ (middle color Y).
inline constexpr int kSecondDifferenceCount = 9;

inline std::array<int, 3> second_difference_vector(std::uint8_t symbol) {
  if (symbol >= kSecondDifferenceCount) throw std::out_of_range("second-difference symbol");
  std::array<int, 3> e{0, 0, 0};
  if (symbol < 6) {
    const int x = symbol / 2;
    const int y = symbol % 2 == 0 ? (x + 1) % 3 : (x + 2) % 3;
    e[x] = 2;
    e[y] = -2;
  } else {
    e = {1, 1, 1};
    e[symbol - 6] = -2;
  }
  return e;
}

inline std::uint8_t second_difference_symbol(ColorLabel a, ColorLabel b, ColorLabel c) {
  const int ia = static_cast<int>(a), ib = static_cast<int>(b), ic = static_cast<int>(c);
  if (ia == ib || ib == ic) throw std::invalid_argument("second_difference_symbol: adjacent repeat");
  if (ia == ic) return std::uint8_t(2 * ia + ((ia + 1) % 3 == ib ? 0 : 1));
  return std::uint8_t(6 + ib);
}

inline std::string second_difference_name(std::uint8_t symbol) {
  const auto e = second_difference_vector(symbol);
  std::string s = "(";
  for (int c = 0; c < 3; ++c) {
    if (c) s += ",";
    s += (e[c] > 0 ? "+" : "") + std::to_string(e[c]);
  }
  return s + ")";
}

/// Number of adjacent-distinct color strings of length k over n colors.
inline std::int64_t count_subpatterns(int k, int n_colors) {
  if (k < 1) throw std::invalid_argument("count_subpatterns: k must be >= 1");
  if (n_colors < 2) throw std::invalid_argument("count_subpatterns: need at least 2 colors");
  std::int64_t count = n_colors;
  for (int i = 1; i < k; ++i) {
    if (count > (std::int64_t(1) << 60) / (n_colors - 1)) {
      throw std::overflow_error("count_subpatterns: result too large");
    }
    count *= n_colors - 1;
  }
  return count;
}

namespace detail {

template <typename Symbol>
std::uint64_t pack_window(std::span<const Symbol> window, int bits) {
  std::uint64_t key = 0;
  for (auto s : window) key = (key << bits) | static_cast<std::uint64_t>(s);
  return key;
}

}  // namespace detail

struct StripePattern {
  std::vector<ColorLabel> stripes;
  int window_length = 0;
  int stripe_width_px = 4;
  int n_colors = 3;
  /// packed length-k window -> global window index (= start stripe)
  std::unordered_map<std::uint64_t, int> lookup;

  int size() const { return int(stripes.size()); }
  int window_count() const { return std::max(0, size() - window_length + 1); }

  std::span<const ColorLabel> window_at(int index) const {
    if (index < 0 || index >= window_count()) throw std::out_of_range("window_at");
    return std::span<const ColorLabel>(stripes).subspan(std::size_t(index), std::size_t(window_length));
  }
};

class PatternGenerationError : public std::runtime_error {
 public:
  PatternGenerationError(const std::string& what, StripePattern partial, std::int64_t wanted)
      : std::runtime_error(what), partial_(std::move(partial)), wanted_(wanted) {}
  const StripePattern& partial() const { return partial_; }
  std::int64_t windows_wanted() const { return wanted_; }
  int windows_achieved() const { return partial_.window_count(); }

 private:
  StripePattern partial_;
  std::int64_t wanted_;
};

/// Builds the window index; throws if the stripes break the adjacency or
/// uniqueness invariants.
inline void index_windows(StripePattern& pattern) {
  if (pattern.window_length < 1 || pattern.window_length > 30) {
    throw std::invalid_argument("pattern window length out of range");
  }
  for (std::size_t i = 1; i < pattern.stripes.size(); ++i) {
    if (pattern.stripes[i] == pattern.stripes[i - 1]) {
      throw std::invalid_argument("pattern has equal adjacent stripes at " + std::to_string(i));
    }
  }
  pattern.lookup.clear();
  for (int i = 0; i < pattern.window_count(); ++i) {
    const auto key = detail::pack_window(pattern.window_at(i), 2);
    if (!pattern.lookup.emplace(key, i).second) {
      throw std::invalid_argument("pattern window " + std::to_string(i) + " is not unique");
    }
  }
}

/// Eulerian traversal of the window graph: nodes are adjacent-distinct
/// strings of length k-1, each edge appends one color. Hierholzer's
/// algorithm starting at the lexicographically smallest node and always
/// taking the smallest unused color, so output is fully deterministic.
inline StripePattern generate_pattern(int k, int n_colors = 3, int stripe_width_px = 4) {
  if (k < 2) throw std::invalid_argument("generate_pattern: k must be >= 2");
  if (n_colors < 2 || n_colors > kColorCount) {
    throw std::invalid_argument("generate_pattern: n_colors must be 2 or 3");
  }
  if (stripe_width_px < 1) throw std::invalid_argument("generate_pattern: stripe width must be >= 1");
  const std::int64_t wanted = count_subpatterns(k, n_colors);

  using Node = std::vector<ColorLabel>;
  auto key_of = [](const Node& node) {
    return detail::pack_window(std::span<const ColorLabel>(node), 2);
  };
  std::unordered_map<std::uint64_t, int> used;  // node -> bitmask of used outgoing colors

  Node start(std::size_t(k - 1));
  for (int i = 0; i < k - 1; ++i) start[std::size_t(i)] = static_cast<ColorLabel>(i % 2);

  std::vector<Node> stack{start};
  std::vector<Node> circuit;
  while (!stack.empty()) {
    Node& v = stack.back();
    int& mask = used[key_of(v)];
    int next = -1;
    for (int c = 0; c < n_colors; ++c) {
      if (static_cast<int>(v.back()) == c || (mask >> c) & 1) continue;
      next = c;
      break;
    }
    if (next < 0) {
      circuit.push_back(v);
      stack.pop_back();
      continue;
    }
    mask |= 1 << next;
    Node w(v.begin() + 1, v.end());
    w.push_back(static_cast<ColorLabel>(next));
    stack.push_back(std::move(w));
  }
  std::reverse(circuit.begin(), circuit.end());

  StripePattern pattern;
  pattern.window_length = k;
  pattern.stripe_width_px = stripe_width_px;
  pattern.n_colors = n_colors;
  pattern.stripes = circuit.front();
  for (std::size_t i = 1; i < circuit.size(); ++i) pattern.stripes.push_back(circuit[i].back());
  index_windows(pattern);
  if (pattern.window_count() != wanted) {
    throw PatternGenerationError("generate_pattern: traversal covered " +
                                     std::to_string(pattern.window_count()) + " of " +
                                     std::to_string(wanted) + " windows",
                                 pattern, wanted);
  }
  return pattern;
}

/// Global index of a length-k color window, or nullopt if it does not occur.
inline std::optional<int> window_lookup(const StripePattern& pattern, std::span<const ColorLabel> window) {
  if (int(window.size()) != pattern.window_length) {
    throw std::invalid_argument("window_lookup: window length " + std::to_string(window.size()) +
                                " != " + std::to_string(pattern.window_length));
  }
  const auto it = pattern.lookup.find(detail::pack_window(window, 2));
  if (it == pattern.lookup.end()) return std::nullopt;
  return it->second;
}

/// Windows of derivative symbols -> index of the color window they came from.
/// Order 1 symbols are TransitionCode values (k-1 per window); order 2
/// symbols are second-difference indices (k-2 per window).
struct CodeTable {
  int order = 1;
  int window_length = 0;
  std::unordered_map<std::uint64_t, int> entries;

  std::optional<int> lookup(std::span<const std::uint8_t> symbols) const {
    if (int(symbols.size()) != window_length) {
      throw std::invalid_argument("CodeTable::lookup: wrong window length");
    }
    const auto it = entries.find(detail::pack_window(symbols, 4));
    if (it == entries.end()) return std::nullopt;
    return it->second;
  }
  std::size_t size() const { return entries.size(); }
};

inline std::vector<std::uint8_t> transition_symbols(std::span<const ColorLabel> colors) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 1; i < colors.size(); ++i) {
    out.push_back(static_cast<std::uint8_t>(transition_between(colors[i - 1], colors[i])));
  }
  return out;
}

inline std::vector<std::uint8_t> second_difference_symbols(std::span<const ColorLabel> colors) {
  std::vector<std::uint8_t> out;
  for (std::size_t i = 2; i < colors.size(); ++i) {
    out.push_back(second_difference_symbol(colors[i - 2], colors[i - 1], colors[i]));
  }
  return out;
}

inline CodeTable build_code_table(const StripePattern& pattern, int order) {
  if (order != 1 && order != 2) throw std::invalid_argument("build_code_table: order must be 1 or 2");
  if (pattern.window_length <= order) throw std::invalid_argument("build_code_table: window too short");
  CodeTable table;
  table.order = order;
  table.window_length = pattern.window_length - order;
  for (int i = 0; i < pattern.window_count(); ++i) {
    const auto window = pattern.window_at(i);
    const auto symbols = order == 1 ? transition_symbols(window) : second_difference_symbols(window);
    const auto key = detail::pack_window(std::span<const std::uint8_t>(symbols), 4);
    if (!table.entries.emplace(key, i).second) {
      throw std::logic_error("build_code_table: derivative windows are not unique");
    }
  }
  return table;
}

/// Replays entered colors after a known first stripe.
inline std::vector<ColorLabel> colors_from_transitions(ColorLabel first, std::span<const std::uint8_t> codes) {
  std::vector<ColorLabel> colors{first};
  for (auto c : codes) {
    const auto code = static_cast<TransitionCode>(c);
    if (exited_color(code) != colors.back()) {
      throw std::invalid_argument("colors_from_transitions: code does not leave the current color");
    }
    colors.push_back(entered_color(code));
  }
  return colors;
}

inline std::string to_text(const StripePattern& pattern) {
  std::string s;
  s.reserve(pattern.stripes.size() + 1);
  for (auto c : pattern.stripes) s.push_back(to_char(c));
  s.push_back('\n');
  return s;
}

inline StripePattern parse_pattern(std::string_view text, int window_length, int stripe_width_px = 4) {
  StripePattern pattern;
  pattern.window_length = window_length;
  pattern.stripe_width_px = stripe_width_px;
  for (char ch : text) {
    if (ch == '\n' || ch == '\r' || ch == ' ' || ch == '\t') continue;
    pattern.stripes.push_back(color_from_char(ch));
  }
  if (pattern.size() < window_length) throw std::invalid_argument("parse_pattern: fewer stripes than k");
  index_windows(pattern);
  return pattern;
}

/// Axis-aligned raster; stripe i covers columns [i*w, (i+1)*w). Columns past
/// the last stripe stay black.
inline RadianceImage rasterize_pattern(const StripePattern& pattern, int width_px, int height_px,
                                       int stripe_width_px) {
  if (stripe_width_px < 1) throw std::invalid_argument("rasterize_pattern: stripe width must be >= 1");
  if (width_px < stripe_width_px) throw std::invalid_argument("rasterize_pattern: narrower than one stripe");
  if (height_px < 1) throw std::invalid_argument("rasterize_pattern: height must be >= 1");
  RadianceImage img = make_rgb(width_px, height_px);
  for (int x = 0; x < width_px; ++x) {
    const int stripe = x / stripe_width_px;
    if (stripe >= pattern.size()) break;
    const int ch = static_cast<int>(pattern.stripes[std::size_t(stripe)]);
    for (int y = 0; y < height_px; ++y) img(x, y, ch) = 255.0f;
  }
  return img;
}

/// Horizontal forward derivative shown as (d + 255) / 2 per channel.
inline ByteImage derivative_visualization(const RadianceImage& raster) {
  ByteImage out(raster.width(), raster.height(), raster.channels());
  for (int y = 0; y < raster.height(); ++y) {
    for (int x = 0; x < raster.width(); ++x) {
      for (int c = 0; c < raster.channels(); ++c) {
        const double next = x + 1 < raster.width() ? raster(x + 1, y, c) : raster(x, y, c);
        const double d = next - raster(x, y, c);
        out(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::lround((d + 255.0) / 2.0), 0L, 255L));
      }
    }
  }
  return out;
}

}  // namespace mpsl
