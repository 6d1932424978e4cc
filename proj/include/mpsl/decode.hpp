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

// Stripe identification from separated derivative rasters. Samples are taken
// along scanlines parallel to the pattern's encoding direction; derivative
// extrema are classified into transition codes (first order) or
// second-difference symbols (second order), split into consistent runs, and
// decoded by overlapping-window voting.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <vector>

#include "mpsl/demux.hpp"
#include "mpsl/geometry.hpp"
#include "mpsl/image.hpp"
#include "mpsl/parallel.hpp"
#include "mpsl/pattern.hpp"

namespace mpsl {

inline constexpr float kUndecoded = std::numeric_limits<float>::quiet_NaN();

/// Divides each channel by its local box mean, floored at `epsilon`.
inline FloatImage normalize_local_color(const FloatImage& image, int radius, double epsilon = 1.0) {
  if (radius < 1) throw std::invalid_argument("normalize_local_color: radius must be >= 1");
  const FloatImage mean = box_mean(image, radius);
  FloatImage out(image.width(), image.height(), image.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = float(image.data()[i] / std::max<double>(mean.data()[i], epsilon));
  }
  return out;
}

/// Applies the same per-pixel division as normalize_local_color, using the
/// local mean of `reference`, to a derivative raster.
inline FloatImage normalize_by_local_mean(const FloatImage& values, const FloatImage& reference, int radius,
                                          double epsilon = 1.0) {
  if (!values.same_shape(reference)) throw std::invalid_argument("normalize_by_local_mean: shape mismatch");
  const FloatImage mean = box_mean(reference, radius);
  FloatImage out(values.width(), values.height(), values.channels());
  for (std::size_t i = 0; i < out.data().size(); ++i) {
    out.data()[i] = float(values.data()[i] / std::max<double>(mean.data()[i], epsilon));
  }
  return out;
}

struct SignatureMatch {
  std::uint8_t symbol = 0;
  double cosine = 0.0;
};

/// Nearest of the six transition-code signatures by normalized dot product.
inline std::optional<SignatureMatch> classify_signature(std::array<double, 3> d, double min_cosine) {
  const double n = std::sqrt(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]);
  if (!(n > 0.0)) return std::nullopt;
  SignatureMatch best{0, -2.0};
  for (int s = 0; s < kTransitionCodeCount; ++s) {
    const auto e = code_signature(static_cast<TransitionCode>(s));
    const double en = std::sqrt(e[0] * e[0] + e[1] * e[1] + e[2] * e[2]);
    const double cosine = (d[0] * e[0] + d[1] * e[1] + d[2] * e[2]) / (n * en);
    if (cosine > best.cosine) best = {std::uint8_t(s), cosine};
  }
  if (best.cosine < min_cosine) return std::nullopt;
  return best;
}

/// A derivative extremum on a scanline. Order 1 samples sit on stripe
/// boundaries. Order 2 samples are lobes inside a stripe whose signature is
/// (neighbor color - stripe color): the exited color of the code is the
/// stripe, the entered color is the neighbor on the lobe's side. A stripe
/// whose two neighbors share a color shows one merged lobe.
struct BoundarySample {
  double position = 0.0;  // along the scanline, in samples
  std::uint8_t symbol = 0;  // TransitionCode
  double strength = 0.0;
  double cosine = 0.0;
  int order = 1;

  TransitionCode code() const { return static_cast<TransitionCode>(symbol); }
};

/// Per-channel derivative samples along one scanline; `valid` is zero
/// outside the image or where the pattern was not separable.
struct Scanline {
  std::vector<std::array<float, 3>> values;
  std::vector<std::uint8_t> valid;

  int size() const { return int(values.size()); }
};

struct DetectionParams {
  double snr_threshold = 4.0;
  /// Absolute floor on the derivative magnitude, gray levels per pixel.
  double min_strength = 2.0;
  double min_cosine = 0.8;
  /// Extrema weaker than this fraction of the strongest magnitude within
  /// `relative_window` samples are residue rather than stripe edges.
  double min_relative_strength = 0.25;
  int relative_window = 4;
  /// Per-channel noise standard deviation of the derivative values.
  std::array<double, 3> derivative_sigma{1.0, 1.0, 1.0};
};

/// Derivative extrema along a scanline: samples above the whitened noise
/// threshold whose projection onto their nearest transition signature peaks,
/// refined by a parabolic fit.
inline std::vector<BoundarySample> classify_boundaries(const Scanline& line, int order, const DetectionParams& p) {
  const int n = line.size();
  std::vector<double> snr(std::size_t(n), 0.0), mag(std::size_t(n), 0.0);
  for (int s = 0; s < n; ++s) {
    if (!line.valid[std::size_t(s)]) continue;
    double a = 0.0, b = 0.0;
    for (int c = 0; c < 3; ++c) {
      const double v = line.values[std::size_t(s)][std::size_t(c)];
      const double z = v / std::max(p.derivative_sigma[std::size_t(c)], 1e-6);
      a += z * z;
      b += v * v;
    }
    snr[std::size_t(s)] = std::sqrt(a);
    mag[std::size_t(s)] = std::sqrt(b);
  }
  std::vector<BoundarySample> out;
  for (int s = 1; s + 1 < n; ++s) {
    const auto i = std::size_t(s);
    if (!line.valid[i - 1] || !line.valid[i] || !line.valid[i + 1]) continue;
    if (snr[i] < p.snr_threshold || mag[i] < p.min_strength) continue;
    // peaks are taken per class: the projection onto this sample's class
    // signature must be a local maximum, so adjacent lobes of other classes
    // do not mask each other
    const auto& v = line.values[i];
    const auto match = classify_signature({v[0], v[1], v[2]}, p.min_cosine);
    if (!match) continue;
    const auto e = code_signature(static_cast<TransitionCode>(match->symbol));
    auto proj = [&](std::size_t j) {
      const auto& u = line.values[j];
      return (u[0] * e[0] + u[1] * e[1] + u[2] * e[2]) / std::sqrt(2.0);
    };
    // order 1 boundaries are isolated, so the plain magnitude peak is used
    const double left = order == 1 ? mag[i - 1] : proj(i - 1);
    const double centre = order == 1 ? mag[i] : proj(i);
    const double right = order == 1 ? mag[i + 1] : proj(i + 1);
    if (!(centre >= left && centre > right)) continue;
    if (order != 1) {
      double local = 0.0;
      for (int j = std::max(0, s - p.relative_window); j <= std::min(n - 1, s + p.relative_window); ++j) {
        local = std::max(local, mag[std::size_t(j)]);
      }
      if (mag[i] < p.min_relative_strength * local) continue;
    }
    const double den = left - 2.0 * centre + right;
    const double delta = den < 0.0 ? std::clamp(0.5 * (left - right) / den, -0.5, 0.5) : 0.0;
    const BoundarySample b{s + delta, match->symbol, mag[i], match->cosine, order};
    if (!out.empty() && out.back().symbol == b.symbol && b.position - out.back().position < 1.0) {
      if (b.strength > out.back().strength) out.back() = b;
      continue;
    }
    out.push_back(b);
  }
  return out;
}

inline constexpr std::uint8_t kNoSymbol = 255;

/// A maximal sequence of mutually consistent anchors on one scanline.
/// Order 1 anchors are boundaries, `symbols` their transition codes and
/// `colors` the m+1 stripes they separate. Order 2 anchors are stripe centers,
/// `colors` the stripe colors and `symbols` the second-difference symbol of
/// each stripe (kNoSymbol at the run ends).
struct StripeRun {
  int order = 1;
  std::vector<double> positions;
  std::vector<std::uint8_t> symbols;
  std::vector<ColorLabel> colors;
  /// Set when the run was split from its predecessor by an inconsistency
  /// rather than a gap.
  bool inconsistent_start = false;
};

namespace detail {

inline double median_spacing(std::span<const BoundarySample> samples) {
  std::vector<double> d;
  for (std::size_t i = 1; i < samples.size(); ++i) d.push_back(samples[i].position - samples[i - 1].position);
  if (d.empty()) return 0.0;
  std::nth_element(d.begin(), d.begin() + std::ptrdiff_t(d.size() / 2), d.end());
  return d[d.size() / 2];
}

}  // namespace detail

namespace detail {

struct LobeStripe {
  ColorLabel color = ColorLabel::R;
  double position_sum = 0.0;
  int lobes = 0;
  // neighbor colors named by the lobes; equal for a single lobe
  ColorLabel left = ColorLabel::R, right = ColorLabel::R;
  bool gap_before = false;
};

/// Groups order-2 lobes into stripes: consecutive lobes that name the same
/// stripe color belong to one stripe (at most two lobes).
inline std::vector<LobeStripe> group_lobes(std::span<const BoundarySample> samples, double max_gap,
                                           std::span<const std::uint8_t> breaks) {
  std::vector<LobeStripe> out;
  for (std::size_t i = 0; i < samples.size(); ++i) {
    const auto& s = samples[i];
    const ColorLabel color = exited_color(s.code()), neighbor = entered_color(s.code());
    const bool gap = i > 0 && ((max_gap > 0.0 && s.position - samples[i - 1].position > max_gap) ||
                               (!breaks.empty() && breaks[i]));
    if (!out.empty() && !gap && out.back().color == color && out.back().lobes == 1) {
      auto& st = out.back();
      st.position_sum += s.position;
      st.lobes = 2;
      st.right = neighbor;
      continue;
    }
    out.push_back({color, s.position, 1, neighbor, neighbor, gap || i == 0});
  }
  return out;
}

}  // namespace detail

/// Splits ordered samples into runs. A run breaks where the spacing exceeds
/// `gap_factor` times the median, where `breaks[i]` forces a split between
/// samples i-1 and i, or where neighbors are inconsistent: for order 1 the
/// entered color of one boundary differs from the exited color of the next;
/// for order 2 a lobe names a neighbor color other than the adjacent stripe.
inline std::vector<StripeRun> segment_stripes(std::span<const BoundarySample> samples, int order,
                                              double gap_factor = 2.5, std::span<const std::uint8_t> breaks = {}) {
  std::vector<StripeRun> runs;
  if (samples.empty()) return runs;
  const double max_gap = gap_factor * detail::median_spacing(samples);
  if (order == 2) {
    const auto stripes = detail::group_lobes(samples, max_gap, breaks);
    // a stripe with both lobes names both neighbors; a single lobe names one
    // side only, unless it is the merged lobe of a stripe between two equal
    // colors
    auto claims = [](const detail::LobeStripe& st, ColorLabel c) { return st.left == c || st.right == c; };
    auto adjacent = [&](const detail::LobeStripe& a, const detail::LobeStripe& b) {
      if (a.lobes == 2 && a.right != b.color) return false;
      if (b.lobes == 2 && b.left != a.color) return false;
      return a.right == b.color || b.left == a.color;
    };
    std::vector<const detail::LobeStripe*> members;
    auto finish = [&](bool inconsistent) {
      if (members.empty()) return;
      StripeRun r;
      r.order = 2;
      r.inconsistent_start = inconsistent;
      const std::size_t m = members.size();
      for (const auto* st : members) r.colors.push_back(st->color);
      r.symbols.assign(m, kNoSymbol);
      r.positions.assign(m, std::numeric_limits<double>::quiet_NaN());
      for (std::size_t j = 0; j < m; ++j) {
        const auto& st = *members[j];
        const bool interior = j > 0 && j + 1 < m;
        if (interior) r.symbols[j] = second_difference_symbol(r.colors[j - 1], r.colors[j], r.colors[j + 1]);
        if (st.lobes == 2 || (interior && st.left == r.colors[j - 1] && st.left == r.colors[j + 1])) {
          r.positions[j] = st.position_sum / st.lobes;
        }
      }
      for (std::size_t j = 1; j + 1 < m; ++j) {
        if (std::isnan(r.positions[j])) r.positions[j] = 0.5 * (r.positions[j - 1] + r.positions[j + 1]);
      }
      runs.push_back(std::move(r));
      members.clear();
    };
    bool inconsistent = false;
    for (std::size_t i = 0; i < stripes.size(); ++i) {
      const auto& st = stripes[i];
      bool ok = !members.empty() && !st.gap_before && adjacent(*members.back(), st);
      // a single lobe must name one of its two neighbors
      if (ok && members.size() >= 2) {
        const auto& mid = *members.back();
        const auto& before = *members[members.size() - 2];
        if (mid.lobes == 1 && !claims(mid, before.color) && !claims(mid, st.color)) ok = false;
      }
      if (!ok && !members.empty()) {
        finish(inconsistent);
        inconsistent = !st.gap_before;
      }
      members.push_back(&st);
    }
    finish(inconsistent);
    return runs;
  }
  auto start_run = [&](const BoundarySample& s, bool inconsistent) {
    StripeRun r;
    r.order = order;
    r.inconsistent_start = inconsistent;
    r.positions.push_back(s.position);
    r.symbols.push_back(s.symbol);
    r.colors = {exited_color(s.code()), entered_color(s.code())};
    runs.push_back(std::move(r));
  };
  start_run(samples[0], false);
  for (std::size_t i = 1; i < samples.size(); ++i) {
    const auto& prev = samples[i - 1];
    const auto& cur = samples[i];
    const bool gap = (max_gap > 0.0 && cur.position - prev.position > max_gap) || (!breaks.empty() && breaks[i]);
    const bool consistent = entered_color(prev.code()) == exited_color(cur.code());
    if (gap || !consistent) {
      start_run(cur, !gap && !consistent);
      continue;
    }
    auto& r = runs.back();
    r.positions.push_back(cur.position);
    r.symbols.push_back(cur.symbol);
    r.colors.push_back(entered_color(cur.code()));
  }
  return runs;
}

struct VotingParams {
  int vote_min = 2;
  /// The winner must hold more than this fraction of the votes cast. Every
  /// adjacent-distinct window occurs in a full-length pattern, so windows that
  /// straddle a depth jump always match somewhere and only disagreement
  /// reveals them.
  double min_agreement = 0.5;
  /// Decoded anchors must belong to at least this many consecutively indexed
  /// anchors. Short pieces between undecided stretches are mostly windows
  /// across a depth jump that agree by accident.
  int min_streak = 6;
};

/// Decoded stripe coordinate of each anchor of a run (NaN if undecided),
/// with the winning vote count and the number of matching windows that
/// covered it.
struct RunDecoding {
  std::vector<double> coordinate;
  std::vector<int> votes;
  std::vector<int> cast;
};

namespace detail {

struct StripeVotes {
  std::vector<std::map<int, int>> tally;

  explicit StripeVotes(std::size_t n) : tally(n) {}

  void add(std::size_t stripe, int index) { ++tally[stripe][index]; }

  /// (index, votes, cast) or index -1 when undecided.
  std::array<int, 3> decide(std::size_t stripe, int vote_min, double min_agreement = 0.0) const {
    int best = -1, best_votes = 0, cast = 0;
    bool tie = false;
    for (const auto& [idx, v] : tally[stripe]) {
      cast += v;
      if (v > best_votes) {
        best = idx;
        best_votes = v;
        tie = false;
      } else if (v == best_votes) {
        tie = true;
      }
    }
    if (tie || best_votes < vote_min || best_votes <= min_agreement * cast) return {-1, best_votes, cast};
    return {best, best_votes, cast};
  }
};

}  // namespace detail

/// Overlapping-window plurality voting over one run. Order 1 looks up every
/// length-k run of stripe colors in the pattern; order 2 looks up every
/// length-(k-2) run of second-difference symbols in `table`.
namespace detail {

inline void drop_short_streaks(RunDecoding& d, int min_streak) {
  const std::size_t m = d.coordinate.size();
  std::size_t a = 0;
  while (a < m) {
    if (std::isnan(d.coordinate[a])) {
      ++a;
      continue;
    }
    std::size_t b = a + 1;
    while (b < m && d.coordinate[b] == d.coordinate[b - 1] + 1.0) ++b;
    if (int(b - a) < min_streak) {
      for (std::size_t j = a; j < b; ++j) {
        d.coordinate[j] = std::numeric_limits<double>::quiet_NaN();
        d.votes[j] = d.cast[j] = 0;
      }
    }
    a = b;
  }
}

}  // namespace detail

inline RunDecoding decode_run(const StripeRun& run, const StripePattern& pattern, const CodeTable* table,
                              const VotingParams& p = {}) {
  const int k = pattern.window_length;
  const std::size_t m = run.positions.size();
  RunDecoding out;
  out.coordinate.assign(m, std::numeric_limits<double>::quiet_NaN());
  out.votes.assign(m, 0);
  out.cast.assign(m, 0);
  if (run.order == 1) {
    const std::size_t ns = run.colors.size();  // m + 1 stripes
    detail::StripeVotes votes(ns);
    for (std::size_t t = 0; t + std::size_t(k) <= ns; ++t) {
      const auto hit = window_lookup(pattern, std::span<const ColorLabel>(run.colors).subspan(t, std::size_t(k)));
      if (!hit) continue;
      for (int i = 0; i < k; ++i) votes.add(t + std::size_t(i), *hit + i);
    }
    std::vector<std::array<int, 3>> stripe(ns);
    for (std::size_t s = 0; s < ns; ++s) stripe[s] = votes.decide(s, p.vote_min, p.min_agreement);
    for (std::size_t j = 0; j < m; ++j) {
      const auto& left = stripe[j];
      const auto& right = stripe[j + 1];
      int boundary = -1;
      const std::array<int, 3>* used = nullptr;
      if (right[0] >= 0 && (left[0] < 0 || left[0] + 1 == right[0])) {
        boundary = right[0];
        used = &right;
      } else if (left[0] >= 0 && right[0] < 0) {
        boundary = left[0] + 1;
        used = &left;
      }
      if (boundary < 0) continue;
      out.coordinate[j] = boundary;
      out.votes[j] = (*used)[1];
      out.cast[j] = (*used)[2];
    }
    detail::drop_short_streaks(out, p.min_streak);
    return out;
  }
  if (!table || table->order != 2) throw std::invalid_argument("decode_run: order-2 runs need an order-2 code table");
  const int kw = table->window_length;
  detail::StripeVotes votes(m);
  for (std::size_t t = 1; t + std::size_t(kw) < m; ++t) {
    const auto window = std::span<const std::uint8_t>(run.symbols).subspan(t, std::size_t(kw));
    if (std::find(window.begin(), window.end(), kNoSymbol) != window.end()) continue;
    const auto hit = table->lookup(window);
    if (!hit) continue;
    for (int i = 0; i < kw; ++i) votes.add(t + std::size_t(i), *hit + 1 + i);
  }
  for (std::size_t j = 0; j < m; ++j) {
    const auto d = votes.decide(j, p.vote_min, p.min_agreement);
    out.votes[j] = d[1];
    out.cast[j] = d[2];
    if (d[0] >= 0) out.coordinate[j] = d[0] + 0.5;
  }
  detail::drop_short_streaks(out, p.min_streak);
  return out;
}

/// Rotated sampling grid: sample (s, t) sits at origin + s*xhat + t*yhat.
struct ScanGrid {
  Vec2 origin;
  Vec2 xhat, yhat;
  int ns = 0, nt = 0;

  Vec2 at(double s, double t) const { return origin + s * xhat + t * yhat; }
  Vec2 to_grid(Vec2 p) const { return {dot(p - origin, xhat), dot(p - origin, yhat)}; }
};

inline ScanGrid make_scan_grid(int width, int height, double direction_deg) {
  ScanGrid g;
  g.xhat = {std::cos(deg2rad(direction_deg)), std::sin(deg2rad(direction_deg))};
  g.yhat = {-g.xhat.y, g.xhat.x};
  double s0 = 1e300, s1 = -1e300, t0 = 1e300, t1 = -1e300;
  for (Vec2 c : {Vec2{0, 0}, Vec2{double(width - 1), 0}, Vec2{0, double(height - 1)},
                 Vec2{double(width - 1), double(height - 1)}}) {
    s0 = std::min(s0, dot(c, g.xhat));
    s1 = std::max(s1, dot(c, g.xhat));
    t0 = std::min(t0, dot(c, g.yhat));
    t1 = std::max(t1, dot(c, g.yhat));
  }
  s0 = std::floor(s0) - 1;
  t0 = std::floor(t0) - 1;
  g.origin = s0 * g.xhat + t0 * g.yhat;
  g.ns = int(std::ceil(s1) - s0) + 3;
  g.nt = int(std::ceil(t1) - t0) + 3;
  return g;
}

/// Post-decoding cleanup on the per-pixel coordinate field. Neighbors whose
/// coordinates differ by more than `max_jump` stripes per pixel are not
/// connected; pixels within `edge_radius` of such a jump, pixels with fewer
/// than `min_neighbors` connected 8-neighbors (one-pixel filaments) and
/// connected pieces smaller than `min_component` pixels are dropped.
struct ContinuityParams {
  double max_jump = 1.5;
  int edge_radius = 3;
  int min_neighbors = 3;
  int min_component = 64;
};

struct DecodeParams {
  DetectionParams detection;
  VotingParams voting;
  ContinuityParams continuity;
  double gap_factor = 2.5;
  /// Pixels closer than this to the image border are never decoded.
  int border = 4;
  int threads = 1;
};

/// Per-pixel decoding result for one pattern.
struct DecodedMap {
  int projector = 0;
  int order = 1;
  FloatImage coordinate;  // fractional stripe coordinate, NaN if undecoded
  Image<std::int32_t> index;
  Mask votes;
  Mask cast;
  Mask labels;  // stripe color 0/1/2, 255 where unlabeled

  int width() const { return coordinate.width(); }
  int height() const { return coordinate.height(); }
  bool decoded(int x, int y) const { return !std::isnan(coordinate(x, y)); }
  std::size_t decoded_count() const {
    std::size_t n = 0;
    for (float v : coordinate.data()) n += std::isnan(v) ? 0 : 1;
    return n;
  }
};

/// Removes decoded pixels that sit on a coordinate jump (occlusion edges and
/// mixed pixels) or belong to a small isolated piece (mostly wrong windows).
inline void enforce_continuity(DecodedMap& map, const ContinuityParams& p) {
  const int w = map.width(), h = map.height();
  if (w == 0 || h == 0) return;
  auto clear = [&](int x, int y) {
    map.coordinate(x, y) = kUndecoded;
    map.index(x, y) = -1;
    map.votes(x, y) = 0;
    map.cast(x, y) = 0;
  };
  if (p.max_jump > 0.0 && p.edge_radius > 0) {
    // a pixel is on a jump when some decoded pixel within edge_radius (across
    // undecoded gaps) differs by more than max_jump per pixel of distance
    const int r = p.edge_radius;
    Mask jump(w, h, 1, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!map.decoded(x, y)) continue;
        const float c = map.coordinate(x, y);
        for (int dy = -r; dy <= r && !jump(x, y); ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if (xx < 0 || yy < 0 || xx >= w || yy >= h || !map.decoded(xx, yy)) continue;
            if (std::abs(map.coordinate(xx, yy) - c) > p.max_jump * std::max(std::abs(dx), std::abs(dy))) {
              jump(x, y) = 1;
              break;
            }
          }
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (jump(x, y)) clear(x, y);
  }
  if (p.min_neighbors > 0) {
    Mask thin(w, h, 1, 0);
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (!map.decoded(x, y)) continue;
        int n = 0;
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int xx = x + dx, yy = y + dy;
            if ((dx || dy) && xx >= 0 && yy >= 0 && xx < w && yy < h && map.decoded(xx, yy) &&
                std::abs(map.coordinate(xx, yy) - map.coordinate(x, y)) <= p.max_jump) {
              ++n;
            }
          }
        thin(x, y) = n < p.min_neighbors;
      }
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        if (thin(x, y)) clear(x, y);
  }
  if (p.min_component > 1) {
    Image<std::int32_t> label(w, h, 1, -1);
    std::vector<int> stack, members;
    for (int y0 = 0; y0 < h; ++y0)
      for (int x0 = 0; x0 < w; ++x0) {
        if (!map.decoded(x0, y0) || label(x0, y0) >= 0) continue;
        members.clear();
        stack.assign(1, y0 * w + x0);
        label(x0, y0) = 1;
        while (!stack.empty()) {
          const int id = stack.back();
          stack.pop_back();
          members.push_back(id);
          const int x = id % w, y = id / w;
          const float c = map.coordinate(x, y);
          for (int dy = -1; dy <= 1; ++dy)
            for (int dx = -1; dx <= 1; ++dx) {
              const int xx = x + dx, yy = y + dy;
              if (xx < 0 || yy < 0 || xx >= w || yy >= h || label(xx, yy) >= 0 || !map.decoded(xx, yy)) continue;
              if (std::abs(map.coordinate(xx, yy) - c) > p.max_jump) continue;
              label(xx, yy) = 1;
              stack.push_back(yy * w + xx);
            }
        }
        if (int(members.size()) < p.min_component) {
          for (int id : members) clear(id % w, id / w);
        }
      }
  }
}

/// Samples the separated raster on the scan grid.
inline Scanline sample_scanline(const SeparatedDerivative& sd, const FloatImage& values, const ScanGrid& grid, int t,
                                int border) {
  Scanline line;
  line.values.resize(std::size_t(grid.ns));
  line.valid.assign(std::size_t(grid.ns), 0);
  const int w = values.width(), h = values.height();
  for (int s = 0; s < grid.ns; ++s) {
    const Vec2 p = grid.at(s, t);
    if (p.x < border || p.y < border || p.x > w - 1 - border || p.y > h - 1 - border) continue;
    const int xi = int(std::lround(p.x)), yi = int(std::lround(p.y));
    if (!sd.separable(xi, yi)) continue;
    auto& v = line.values[std::size_t(s)];
    for (int c = 0; c < 3; ++c) v[std::size_t(c)] = float(sample_bilinear(values, p.x, p.y, c));
    line.valid[std::size_t(s)] = 1;
  }
  return line;
}

/// Decodes one pattern from its separated derivative. Scanlines run along
/// `scan_direction_deg`, which should point toward increasing stripe
/// coordinate. `values` overrides sd.values (e.g. after color
/// normalization).
inline DecodedMap decode_pattern(const SeparatedDerivative& sd, double scan_direction_deg, const StripePattern& pattern,
                                 const CodeTable* table, const DecodeParams& p = {},
                                 const FloatImage* values = nullptr) {
  const FloatImage& vals = values ? *values : sd.values;
  if (vals.channels() != 3) throw std::invalid_argument("decode_pattern: expected a 3-channel raster");
  const int w = vals.width(), h = vals.height();
  const ScanGrid grid = make_scan_grid(w, h, scan_direction_deg);
  const std::size_t gsize = std::size_t(grid.ns) * std::size_t(grid.nt);
  std::vector<float> coord(gsize, kUndecoded);
  std::vector<std::uint8_t> gvotes(gsize, 0), gcast(gsize, 0), glabel(gsize, 255);
  parallel_for(0, grid.nt, p.threads, [&](int t) {
    const Scanline line = sample_scanline(sd, vals, grid, t, p.border);
    const auto samples = classify_boundaries(line, sd.order, p.detection);
    if (samples.empty()) return;
    // invalid samples between anchors force a split
    std::vector<int> invalid_prefix(std::size_t(grid.ns) + 1, 0);
    for (int s = 0; s < grid.ns; ++s) {
      invalid_prefix[std::size_t(s) + 1] = invalid_prefix[std::size_t(s)] + (line.valid[std::size_t(s)] ? 0 : 1);
    }
    std::vector<std::uint8_t> breaks(samples.size(), 0);
    for (std::size_t i = 1; i < samples.size(); ++i) {
      const int a = int(std::floor(samples[i - 1].position)), b = int(std::ceil(samples[i].position));
      breaks[i] = invalid_prefix[std::size_t(b) + 1] - invalid_prefix[std::size_t(a)] > 0 ? 1 : 0;
    }
    const auto runs = segment_stripes(samples, sd.order, p.gap_factor, breaks);
    const std::size_t row = std::size_t(t) * std::size_t(grid.ns);
    for (const auto& run : runs) {
      const auto dec = decode_run(run, pattern, table, p.voting);
      for (std::size_t j = 0; j + 1 < run.positions.size(); ++j) {
        const double c0 = dec.coordinate[j], c1 = dec.coordinate[j + 1];
        const double p0 = run.positions[j], p1 = run.positions[j + 1];
        if (std::isnan(p0) || std::isnan(p1) || !(p1 > p0)) continue;
        const ColorLabel label = run.order == 1 ? run.colors[j + 1] : run.colors[j];
        for (int s = int(std::ceil(p0)); s <= int(std::floor(p1)); ++s) {
          if (run.order == 1 || s - p0 < p1 - s) glabel[row + std::size_t(s)] = std::uint8_t(label);
          else glabel[row + std::size_t(s)] = std::uint8_t(run.colors[j + 1]);
        }
        if (std::isnan(c0) || std::isnan(c1) || c1 - c0 != 1.0) continue;
        const std::uint8_t v = std::uint8_t(std::min(dec.votes[j], dec.votes[j + 1]));
        const std::uint8_t cst = std::uint8_t(std::min(dec.cast[j], dec.cast[j + 1]));
        for (int s = int(std::ceil(p0)); s <= int(std::floor(p1)); ++s) {
          coord[row + std::size_t(s)] = float(c0 + (s - p0) / (p1 - p0));
          gvotes[row + std::size_t(s)] = v;
          gcast[row + std::size_t(s)] = cst;
        }
      }
    }
  });

  DecodedMap out;
  out.projector = sd.pattern;
  out.order = sd.order;
  out.coordinate = FloatImage(w, h, 1, kUndecoded);
  out.index = Image<std::int32_t>(w, h, 1, -1);
  out.votes = Mask(w, h, 1, 0);
  out.cast = Mask(w, h, 1, 0);
  out.labels = Mask(w, h, 1, 255);
  auto g = [&](int s, int t) { return std::size_t(t) * std::size_t(grid.ns) + std::size_t(s); };
  parallel_for(p.border, h - p.border, p.threads, [&](int y) {
    for (int x = p.border; x < w - p.border; ++x) {
      const Vec2 q = grid.to_grid({double(x), double(y)});
      const int s0 = int(std::floor(q.x)), t0 = int(std::floor(q.y));
      if (s0 < 0 || t0 < 0 || s0 + 1 >= grid.ns || t0 + 1 >= grid.nt) continue;
      const double fs = q.x - s0, ft = q.y - t0;
      const int sn = fs < 0.5 ? s0 : s0 + 1, tn = ft < 0.5 ? t0 : t0 + 1;
      out.labels(x, y) = glabel[g(sn, tn)];
      const float c00 = coord[g(s0, t0)], c10 = coord[g(s0 + 1, t0)];
      const float c01 = coord[g(s0, t0 + 1)], c11 = coord[g(s0 + 1, t0 + 1)];
      if (std::isnan(c00) || std::isnan(c10) || std::isnan(c01) || std::isnan(c11)) continue;
      const float lo = std::min({c00, c10, c01, c11}), hi = std::max({c00, c10, c01, c11});
      if (hi - lo >= 1.0f) continue;
      const double c = (1 - ft) * ((1 - fs) * c00 + fs * c10) + ft * ((1 - fs) * c01 + fs * c11);
      out.coordinate(x, y) = float(c);
      out.index(x, y) = std::int32_t(std::floor(c));
      out.votes(x, y) = gvotes[g(sn, tn)];
      out.cast(x, y) = gcast[g(sn, tn)];
    }
  });
  enforce_continuity(out, p.continuity);
  return out;
}

/// Noise gain of the separated derivative: ratio of its standard deviation
/// to that of white input noise, measured by filtering a unit impulse.
inline double derivative_noise_gain(int order, double presmooth_sigma, std::span<const Vec2> directions) {
  const int n = 25, c = n / 2;
  FloatImage delta(n, n, 1, 0.0f);
  delta(c, c) = 1.0f;
  double energy = 0.0;
  if (order == 1) {
    if (directions.size() != 1) throw std::invalid_argument("derivative_noise_gain: order 1 needs one direction");
    const FloatImage r = directional_derivative(compute_gradients(delta, presmooth_sigma), directions[0]);
    for (float v : r.data()) energy += double(v) * v;
  } else {
    if (directions.size() != 2) throw std::invalid_argument("derivative_noise_gain: order 2 needs two directions");
    const HessianField H = compute_hessian(delta, presmooth_sigma);
    const Vec2 a = directions[0], b = directions[1];
    for (std::size_t i = 0; i < H.xx.data().size(); ++i) {
      const double v = H.xx.data()[i] * a.x * b.x + H.xy.data()[i] * (a.x * b.y + a.y * b.x) + H.yy.data()[i] * a.y * b.y;
      energy += v * v;
    }
  }
  return std::sqrt(energy);
}

struct DecodeAccuracy {
  double accuracy = 0.0;  // correct / decoded
  double coverage = 0.0;  // decoded and illuminated / illuminated
  std::size_t decoded = 0, correct = 0, illuminated = 0;
};

/// A decoded pixel is correct when its coordinate is within half a stripe of
/// the true coordinate. `include` (optional) restricts the evaluated pixels.
inline DecodeAccuracy decode_accuracy(const DecodedMap& decoded, const FloatImage& truth_coordinate,
                                      const Mask* include = nullptr) {
  if (decoded.coordinate.width() != truth_coordinate.width() ||
      decoded.coordinate.height() != truth_coordinate.height()) {
    throw std::invalid_argument("decode_accuracy: shape mismatch");
  }
  DecodeAccuracy a;
  std::size_t covered = 0;
  for (int y = 0; y < truth_coordinate.height(); ++y)
    for (int x = 0; x < truth_coordinate.width(); ++x) {
      if (include && !(*include)(x, y)) continue;
      const float tv = truth_coordinate(x, y);
      const bool lit = !std::isnan(tv);
      const bool dec = decoded.decoded(x, y);
      a.illuminated += lit ? 1 : 0;
      if (!dec) continue;
      ++a.decoded;
      if (lit) {
        ++covered;
        if (std::abs(decoded.coordinate(x, y) - tv) < 0.5f) ++a.correct;
      }
    }
  a.accuracy = a.decoded ? double(a.correct) / double(a.decoded) : 0.0;
  a.coverage = a.illuminated ? double(covered) / double(a.illuminated) : 0.0;
  return a;
}

}  // namespace mpsl
