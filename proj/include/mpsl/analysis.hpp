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

// Back-of-envelope coverage model for multi-projector, multi-camera rigs and
// the orientation separability curve.

#include <algorithm>
#include <array>
#include <cmath>
#include <sstream>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "mpsl/demux.hpp"

namespace mpsl {

/// Percentages indexed by device count 1..4.
struct CoverageAssumptions {
  std::array<double, 4> surf_illum{40, 70, 90, 100};
  std::array<double, 4> surf_capture{40, 70, 90, 100};
  std::array<double, 4> image_illum{70, 80, 90, 100};
  std::array<double, 4> proj_capture{70, 80, 90, 100};

  void validate() const {
    for (const auto* t : {&surf_illum, &surf_capture, &image_illum, &proj_capture}) {
      for (std::size_t i = 0; i < 4; ++i) {
        if (!((*t)[i] > 0.0 && (*t)[i] <= 100.0)) throw std::invalid_argument("coverage percentages must be in (0, 100]");
        if (i > 0 && (*t)[i] < (*t)[i - 1]) throw std::invalid_argument("coverage percentages must not decrease");
      }
    }
  }
};

struct CoverageRow {
  int projectors = 1, cameras = 1;
  double amount = 0.0;        // unrounded percent
  double completeness = 0.0;  // percent
  long amount_rounded() const { return std::lround(amount); }
  long completeness_rounded() const { return std::lround(completeness); }
};

inline CoverageRow coverage_row(int projectors, int cameras, double loss, const CoverageAssumptions& a = {}) {
  if (projectors < 1 || projectors > 4 || cameras < 1 || cameras > 4) {
    throw std::out_of_range("coverage_row: device counts must be in 1..4");
  }
  if (!(loss >= 0.0 && loss < 1.0)) throw std::invalid_argument("coverage_row: loss must be in [0, 1)");
  a.validate();
  const auto P = std::size_t(projectors - 1), C = std::size_t(cameras - 1);
  CoverageRow r;
  r.projectors = projectors;
  r.cameras = cameras;
  r.completeness = std::min(a.surf_illum[P] * a.proj_capture[C], a.surf_capture[C] * a.image_illum[P]) / 100.0;
  const int pairs = projectors * cameras;
  r.amount = a.surf_illum[0] * a.image_illum[0] / 100.0 * pairs * std::pow(1.0 - loss, pairs - 1);
  return r;
}

struct PublishedRow {
  int projectors, cameras;
  int amount, completeness;
};

inline constexpr std::array<PublishedRow, 8> kPublishedCoverage{{
    {1, 1, 28, 28},
    {1, 2, 54, 32},
    {2, 1, 54, 32},
    {2, 2, 102, 56},
    {3, 1, 79, 36},
    {3, 2, 144, 63},
    {3, 3, 198, 81},
    {4, 4, 284, 100},
}};

struct LossFit {
  double loss = 0.0;
  std::vector<double> residuals;  // rounded model amount minus published
  double max_abs_residual = 0.0;
  double sum_squares = 0.0;       // unrounded
};

/// One-dimensional least squares for the per-triangulation loss. Throws when
/// the best fit leaves a rounded amount more than `tolerance` points off.
inline LossFit fit_loss_parameter(std::span<const PublishedRow> rows, const CoverageAssumptions& a = {},
                                  double tolerance = 1.0) {
  if (rows.empty()) throw std::invalid_argument("fit_loss_parameter: no rows");
  auto sse = [&](double l) {
    double s = 0.0;
    for (const auto& r : rows) {
      const double d = coverage_row(r.projectors, r.cameras, l, a).amount - r.amount;
      s += d * d;
    }
    return s;
  };
  double lo = 0.0, hi = 0.5;
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = sse(x1), f2 = sse(x2);
  for (int it = 0; it < 200; ++it) {
    if (f1 < f2) {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = sse(x1);
    } else {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = sse(x2);
    }
  }
  LossFit fit;
  fit.loss = 0.5 * (lo + hi);
  fit.sum_squares = sse(fit.loss);
  for (const auto& r : rows) {
    const double res = double(coverage_row(r.projectors, r.cameras, fit.loss, a).amount_rounded() - r.amount);
    fit.residuals.push_back(res);
    fit.max_abs_residual = std::max(fit.max_abs_residual, std::abs(res));
  }
  if (fit.max_abs_residual > tolerance) {
    std::ostringstream msg;
    msg << "fit_loss_parameter: best loss " << fit.loss << " leaves a residual of " << fit.max_abs_residual;
    throw std::runtime_error(msg.str());
  }
  return fit;
}

struct CurvePoint {
  double phi_alpha_deg;
  double d;
};

/// D sampled at `samples` evenly spaced angles in [0, 180).
inline std::vector<CurvePoint> separability_curve(double phi1_deg, double phi2_deg, int samples) {
  if (samples < 2) throw std::invalid_argument("separability_curve: need at least two samples");
  std::vector<CurvePoint> out;
  for (int i = 0; i < samples; ++i) {
    const double a = 180.0 * i / samples;
    out.push_back({a, separability(phi1_deg, phi2_deg, a)});
  }
  return out;
}

inline std::string to_csv(std::span<const CurvePoint> curve) {
  std::ostringstream os;
  os.precision(10);
  os << "phi_alpha_deg,D\n";
  for (const auto& p : curve) os << p.phi_alpha_deg << ',' << p.d << '\n';
  return os.str();
}

}  // namespace mpsl
