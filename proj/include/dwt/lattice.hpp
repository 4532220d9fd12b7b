// Copyright 2026 The dwtransport Authors
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

#include <algorithm>
#include <cmath>
#include <optional>
#include <span>
#include <vector>

#include "dwt/error.hpp"
#include "dwt/units.hpp"

namespace dwt {

/// Control parameters of the double-well lattice: depth V0 (kHz), polarization
/// angle beta and phase theta (radians).
struct LatticeParams {
  double v0 = 0.0;
  double beta = 0.0;
  double theta = 0.0;

  friend bool operator==(const LatticeParams&, const LatticeParams&) = default;
};

enum class Control { v0, beta, theta };

inline constexpr Control all_controls[] = {Control::v0, Control::beta, Control::theta};

inline bool is_valid(const LatticeParams& p) noexcept {
  return std::isfinite(p.v0) && std::isfinite(p.beta) && std::isfinite(p.theta) && p.v0 >= 0.0 &&
         p.beta >= 0.0 && p.beta <= units::pi;
}

inline const LatticeParams& validate(const LatticeParams& p) {
  if (!is_valid(p)) {
    throw Error(ErrorCode::invalid_parameters,
                "lattice parameters need V0 >= 0 and beta/pi in [0, 1]");
  }
  return p;
}

/// Horizontal lattice potential in kHz at (kx, ky).
inline double potential_2d(const LatticeParams& p, double x, double y) {
  validate(p);
  const double c2 = std::cos(0.5 * p.beta) * std::cos(0.5 * p.beta);
  const double s2 = std::sin(0.5 * p.beta) * std::sin(0.5 * p.beta);
  const double cy = std::cos(y);
  const double cx = std::cos(x);
  const double mixed = cy + std::cos(x - p.theta);
  return -p.v0 * (c2 * (cy * cy + cx * cx) + s2 * mixed * mixed);
}

namespace detail {

// Unchecked cross-section, used in hot loops after validation.
inline double potential_1d_raw(const LatticeParams& p, double x) noexcept {
  const double c2 = std::cos(0.5 * p.beta) * std::cos(0.5 * p.beta);
  const double s2 = 1.0 - c2;
  const double cx = std::cos(x);
  const double mixed = 1.0 + std::cos(x - p.theta);
  return -p.v0 * (c2 * (1.0 + cx * cx) + s2 * mixed * mixed);
}

}  // namespace detail

/// Cross-section along the double-well axis (y = 0).
inline double potential_1d(const LatticeParams& p, double x) {
  validate(p);
  return detail::potential_1d_raw(p, x);
}

struct PotentialGradient {
  double d_v0 = 0.0;
  double d_beta = 0.0;
  double d_theta = 0.0;
};

/// Partial derivatives of the 1D cross-section with respect to the controls.
inline PotentialGradient potential_gradient(const LatticeParams& p, double x) {
  validate(p);
  const double c2 = std::cos(0.5 * p.beta) * std::cos(0.5 * p.beta);
  const double s2 = 1.0 - c2;
  const double cx = std::cos(x);
  const double single = 1.0 + cx * cx;
  const double mixed = 1.0 + std::cos(x - p.theta);
  const double half_sin_beta = 0.5 * std::sin(p.beta);
  PotentialGradient g;
  g.d_v0 = -(c2 * single + s2 * mixed * mixed);
  g.d_beta = -p.v0 * half_sin_beta * (mixed * mixed - single);
  g.d_theta = -p.v0 * s2 * 2.0 * mixed * std::sin(x - p.theta);
  return g;
}

/// Evaluates the cross-section and its control derivatives on a fixed set of
/// positions, with the trigonometric factors of x cached.
class PotentialSampler {
 public:
  explicit PotentialSampler(std::vector<double> positions) : x_(std::move(positions)) {
    cos_.resize(x_.size());
    sin_.resize(x_.size());
    for (std::size_t k = 0; k < x_.size(); ++k) {
      cos_[k] = std::cos(x_[k]);
      sin_[k] = std::sin(x_[k]);
    }
  }

  std::size_t size() const noexcept { return x_.size(); }
  const std::vector<double>& positions() const noexcept { return x_; }

  void potential(const LatticeParams& p, std::span<double> out) const noexcept {
    const double c2 = std::cos(0.5 * p.beta) * std::cos(0.5 * p.beta);
    const double s2 = 1.0 - c2;
    const double ct = std::cos(p.theta);
    const double st = std::sin(p.theta);
    for (std::size_t k = 0; k < x_.size(); ++k) {
      const double m = 1.0 + cos_[k] * ct + sin_[k] * st;
      out[k] = -p.v0 * (c2 * (1.0 + cos_[k] * cos_[k]) + s2 * m * m);
    }
  }

  /// dV/du for one control u at every position.
  void derivative(const LatticeParams& p, Control which, std::span<double> out) const noexcept {
    const double c2 = std::cos(0.5 * p.beta) * std::cos(0.5 * p.beta);
    const double s2 = 1.0 - c2;
    const double ct = std::cos(p.theta);
    const double st = std::sin(p.theta);
    const double hsb = 0.5 * std::sin(p.beta);
    for (std::size_t k = 0; k < x_.size(); ++k) {
      const double single = 1.0 + cos_[k] * cos_[k];
      const double m = 1.0 + cos_[k] * ct + sin_[k] * st;
      switch (which) {
        case Control::v0: out[k] = -(c2 * single + s2 * m * m); break;
        case Control::beta: out[k] = -p.v0 * hsb * (m * m - single); break;
        case Control::theta: out[k] = -p.v0 * s2 * 2.0 * m * (sin_[k] * ct - cos_[k] * st); break;
      }
    }
  }

 private:
  std::vector<double> x_, cos_, sin_;
};

/// Sampler over the interior mesh points x_1 .. x_{n-1}.
inline PotentialSampler interior_sampler(const SpatialGrid& grid) {
  std::vector<double> x(grid.interior());
  for (int k = 0; k < grid.interior(); ++k) x[k] = grid.x(k + 1);
  return PotentialSampler(std::move(x));
}

/// Extrema of the cross-section inside one cell. tilt = right_min_e - left_min_e.
struct WellGeometry {
  double left_min_x = 0.0;
  double right_min_x = 0.0;
  double left_min_e = 0.0;
  double right_min_e = 0.0;
  double barrier_x = 0.0;
  double barrier_e = 0.0;
  double tilt = 0.0;
  /// Only one minimum found; left and right fields then describe the same point.
  bool single_well = false;
};

namespace detail {

// Golden-section minimization of f on [a, b].
template <typename F>
double golden_minimize(F&& f, double a, double b, double tol) {
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - invphi * (b - a);
  double d = a + invphi * (b - a);
  double fc = f(c), fd = f(d);
  while (std::abs(b - a) > tol * (1.0 + std::abs(a) + std::abs(b))) {
    if (fc < fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + invphi * (b - a);
      fd = f(d);
    }
  }
  return 0.5 * (a + b);
}

}  // namespace detail

/// Locates the well minima and separating barrier of the cross-section on
/// [cell_lo, cell_hi] by a coarse scan followed by golden-section refinement.
/// A cell with a single minimum is reported with single_well = true.
inline WellGeometry well_geometry(const LatticeParams& p, double cell_lo = default_x_min,
                                  double cell_hi = default_x_max, int scan_points = 4000) {
  validate(p);
  if (!(cell_hi > cell_lo) || scan_points < 16) {
    throw Error(ErrorCode::invalid_domain, "well_geometry needs a non-empty cell");
  }
  const double h = (cell_hi - cell_lo) / scan_points;
  auto v = [&](double x) { return detail::potential_1d_raw(p, x); };
  auto neg_v = [&](double x) { return -detail::potential_1d_raw(p, x); };
  constexpr double tol = 1e-13;
  const double flat = 1e-14 * std::max(1.0, p.v0);

  std::vector<double> samples(scan_points + 1);
  for (int i = 0; i <= scan_points; ++i) samples[i] = v(cell_lo + i * h);

  std::vector<double> minima;
  for (int i = 1; i < scan_points; ++i) {
    if (samples[i] < samples[i - 1] - flat && samples[i] <= samples[i + 1]) {
      minima.push_back(detail::golden_minimize(v, cell_lo + (i - 1) * h, cell_lo + (i + 1) * h, tol));
    }
  }
  if (minima.empty()) {
    const auto it = std::min_element(samples.begin(), samples.end());
    minima.push_back(cell_lo + static_cast<double>(it - samples.begin()) * h);
  }

  WellGeometry g;
  if (minima.size() == 1) {
    g.single_well = true;
    g.left_min_x = g.right_min_x = g.barrier_x = minima.front();
    g.left_min_e = g.right_min_e = g.barrier_e = v(minima.front());
    g.tilt = 0.0;
    return g;
  }
  // Keep the two deepest minima, ordered by position.
  std::sort(minima.begin(), minima.end(), [&](double a, double b) { return v(a) < v(b); });
  double xl = std::min(minima[0], minima[1]);
  double xr = std::max(minima[0], minima[1]);
  g.left_min_x = xl;
  g.right_min_x = xr;
  g.left_min_e = v(xl);
  g.right_min_e = v(xr);
  // Barrier: highest point between the minima, refined locally.
  const int il = static_cast<int>(std::floor((xl - cell_lo) / h));
  const int ir = static_cast<int>(std::ceil((xr - cell_lo) / h));
  int ib = il;
  for (int i = il; i <= ir && i <= scan_points; ++i) {
    if (samples[i] > samples[ib]) ib = i;
  }
  const double a = std::max(xl, cell_lo + (ib - 1) * h);
  const double b = std::min(xr, cell_lo + (ib + 1) * h);
  g.barrier_x = detail::golden_minimize(neg_v, a, b, tol);
  g.barrier_e = v(g.barrier_x);
  g.tilt = g.right_min_e - g.left_min_e;
  return g;
}

}  // namespace dwt
