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

#include <cmath>
#include <complex>
#include <numbers>
#include <span>
#include <vector>

#include "dwt/error.hpp"

namespace dwt {

using cplx = std::complex<double>;

// Energies are in kHz (E/h), times in ms, positions in the dimensionless
// xi = k x. A 1 kHz level advances its phase by 2*pi per ms.
namespace units {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

/// Rb-87 recoil energy for the 810 nm lattice, kHz.
inline constexpr double recoil_khz = 3.5;

/// Kinetic coefficient for positions measured in units of the wavelength:
/// -eps d^2/du^2 with u = x / lambda.
inline constexpr double epsilon_khz = recoil_khz / (two_pi * two_pi);

/// Kinetic coefficient on the xi = k x grid. Since xi = 2 pi u this is
/// eps * (2 pi)^2, i.e. the recoil energy.
inline constexpr double kinetic_coefficient_khz = epsilon_khz * two_pi * two_pi;

/// Phase advanced per (kHz * ms).
inline constexpr double phase_per_khz_ms = two_pi;

inline constexpr double to_recoil(double energy_khz) { return energy_khz / recoil_khz; }
inline constexpr double from_recoil(double energy_recoil) { return energy_recoil * recoil_khz; }

}  // namespace units

/// Uniform mesh x_k = x_min + k dx, k = 0..n, with Dirichlet walls at both ends.
class SpatialGrid {
 public:
  SpatialGrid() = default;

  double x_min() const noexcept { return x_min_; }
  double x_max() const noexcept { return x_max_; }
  /// Number of intervals; there are n + 1 mesh points.
  int n() const noexcept { return n_; }
  double dx() const noexcept { return dx_; }
  int points() const noexcept { return n_ + 1; }
  /// Free amplitudes: everything except the two pinned walls.
  int interior() const noexcept { return n_ - 1; }
  double x(int k) const noexcept { return x_min_ + k * dx_; }

  friend bool operator==(const SpatialGrid&, const SpatialGrid&) = default;

  friend SpatialGrid make_grid(double x_min, double x_max, int n);

 private:
  SpatialGrid(double x_min, double x_max, int n)
      : x_min_(x_min), x_max_(x_max), n_(n), dx_((x_max - x_min) / n) {}

  double x_min_ = 0.0;
  double x_max_ = 1.0;
  int n_ = 8;
  double dx_ = 0.125;
};

inline SpatialGrid make_grid(double x_min, double x_max, int n) {
  if (!std::isfinite(x_min) || !std::isfinite(x_max) || !(x_max > x_min)) {
    throw Error(ErrorCode::invalid_domain, "grid requires x_max > x_min");
  }
  if (n < 8) {
    throw Error(ErrorCode::invalid_domain, "grid requires at least 8 intervals");
  }
  return SpatialGrid(x_min, x_max, n);
}

/// Default domain: one double-well cell whose wells sit at kx = -pi and 0 and
/// merge near kx = -pi/2 for theta close to -pi/2. Walls are inter-cell maxima.
inline constexpr double default_x_min = -1.5 * std::numbers::pi;
inline constexpr double default_x_max = 0.5 * std::numbers::pi;
inline constexpr int default_points = 1000;

inline SpatialGrid default_grid(int n = default_points) {
  return make_grid(default_x_min, default_x_max, n);
}

inline void require_same_grid(const SpatialGrid& a, const SpatialGrid& b) {
  if (!(a == b)) throw Error(ErrorCode::grid_mismatch, "states live on different grids");
}

/// Single-particle wavefunction sampled on all n + 1 mesh points; the wall
/// samples stay zero. Norm convention: sum |psi_k|^2 dx = 1.
class WaveFn1D {
 public:
  WaveFn1D() = default;
  explicit WaveFn1D(const SpatialGrid& grid) : grid_(grid), amp_(grid.points(), cplx{}) {}
  WaveFn1D(const SpatialGrid& grid, std::vector<cplx> amplitudes)
      : grid_(grid), amp_(std::move(amplitudes)) {
    if (static_cast<int>(amp_.size()) != grid_.points()) {
      throw Error(ErrorCode::grid_mismatch, "amplitude count does not match grid");
    }
    amp_.front() = 0.0;
    amp_.back() = 0.0;
  }

  template <typename F>
  static WaveFn1D sampled(const SpatialGrid& grid, F&& f) {
    WaveFn1D psi(grid);
    for (int k = 1; k < grid.n(); ++k) psi.amp_[k] = f(grid.x(k));
    return psi;
  }

  const SpatialGrid& grid() const noexcept { return grid_; }
  std::span<cplx> amplitudes() noexcept { return amp_; }
  std::span<const cplx> amplitudes() const noexcept { return amp_; }
  std::span<cplx> interior() noexcept { return {amp_.data() + 1, amp_.size() - 2}; }
  std::span<const cplx> interior() const noexcept { return {amp_.data() + 1, amp_.size() - 2}; }
  cplx& operator[](int k) noexcept { return amp_[k]; }
  const cplx& operator[](int k) const noexcept { return amp_[k]; }

  double norm_squared() const noexcept {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return s * grid_.dx();
  }

  WaveFn1D& normalize() {
    const double n2 = norm_squared();
    if (!(n2 > 0.0)) throw Error(ErrorCode::invalid_parameters, "cannot normalize a null state");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : amp_) a *= inv;
    return *this;
  }

 private:
  SpatialGrid grid_;
  std::vector<cplx> amp_;
};

/// <a|b> = sum conj(a_k) b_k dx.
inline cplx inner_product(const WaveFn1D& a, const WaveFn1D& b) {
  require_same_grid(a.grid(), b.grid());
  cplx s{};
  const auto x = a.amplitudes();
  const auto y = b.amplitudes();
  for (std::size_t k = 0; k < x.size(); ++k) s += std::conj(x[k]) * y[k];
  return s * a.grid().dx();
}

inline double overlap_squared(const WaveFn1D& a, const WaveFn1D& b) {
  return std::norm(inner_product(a, b));
}

/// Two-particle amplitude Psi(x1, x2) on the product mesh, row-major in x1
/// (row k1 holds all x2 samples). Walls are zero. Norm: sum |Psi|^2 dx^2 = 1.
class WaveFn2D {
 public:
  WaveFn2D() = default;
  explicit WaveFn2D(const SpatialGrid& grid, bool bosonic = true)
      : grid_(grid),
        amp_(static_cast<std::size_t>(grid.points()) * grid.points(), cplx{}),
        bosonic_(bosonic) {}

  /// (a(x1) b(x2) + b(x1) a(x2)) / sqrt(2), normalized; reduces to a(x1)a(x2) for a == b.
  static WaveFn2D symmetrized_product(const WaveFn1D& a, const WaveFn1D& b) {
    require_same_grid(a.grid(), b.grid());
    WaveFn2D psi(a.grid(), true);
    const int np = a.grid().points();
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) psi(i, j) = a[i] * b[j] + b[i] * a[j];
    }
    psi.normalize();
    return psi;
  }

  /// Plain product a(x1) b(x2); not exchange symmetric unless a == b.
  static WaveFn2D product(const WaveFn1D& a, const WaveFn1D& b) {
    require_same_grid(a.grid(), b.grid());
    WaveFn2D psi(a.grid(), false);
    const int np = a.grid().points();
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) psi(i, j) = a[i] * b[j];
    }
    return psi;
  }

  const SpatialGrid& grid() const noexcept { return grid_; }
  bool bosonic() const noexcept { return bosonic_; }
  void set_bosonic(bool b) noexcept { bosonic_ = b; }
  int stride() const noexcept { return grid_.points(); }

  cplx& operator()(int k1, int k2) noexcept {
    return amp_[static_cast<std::size_t>(k1) * grid_.points() + k2];
  }
  const cplx& operator()(int k1, int k2) const noexcept {
    return amp_[static_cast<std::size_t>(k1) * grid_.points() + k2];
  }
  std::span<cplx> amplitudes() noexcept { return amp_; }
  std::span<const cplx> amplitudes() const noexcept { return amp_; }

  double norm_squared() const noexcept {
    double s = 0.0;
    for (const auto& a : amp_) s += std::norm(a);
    return s * grid_.dx() * grid_.dx();
  }

  WaveFn2D& normalize() {
    const double n2 = norm_squared();
    if (!(n2 > 0.0)) throw Error(ErrorCode::invalid_parameters, "cannot normalize a null state");
    const double inv = 1.0 / std::sqrt(n2);
    for (auto& a : amp_) a *= inv;
    return *this;
  }

  /// max |Psi(x1,x2) - Psi(x2,x1)| / max |Psi|.
  double symmetry_defect() const noexcept {
    const int np = grid_.points();
    double dmax = 0.0, amax = 0.0;
    for (int i = 0; i < np; ++i) {
      for (int j = 0; j < np; ++j) {
        amax = std::max(amax, std::abs((*this)(i, j)));
        if (j > i) dmax = std::max(dmax, std::abs((*this)(i, j) - (*this)(j, i)));
      }
    }
    return amax > 0.0 ? dmax / amax : 0.0;
  }

  /// Replace Psi by (Psi + P Psi) / 2.
  void symmetrize() noexcept {
    const int np = grid_.points();
    for (int i = 0; i < np; ++i) {
      for (int j = i + 1; j < np; ++j) {
        const cplx m = 0.5 * ((*this)(i, j) + (*this)(j, i));
        (*this)(i, j) = m;
        (*this)(j, i) = m;
      }
    }
  }

 private:
  SpatialGrid grid_;
  std::vector<cplx> amp_;
  bool bosonic_ = true;
};

inline cplx inner_product(const WaveFn2D& a, const WaveFn2D& b) {
  require_same_grid(a.grid(), b.grid());
  cplx s{};
  const auto x = a.amplitudes();
  const auto y = b.amplitudes();
  for (std::size_t k = 0; k < x.size(); ++k) s += std::conj(x[k]) * y[k];
  return s * (a.grid().dx() * a.grid().dx());
}

}  // namespace dwt
