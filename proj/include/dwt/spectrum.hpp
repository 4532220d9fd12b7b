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
#include <cstdint>
#include <optional>
#include <ostream>
#include <vector>

#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/lattice.hpp"
#include "dwt/tridiagonal.hpp"
#include "dwt/units.hpp"

namespace dwt {

/// H = V(x_k) - K delta^2 / dx^2 with K the kinetic coefficient on the kx grid.
inline TridiagonalOperator assemble_hamiltonian(const SpatialGrid& grid,
                                                std::span<const double> potential) {
  if (static_cast<int>(potential.size()) != grid.points()) {
    throw Error(ErrorCode::grid_mismatch, "potential must have one value per mesh point");
  }
  const double hop = units::kinetic_coefficient_khz / (grid.dx() * grid.dx());
  TridiagonalOperator h{grid, std::vector<double>(potential.begin(), potential.end()), -hop};
  for (auto& d : h.diagonal) d += 2.0 * hop;
  return h;
}

inline TridiagonalOperator assemble_hamiltonian(const SpatialGrid& grid, const LatticeParams& p) {
  validate(p);
  std::vector<double> v(grid.points());
  for (int k = 0; k < grid.points(); ++k) v[k] = detail::potential_1d_raw(p, grid.x(k));
  return assemble_hamiltonian(grid, v);
}

struct EigenPair {
  double energy = 0.0;
  WaveFn1D state;
  /// ||H phi - E phi|| / ||H phi|| in the plain vector norm.
  double residual = 0.0;
};

namespace detail {

// Number of eigenvalues strictly below x (Sturm sequence count).
inline int sturm_count(std::span<const double> d, double e, double x) {
  const double e2 = e * e;
  const double tiny = 1e-300;
  int count = 0;
  double q = d[0] - x;
  if (q < 0.0) ++count;
  for (std::size_t i = 1; i < d.size(); ++i) {
    if (std::abs(q) < tiny) q = tiny;
    q = d[i] - x - e2 / q;
    if (q < 0.0) ++count;
  }
  return count;
}

// k-th smallest eigenvalue (0-based) by bisection.
inline double bisect_eigenvalue(std::span<const double> d, double e, int k, double lo, double hi) {
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (sturm_count(d, e, mid) > k) {
      hi = mid;
    } else {
      lo = mid;
    }
  }
  return 0.5 * (lo + hi);
}

// Solves (d - shift) x + e (x_{i-1} + x_{i+1}) = b in place (real Thomas with
// zero-pivot guard, which is what inverse iteration needs).
inline void shifted_real_solve(std::span<const double> d, double e, double shift,
                               std::vector<double>& b, std::vector<double>& scratch) {
  const std::size_t m = d.size();
  const double guard = 1e-14 * (std::abs(shift) + std::abs(e) + 1.0);
  scratch.resize(m);
  double denom = d[0] - shift;
  if (std::abs(denom) < guard) denom = guard;
  scratch[0] = e / denom;
  b[0] /= denom;
  for (std::size_t i = 1; i < m; ++i) {
    denom = d[i] - shift - e * scratch[i - 1];
    if (std::abs(denom) < guard) denom = guard;
    scratch[i] = e / denom;
    b[i] = (b[i] - e * b[i - 1]) / denom;
  }
  for (std::size_t i = m - 1; i-- > 0;) b[i] -= scratch[i] * b[i + 1];
}

inline double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace detail

/// The `count` eigenpairs closest to target_energy (bottom of the spectrum when
/// absent), sorted ascending. Eigenvalues come from Sturm bisection, vectors
/// from inverse iteration with re-orthogonalization inside clusters.
/// States are normalized with the dx measure and signed so that their largest
/// component is positive.
inline std::vector<EigenPair> lowest_eigenstates(const TridiagonalOperator& h, int count,
                                                 std::optional<double> target_energy = {}) {
  const auto d = h.interior_diagonal();
  const double e = h.off_diagonal;
  const int m = static_cast<int>(d.size());
  if (count < 1 || count > m) {
    throw Error(ErrorCode::invalid_parameters, "eigenpair count must lie in [1, interior size]");
  }
  const auto [dmin, dmax] = std::minmax_element(d.begin(), d.end());
  const double lo = *dmin - 2.0 * std::abs(e) - 1.0;
  const double hi = *dmax + 2.0 * std::abs(e) + 1.0;

  int first = 0;
  if (target_energy) {
    const int below = detail::sturm_count(d, e, *target_energy);
    // Candidates on both sides of the target, then keep the closest.
    const int from = std::max(0, below - count);
    const int to = std::min(m, below + count);
    std::vector<std::pair<double, int>> cand;
    for (int k = from; k < to; ++k) {
      const double ev = detail::bisect_eigenvalue(d, e, k, lo, hi);
      cand.emplace_back(std::abs(ev - *target_energy), k);
    }
    std::stable_sort(cand.begin(), cand.end());
    first = cand.front().second;
    for (int i = 0; i < count; ++i) first = std::min(first, cand[i].second);
  }

  std::vector<double> values(count);
  for (int i = 0; i < count; ++i) values[i] = detail::bisect_eigenvalue(d, e, first + i, lo, hi);

  const double scale = std::max(std::abs(lo), std::abs(hi));
  const double cluster_gap = 1e-3 * scale;
  std::vector<std::vector<double>> vecs;
  std::vector<double> x(m), scratch, hx(m);
  std::vector<EigenPair> out;
  out.reserve(count);
  int cluster_start = 0;
  for (int i = 0; i < count; ++i) {
    if (i > 0 && values[i] - values[i - 1] > cluster_gap) cluster_start = i;
    // Deterministic pseudo-random start vector.
    std::uint64_t s = 0x9E3779B97F4A7C15ull + static_cast<std::uint64_t>(first + i) * 0xBF58476D1CE4E5B9ull;
    for (auto& xi : x) {
      s ^= s >> 30;
      s *= 0xBF58476D1CE4E5B9ull;
      s ^= s >> 27;
      s *= 0x94D049BB133111EBull;
      s ^= s >> 31;
      xi = static_cast<double>(s >> 11) * 0x1.0p-53 - 0.5;
    }
    double residual = 1.0;
    for (int it = 0; it < 8; ++it) {
      detail::shifted_real_solve(d, e, values[i], x, scratch);
      for (int j = cluster_start; j < i; ++j) {
        const double c = detail::dot(vecs[j], x);
        for (int k = 0; k < m; ++k) x[k] -= c * vecs[j][k];
      }
      const double nrm = std::sqrt(detail::dot(x, x));
      for (auto& xi : x) xi /= nrm;
      h.apply_interior<double>(x, hx);
      double hn = 0.0, rn = 0.0;
      for (int k = 0; k < m; ++k) {
        hn += hx[k] * hx[k];
        const double r = hx[k] - values[i] * x[k];
        rn += r * r;
      }
      residual = std::sqrt(rn) / std::max(std::sqrt(hn), 1e-300);
      if (it >= 1 && residual < 1e-12) break;
    }
    if (!(residual <= 1e-8)) {
      throw NonConvergence("inverse iteration did not reach the residual bound", residual);
    }
    int imax = 0;
    for (int k = 1; k < m; ++k) {
      if (std::abs(x[k]) > std::abs(x[imax]) * (1.0 + 1e-9)) imax = k;
    }
    if (x[imax] < 0.0) {
      for (auto& xi : x) xi = -xi;
    }
    vecs.push_back(x);
    WaveFn1D psi(h.grid);
    const double inv = 1.0 / std::sqrt(h.grid.dx());
    for (int k = 0; k < m; ++k) psi[k + 1] = x[k] * inv;
    out.push_back(EigenPair{values[i], std::move(psi), residual});
  }
  return out;
}

struct LocalizedStates {
  WaveFn1D left;
  WaveFn1D right;
};

/// Probability of psi on mesh points with x < x_split.
inline double probability_left_of(const WaveFn1D& psi, double x_split) {
  const auto& g = psi.grid();
  double s = 0.0;
  for (int k = 0; k < g.points(); ++k) {
    if (g.x(k) < x_split) s += std::norm(psi[k]);
  }
  return s * g.dx();
}

/// psi_{L,R} = (phi0 -/+ phi1)/sqrt(2), with the sign assignment fixed by requiring
/// at least 90% of the probability on the respective side of the barrier.
inline LocalizedStates localized_states(const EigenPair& ground, const EigenPair& excited,
                                        double barrier_x) {
  require_same_grid(ground.state.grid(), excited.state.grid());
  const auto& g = ground.state.grid();
  WaveFn1D plus(g), minus(g);
  const double r = 1.0 / std::sqrt(2.0);
  for (int k = 0; k < g.points(); ++k) {
    plus[k] = r * (ground.state[k] + excited.state[k]);
    minus[k] = r * (ground.state[k] - excited.state[k]);
  }
  const double plus_left = probability_left_of(plus, barrier_x);
  const double minus_left = probability_left_of(minus, barrier_x);
  constexpr double required = 0.9;
  if (plus_left >= required && 1.0 - minus_left >= required) return {plus, minus};
  if (minus_left >= required && 1.0 - plus_left >= required) return {minus, plus};
  throw Error(ErrorCode::delocalization_failure,
              "neither combination of the doublet is localized in one well");
}

/// Convenience: diagonalizes the Hamiltonian of p and localizes its lowest doublet.
inline LocalizedStates localized_states(const SpatialGrid& grid, const LatticeParams& p) {
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(grid, p), 2);
  const auto geo = well_geometry(p, grid.x_min(), grid.x_max());
  if (geo.single_well) {
    throw Error(ErrorCode::delocalization_failure, "configuration has a single well");
  }
  return localized_states(pairs[0], pairs[1], geo.barrier_x);
}

struct SpectrumTrace {
  std::vector<double> times;
  /// energies[i][n]: level n at times[i], ascending.
  std::vector<std::vector<double>> energies;
};

inline SpectrumTrace instantaneous_spectrum(const ControlSequence& seq, const SpatialGrid& grid,
                                            std::span<const double> sample_times, int count = 6) {
  SpectrumTrace trace;
  for (const double t : sample_times) {
    const auto pairs = lowest_eigenstates(assemble_hamiltonian(grid, seq.sample(t)), count);
    std::vector<double> levels;
    for (const auto& p : pairs) levels.push_back(p.energy);
    trace.times.push_back(t);
    trace.energies.push_back(std::move(levels));
  }
  return trace;
}

inline void write_spectrum_trace(std::ostream& os, const SpectrumTrace& trace) {
  os << "t_ms";
  const std::size_t levels = trace.energies.empty() ? 0 : trace.energies.front().size();
  for (std::size_t n = 0; n < levels; ++n) os << " E" << n << "_kHz";
  os << '\n';
  os.precision(12);
  for (std::size_t i = 0; i < trace.times.size(); ++i) {
    os << trace.times[i];
    for (const double e : trace.energies[i]) os << ' ' << e;
    os << '\n';
  }
}

}  // namespace dwt
