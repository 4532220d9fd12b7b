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
#include <complex>
#include <ostream>
#include <span>
#include <utility>
#include <vector>

#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/lattice.hpp"
#include "dwt/tridiagonal.hpp"
#include "dwt/units.hpp"

namespace dwt {

inline constexpr double norm_drift_tolerance = 1e-10;

namespace detail {

// Solves (1 + i a H') psi' = (1 - i a H') psi in place on the interior, with
// H' = diag(hdiag) - shift + off (shift left + shift right). Negative a
// gives the inverse map.
inline void cayley_solve(std::span<cplx> psi, std::span<const double> hdiag, double off, double a,
                         double shift, std::vector<cplx>& rhs, std::vector<cplx>& diag,
                         std::vector<cplx>& scratch) {
  const std::size_t m = psi.size();
  rhs.resize(m);
  diag.resize(m);
  scratch.resize(m);
  const cplx ia{0.0, a};
  for (std::size_t i = 0; i < m; ++i) {
    const double d = hdiag[i] - shift;
    cplx h = d * psi[i];
    if (i > 0) h += off * psi[i - 1];
    if (i + 1 < m) h += off * psi[i + 1];
    rhs[i] = psi[i] - ia * h;
    diag[i] = 1.0 + ia * d;
  }
  thomas_solve(diag, ia * off, rhs, scratch);
  std::copy(rhs.begin(), rhs.end(), psi.begin());
}

// Cayley solve followed by the exact global phase exp(-2 i a shift).
//
// The shift leaves the dynamics unchanged up to that phase but keeps a H'
// small on the occupied states, where the Cayley phase error grows like
// (a E)^3.
inline void cayley_step(std::span<cplx> psi, std::span<const double> hdiag, double off, double a,
                        double shift, std::vector<cplx>& rhs, std::vector<cplx>& diag,
                        std::vector<cplx>& scratch) {
  cayley_solve(psi, hdiag, off, a, shift, rhs, diag, scratch);
  const cplx phase = std::polar(1.0, -2.0 * a * shift);
  for (auto& v : psi) v *= phase;
}

// Index of the lowest averaged-potential point, which sets the energy reference.
inline std::size_t shift_index(std::span<const double> hdiag) {
  return static_cast<std::size_t>(std::min_element(hdiag.begin(), hdiag.end()) - hdiag.begin());
}

inline double slice_shift(std::span<const double> hdiag, double off) {
  return hdiag[shift_index(hdiag)] + 2.0 * off;
}

}  // namespace detail

/// Crank-Nicolson step over one slice with the slice-averaged Hamiltonian
/// (H_n + H_{n+1}) / 2. The Cayley form keeps the step exactly unitary even
/// when H changes across the slice. Energies are measured from the potential
/// minimum inside the solve; the offset is restored as an exact phase.
inline WaveFn1D cn_step(const WaveFn1D& psi, const TridiagonalOperator& h_n,
                        const TridiagonalOperator& h_n1, double dt) {
  require_same_grid(psi.grid(), h_n.grid);
  require_same_grid(psi.grid(), h_n1.grid);
  if (!(dt >= 0.0)) throw Error(ErrorCode::invalid_parameters, "time step must be non-negative");
  if (h_n.off_diagonal != h_n1.off_diagonal) {
    throw Error(ErrorCode::grid_mismatch, "operators differ in their kinetic coupling");
  }
  const auto d0 = h_n.interior_diagonal();
  const auto d1 = h_n1.interior_diagonal();
  std::vector<double> hbar(d0.size());
  for (std::size_t i = 0; i < hbar.size(); ++i) hbar[i] = 0.5 * (d0[i] + d1[i]);
  WaveFn1D out = psi;
  std::vector<cplx> rhs, diag, scratch;
  detail::cayley_step(out.interior(), hbar, h_n.off_diagonal, units::pi * dt,
                      detail::slice_shift(hbar, h_n.off_diagonal), rhs, diag, scratch);
  return out;
}

/// Interior potentials of the two most recently requested parameter sets, so
/// a forward sweep evaluates each time node once.
class PotentialCache {
 public:
  explicit PotentialCache(const SpatialGrid& grid) : sampler_(interior_sampler(grid)) {}

  const PotentialSampler& sampler() const noexcept { return sampler_; }

  const std::vector<double>& operator()(const LatticeParams& p) {
    for (int k = 0; k < 2; ++k) {
      auto& c = entries_[k];
      if (c.valid && c.params == p) {
        // Evict the other slot next so a hit stays valid across the next lookup.
        next_ = k ^ 1;
        return c.values;
      }
    }
    auto& slot = entries_[next_];
    next_ ^= 1;
    slot.values.resize(sampler_.size());
    sampler_.potential(p, slot.values);
    slot.params = p;
    slot.valid = true;
    return slot.values;
  }

 private:
  struct Entry {
    LatticeParams params;
    std::vector<double> values;
    bool valid = false;
  };

  PotentialSampler sampler_;
  Entry entries_[2];
  int next_ = 0;
};

/// Reusable single-particle stepper bound to one grid.
class Propagator1D {
 public:
  explicit Propagator1D(const SpatialGrid& grid)
      : grid_(grid),
        potential_(grid),
        hop_(units::kinetic_coefficient_khz / (grid.dx() * grid.dx())) {}

  const SpatialGrid& grid() const noexcept { return grid_; }
  const PotentialSampler& sampler() const noexcept { return potential_.sampler(); }
  double measure() const noexcept { return grid_.dx(); }

  /// Advances interior amplitudes across a slice of length dt between the
  /// parameter nodes p0 and p1. A negative dt applies the exact inverse.
  void step(std::span<cplx> psi, const LatticeParams& p0, const LatticeParams& p1, double dt) {
    const double shift = prepare(p0, p1);
    detail::cayley_step(psi, hbar_, -hop_, units::pi * dt, shift, rhs_, diag_, scratch_);
  }

  /// Reverse sweep of one slice for gradient evaluation. On entry psi and chi
  /// hold the state and costate at the end of the slice; on exit they hold
  /// them at its start. density receives D_k such that the derivative of the
  /// objective with respect to the control value at either node of the slice
  /// is sum_k dV_k Im D_k, with dV the interior derivative of the potential at
  /// that node, before the energy-reference correction at ref_index.
  void reverse(std::span<cplx> psi, std::span<cplx> chi, const LatticeParams& p0,
               const LatticeParams& p1, double dt, std::span<cplx> density,
               std::size_t& ref_index) {
    const double shift = prepare(p0, p1);
    ref_index = detail::shift_index(hbar_);
    const double a = units::pi * dt;
    const cplx unphase = std::polar(1.0, 2.0 * a * shift);
    end_psi_.assign(psi.begin(), psi.end());
    end_chi_.assign(chi.begin(), chi.end());
    for (auto& v : end_psi_) v *= unphase;
    for (auto& v : end_chi_) v *= unphase;
    std::copy(end_psi_.begin(), end_psi_.end(), psi.begin());
    std::copy(end_chi_.begin(), end_chi_.end(), chi.begin());
    detail::cayley_solve(psi, hbar_, -hop_, -a, shift, rhs_, diag_, scratch_);
    detail::cayley_solve(chi, hbar_, -hop_, -a, shift, rhs_, diag_, scratch_);
    const double w = 0.5 * a * grid_.dx();
    for (std::size_t k = 0; k < psi.size(); ++k) {
      density[k] = w * std::conj(chi[k] + end_chi_[k]) * (psi[k] + end_psi_[k]);
    }
  }

 private:
  // Fills the averaged diagonal for the slice and returns its energy reference.
  double prepare(const LatticeParams& p0, const LatticeParams& p1) {
    const auto& v0 = potential_(p0);
    const auto& v1 = potential_(p1);
    hbar_.resize(v0.size());
    for (std::size_t i = 0; i < hbar_.size(); ++i) hbar_[i] = 0.5 * (v0[i] + v1[i]) + 2.0 * hop_;
    return detail::slice_shift(hbar_, -hop_);
  }

  SpatialGrid grid_;
  PotentialCache potential_;
  double hop_;
  std::vector<double> hbar_;
  std::vector<cplx> rhs_, diag_, scratch_, end_psi_, end_chi_;
};

struct Snapshot1D {
  double time = 0.0;
  WaveFn1D state;
};

struct PropagationResult {
  WaveFn1D final_state;
  std::vector<Snapshot1D> trajectory;
  /// max |1 - norm| over all steps.
  double norm_drift = 0.0;
};

namespace detail {

// Node indices for the requested record times (rounded to the nearest slice boundary).
inline std::vector<int> record_nodes(const ControlSequence& seq, std::span<const double> times) {
  std::vector<int> nodes;
  for (const double t : times) {
    if (!(t >= -1e-12 * seq.duration() && t <= seq.duration() * (1.0 + 1e-12))) {
      throw Error(ErrorCode::out_of_range, "record time outside [0, T]");
    }
    nodes.push_back(static_cast<int>(std::lround(t / seq.dt())));
  }
  return nodes;
}

inline void require_normalized(double norm2) {
  if (!(std::abs(norm2 - 1.0) <= norm_drift_tolerance)) {
    throw Error(ErrorCode::invalid_parameters, "initial state must be normalized");
  }
}

}  // namespace detail

/// Propagates psi0 through all slices of seq. Snapshots are taken at the slice
/// boundaries nearest to record_times.
inline PropagationResult evolve(const WaveFn1D& psi0, const ControlSequence& seq,
                                std::span<const double> record_times = {}) {
  detail::require_normalized(psi0.norm_squared());
  const auto nodes = detail::record_nodes(seq, record_times);
  Propagator1D prop(psi0.grid());
  PropagationResult out{psi0, {}, 0.0};
  auto record = [&](int j) {
    for (std::size_t r = 0; r < nodes.size(); ++r) {
      if (nodes[r] == j) out.trajectory.push_back({seq.time(j), out.final_state});
    }
  };
  record(0);
  const double dt = seq.dt();
  for (int j = 0; j < seq.steps(); ++j) {
    prop.step(out.final_state.interior(), seq[j], seq[j + 1], dt);
    const double drift = std::abs(1.0 - out.final_state.norm_squared());
    out.norm_drift = std::max(out.norm_drift, drift);
    if (!(drift <= norm_drift_tolerance)) {
      throw Error(ErrorCode::norm_drift_exceeded, "norm left the 1e-10 band during propagation");
    }
    record(j + 1);
  }
  return out;
}

/// Tabular trajectory: one row per (snapshot, mesh point).
inline void write_trajectory(std::ostream& os, const PropagationResult& result) {
  os << "t_ms x_k |psi|^2\n";
  os.precision(12);
  for (const auto& s : result.trajectory) {
    const auto& g = s.state.grid();
    for (int k = 0; k < g.points(); ++k) {
      os << s.time << ' ' << g.x(k) << ' ' << std::norm(s.state[k]) << '\n';
    }
    os << '\n';
  }
}

}  // namespace dwt
