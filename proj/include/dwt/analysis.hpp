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
#include <functional>
#include <istream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/lattice.hpp"
#include "dwt/propagate1d.hpp"
#include "dwt/propagate2d.hpp"
#include "dwt/spectrum.hpp"
#include "dwt/units.hpp"

namespace dwt {

/// f_n = |<phi_n|psi>|^2 against the lowest `count` eigenstates of H(final_params).
inline std::vector<double> populations(const WaveFn1D& final_state, const LatticeParams& final_params,
                                       int count) {
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(final_state.grid(), final_params), count);
  std::vector<double> f;
  f.reserve(pairs.size());
  for (const auto& p : pairs) f.push_back(overlap_squared(p.state, final_state));
  return f;
}

struct ProjectionTrace {
  std::vector<double> times;
  /// p[i][n] = |<phi_n(t_i)|U(t_i)|psi0>|^2.
  std::vector<std::vector<double>> p;
};

/// Overlaps of the evolving state with the instantaneous eigenstates.
inline ProjectionTrace projection_trace(const ControlSequence& seq, const WaveFn1D& psi0,
                                        std::span<const double> record_times, int count) {
  const auto run = evolve(psi0, seq, record_times);
  ProjectionTrace out;
  for (const auto& snap : run.trajectory) {
    out.times.push_back(snap.time);
    out.p.push_back(populations(snap.state, seq.sample(snap.time), count));
  }
  return out;
}

/// |<target|final>|^2 with the dx^2 measure.
inline double two_particle_fidelity(const WaveFn2D& final_state, const WaveFn2D& target) {
  require_same_grid(final_state.grid(), target.grid());
  return std::norm(inner_product(target, final_state));
}

/// Fidelity of the product evolution U (x) U of sym(psi_L, psi_R) against
/// sym(phi0, phi1), from the two evolved single-particle states.
inline double noninteracting_fidelity(const WaveFn1D& evolved_left, const WaveFn1D& evolved_right,
                                      const WaveFn1D& phi0, const WaveFn1D& phi1) {
  const cplx amp = inner_product(phi1, evolved_left) * inner_product(phi0, evolved_right) +
                   inner_product(phi0, evolved_left) * inner_product(phi1, evolved_right);
  return std::norm(amp);
}

struct FidelityReport {
  /// Row labels of f, usually "L" and "R".
  std::vector<std::string> alphas;
  /// f[alpha][n].
  std::vector<std::vector<double>> f;
  ProjectionTrace p_trace;
  std::optional<double> F;
  std::optional<double> F_int;

  double population(std::size_t alpha, std::size_t n) const { return f.at(alpha).at(n); }
};

/// Initial and target states of the two-particle problem. With interactions
/// these are eigenstates of H2 at the first and last node, matched to the
/// symmetrized products; at g1d = 0 the products themselves (the matching
/// would be ambiguous inside the degenerate pair).
struct TwoParticleEndpoints {
  WaveFn2D initial;
  WaveFn2D target;
};

inline TwoParticleEndpoints two_particle_endpoints(const SpatialGrid& grid, const LatticeParams& start,
                                                   const LatticeParams& end,
                                                   const InteractionParams& ip) {
  const auto loc = localized_states(grid, start);
  const auto fin = lowest_eigenstates(assemble_hamiltonian(grid, end), 2);
  auto in_ref = WaveFn2D::symmetrized_product(loc.left, loc.right);
  auto tg_ref = WaveFn2D::symmetrized_product(fin[0].state, fin[1].state);
  in_ref.normalize();
  tg_ref.normalize();
  if (ip.g1d == 0.0) return {in_ref, tg_ref};
  auto in = two_particle_eigenstate(build_two_particle_hamiltonian(grid, start, ip), std::nullopt, in_ref);
  auto tg = two_particle_eigenstate(build_two_particle_hamiltonian(grid, end, ip), std::nullopt, tg_ref);
  // Phase convention: real positive overlap with the product reference.
  auto align = [](WaveFn2D& psi, const WaveFn2D& ref) {
    const cplx ov = inner_product(ref, psi);
    if (std::abs(ov) == 0.0) return;
    const cplx ph = std::conj(ov) / std::abs(ov);
    for (int i = 0; i < psi.grid().points(); ++i) {
      for (int j = 0; j < psi.grid().points(); ++j) psi(i, j) *= ph;
    }
  };
  align(in.wavefunction, in_ref);
  align(tg.wavefunction, tg_ref);
  return {std::move(in.wavefunction), std::move(tg.wavefunction)};
}

struct ReportOptions {
  /// Eigenstates of the final Hamiltonian per alpha.
  int levels = 4;
  /// Record times for p_n(t) of the left state; empty skips the trace.
  std::vector<double> trace_times;
  int trace_levels = 3;
};

/// Single-particle report for psi_L and psi_R of the first node, with F.
inline FidelityReport transport_report(const SpatialGrid& grid, const ControlSequence& seq,
                                       const ReportOptions& opt = {}) {
  const auto loc = localized_states(grid, seq.front());
  const auto left = evolve(loc.left, seq).final_state;
  const auto right = evolve(loc.right, seq).final_state;
  FidelityReport r;
  r.alphas = {"L", "R"};
  r.f = {populations(left, seq.back(), opt.levels), populations(right, seq.back(), opt.levels)};
  const auto fin = lowest_eigenstates(assemble_hamiltonian(grid, seq.back()), 2);
  r.F = noninteracting_fidelity(left, right, fin[0].state, fin[1].state);
  if (!opt.trace_times.empty()) {
    r.p_trace = projection_trace(seq, loc.left, opt.trace_times, opt.trace_levels);
  }
  return r;
}

/// F_int for seq under interaction ip.
inline double interacting_fidelity(const SpatialGrid& grid, const ControlSequence& seq,
                                   const InteractionParams& ip,
                                   const TwoParticleEvolveOptions& opt = {}) {
  const auto ends = two_particle_endpoints(grid, seq.front(), seq.back(), ip);
  const auto run = evolve_two_particle(ends.initial, seq, ip, {}, opt);
  return two_particle_fidelity(run.final_state, ends.target);
}

struct ScanArgmax {
  std::size_t index = 0;
  double value = 0.0;
  double population = 0.0;
};

struct ScanResult {
  std::string variable;
  std::vector<double> values;
  std::vector<FidelityReport> reports;
  /// Maximum of f_level^alpha over the scan.
  ScanArgmax argmax;
  std::size_t alpha = 0;
  std::size_t level = 1;
};

using SequenceFamily = std::function<ControlSequence(double)>;

/// Transport reports for family(v) over strictly increasing values.
inline ScanResult scan(const std::string& variable, std::span<const double> values,
                       const SequenceFamily& family, const SpatialGrid& grid,
                       const ReportOptions& opt = {}, std::size_t alpha = 0,
                       std::size_t level = 1) {
  if (values.empty()) throw Error(ErrorCode::invalid_parameters, "scan needs at least one value");
  for (std::size_t i = 1; i < values.size(); ++i) {
    if (!(values[i] > values[i - 1])) {
      throw Error(ErrorCode::invalid_parameters, "scan values must be strictly increasing");
    }
  }
  if (!(level < static_cast<std::size_t>(opt.levels)) || alpha > 1) {
    throw Error(ErrorCode::invalid_parameters, "argmax level or alpha outside the report");
  }
  ScanResult out{variable, {values.begin(), values.end()}, {}, {}, alpha, level};
  for (std::size_t i = 0; i < values.size(); ++i) {
    out.reports.push_back(transport_report(grid, family(values[i]), opt));
    const double f = out.reports.back().population(alpha, level);
    if (i == 0 || f > out.argmax.population) out.argmax = {i, values[i], f};
  }
  return out;
}

/// Duration scan: family(T) for each T (ms).
inline ScanResult scan_duration(const SequenceFamily& family, std::span<const double> durations,
                                const SpatialGrid& grid, const ReportOptions& opt = {}) {
  for (const double t : durations) {
    if (!(t > 0.0)) throw Error(ErrorCode::invalid_duration, "scan durations must be positive");
  }
  return scan("T_ms", durations, family, grid, opt);
}

/// Tilt scan: family(theta_b) at fixed duration; argmax of f_1^L.
inline ScanResult scan_theta(const SequenceFamily& family, std::span<const double> thetas,
                             const SpatialGrid& grid, const ReportOptions& opt = {}) {
  return scan("theta_b_rad", thetas, family, grid, opt);
}

/// Measured populations of one alpha along a scan: columns f_0 .. f_{k-1}.
struct MeasuredScan {
  std::vector<double> values;
  std::vector<std::vector<double>> populations;
};

/// Tabular text: header line, then "value f0 f1 ..." rows.
inline MeasuredScan read_measured_scan(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::io_error, "empty measurement stream");
  MeasuredScan m;
  std::size_t width = 0;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double v;
    if (!(ls >> v)) throw Error(ErrorCode::io_error, "malformed measurement row: " + line);
    std::vector<double> row;
    for (double f; ls >> f;) row.push_back(f);
    if (row.empty() || (width != 0 && row.size() != width)) {
      throw Error(ErrorCode::io_error, "measurement rows differ in width");
    }
    width = row.size();
    m.values.push_back(v);
    m.populations.push_back(std::move(row));
  }
  return m;
}

/// Root-mean-square difference of populations over every state and point.
/// The model is read at value + offset, interpolated linearly between its
/// scan points.
inline double rms_deviation(const ScanResult& model, const MeasuredScan& data, double offset = 0.0) {
  if (data.values.empty() || data.values.size() != data.populations.size()) {
    throw Error(ErrorCode::mismatched_points, "measurement table is empty or ragged");
  }
  const auto& xs = model.values;
  const double tol = 1e-9 * std::max(1.0, std::abs(xs.back() - xs.front()));
  double sum = 0.0;
  std::size_t terms = 0;
  for (std::size_t p = 0; p < data.values.size(); ++p) {
    const double x = data.values[p] + offset;
    if (x < xs.front() - tol || x > xs.back() + tol) {
      throw Error(ErrorCode::mismatched_points, "measurement point outside the model scan");
    }
    std::size_t hi = std::lower_bound(xs.begin(), xs.end(), x - tol) - xs.begin();
    hi = std::min(hi, xs.size() - 1);
    std::size_t lo = hi;
    double w = 0.0;
    if (std::abs(xs[hi] - x) > tol) {
      lo = hi - 1;
      w = (x - xs[lo]) / (xs[hi] - xs[lo]);
    }
    const auto& row = data.populations[p];
    const auto& flo = model.reports[lo].f.at(model.alpha);
    const auto& fhi = model.reports[hi].f.at(model.alpha);
    if (row.size() > flo.size()) {
      throw Error(ErrorCode::mismatched_points, "measurement has more states than the model");
    }
    for (std::size_t n = 0; n < row.size(); ++n) {
      const double mv = (1.0 - w) * flo[n] + w * fhi[n];
      sum += (mv - row[n]) * (mv - row[n]);
      ++terms;
    }
  }
  return std::sqrt(sum / terms);
}

struct OffsetFit {
  double offset = 0.0;
  double rms = 0.0;
};

/// Offset among the candidates with the lowest rms deviation. Candidates that
/// move a measurement point outside the model scan are skipped.
inline OffsetFit best_offset(const ScanResult& model, const MeasuredScan& data,
                             std::span<const double> offsets) {
  if (offsets.empty()) throw Error(ErrorCode::invalid_parameters, "no candidate offsets");
  std::optional<OffsetFit> best;
  for (const double off : offsets) {
    double r = 0.0;
    try {
      r = rms_deviation(model, data, off);
    } catch (const Error& e) {
      if (e.code() != ErrorCode::mismatched_points) throw;
      continue;
    }
    if (!best || r < best->rms) best = OffsetFit{off, r};
  }
  if (!best) throw Error(ErrorCode::mismatched_points, "no candidate offset keeps the data inside the scan");
  return *best;
}

}  // namespace dwt
