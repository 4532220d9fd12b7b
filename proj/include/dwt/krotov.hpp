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
#include <array>
#include <cmath>
#include <complex>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/lattice.hpp"
#include "dwt/propagate1d.hpp"
#include "dwt/propagate2d.hpp"
#include "dwt/units.hpp"

namespace dwt {

/// One state-transfer objective: maximize |<target|U|initial>|^2.
template <typename State>
struct TransferObjective {
  State initial;
  State target;
  std::string label;
};

/// Step-size control shared by both optimizers.
struct KrotovTuning {
  /// Cap on the largest control change of the first iteration; sets the
  /// initial multiplier on lambda when the raw update is larger. Zero keeps
  /// the multiplier at 1.
  double initial_step = 0.02;
  /// Lambda multiplier factors after an accepted or rejected step.
  double accept_factor = 1.0 / 1.5;
  double reject_factor = 2.0;
  int max_backtracks = 40;
  /// Allowed decrease of the combined fidelity before a step is rejected.
  double slack = 1e-9;
};

template <typename State>
struct BasicControlProblem {
  BasicControlProblem(std::vector<TransferObjective<State>> objectives_, ControlSequence guess_)
      : objectives(std::move(objectives_)), guess(std::move(guess_)) {}

  std::vector<TransferObjective<State>> objectives;
  ControlSequence guess;
  std::vector<Control> active_controls = {Control::beta, Control::theta};
  /// Update weight lambda, indexed by Control.
  std::array<double, 3> step_weight = {1.0, 1.0, 1.0};
  int max_iterations = 2000;
  /// Stop once every objective reaches this fidelity.
  double stop_fidelity = 0.99;
  KrotovTuning tuning;
};

using ControlProblem = BasicControlProblem<WaveFn1D>;
using TwoParticleProblem = BasicControlProblem<WaveFn2D>;

struct IterationRecord {
  int iteration = 0;
  std::vector<double> fidelities;
  /// Sum over objectives.
  double combined = 0.0;
  /// Multiplier applied to every lambda for the accepted step.
  double lambda_scale = 1.0;
  /// Rejected trial steps before this one was accepted.
  int backtracks = 0;
};

struct OptimizationTrace {
  std::vector<std::string> labels;
  std::vector<IterationRecord> records;
  ControlSequence final_sequence;
  bool reached_target = false;
  /// True when backtracking ran out before any improvement was found.
  bool stalled = false;
  int rejected_steps = 0;
};

/// Fidelities of all objectives and the exact derivative of their sum with
/// respect to every control sample, for the discrete propagator in use.
struct FidelityGradient {
  std::vector<double> fidelities;
  /// derivative[c][j] = d(sum F) / d u_c(t_j), indexed by Control.
  std::array<std::vector<double>, 3> derivative;
  double dt = 0.0;

  double combined() const {
    double s = 0.0;
    for (const double f : fidelities) s += f;
    return s;
  }

  /// Sum over objectives of Im<chi(t_j)|dH/du|psi(t_j)>: the derivative per
  /// unit of time-integrated control change, 4 pi dt in kHz ms.
  std::vector<double> direction(Control c) const {
    auto d = derivative[static_cast<int>(c)];
    for (auto& v : d) v /= 4.0 * units::pi * dt;
    return d;
  }
};

namespace detail {

inline std::vector<cplx> interior_copy(const WaveFn1D& psi) {
  const auto in = psi.interior();
  return {in.begin(), in.end()};
}

inline std::vector<cplx> interior_copy(const WaveFn2D& psi) { return pack_interior(psi); }

inline cplx weighted_overlap(std::span<const cplx> a, std::span<const cplx> b, double measure) {
  cplx s{};
  for (std::size_t k = 0; k < a.size(); ++k) s += std::conj(a[k]) * b[k];
  return s * measure;
}

inline double envelope(double t, double duration) {
  const double s = std::sin(units::pi * t / duration);
  return s * s;
}

// Forward propagation, adjoint sweep and update loop, generic over the
// propagator (Propagator1D or Propagator2D).
template <typename Prop>
class KrotovEngine {
 public:
  struct Packed {
    std::vector<cplx> initial, target;
  };

  KrotovEngine(Prop& prop, std::vector<Packed> objectives)
      : prop_(prop), objectives_(std::move(objectives)) {}

  std::vector<double> fidelities(const ControlSequence& seq) {
    finals_.resize(objectives_.size());
    std::vector<double> f(objectives_.size());
    for (std::size_t o = 0; o < objectives_.size(); ++o) {
      auto& x = finals_[o];
      x = objectives_[o].initial;
      for (int j = 0; j < seq.steps(); ++j) prop_.step(x, seq[j], seq[j + 1], seq.dt());
      f[o] = std::norm(weighted_overlap(objectives_[o].target, x, prop_.measure()));
    }
    return f;
  }

  // Requires fidelities(seq) to have been called for the same sequence.
  FidelityGradient gradient(const ControlSequence& seq, std::span<const Control> active,
                            std::vector<double> fidelities) {
    FidelityGradient g;
    g.fidelities = std::move(fidelities);
    g.dt = seq.dt();
    const int n = seq.steps();
    for (const Control c : active) g.derivative[static_cast<int>(c)].assign(n + 1, 0.0);
    const auto& sampler = prop_.sampler();
    const std::size_t m = sampler.size();
    std::vector<cplx> density(m);
    std::vector<double> dv(m);
    for (std::size_t o = 0; o < objectives_.size(); ++o) {
      std::vector<cplx> psi = finals_[o];
      const auto& tg = objectives_[o].target;
      const cplx ov = weighted_overlap(tg, psi, prop_.measure());
      std::vector<cplx> chi(tg.size());
      for (std::size_t k = 0; k < tg.size(); ++k) chi[k] = tg[k] * ov;
      for (int s = n - 1; s >= 0; --s) {
        std::size_t ref = 0;
        prop_.reverse(psi, chi, seq[s], seq[s + 1], seq.dt(), density, ref);
        cplx total{};
        for (const auto& d : density) total += d;
        for (const Control c : active) {
          auto& out = g.derivative[static_cast<int>(c)];
          for (const int node : {s, s + 1}) {
            sampler.derivative(seq[node], c, dv);
            double acc = 0.0;
            for (std::size_t k = 0; k < m; ++k) acc += dv[k] * std::imag(density[k]);
            // The energy reference follows the potential minimum.
            acc -= dv[ref] * std::imag(total);
            out[node] += acc;
          }
        }
      }
    }
    return g;
  }

 private:
  Prop& prop_;
  std::vector<Packed> objectives_;
  std::vector<std::vector<cplx>> finals_;
};

inline ControlSequence apply_update(const ControlSequence& seq, std::span<const Control> active,
                                    const std::array<std::vector<double>, 3>& step,
                                    double scale) {
  auto samples = seq.samples();
  for (const Control c : active) {
    const auto& d = step[static_cast<int>(c)];
    for (std::size_t j = 0; j < samples.size(); ++j) component(samples[j], c) += scale * d[j];
  }
  for (auto& p : samples) {
    p.v0 = std::max(p.v0, 0.0);
    p.beta = std::clamp(p.beta, 0.0, units::pi);
  }
  return ControlSequence(seq.duration(), std::move(samples));
}

template <typename State>
void validate_problem(const BasicControlProblem<State>& problem) {
  if (problem.objectives.empty()) {
    throw Error(ErrorCode::invalid_parameters, "optimization needs at least one objective");
  }
  if (problem.active_controls.empty()) {
    throw Error(ErrorCode::invalid_parameters, "no active controls");
  }
  for (const Control c : problem.active_controls) {
    if (!(problem.step_weight[static_cast<int>(c)] > 0.0)) {
      throw Error(ErrorCode::invalid_parameters, "step weight must be positive for active controls");
    }
  }
  for (const auto& o : problem.objectives) {
    require_normalized(o.initial.norm_squared());
    require_normalized(o.target.norm_squared());
  }
  if (problem.max_iterations < 0) {
    throw Error(ErrorCode::invalid_parameters, "iteration cap must be non-negative");
  }
}

template <typename Prop, typename State>
OptimizationTrace run_krotov(Prop& prop, const BasicControlProblem<State>& problem) {
  validate_problem(problem);
  std::vector<typename KrotovEngine<Prop>::Packed> packed;
  OptimizationTrace trace{{}, {}, problem.guess};
  for (const auto& o : problem.objectives) {
    packed.push_back({interior_copy(o.initial), interior_copy(o.target)});
    trace.labels.push_back(o.label);
  }
  KrotovEngine<Prop> engine(prop, std::move(packed));
  const auto& tune = problem.tuning;
  const auto& active = problem.active_controls;
  auto sum = [](const std::vector<double>& f) {
    double s = 0.0;
    for (const double v : f) s += v;
    return s;
  };
  auto done = [&](const std::vector<double>& f) {
    return std::all_of(f.begin(), f.end(), [&](double v) { return v >= problem.stop_fidelity; });
  };

  ControlSequence seq = problem.guess;
  std::vector<double> fid = engine.fidelities(seq);
  trace.records.push_back({0, fid, sum(fid), 1.0, 0});
  double scale = 0.0;
  for (int it = 1; it <= problem.max_iterations && !done(fid); ++it) {
    const auto g = engine.gradient(seq, active, fid);
    std::array<std::vector<double>, 3> step;
    double largest = 0.0;
    for (const Control c : active) {
      auto d = g.direction(c);
      const double lambda = problem.step_weight[static_cast<int>(c)];
      for (int j = 0; j <= seq.steps(); ++j) {
        d[j] *= envelope(seq.time(j), seq.duration()) / lambda;
        largest = std::max(largest, std::abs(d[j]));
      }
      step[static_cast<int>(c)] = std::move(d);
    }
    if (largest == 0.0) break;
    if (scale == 0.0) scale = tune.initial_step > 0.0 ? std::min(1.0, tune.initial_step / largest) : 1.0;
    const double before = sum(fid);
    bool accepted = false;
    int backtracks = 0;
    for (; backtracks <= tune.max_backtracks; ++backtracks) {
      ControlSequence trial = apply_update(seq, active, step, scale);
      // Evaluating the trial also leaves its final states in the engine.
      auto trial_fid = engine.fidelities(trial);
      if (sum(trial_fid) >= before - tune.slack) {
        seq = std::move(trial);
        fid = std::move(trial_fid);
        accepted = true;
        break;
      }
      ++trace.rejected_steps;
      scale /= tune.reject_factor;
    }
    if (!accepted) {
      // Restore the engine state for the unchanged sequence.
      fid = engine.fidelities(seq);
      trace.stalled = true;
      break;
    }
    trace.records.push_back({it, fid, sum(fid), 1.0 / scale, backtracks});
    scale /= tune.accept_factor;
  }
  trace.final_sequence = seq;
  trace.reached_target = done(fid);
  return trace;
}

}  // namespace detail

/// Exact gradient of the summed single-particle fidelities for the
/// Crank-Nicolson discretization of seq.
inline FidelityGradient fidelity_gradient(const std::vector<TransferObjective<WaveFn1D>>& objectives,
                                          const ControlSequence& seq,
                                          std::span<const Control> active = all_controls) {
  if (objectives.empty()) throw Error(ErrorCode::invalid_parameters, "no objectives");
  Propagator1D prop(objectives.front().initial.grid());
  std::vector<detail::KrotovEngine<Propagator1D>::Packed> packed;
  for (const auto& o : objectives) {
    packed.push_back({detail::interior_copy(o.initial), detail::interior_copy(o.target)});
  }
  detail::KrotovEngine<Propagator1D> engine(prop, std::move(packed));
  return engine.gradient(seq, active, engine.fidelities(seq));
}

/// Same for one two-particle objective under the alternating-direction scheme.
inline FidelityGradient fidelity_gradient(const TransferObjective<WaveFn2D>& objective,
                                          const ControlSequence& seq, const InteractionParams& ip,
                                          std::span<const Control> active = all_controls) {
  Propagator2D prop(objective.initial.grid(), ip);
  detail::KrotovEngine<Propagator2D> engine(
      prop, {{detail::pack_interior(objective.initial), detail::pack_interior(objective.target)}});
  return engine.gradient(seq, active, engine.fidelities(seq));
}

/// Gradient ascent on the summed fidelities with the update
/// u += s(t) / (lambda m) * sum Im<chi|dH/du|psi>, s(t) = sin^2(pi t / T),
/// where the multiplier m grows on every rejected step and shrinks after
/// accepted ones.
inline OptimizationTrace optimize(const ControlProblem& problem) {
  if (problem.objectives.empty()) {
    throw Error(ErrorCode::invalid_parameters, "optimization needs at least one objective");
  }
  Propagator1D prop(problem.objectives.front().initial.grid());
  return detail::run_krotov(prop, problem);
}

/// Same loop for one two-particle objective propagated with interactions.
inline OptimizationTrace optimize_with_interactions(const TwoParticleProblem& problem,
                                                    const InteractionParams& ip) {
  if (problem.objectives.size() != 1) {
    throw Error(ErrorCode::invalid_parameters, "interacting optimization takes one objective");
  }
  Propagator2D prop(problem.objectives.front().initial.grid(), ip);
  return detail::run_krotov(prop, problem);
}

/// Tabular trace: iter, one fidelity column per objective, combined.
inline void write_trace(std::ostream& os, const OptimizationTrace& trace) {
  os << "iter";
  for (const auto& l : trace.labels) os << " fidelity_" << l;
  os << " fidelity_combined\n";
  os.precision(12);
  for (const auto& r : trace.records) {
    os << r.iteration;
    for (const double f : r.fidelities) os << ' ' << f;
    os << ' ' << r.combined << '\n';
  }
}

}  // namespace dwt
