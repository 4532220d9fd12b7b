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

#include <array>
#include <chrono>
#include <cstdint>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "dwt/analysis.hpp"
#include "dwt/propagate1d.hpp"
#include "dwt/spectrum.hpp"

namespace dwt {
namespace {

constexpr double pi = std::numbers::pi;
using CVec = Eigen::VectorXcd;

CVec to_vec(const WaveFn1D& psi) {
  const auto in = psi.interior();
  return Eigen::Map<const CVec>(in.data(), static_cast<Eigen::Index>(in.size()));
}

Eigen::MatrixXd dense(const TridiagonalOperator& h) {
  const auto d = h.interior_diagonal();
  const int m = static_cast<int>(d.size());
  Eigen::MatrixXd a = Eigen::MatrixXd::Zero(m, m);
  for (int i = 0; i < m; ++i) {
    a(i, i) = d[i];
    if (i + 1 < m) a(i, i + 1) = a(i + 1, i) = h.off_diagonal;
  }
  return a;
}

// exp(-2 pi i H t) by diagonalization.
CVec exact_step(const Eigen::MatrixXd& h, const CVec& x, double t) {
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(h);
  const Eigen::MatrixXcd v = es.eigenvectors().cast<cplx>();
  CVec c = v.adjoint() * x;
  for (Eigen::Index i = 0; i < c.size(); ++i) c(i) *= std::polar(1.0, -2 * pi * es.eigenvalues()(i) * t);
  return v * c;
}

double distance_up_to_phase(const WaveFn1D& a, const WaveFn1D& b) {
  const cplx ov = inner_product(a, b);
  const cplx ph = ov / std::abs(ov);
  double s = 0;
  for (int k = 0; k <= a.grid().n(); ++k) s += std::norm(a[k] * ph - b[k]);
  return std::sqrt(s * a.grid().dx());
}

struct OracleErrors {
  double averaged = 0.0;
  double time_sliced = 0.0;
};

// Random three-slice sequence on the 32-point grid, started from a mixture of
// the three lowest eigenstates (weights w) of the first node.
OracleErrors dense_oracle_errors(double dt, std::array<cplx, 3> w, std::uint64_t seed) {
  const auto grid = default_grid(32);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<LatticeParams> nodes(4);
  for (auto& p : nodes) p = {60 + 60 * u(rng), 0.6 * pi * u(rng), -0.5 * pi + 0.1 * (u(rng) - 0.5)};
  const ControlSequence seq(3 * dt, nodes);
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(grid, nodes[0]), 3);
  WaveFn1D psi0(grid);
  for (int k = 0; k <= grid.n(); ++k) {
    for (int i = 0; i < 3; ++i) psi0[k] += w[i] * pairs[i].state[k];
  }
  psi0.normalize();
  const CVec got = to_vec(evolve(psi0, seq).final_state);

  // Exact exponentials of the slice-averaged Hamiltonians, and 200 midpoint
  // substeps per slice of the linearly varying H.
  CVec a = to_vec(psi0), b = a;
  for (int j = 0; j < 3; ++j) {
    const Eigen::MatrixXd h0 = dense(assemble_hamiltonian(grid, nodes[j]));
    const Eigen::MatrixXd h1 = dense(assemble_hamiltonian(grid, nodes[j + 1]));
    a = exact_step(0.5 * (h0 + h1), a, dt);
    constexpr int sub = 200;
    for (int s = 0; s < sub; ++s) {
      const double x = (s + 0.5) / sub;
      b = exact_step((1 - x) * h0 + x * h1, b, dt / sub);
    }
  }
  const double m = std::sqrt(grid.dx());
  return {(got - a).norm() * m, (got - b).norm() * m};
}

TEST(CnStep, MatchesDenseExponentialOnSmallGrid) {
  const auto start = std::chrono::steady_clock::now();
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const auto m = dense_oracle_errors(1e-5, {1.0, cplx(0.4, 0.3), 0.2}, seed);
    EXPECT_LT(m.averaged, 1e-6);
    EXPECT_LT(m.time_sliced, 1e-6);
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  EXPECT_LT(secs, 1.0);
}

// The remaining error is the Cayley phase error, third order per step.
TEST(CnStep, DenseOracleErrorIsThirdOrderPerStep) {
  const std::array<cplx, 3> w = {1.0, cplx(0.4, 0.3), 0.2};
  const double ratio = dense_oracle_errors(4e-5, w, 9).averaged / dense_oracle_errors(2e-5, w, 9).averaged;
  EXPECT_NEAR(ratio, 8.0, 0.5);
}

TEST(CnStep, StationaryStateOnlyPicksUpPhase) {
  const auto grid = default_grid(400);
  const LatticeParams p{100, 0.3, -0.474 * pi};
  const auto h = assemble_hamiltonian(grid, p);
  const auto phi = lowest_eigenstates(h, 1)[0];
  const double dt = 1e-5;
  const int m = 200;
  WaveFn1D psi = phi.state;
  for (int i = 0; i < m; ++i) psi = cn_step(psi, h, h, dt);
  const cplx ov = inner_product(phi.state, psi);
  EXPECT_NEAR(std::abs(ov), 1.0, 1e-10);
  const double want = std::remainder(-2 * pi * phi.energy * m * dt, 2 * pi);
  EXPECT_NEAR(std::remainder(std::arg(ov) - want, 2 * pi), 0.0, 1e-6);
}

TEST(CnStep, TinyStepIsIdentity) {
  const auto grid = default_grid(200);
  const auto h = assemble_hamiltonian(grid, LatticeParams{100, 0.3, -0.474 * pi});
  auto psi = WaveFn1D::sampled(grid, [](double x) { return cplx(std::exp(-x * x), 0.3 * x); });
  psi.normalize();
  const auto out = cn_step(psi, h, h, 1e-20);
  for (int k = 0; k <= grid.n(); ++k) EXPECT_LT(std::abs(out[k] - psi[k]), 1e-12);
}

TEST(CnStep, RejectsNegativeStep) {
  const auto grid = default_grid(64);
  const auto h = assemble_hamiltonian(grid, LatticeParams{1, 0, 0});
  EXPECT_THROW(cn_step(WaveFn1D(grid), h, h, -1e-3), Error);
}

// The explicit first-order scheme, kept only as a reference: it matches for
// small steps but its norm grows without bound.
TEST(ExplicitEulerReference, FirstOrderAndUnstable) {
  const auto grid = default_grid(64);
  const auto h = assemble_hamiltonian(grid, LatticeParams{100, 0.2, -0.48 * pi});
  auto psi0 = lowest_eigenstates(h, 1)[0].state;
  auto euler = [&](WaveFn1D psi, double dt, int steps) {
    for (int i = 0; i < steps; ++i) {
      const auto hp = h.apply(psi);
      for (int k = 1; k < grid.n(); ++k) psi[k] -= cplx(0, 2 * pi * dt) * hp[k];
    }
    return psi;
  };
  const auto fine = euler(psi0, 1e-8, 100);
  WaveFn1D cn = psi0;
  for (int i = 0; i < 100; ++i) cn = cn_step(cn, h, h, 1e-8);
  EXPECT_LT(distance_up_to_phase(fine, cn), 1e-6);
  EXPECT_GT(euler(psi0, 1e-4, 500).norm_squared(), 1.5);
}

TEST(Evolve, NormConservedEvenForHugeSteps) {
  const auto grid = default_grid(1000);
  const auto seq = preset_b(-0.474 * pi).build(0.5, 50);  // dt 100x the default
  const auto loc = localized_states(grid, seq.front());
  const auto run = evolve(loc.left, seq);
  EXPECT_LE(run.norm_drift, 1e-10);
  EXPECT_NEAR(run.final_state.norm_squared(), 1.0, 1e-10);
}

TEST(Evolve, BackwardStepsUndoForwardRun) {
  const auto grid = default_grid(300);
  const auto seq = preset_b(-0.474 * pi).build(0.15, 500);
  const auto loc = localized_states(grid, seq.front());
  auto psi = evolve(loc.left, seq).final_state;
  Propagator1D prop(grid);
  for (int j = seq.steps(); j-- > 0;) prop.step(psi.interior(), seq[j], seq[j + 1], -seq.dt());
  EXPECT_LT(distance_up_to_phase(psi, loc.left), 1e-10);
}

TEST(Evolve, TunnellingPeriodMatchesSplitting) {
  const auto grid = default_grid(600);
  const LatticeParams p{30, 0.25 * pi, -pi / 2};
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(grid, p), 2);
  const double split = pairs[1].energy - pairs[0].energy;
  const double period = 1.0 / split;
  const auto seq = make_linear_merge(period, p, p, 4000);
  const auto geo = well_geometry(p);
  const auto loc = localized_states(pairs[0], pairs[1], geo.barrier_x);
  std::vector<double> times;
  for (int i = 0; i <= 400; ++i) times.push_back(period * i / 400);
  const auto run = evolve(loc.left, seq, times);
  std::size_t imin = 0;
  double pmin = 2.0;
  for (std::size_t i = 0; i < run.trajectory.size(); ++i) {
    const double pl = probability_left_of(run.trajectory[i].state, geo.barrier_x);
    if (pl < pmin) pmin = pl, imin = i;
  }
  EXPECT_LT(pmin, 0.1);
  EXPECT_NEAR(2 * run.trajectory[imin].time / period, 1.0, 0.01);
  EXPECT_GT(probability_left_of(run.final_state, geo.barrier_x), 0.9);
}

TEST(Evolve, SecondOrderInTime) {
  const auto grid = default_grid(300);
  const RampPreset r = preset_b(-0.474 * pi);
  const auto psi0 = localized_states(grid, r.start()).left;
  auto final_for = [&](int steps) { return evolve(psi0, r.build(0.15, steps)).final_state; };
  const auto ref = final_for(1600);  // dt / 8 of the coarse run
  auto err = [&](int steps) {
    const auto f = final_for(steps);
    double s = 0;
    for (int k = 0; k <= grid.n(); ++k) s += std::norm(f[k] - ref[k]);
    return std::sqrt(s);
  };
  EXPECT_NEAR(err(200) / err(400), 4.0, 0.5);
}

TEST(Evolve, TiltedMergeReachesFirstExcitedState) {
  const auto grid = default_grid();
  const auto seq = preset_b(-0.474 * pi).build(0.5);
  const auto loc = localized_states(grid, seq.front());
  const auto f = populations(evolve(loc.left, seq).final_state, seq.back(), 3);
  EXPECT_NEAR(f[1], 0.95, 0.05);
}

TEST(Evolve, RecordsRequestedTimes) {
  const auto grid = default_grid(100);
  const auto seq = preset_b(-0.474 * pi).build(0.2, 100);
  const auto loc = localized_states(grid, seq.front());
  const std::vector<double> times = {0.0, 0.1, 0.2};
  const auto run = evolve(loc.left, seq, times);
  ASSERT_EQ(run.trajectory.size(), 3u);
  EXPECT_EQ(run.trajectory[0].time, 0.0);
  EXPECT_NEAR(run.trajectory[1].time, 0.1, 1e-12);
  EXPECT_EQ(run.trajectory[2].time, 0.2);
  EXPECT_LT(distance_up_to_phase(run.trajectory[2].state, run.final_state), 1e-15);
  std::ostringstream os;
  write_trajectory(os, run);
  EXPECT_EQ(os.str().rfind("t_ms x_k |psi|^2\n", 0), 0u);
  const std::vector<double> bad = {0.3};
  EXPECT_THROW(evolve(loc.left, seq, bad), Error);
}

TEST(Evolve, RequiresNormalizedInput) {
  const auto grid = default_grid(100);
  auto psi = WaveFn1D::sampled(grid, [](double x) { return std::cos(x) + 2; });
  const auto seq = preset_b(-0.474 * pi).build(0.2, 10);
  EXPECT_THROW(evolve(psi, seq), Error);
}

}  // namespace
}  // namespace dwt
