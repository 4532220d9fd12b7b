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

#include <cmath>
#include <numbers>
#include <random>

#include <Eigen/Dense>
#include <gtest/gtest.h>

#include "dwt/spectrum.hpp"

namespace dwt {
namespace {

constexpr double pi = std::numbers::pi;

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

std::pair<double, double> gaps(const std::vector<EigenPair>& e) {
  return {e[1].energy - e[0].energy, e[2].energy - e[1].energy};
}

TEST(AssembleHamiltonian, BoxGroundState) {
  const double c = 12.5, length = 3.0;
  const auto g = make_grid(0.0, length, 400);
  const auto h = assemble_hamiltonian(g, std::vector<double>(g.points(), c));
  const double e0 = lowest_eigenstates(h, 1)[0].energy;
  const double kinetic = units::kinetic_coefficient_khz * (pi / length) * (pi / length);
  EXPECT_NEAR((e0 - c) / kinetic, 1.0, 2 * g.dx() * g.dx());
}

TEST(AssembleHamiltonian, ConstantVectorSeesOnlyThePotential) {
  const auto g = make_grid(-2.0, 2.0, 64);
  const LatticeParams p{40.0, 0.7, -1.3};
  const auto h = assemble_hamiltonian(g, p);
  const auto one = WaveFn1D::sampled(g, [](double) { return 1.0; });
  const auto out = h.apply(one);
  for (int k = 2; k <= g.n() - 2; ++k) EXPECT_NEAR(out[k].real(), potential_1d(p, g.x(k)), 1e-9);
}

TEST(AssembleHamiltonian, ApproximatesContinuumOperator) {
  // Error of H f against V f - K f'' shrinks as dx^2.
  const LatticeParams p{20.0, 0.4, 0.3};
  auto error = [&](int n) {
    const auto g = make_grid(0.0, pi, n);
    const auto h = assemble_hamiltonian(g, p);
    const auto f = WaveFn1D::sampled(g, [](double x) { return std::sin(x) * std::sin(x); });
    const auto out = h.apply(f);
    double e = 0.0;
    for (int k = 1; k < g.n(); ++k) {
      const double x = g.x(k);
      const double exact = potential_1d(p, x) * std::sin(x) * std::sin(x) -
                           units::kinetic_coefficient_khz * 2.0 * std::cos(2 * x);
      e = std::max(e, std::abs(out[k].real() - exact));
    }
    return e;
  };
  EXPECT_NEAR(error(100) / error(200), 4.0, 0.2);
}

TEST(AssembleHamiltonian, Hermitian) {
  const auto g = make_grid(-pi, pi, 80);
  const auto h = assemble_hamiltonian(g, LatticeParams{60.0, 1.0, 0.2});
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n;
  const auto a = WaveFn1D::sampled(g, [&](double) { return cplx(n(rng), n(rng)); });
  const auto b = WaveFn1D::sampled(g, [&](double) { return cplx(n(rng), n(rng)); });
  const cplx lhs = inner_product(a, h.apply(b)), rhs = inner_product(h.apply(a), b);
  EXPECT_LT(std::abs(lhs - rhs), 1e-12 * std::abs(lhs));
}

TEST(LowestEigenstates, MatchesDenseOracle) {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const auto g = default_grid(200);
  for (int trial = 0; trial < 8; ++trial) {
    const LatticeParams p{200 * u(rng), pi * u(rng), 2 * pi * (u(rng) - 0.5)};
    const auto h = assemble_hamiltonian(g, p);
    const Eigen::VectorXd ref = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense(h)).eigenvalues();
    const auto pairs = lowest_eigenstates(h, 8);
    for (int i = 0; i < 8; ++i) {
      EXPECT_NEAR(pairs[i].energy, ref(i), 1e-8 * std::max(1.0, std::abs(ref(i)))) << "level " << i;
    }
  }
}

TEST(LowestEigenstates, ResidualAndOrthonormality) {
  const auto g = default_grid(1000);
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(g, LatticeParams{100, 0.0, -pi / 2}), 6);
  const auto h = assemble_hamiltonian(g, LatticeParams{100, 0.0, -pi / 2});
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    EXPECT_LE(pairs[i].residual, 1e-8);
    const auto hp = h.apply(pairs[i].state);
    double r = 0, s = 0;
    for (int k = 1; k < g.n(); ++k) {
      r += std::norm(hp[k] - pairs[i].energy * pairs[i].state[k]);
      s += std::norm(hp[k]);
    }
    EXPECT_LE(std::sqrt(r / s), 1e-8);
    for (std::size_t j = 0; j < pairs.size(); ++j) {
      const cplx gram = inner_product(pairs[i].state, pairs[j].state);
      EXPECT_NEAR(std::abs(gram - (i == j ? 1.0 : 0.0)), 0.0, 1e-8);
    }
    // Real symmetric problem: real eigenvectors.
    for (int k = 0; k <= g.n(); ++k) EXPECT_LE(std::abs(pairs[i].state[k].imag()), 1e-8);
  }
}

TEST(LowestEigenstates, AscendingAndTargeted) {
  const auto h = assemble_hamiltonian(default_grid(400), LatticeParams{100, 0.5, -0.47 * pi});
  const auto all = lowest_eigenstates(h, 10);
  for (std::size_t i = 1; i < all.size(); ++i) EXPECT_GT(all[i].energy, all[i - 1].energy);
  const double target = 0.5 * (all[5].energy + all[6].energy) + 1e-3;
  const auto near = lowest_eigenstates(h, 2, target);
  ASSERT_EQ(near.size(), 2u);
  EXPECT_NEAR(near[0].energy, all[5].energy, 1e-9 * std::abs(all[5].energy));
  EXPECT_NEAR(near[1].energy, all[6].energy, 1e-9 * std::abs(all[6].energy));
}

TEST(LowestEigenstates, DeepSingleWellIsNearlyHarmonic) {
  const auto e = lowest_eigenstates(assemble_hamiltonian(default_grid(), LatticeParams{1000, pi, 0.0}), 3);
  const auto [d1, d2] = gaps(e);
  EXPECT_LT(std::abs(d1 - d2) / d1, 0.02);
}

TEST(LowestEigenstates, SymmetricDoubleWellHasDoublets) {
  const auto e = lowest_eigenstates(assemble_hamiltonian(default_grid(), LatticeParams{100, 0.0, -pi / 2}), 4);
  const auto [d1, d2] = gaps(e);
  EXPECT_LT(d1 / d2, 0.05);
  EXPECT_LT((e[3].energy - e[2].energy) / d2, 0.05);
}

TEST(LowestEigenstates, ConvergesAsDxSquared) {
  const LatticeParams p{100, 0.3, -0.474 * pi};
  auto e0 = [&](int n) { return lowest_eigenstates(assemble_hamiltonian(default_grid(n), p), 1)[0].energy; };
  const double fine = e0(1600);
  const double ratio = (e0(200) - fine) / (e0(400) - fine);
  EXPECT_NEAR(ratio, 4.0, 0.5);
}

// Second differences underestimate the kinetic energy, so the ground energy
// approaches the fine-grid value monotonically from below.
TEST(LowestEigenstates, MonotoneInResolution) {
  const LatticeParams p{100, 0.3, -0.474 * pi};
  double last = -1e300;
  for (const int n : {50, 100, 200, 400, 800, 1600}) {
    const double e = lowest_eigenstates(assemble_hamiltonian(default_grid(n), p), 1)[0].energy;
    EXPECT_GT(e, last);
    last = e;
  }
}

TEST(LowestEigenstates, RejectsBadCount) {
  const auto h = assemble_hamiltonian(make_grid(0, 1, 16), std::vector<double>(17, 0.0));
  EXPECT_THROW(lowest_eigenstates(h, 0), Error);
  EXPECT_THROW(lowest_eigenstates(h, 16), Error);
}

TEST(LocalizedStates, OrthonormalAndLocalized) {
  const auto g = default_grid();
  const LatticeParams p{100, 0.0, -pi / 2};
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(g, p), 2);
  const auto geo = well_geometry(p);
  const auto loc = localized_states(pairs[0], pairs[1], geo.barrier_x);
  EXPECT_LT(std::abs(inner_product(loc.left, loc.right)), 1e-10);
  EXPECT_NEAR(loc.left.norm_squared(), 1.0, 1e-10);
  EXPECT_GE(probability_left_of(loc.left, geo.barrier_x), 0.9);
  EXPECT_LE(probability_left_of(loc.right, geo.barrier_x), 0.1);
  // Same two-dimensional projector.
  double worst = 0.0;
  for (int i = 0; i <= g.n(); i += 7) {
    for (int j = 0; j <= g.n(); j += 7) {
      const cplx a = loc.left[i] * std::conj(loc.left[j]) + loc.right[i] * std::conj(loc.right[j]);
      const cplx b = pairs[0].state[i] * std::conj(pairs[0].state[j]) +
                     pairs[1].state[i] * std::conj(pairs[1].state[j]);
      worst = std::max(worst, std::abs(a - b));
    }
  }
  EXPECT_LT(worst, 1e-10);
}

TEST(LocalizedStates, SingleWellRejected) {
  try {
    localized_states(default_grid(200), LatticeParams{100, pi, 0.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::delocalization_failure);
  }
}

TEST(InstantaneousSpectrum, MergeRampEndpoints) {
  const auto seq = preset_b(-0.474 * pi).build(0.5, 100);
  const std::vector<double> times = {0.0, 0.5};
  const auto tr = instantaneous_spectrum(seq, default_grid(), times, 6);
  ASSERT_EQ(tr.energies.size(), 2u);
  const auto& e0 = tr.energies[0];
  EXPECT_LT((e0[1] - e0[0]) / (e0[2] - e0[1]), 0.05);
  const auto& e1 = tr.energies[1];
  const double a = e1[1] - e1[0], b = e1[2] - e1[1];
  EXPECT_LT(std::abs(a - b) / a, 0.1);
}

TEST(InstantaneousSpectrum, ConstantSequenceIsConstant) {
  const LatticeParams p{80, 0.2, -0.48 * pi};
  const auto seq = make_linear_merge(0.3, p, p, 30);
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(0.03 * i);
  const auto tr = instantaneous_spectrum(seq, default_grid(300), times, 4);
  for (const auto& row : tr.energies) {
    for (int n = 0; n < 4; ++n) EXPECT_NEAR(row[n], tr.energies[0][n], 1e-10);
  }
}

}  // namespace
}  // namespace dwt
