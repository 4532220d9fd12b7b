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

#include <gtest/gtest.h>

#include "dwt/spectrum.hpp"
#include "dwt/units.hpp"

namespace dwt {
namespace {

constexpr double pi = std::numbers::pi;

TEST(MakeGrid, UnitIntervalSpacing) {
  const auto g = make_grid(0.0, 1.0, 10);
  EXPECT_DOUBLE_EQ(g.dx(), 0.1);
  EXPECT_EQ(g.points(), 11);
  EXPECT_EQ(g.interior(), 9);
  EXPECT_DOUBLE_EQ(g.x(0), 0.0);
  EXPECT_DOUBLE_EQ(g.x(10), 1.0);
}

TEST(MakeGrid, ProductionSpacing) {
  const auto g = make_grid(-pi / 2, 3 * pi / 2, 1000);
  EXPECT_NEAR(g.dx(), 2 * pi / 1000, 1e-15);
  EXPECT_NEAR(default_grid().dx(), 2 * pi / 1000, 1e-15);
}

TEST(MakeGrid, RejectsBadDomains) {
  auto code = [](auto f) {
    try {
      f();
    } catch (const Error& e) {
      return e.code();
    }
    return ErrorCode::io_error;
  };
  EXPECT_EQ(code([] { make_grid(0.0, 1.0, 4); }), ErrorCode::invalid_domain);
  EXPECT_EQ(code([] { make_grid(0.0, 1.0, 7); }), ErrorCode::invalid_domain);
  EXPECT_EQ(code([] { make_grid(1.0, 1.0, 16); }), ErrorCode::invalid_domain);
  EXPECT_EQ(code([] { make_grid(2.0, 1.0, 16); }), ErrorCode::invalid_domain);
  EXPECT_NO_THROW(make_grid(0.0, 1.0, 8));
}

TEST(InnerProduct, NormalizedStateHasUnitNorm) {
  const auto g = make_grid(0.0, 1.0, 200);
  auto psi = WaveFn1D::sampled(g, [](double x) { return cplx(x * (1 - x), std::sin(3 * x)); });
  psi.normalize();
  const cplx s = inner_product(psi, psi);
  EXPECT_NEAR(s.real(), 1.0, 1e-10);
  EXPECT_NEAR(s.imag(), 0.0, 1e-10);
}

TEST(InnerProduct, ConjugateSymmetric) {
  const auto g = make_grid(-1.0, 2.0, 64);
  const auto a = WaveFn1D::sampled(g, [](double x) { return cplx(std::cos(x), x); });
  const auto b = WaveFn1D::sampled(g, [](double x) { return cplx(x * x, -std::sin(2 * x)); });
  const cplx ab = inner_product(a, b), ba = inner_product(b, a);
  EXPECT_NEAR(std::abs(ab - std::conj(ba)), 0.0, 1e-14);
}

TEST(InnerProduct, SineModesOrthogonal) {
  const auto g = make_grid(0.0, 1.0, 1000);
  const auto a = WaveFn1D::sampled(g, [](double x) { return std::sin(pi * x); });
  const auto b = WaveFn1D::sampled(g, [](double x) { return std::sin(2 * pi * x); });
  EXPECT_LT(std::abs(inner_product(a, b)), 1e-6);
}

TEST(InnerProduct, BoxEigenstatesOrthogonal) {
  const auto g = make_grid(0.0, 1.0, 300);
  const auto h = assemble_hamiltonian(g, std::vector<double>(g.points(), 0.0));
  const auto pairs = lowest_eigenstates(h, 2);
  EXPECT_LT(std::abs(inner_product(pairs[0].state, pairs[1].state)), 1e-8);
}

TEST(InnerProduct, GridMismatchRejected) {
  const WaveFn1D a(make_grid(0.0, 1.0, 16));
  const WaveFn1D b(make_grid(0.0, 1.0, 17));
  try {
    inner_product(a, b);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::grid_mismatch);
  }
}

TEST(Units, EnergyRoundTripIsIdentity) {
  for (const double e : {0.0, 1e-3, 3.5, 123.456, -42.0}) {
    EXPECT_EQ(units::from_recoil(units::to_recoil(e)), e);
  }
}

TEST(Units, KineticCoefficientOnKxGrid) {
  EXPECT_DOUBLE_EQ(units::epsilon_khz, 3.5 / (4 * pi * pi));
  EXPECT_DOUBLE_EQ(units::kinetic_coefficient_khz, units::recoil_khz);
}

// Box ground state against its analytic value: halving dx cuts the error by 4.
TEST(GridRefinement, BoxGroundStateConvergesQuadratically) {
  const double length = 2.0;
  const double exact = units::kinetic_coefficient_khz * (pi / length) * (pi / length);
  auto error = [&](int n) {
    const auto g = make_grid(0.0, length, n);
    const auto h = assemble_hamiltonian(g, std::vector<double>(g.points(), 0.0));
    return std::abs(lowest_eigenstates(h, 1)[0].energy - exact);
  };
  const double ratio = error(100) / error(200);
  EXPECT_NEAR(ratio, 4.0, 0.1);
}

TEST(WaveFn2D, SymmetrizedProductIsBosonic) {
  const auto g = make_grid(0.0, 1.0, 24);
  const auto a = WaveFn1D::sampled(g, [](double x) { return std::sin(pi * x); });
  const auto b = WaveFn1D::sampled(g, [](double x) { return cplx(std::sin(2 * pi * x), x); });
  auto psi = WaveFn2D::symmetrized_product(a, b);
  psi.normalize();
  EXPECT_TRUE(psi.bosonic());
  EXPECT_LE(psi.symmetry_defect(), 1e-14);
  EXPECT_NEAR(psi.norm_squared(), 1.0, 1e-12);
}

}  // namespace
}  // namespace dwt
