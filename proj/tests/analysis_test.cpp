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
#include <sstream>

#include <gtest/gtest.h>

#include "dwt/analysis.hpp"

namespace dwt {
namespace {

constexpr double pi = std::numbers::pi;

ControlSequence merge_at(double theta, double T = 0.5, int steps = 2000) {
  return preset_b(theta).build(T, steps);
}

TEST(Populations, EigenstateProjectsOnItself) {
  const auto g = default_grid(400);
  const LatticeParams p{100, 0.75 * pi, -0.474 * pi};
  const auto pairs = lowest_eigenstates(assemble_hamiltonian(g, p), 2);
  const auto f = populations(pairs[1].state, p, 4);
  ASSERT_EQ(f.size(), 4u);
  EXPECT_NEAR(f[1], 1.0, 1e-10);
  EXPECT_NEAR(f[0] + f[2] + f[3], 0.0, 1e-10);
}

TEST(Populations, CompleteOverManyLevels) {
  const auto g = default_grid(400);
  const auto r = evolve(localized_states(g, merge_at(-0.474 * pi).front()).left, merge_at(-0.474 * pi));
  const auto f = populations(r.final_state, merge_at(-0.474 * pi).back(), 30);
  double s = 0;
  for (const double v : f) s += v;
  EXPECT_NEAR(s, 1.0, 1e-6);
}

TEST(ProjectionTrace, EndpointsAndInitialSplit) {
  const auto g = default_grid(400);
  const auto seq = merge_at(-0.474 * pi);
  const std::vector<double> times = {0.0, 0.25, 0.5};
  const auto tr = projection_trace(seq, localized_states(g, seq.front()).left, times, 3);
  ASSERT_EQ(tr.p.size(), 3u);
  // A localized state is an even mixture of the split doublet.
  EXPECT_NEAR(tr.p[0][0], 0.5, 1e-6);
  EXPECT_NEAR(tr.p[0][1], 0.5, 1e-6);
  const auto rep = transport_report(g, seq, {3, {}, 3});
  for (int n = 0; n < 3; ++n) EXPECT_NEAR(tr.p[2][n], rep.population(0, n), 1e-10);
}

// Starts where the tilt has already resolved the doublet; at beta = 0 its
// splitting is far too small for any ramp of a few ms to follow.
TEST(ProjectionTrace, SlowRampFollowsEigenstates) {
  const auto g = default_grid(300);
  const double th = -0.474 * pi;
  const auto seq = make_linear_merge(5.0, {100, 0.15 * pi, th}, {100, 0.75 * pi, th}, 20000);
  const auto ev = lowest_eigenstates(assemble_hamiltonian(g, seq.front()), 2);
  std::vector<double> times;
  for (int i = 0; i <= 10; ++i) times.push_back(0.5 * i);
  for (int n = 0; n < 2; ++n) {
    const auto tr = projection_trace(seq, ev[n].state, times, 3);
    for (const auto& row : tr.p) EXPECT_GT(row[n], 1.0 - 0.05) << "level " << n;
  }
}

TEST(TransportReport, FollowsFromTwoSingleParticleRuns) {
  const auto g = default_grid(400);
  const auto seq = merge_at(-0.474 * pi);
  const auto rep = transport_report(g, seq);
  const auto loc = localized_states(g, seq.front());
  const auto fin = lowest_eigenstates(assemble_hamiltonian(g, seq.back()), 2);
  const auto l = evolve(loc.left, seq).final_state, r = evolve(loc.right, seq).final_state;
  const cplx amp = inner_product(fin[1].state, l) * inner_product(fin[0].state, r) +
                   inner_product(fin[0].state, l) * inner_product(fin[1].state, r);
  EXPECT_NEAR(*rep.F, std::norm(amp), 1e-12);
  EXPECT_NEAR(rep.population(0, 1), overlap_squared(fin[1].state, l), 1e-12);
  EXPECT_LE(*rep.F, 1.0 + 1e-12);
}

TEST(TransportReport, LongRampTransfersLeftToExcited) {
  const auto rep = transport_report(default_grid(400), merge_at(-0.474 * pi, 1.0, 4000));
  EXPECT_GE(rep.population(0, 1), 0.9);
  EXPECT_GE(rep.population(1, 0), 0.9);
}

class TiltScan : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::vector<double> thetas;
    for (int i = 0; i <= 12; ++i) thetas.push_back((-0.50 + 0.005 * i) * pi);
    result_ = new ScanResult(scan_theta([](double th) { return merge_at(th); }, thetas, default_grid(300)));
  }
  static void TearDownTestSuite() { delete result_; }
  static const FidelityReport& at(double theta_over_pi) {
    for (std::size_t i = 0; i < result_->values.size(); ++i) {
      if (std::abs(result_->values[i] / pi - theta_over_pi) < 1e-9) return result_->reports[i];
    }
    throw std::logic_error("no such scan point");
  }
  static ScanResult* result_;
};
ScanResult* TiltScan::result_ = nullptr;

TEST_F(TiltScan, ArgmaxIsLargestExcitedPopulation) {
  const auto& r = *result_;
  for (const auto& rep : r.reports) EXPECT_LE(rep.population(0, 1), r.argmax.population);
  EXPECT_EQ(r.reports[r.argmax.index].population(0, 1), r.argmax.population);
  EXPECT_EQ(r.values[r.argmax.index], r.argmax.value);
  EXPECT_EQ(r.variable, "theta_b_rad");
}

TEST_F(TiltScan, TiltDecidesWhichLevelIsReached) {
  // Toward zero tilt the left atom stays in the ground state; with more tilt
  // it overshoots into the second excited state.
  EXPECT_GT(at(-0.5).population(0, 0), at(-0.475).population(0, 0));
  EXPECT_GT(at(-0.44).population(0, 2), at(-0.475).population(0, 2));
}

TEST(Scan, RejectsUnorderedValues) {
  const std::vector<double> v = {0.1, 0.1};
  const auto fam = [](double) { return merge_at(-0.474 * pi, 0.1, 10); };
  EXPECT_THROW(scan("x", v, fam, default_grid(64)), Error);
  const std::vector<double> bad_t = {-0.1, 0.1};
  EXPECT_THROW(scan_duration(fam, bad_t, default_grid(64)), Error);
}

TEST(Scan, SinglePoint) {
  const std::vector<double> v = {0.3};
  const auto r = scan_duration([](double T) { return merge_at(-0.474 * pi, T, 500); }, v, default_grid(200));
  ASSERT_EQ(r.reports.size(), 1u);
  EXPECT_EQ(r.argmax.index, 0u);
}

class DeviationTest : public ::testing::Test {
 protected:
  static void SetUpTestSuite() {
    std::vector<double> ts;
    for (int i = 0; i <= 20; ++i) ts.push_back(0.05 + 0.02 * i);
    model_ = new ScanResult(
        scan_duration([](double T) { return merge_at(-0.474 * pi, T, 1000); }, ts, default_grid(200)));
  }
  static void TearDownTestSuite() { delete model_; }
  static MeasuredScan sampled(std::size_t from, std::size_t to, double shift, double sigma) {
    std::mt19937_64 rng(99);
    std::normal_distribution<double> noise(0.0, sigma);
    MeasuredScan m;
    for (std::size_t i = from; i < to; ++i) {
      m.values.push_back(model_->values[i] - shift);
      auto row = model_->reports[i].f[0];
      if (sigma > 0) {
        for (auto& v : row) v += noise(rng);
      }
      m.populations.push_back(row);
    }
    return m;
  }
  static ScanResult* model_;
};
ScanResult* DeviationTest::model_ = nullptr;

TEST_F(DeviationTest, ZeroForModelItself) {
  EXPECT_NEAR(rms_deviation(*model_, sampled(0, 21, 0.0, 0.0)), 0.0, 1e-15);
}

TEST_F(DeviationTest, RecoversNoiseLevel) {
  const double sigma = 0.03;
  EXPECT_NEAR(rms_deviation(*model_, sampled(0, 21, 0.0, sigma)), sigma, 0.2 * sigma);
}

TEST_F(DeviationTest, InterpolatesBetweenScanPoints) {
  MeasuredScan m;
  m.values = {0.06};
  std::vector<double> row(4);
  for (int n = 0; n < 4; ++n) row[n] = 0.5 * (model_->reports[0].f[0][n] + model_->reports[1].f[0][n]);
  m.populations = {row};
  EXPECT_NEAR(rms_deviation(*model_, m), 0.0, 1e-14);
}

TEST_F(DeviationTest, FindsShift) {
  const auto data = sampled(5, 16, 0.04, 0.0);
  std::vector<double> offsets;
  for (int k = -30; k <= 30; ++k) offsets.push_back(0.005 * k);
  const auto fit = best_offset(*model_, data, offsets);
  EXPECT_NEAR(fit.offset, 0.04, 0.02);
  EXPECT_NEAR(fit.rms, 0.0, 1e-12);
  const std::vector<double> far = {1.0, 2.0};
  EXPECT_THROW(best_offset(*model_, data, far), Error);
}

TEST_F(DeviationTest, RejectsMismatchedTables) {
  auto data = sampled(0, 3, 0.0, 0.0);
  data.populations.pop_back();
  EXPECT_THROW(rms_deviation(*model_, data), Error);
  auto outside = sampled(0, 3, 0.0, 0.0);
  outside.values[0] = 10.0;
  EXPECT_THROW(rms_deviation(*model_, outside), Error);
}

TEST(ReadMeasuredScan, ParsesTable) {
  std::istringstream in("T_ms f0 f1 f2\n0.1 0.2 0.7 0.1\n0.2 0.1 0.8 0.1\n");
  const auto m = read_measured_scan(in);
  ASSERT_EQ(m.values.size(), 2u);
  EXPECT_EQ(m.populations[1][1], 0.8);
  std::istringstream ragged("T_ms f0 f1\n0.1 0.2 0.8\n0.2 0.3\n");
  EXPECT_THROW(read_measured_scan(ragged), Error);
}

}  // namespace
}  // namespace dwt
