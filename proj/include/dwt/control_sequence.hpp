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
#include <istream>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "dwt/error.hpp"
#include "dwt/lattice.hpp"
#include "dwt/units.hpp"

namespace dwt {

inline double& component(LatticeParams& p, Control c) noexcept {
  switch (c) {
    case Control::v0: return p.v0;
    case Control::beta: return p.beta;
    case Control::theta: return p.theta;
  }
  return p.v0;
}

inline double component(const LatticeParams& p, Control c) noexcept {
  switch (c) {
    case Control::v0: return p.v0;
    case Control::beta: return p.beta;
    case Control::theta: return p.theta;
  }
  return p.v0;
}

inline double component(const PotentialGradient& g, Control c) noexcept {
  switch (c) {
    case Control::v0: return g.d_v0;
    case Control::beta: return g.d_beta;
    case Control::theta: return g.d_theta;
  }
  return g.d_v0;
}

inline constexpr int default_time_steps = 5000;

/// Uniformly sampled waveforms V0(t), beta(t), theta(t) on t_j = j T / n_T.
class ControlSequence {
 public:
  ControlSequence(double duration, std::vector<LatticeParams> samples)
      : duration_(duration), samples_(std::move(samples)) {
    if (!(duration_ > 0.0) || !std::isfinite(duration_)) {
      throw Error(ErrorCode::invalid_duration, "sequence duration must be positive");
    }
    if (samples_.size() < 2) {
      throw Error(ErrorCode::invalid_parameters, "a sequence needs at least two samples");
    }
    for (const auto& p : samples_) validate(p);
  }

  double duration() const noexcept { return duration_; }
  int steps() const noexcept { return static_cast<int>(samples_.size()) - 1; }
  double dt() const noexcept { return duration_ / steps(); }
  double time(int j) const noexcept { return j == steps() ? duration_ : j * dt(); }
  const std::vector<LatticeParams>& samples() const noexcept { return samples_; }
  const LatticeParams& operator[](int j) const noexcept { return samples_[j]; }
  const LatticeParams& front() const noexcept { return samples_.front(); }
  const LatticeParams& back() const noexcept { return samples_.back(); }

  /// Piecewise-linear interpolation; exact on the stored nodes.
  LatticeParams sample(double t) const {
    const double eps = 1e-12 * duration_;
    if (!(t >= -eps && t <= duration_ + eps)) {
      throw Error(ErrorCode::out_of_range, "sample time outside [0, T]");
    }
    const double u = std::clamp(t / dt(), 0.0, static_cast<double>(steps()));
    const int j = std::min(static_cast<int>(std::floor(u)), steps() - 1);
    const double w = u - j;
    if (w == 0.0) return samples_[j];
    if (w == 1.0) return samples_[j + 1];
    const auto& a = samples_[j];
    const auto& b = samples_[j + 1];
    return {a.v0 + w * (b.v0 - a.v0), a.beta + w * (b.beta - a.beta),
            a.theta + w * (b.theta - a.theta)};
  }

  std::vector<double> waveform(Control c) const {
    std::vector<double> w(samples_.size());
    for (std::size_t j = 0; j < samples_.size(); ++j) w[j] = component(samples_[j], c);
    return w;
  }

  /// Replaces one waveform; the result is re-validated.
  ControlSequence with_waveform(Control c, const std::vector<double>& values) const {
    if (values.size() != samples_.size()) {
      throw Error(ErrorCode::invalid_parameters, "waveform length does not match sequence");
    }
    auto s = samples_;
    for (std::size_t j = 0; j < s.size(); ++j) component(s[j], c) = values[j];
    return ControlSequence(duration_, std::move(s));
  }

 private:
  double duration_;
  std::vector<LatticeParams> samples_;
};

/// Linear interpolation of every parameter between start (t = 0) and end (t = T).
inline ControlSequence make_linear_merge(double duration, const LatticeParams& start,
                                         const LatticeParams& end,
                                         int steps = default_time_steps) {
  if (!(duration > 0.0)) throw Error(ErrorCode::invalid_duration, "duration must be positive");
  if (steps < 1) throw Error(ErrorCode::invalid_parameters, "need at least one time step");
  std::vector<LatticeParams> s(steps + 1);
  for (int j = 0; j <= steps; ++j) {
    const double u = static_cast<double>(j) / steps;
    s[j] = {start.v0 + u * (end.v0 - start.v0), start.beta + u * (end.beta - start.beta),
            start.theta + u * (end.theta - start.theta)};
  }
  s.back() = end;
  return ControlSequence(duration, std::move(s));
}

/// Merge ramp with V0 and theta held and beta ramped linearly; the shape of
/// both measurement series (duration scan and tilt scan).
struct RampPreset {
  double v0 = 100.0;
  double beta_start = 0.0;
  double beta_end = 0.75 * units::pi;
  double theta = -0.474 * units::pi;

  LatticeParams start() const { return {v0, beta_start, theta}; }
  LatticeParams end() const { return {v0, beta_end, theta}; }
  ControlSequence build(double duration, int steps = default_time_steps) const {
    return make_linear_merge(duration, start(), end(), steps);
  }
};

/// Duration series: fixed tilt.
inline RampPreset preset_a() { return {}; }

/// Tilt series: same ramp at tilt theta_b (radians).
inline RampPreset preset_b(double theta_b) {
  RampPreset p;
  p.theta = theta_b;
  return p;
}

/// Time-reversed copy: sample j of the result is sample n_T - j of the input.
inline ControlSequence reversed(const ControlSequence& seq) {
  auto s = seq.samples();
  std::reverse(s.begin(), s.end());
  return ControlSequence(seq.duration(), std::move(s));
}

struct WaveformSpectrum {
  /// Bin frequencies k / T in kHz, k = 0 .. n_T / 2.
  std::vector<double> frequencies;
  /// |DFT| normalized to the bin at 1 / T.
  std::vector<double> magnitudes;
  double fundamental_khz = 0.0;
  /// Constant waveform: nothing to normalize, spectrum left empty.
  bool degenerate = false;
};

/// Fourier magnitudes of one waveform (mean removed) over the n_T samples
/// spanning one period T, normalized at the fundamental 1/T.
inline WaveformSpectrum fourier_spectrum(const ControlSequence& seq, Control which) {
  const int n = seq.steps();
  if (n < 4) throw Error(ErrorCode::invalid_parameters, "spectrum needs at least 4 time steps");
  auto w = seq.waveform(which);
  w.pop_back();
  double mean = 0.0;
  for (const double v : w) mean += v;
  mean /= n;
  const auto [lo, hi] = std::minmax_element(w.begin(), w.end());
  WaveformSpectrum result;
  result.fundamental_khz = 1.0 / seq.duration();
  if (*hi - *lo <= 1e-12 * (1.0 + std::abs(mean))) {
    result.degenerate = true;
    return result;
  }
  for (auto& v : w) v -= mean;
  Eigen::FFT<double> fft;
  std::vector<std::complex<double>> bins;
  fft.fwd(bins, w);
  const double ref = std::abs(bins[1]);
  if (ref == 0.0) {
    result.degenerate = true;
    return result;
  }
  for (int k = 0; k <= n / 2; ++k) {
    result.frequencies.push_back(k / seq.duration());
    result.magnitudes.push_back(std::abs(bins[k]) / ref);
  }
  return result;
}

/// Removes Fourier components above cutoff_khz from every waveform. Each
/// waveform is detrended by the straight line joining its endpoints so the
/// periodic extension is continuous; afterwards the endpoints are re-pinned
/// to their original values.
inline ControlSequence lowpass_filter(const ControlSequence& seq, double cutoff_khz) {
  if (!(cutoff_khz > 0.0)) throw Error(ErrorCode::invalid_parameters, "cutoff must be positive");
  const int n = seq.steps();
  const double T = seq.duration();
  Eigen::FFT<double> fft;
  auto samples = seq.samples();
  for (const Control c : all_controls) {
    const auto w = seq.waveform(c);
    const double a = w.front();
    const double b = w.back();
    std::vector<double> r(n);
    for (int j = 0; j < n; ++j) r[j] = w[j] - (a + (b - a) * j / n);
    std::vector<std::complex<double>> bins;
    fft.fwd(bins, r);
    bool removed = false;
    for (int k = 0; k < n; ++k) {
      const int kk = std::min(k, n - k);
      if (kk / T > cutoff_khz) {
        bins[k] = 0.0;
        removed = true;
      }
    }
    if (!removed) continue;
    std::vector<double> back;
    fft.inv(back, bins);
    for (int j = 1; j < n; ++j) component(samples[j], c) = back[j] + (a + (b - a) * j / n);
  }
  // Clamp into the physical parameter box so the result stays a valid sequence.
  for (auto& p : samples) {
    p.v0 = std::max(p.v0, 0.0);
    p.beta = std::clamp(p.beta, 0.0, units::pi);
  }
  return ControlSequence(T, std::move(samples));
}

/// Interchange format: header "t_ms V0_kHz beta_rad theta_rad", one row per sample.
inline void write_sequence(std::ostream& os, const ControlSequence& seq) {
  os << "t_ms V0_kHz beta_rad theta_rad\n";
  os.precision(17);
  for (int j = 0; j <= seq.steps(); ++j) {
    const auto& p = seq[j];
    os << seq.time(j) << ' ' << p.v0 << ' ' << p.beta << ' ' << p.theta << '\n';
  }
}

inline ControlSequence read_sequence(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw Error(ErrorCode::io_error, "empty sequence stream");
  {
    std::istringstream hs(line);
    std::string a, b, c, d;
    hs >> a >> b >> c >> d;
    if (a != "t_ms" || b != "V0_kHz" || c != "beta_rad" || d != "theta_rad") {
      throw Error(ErrorCode::io_error, "unexpected sequence header: " + line);
    }
  }
  std::vector<double> times;
  std::vector<LatticeParams> samples;
  while (std::getline(is, line)) {
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    double t;
    LatticeParams p;
    if (!(ls >> t >> p.v0 >> p.beta >> p.theta)) {
      throw Error(ErrorCode::io_error, "malformed sequence row: " + line);
    }
    times.push_back(t);
    samples.push_back(p);
  }
  if (samples.size() < 2) throw Error(ErrorCode::io_error, "sequence needs at least two rows");
  const double T = times.back();
  const double dt = T / (samples.size() - 1);
  for (std::size_t j = 0; j < times.size(); ++j) {
    if (std::abs(times[j] - j * dt) > 1e-9 * std::max(T, 1.0)) {
      throw Error(ErrorCode::io_error, "sequence rows are not uniformly spaced from t = 0");
    }
  }
  return ControlSequence(T, std::move(samples));
}

}  // namespace dwt
