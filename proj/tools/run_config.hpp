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
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/krotov.hpp"
#include "dwt/propagate2d.hpp"
#include "dwt/units.hpp"

namespace dwt::cli {

struct GridConfig {
  int points = default_points;
  double x_min = default_x_min;
  double x_max = default_x_max;
  /// Mesh for two-particle runs.
  int two_particle_points = 256;
};

struct SequenceConfig {
  /// "a", "b" or "file".
  std::string preset = "b";
  std::string file;
  double duration_ms = 0.5;
  int steps = default_time_steps;
  double v0_khz = 100.0;
  double beta_start_pi = 0.0;
  double beta_end_pi = 0.75;
  double theta_pi = -0.474;
};

struct InteractionConfig {
  double a_s_nm = 5.31;
  double lambda_nm = 810.0;
  double nu_y_khz = 37.4;
  double nu_z_khz = 40.0;
};

struct SpectrumConfig {
  int levels = 6;
  int samples = 101;
};

struct EvolveConfig {
  /// "one" or "two".
  std::string particles = "one";
  int levels = 4;
  /// Snapshots of p_n(t) and of the densities, evenly spaced over [0, T].
  int trace_points = 0;
  int trace_levels = 3;
};

struct ScanConfig {
  /// "theta" (start/stop in units of pi) or "duration" (ms).
  std::string variable = "theta";
  double start = -0.49;
  double stop = -0.45;
  int count = 21;
  int levels = 4;
  /// Optional measured populations for the rms comparison.
  std::string data_file;
  /// Offset search range in the scan variable, symmetric about zero.
  double offset_range = 0.0;
  int offset_count = 1;
};

struct OptimizeConfig {
  /// "transport" (two single-particle objectives) or "interaction".
  std::string mode = "transport";
  int max_iterations = 2000;
  double stop_fidelity = 0.99;
  std::vector<Control> controls = {Control::beta, Control::theta};
  std::array<double, 3> lambda = {1.0, 1.0, 1.0};
  double initial_step = 0.02;
};

struct FourierConfig {
  double cutoff_khz = 50.0;
};

struct RunConfig {
  GridConfig grid;
  SequenceConfig sequence;
  InteractionConfig interaction;
  SpectrumConfig spectrum;
  EvolveConfig evolve;
  ScanConfig scan;
  OptimizeConfig optimize;
  FourierConfig fourier;
  std::string output_dir = "out";

  SpatialGrid one_particle_grid() const { return make_grid(grid.x_min, grid.x_max, grid.points); }
  SpatialGrid two_particle_grid() const {
    return make_grid(grid.x_min, grid.x_max, grid.two_particle_points);
  }
  InteractionParams interaction_params() const {
    return InteractionParams::from_physical(interaction.a_s_nm, interaction.lambda_nm,
                                            interaction.nu_y_khz, interaction.nu_z_khz);
  }
  RampPreset ramp() const {
    return {sequence.v0_khz, sequence.beta_start_pi * units::pi, sequence.beta_end_pi * units::pi,
            sequence.theta_pi * units::pi};
  }
};

/// Flat "section.key" -> value map.
using Settings = std::map<std::string, std::string>;

/// Reads an INI file into settings; keys outside a section are kept bare.
inline Settings read_settings(const std::string& path) {
  Settings s;
  std::vector<CLI::ConfigItem> items;
  try {
    items = CLI::ConfigINI().from_file(path);
  } catch (const CLI::Error& e) {
    throw Error(ErrorCode::config_error, "cannot read config '" + path + "': " + e.what());
  }
  for (const auto& it : items) {
    if (it.name == "++" || it.name == "--") continue;
    std::string value;
    for (std::size_t i = 0; i < it.inputs.size(); ++i) value += (i ? "," : "") + it.inputs[i];
    s[it.fullname()] = value;
  }
  return s;
}

/// Applies "key=value" overrides on top of s.
inline void apply_overrides(Settings& s, const std::vector<std::string>& overrides) {
  for (const auto& o : overrides) {
    const auto eq = o.find('=');
    if (eq == std::string::npos || eq == 0) {
      throw Error(ErrorCode::config_error, "override '" + o + "' is not key=value");
    }
    s[o.substr(0, eq)] = o.substr(eq + 1);
  }
}

namespace detail {

// Consumes known keys and records every problem instead of stopping at the first.
class Reader {
 public:
  explicit Reader(Settings s) : s_(std::move(s)) {}

  template <typename T>
  void get(const std::string& key, T& out) {
    const auto it = s_.find(key);
    if (it == s_.end()) return;
    const std::string raw = it->second;
    s_.erase(it);
    if constexpr (std::is_same_v<T, std::string>) {
      out = raw;
    } else {
      std::istringstream is(raw);
      T v{};
      if (!(is >> v) || !(is >> std::ws).eof()) {
        problems_.push_back(key + ": cannot parse '" + raw + "'");
        return;
      }
      out = v;
    }
  }

  void controls(const std::string& key, std::vector<Control>& out) {
    const auto it = s_.find(key);
    if (it == s_.end()) return;
    std::string raw = it->second;
    s_.erase(it);
    std::replace(raw.begin(), raw.end(), ',', ' ');
    std::istringstream is(raw);
    std::vector<Control> cs;
    for (std::string w; is >> w;) {
      if (w == "v0") {
        cs.push_back(Control::v0);
      } else if (w == "beta") {
        cs.push_back(Control::beta);
      } else if (w == "theta") {
        cs.push_back(Control::theta);
      } else {
        problems_.push_back(key + ": unknown control '" + w + "'");
      }
    }
    out = cs;
  }

  void check(bool ok, const std::string& what) {
    if (!ok) problems_.push_back(what);
  }

  void finish() {
    for (const auto& [k, v] : s_) problems_.push_back("unknown key '" + k + "'");
    if (problems_.empty()) return;
    std::string msg = "invalid configuration:";
    for (const auto& p : problems_) msg += "\n  " + p;
    throw Error(ErrorCode::config_error, msg);
  }

 private:
  Settings s_;
  std::vector<std::string> problems_;
};

}  // namespace detail

/// Builds and fully validates a RunConfig; all problems are reported in one error.
inline RunConfig parse_config(const Settings& settings) {
  RunConfig c;
  detail::Reader r(settings);
  r.get("grid.points", c.grid.points);
  r.get("grid.x_min", c.grid.x_min);
  r.get("grid.x_max", c.grid.x_max);
  r.get("grid.two_particle_points", c.grid.two_particle_points);
  r.get("sequence.preset", c.sequence.preset);
  r.get("sequence.file", c.sequence.file);
  r.get("sequence.duration_ms", c.sequence.duration_ms);
  r.get("sequence.steps", c.sequence.steps);
  r.get("sequence.v0_khz", c.sequence.v0_khz);
  r.get("sequence.beta_start_pi", c.sequence.beta_start_pi);
  r.get("sequence.beta_end_pi", c.sequence.beta_end_pi);
  r.get("sequence.theta_pi", c.sequence.theta_pi);
  r.get("interaction.a_s_nm", c.interaction.a_s_nm);
  r.get("interaction.lambda_nm", c.interaction.lambda_nm);
  r.get("interaction.nu_y_khz", c.interaction.nu_y_khz);
  r.get("interaction.nu_z_khz", c.interaction.nu_z_khz);
  r.get("spectrum.levels", c.spectrum.levels);
  r.get("spectrum.samples", c.spectrum.samples);
  r.get("evolve.particles", c.evolve.particles);
  r.get("evolve.levels", c.evolve.levels);
  r.get("evolve.trace_points", c.evolve.trace_points);
  r.get("evolve.trace_levels", c.evolve.trace_levels);
  r.get("scan.variable", c.scan.variable);
  r.get("scan.start", c.scan.start);
  r.get("scan.stop", c.scan.stop);
  r.get("scan.count", c.scan.count);
  r.get("scan.levels", c.scan.levels);
  r.get("scan.data_file", c.scan.data_file);
  r.get("scan.offset_range", c.scan.offset_range);
  r.get("scan.offset_count", c.scan.offset_count);
  r.get("optimize.mode", c.optimize.mode);
  r.get("optimize.max_iterations", c.optimize.max_iterations);
  r.get("optimize.stop_fidelity", c.optimize.stop_fidelity);
  r.controls("optimize.controls", c.optimize.controls);
  r.get("optimize.lambda_v0", c.optimize.lambda[0]);
  r.get("optimize.lambda_beta", c.optimize.lambda[1]);
  r.get("optimize.lambda_theta", c.optimize.lambda[2]);
  r.get("optimize.initial_step", c.optimize.initial_step);
  r.get("fourier.cutoff_khz", c.fourier.cutoff_khz);
  r.get("output.dir", c.output_dir);

  r.check(c.grid.points >= 8, "grid.points must be at least 8");
  r.check(c.grid.two_particle_points >= 8, "grid.two_particle_points must be at least 8");
  r.check(c.grid.x_max > c.grid.x_min, "grid.x_max must exceed grid.x_min");
  const auto& s = c.sequence;
  r.check(s.preset == "a" || s.preset == "b" || s.preset == "file",
          "sequence.preset must be a, b or file");
  r.check(s.preset != "file" || !s.file.empty(), "sequence.file is required with preset = file");
  r.check(s.preset == "file" || s.duration_ms > 0.0, "sequence.duration_ms must be positive");
  r.check(s.steps >= 4, "sequence.steps must be at least 4");
  r.check(s.v0_khz >= 0.0, "sequence.v0_khz must be non-negative");
  r.check(s.beta_start_pi >= 0.0 && s.beta_start_pi <= 1.0, "sequence.beta_start_pi outside [0, 1]");
  r.check(s.beta_end_pi >= 0.0 && s.beta_end_pi <= 1.0, "sequence.beta_end_pi outside [0, 1]");
  const auto& ic = c.interaction;
  r.check(ic.lambda_nm > 0.0, "interaction.lambda_nm must be positive");
  r.check(ic.nu_y_khz >= 0.0 && ic.nu_z_khz >= 0.0, "interaction trap frequencies must be >= 0");
  r.check(ic.a_s_nm >= 0.0, "interaction.a_s_nm must be non-negative");
  r.check(c.spectrum.levels >= 1, "spectrum.levels must be positive");
  r.check(c.spectrum.samples >= 1, "spectrum.samples must be positive");
  r.check(c.evolve.particles == "one" || c.evolve.particles == "two",
          "evolve.particles must be one or two");
  r.check(c.evolve.levels >= 2, "evolve.levels must be at least 2");
  r.check(c.evolve.trace_points >= 0, "evolve.trace_points must be non-negative");
  r.check(c.evolve.trace_levels >= 1, "evolve.trace_levels must be positive");
  r.check(c.scan.variable == "theta" || c.scan.variable == "duration",
          "scan.variable must be theta or duration");
  r.check(c.scan.count >= 1, "scan.count must be positive");
  r.check(c.scan.count == 1 || c.scan.stop > c.scan.start, "scan.stop must exceed scan.start");
  r.check(c.scan.variable != "duration" || c.scan.start > 0.0, "scan durations must be positive");
  r.check(c.scan.levels >= 2, "scan.levels must be at least 2");
  r.check(c.scan.offset_range >= 0.0 && c.scan.offset_count >= 1, "invalid offset search");
  r.check(c.optimize.mode == "transport" || c.optimize.mode == "interaction",
          "optimize.mode must be transport or interaction");
  r.check(c.optimize.max_iterations >= 0, "optimize.max_iterations must be non-negative");
  r.check(!c.optimize.controls.empty(), "optimize.controls must name at least one control");
  for (const Control k : c.optimize.controls) {
    r.check(c.optimize.lambda[static_cast<int>(k)] > 0.0, "active control needs lambda > 0");
  }
  r.check(c.optimize.initial_step >= 0.0, "optimize.initial_step must be non-negative");
  r.check(c.fourier.cutoff_khz > 0.0, "fourier.cutoff_khz must be positive");
  r.check(!c.output_dir.empty(), "output.dir must not be empty");
  r.finish();
  return c;
}

}  // namespace dwt::cli
