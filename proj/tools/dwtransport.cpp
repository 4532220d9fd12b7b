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

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "dwt/analysis.hpp"
#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/krotov.hpp"
#include "dwt/propagate1d.hpp"
#include "dwt/propagate2d.hpp"
#include "dwt/spectrum.hpp"
#include "report_json.hpp"
#include "run_config.hpp"

namespace fs = std::filesystem;
using json = nlohmann::json;

namespace dwt::cli {
namespace {

enum ExitCode { ok = 0, config_failure = 2, numerical_failure = 3, io_failure = 4 };

class Output {
 public:
  explicit Output(fs::path dir) : dir_(std::move(dir)) {}

  std::ofstream open(const std::string& name) {
    std::error_code ec;
    fs::create_directories(dir_, ec);
    if (ec) throw Error(ErrorCode::io_error, "cannot create " + dir_.string() + ": " + ec.message());
    std::ofstream f(dir_ / name);
    if (!f) throw Error(ErrorCode::io_error, "cannot write " + (dir_ / name).string());
    return f;
  }

  void write_json(const std::string& name, const json& j) {
    auto f = open(name);
    f << j.dump(2) << '\n';
    if (!f) throw Error(ErrorCode::io_error, "write failed for " + name);
  }

 private:
  fs::path dir_;
};

ControlSequence load_sequence(const RunConfig& c) {
  if (c.sequence.preset != "file") return c.ramp().build(c.sequence.duration_ms, c.sequence.steps);
  std::ifstream f(c.sequence.file);
  if (!f) throw Error(ErrorCode::config_error, "cannot open sequence file " + c.sequence.file);
  try {
    return read_sequence(f);
  } catch (const Error& e) {
    throw Error(ErrorCode::config_error, std::string(e.what()));
  }
}

std::vector<double> even_times(double duration, int count) {
  std::vector<double> t;
  if (count == 1) return {duration};
  for (int i = 0; i < count; ++i) t.push_back(duration * i / (count - 1));
  return t;
}

void cmd_spectrum(const RunConfig& c, const ControlSequence& seq, Output& out) {
  const auto times = even_times(seq.duration(), c.spectrum.samples);
  const auto trace = instantaneous_spectrum(seq, c.one_particle_grid(), times, c.spectrum.levels);
  auto f = out.open("spectrum.txt");
  write_spectrum_trace(f, trace);
}

void cmd_evolve(const RunConfig& c, const ControlSequence& seq, Output& out) {
  const auto times = c.evolve.trace_points > 0 ? even_times(seq.duration(), c.evolve.trace_points)
                                               : std::vector<double>{};
  if (c.evolve.particles == "one") {
    const auto grid = c.one_particle_grid();
    ReportOptions ro{c.evolve.levels, times, c.evolve.trace_levels};
    const auto report = transport_report(grid, seq, ro);
    out.write_json("report.json", to_json(report));
    if (!times.empty()) {
      const auto loc = localized_states(grid, seq.front());
      auto f = out.open("trajectory_L.txt");
      write_trajectory(f, evolve(loc.left, seq, times));
    }
    return;
  }
  const auto grid = c.two_particle_grid();
  const auto ip = c.interaction_params();
  FidelityReport report = transport_report(grid, seq, {c.evolve.levels, {}, 1});
  const auto ends = two_particle_endpoints(grid, seq.front(), seq.back(), ip);
  const auto run = evolve_two_particle(ends.initial, seq, ip, times);
  report.F_int = two_particle_fidelity(run.final_state, ends.target);
  auto j = to_json(report);
  j["norm_drift"] = run.norm_drift;
  j["symmetry_drift"] = run.symmetry_drift;
  j["g1d"] = ip.g1d;
  out.write_json("report.json", j);
  auto f = out.open("density_final.txt");
  write_density(f, run.final_state);
  for (std::size_t k = 0; k < run.trajectory.size(); ++k) {
    auto s = out.open("density_" + std::to_string(k) + ".txt");
    s << "# t_ms " << run.trajectory[k].time << '\n';
    write_density(s, run.trajectory[k].state);
  }
}

void write_fourier(Output& out, const ControlSequence& seq, const std::string& name) {
  const auto b = fourier_spectrum(seq, Control::beta);
  const auto t = fourier_spectrum(seq, Control::theta);
  auto f = out.open(name);
  f << "f_kHz beta theta\n";
  f.precision(12);
  const auto& freq = !b.degenerate ? b.frequencies : t.frequencies;
  for (std::size_t k = 0; k < freq.size(); ++k) {
    f << freq[k] << ' ' << (b.degenerate ? 0.0 : b.magnitudes[k]) << ' '
      << (t.degenerate ? 0.0 : t.magnitudes[k]) << '\n';
  }
}

void cmd_optimize(const RunConfig& c, const ControlSequence& seq, Output& out) {
  OptimizationTrace trace{{}, {}, seq};
  json j;
  if (c.optimize.mode == "transport") {
    const auto grid = c.one_particle_grid();
    const auto loc = localized_states(grid, seq.front());
    const auto fin = lowest_eigenstates(assemble_hamiltonian(grid, seq.back()), 2);
    ControlProblem p{{{loc.left, fin[1].state, "L"}, {loc.right, fin[0].state, "R"}}, seq};
    p.active_controls = c.optimize.controls;
    p.step_weight = c.optimize.lambda;
    p.max_iterations = c.optimize.max_iterations;
    p.stop_fidelity = c.optimize.stop_fidelity;
    p.tuning.initial_step = c.optimize.initial_step;
    trace = optimize(p);
    j = to_json(transport_report(grid, trace.final_sequence, {c.evolve.levels, {}, 1}));
  } else {
    const auto grid = c.two_particle_grid();
    const auto ip = c.interaction_params();
    const auto ends = two_particle_endpoints(grid, seq.front(), seq.back(), ip);
    TwoParticleProblem p{{{ends.initial, ends.target, "int"}}, seq};
    p.active_controls = c.optimize.controls;
    p.step_weight = c.optimize.lambda;
    p.max_iterations = c.optimize.max_iterations;
    p.stop_fidelity = c.optimize.stop_fidelity;
    p.tuning.initial_step = c.optimize.initial_step;
    trace = optimize_with_interactions(p, ip);
    j = to_json(transport_report(grid, trace.final_sequence, {c.evolve.levels, {}, 1}));
    j["F_int"] = trace.records.back().fidelities.front();
  }
  j["iterations"] = trace.records.back().iteration;
  j["rejected_steps"] = trace.rejected_steps;
  j["reached_target"] = trace.reached_target;
  j["stalled"] = trace.stalled;
  {
    auto f = out.open("sequence.txt");
    write_sequence(f, trace.final_sequence);
  }
  {
    auto f = out.open("trace.txt");
    write_trace(f, trace);
  }
  write_fourier(out, trace.final_sequence, "fourier.txt");
  out.write_json("report.json", j);
}

void cmd_scan(const RunConfig& c, Output& out) {
  const auto grid = c.one_particle_grid();
  const auto ramp = c.ramp();
  const bool tilt = c.scan.variable == "theta";
  const double unit = tilt ? units::pi : 1.0;
  std::vector<double> values;
  for (int i = 0; i < c.scan.count; ++i) {
    const double u = c.scan.count == 1 ? 0.0 : static_cast<double>(i) / (c.scan.count - 1);
    values.push_back(unit * (c.scan.start + u * (c.scan.stop - c.scan.start)));
  }
  const int steps = c.sequence.steps;
  const double duration = c.sequence.duration_ms;
  ReportOptions ro{c.scan.levels, {}, 1};
  const auto result =
      tilt ? scan_theta([&](double th) { RampPreset r = ramp; r.theta = th; return r.build(duration, steps); },
                        values, grid, ro)
           : scan_duration([&](double t) { return ramp.build(t, steps); }, values, grid, ro);
  json j = to_json(result);
  if (!c.scan.data_file.empty()) {
    std::ifstream df(c.scan.data_file);
    if (!df) throw Error(ErrorCode::io_error, "cannot open " + c.scan.data_file);
    const auto data = read_measured_scan(df);
    j["rms"] = rms_deviation(result, data, 0.0);
    if (c.scan.offset_count > 1) {
      std::vector<double> offsets;
      for (int i = 0; i < c.scan.offset_count; ++i) {
        offsets.push_back(unit * c.scan.offset_range *
                          (2.0 * i / (c.scan.offset_count - 1) - 1.0));
      }
      const auto fit = best_offset(result, data, offsets);
      j["offset"] = {{"value", fit.offset}, {"rms", fit.rms}};
    }
  }
  out.write_json("scan.json", j);
  auto f = out.open("scan.txt");
  write_scan_table(f, result);
}

void cmd_fourier(const RunConfig& c, const ControlSequence& seq, Output& out) {
  write_fourier(out, seq, "fourier.txt");
  const auto filtered = lowpass_filter(seq, c.fourier.cutoff_khz);
  {
    auto f = out.open("sequence_filtered.txt");
    write_sequence(f, filtered);
  }
  const auto grid = c.one_particle_grid();
  json j;
  j["cutoff_khz"] = c.fourier.cutoff_khz;
  j["fundamental_khz"] = 1.0 / seq.duration();
  j["original"] = to_json(transport_report(grid, seq, {c.evolve.levels, {}, 1}));
  j["filtered"] = to_json(transport_report(grid, filtered, {c.evolve.levels, {}, 1}));
  out.write_json("report.json", j);
}

void write_metadata(Output& out, const std::string& command) {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&now));
  out.write_json("metadata.json", {{"command", command}, {"finished_utc", buf}});
}

int exit_code_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::config_error: return config_failure;
    case ErrorCode::io_error: return io_failure;
    default: return numerical_failure;
  }
}

}  // namespace
}  // namespace dwt::cli

int main(int argc, char** argv) {
  using namespace dwt::cli;
  CLI::App app{"Transport of ultracold atoms in a time-dependent double-well lattice"};
  app.require_subcommand(1);
  std::string config_path, out_dir;
  std::vector<std::string> overrides;
  const std::vector<std::string> names = {"spectrum", "evolve", "optimize", "scan", "fourier"};
  for (const auto& n : names) {
    auto* sub = app.add_subcommand(n);
    sub->add_option("--config", config_path, "INI configuration file")->check(CLI::ExistingFile);
    sub->add_option("--out", out_dir, "output directory (overrides output.dir)");
    sub->add_option("--set", overrides, "key=value override, repeatable");
  }
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : config_failure;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  RunConfig cfg;
  std::optional<dwt::ControlSequence> seq;
  try {
    Settings s = config_path.empty() ? Settings{} : read_settings(config_path);
    apply_overrides(s, overrides);
    if (!out_dir.empty()) s["output.dir"] = out_dir;
    cfg = parse_config(s);
    if (command != "scan") seq = load_sequence(cfg);
  } catch (const dwt::Error& e) {
    std::cerr << e.what() << '\n';
    return config_failure;
  }

  Output out(cfg.output_dir);
  try {
    if (command == "spectrum") cmd_spectrum(cfg, *seq, out);
    if (command == "evolve") cmd_evolve(cfg, *seq, out);
    if (command == "optimize") cmd_optimize(cfg, *seq, out);
    if (command == "scan") cmd_scan(cfg, out);
    if (command == "fourier") cmd_fourier(cfg, *seq, out);
    write_metadata(out, command);
  } catch (const dwt::Error& e) {
    std::cerr << e.what() << '\n';
    return exit_code_for(e.code());
  } catch (const std::exception& e) {
    std::cerr << e.what() << '\n';
    return numerical_failure;
  }
  return ok;
}
