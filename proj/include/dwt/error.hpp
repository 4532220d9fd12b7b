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

#include <stdexcept>
#include <string>
#include <string_view>

namespace dwt {

enum class ErrorCode {
  invalid_domain,
  invalid_parameters,
  invalid_duration,
  grid_mismatch,
  out_of_range,
  single_well_regime,
  non_convergence,
  delocalization_failure,
  singular_system,
  norm_drift_exceeded,
  ambiguous_match,
  mismatched_points,
  config_error,
  io_error,
};

constexpr std::string_view to_string(ErrorCode code) {
  switch (code) {
    case ErrorCode::invalid_domain: return "invalid-domain";
    case ErrorCode::invalid_parameters: return "invalid-parameters";
    case ErrorCode::invalid_duration: return "invalid-duration";
    case ErrorCode::grid_mismatch: return "grid-mismatch";
    case ErrorCode::out_of_range: return "out-of-range";
    case ErrorCode::single_well_regime: return "single-well-regime";
    case ErrorCode::non_convergence: return "non-convergence";
    case ErrorCode::delocalization_failure: return "delocalization-failure";
    case ErrorCode::singular_system: return "singular-system";
    case ErrorCode::norm_drift_exceeded: return "norm-drift-exceeded";
    case ErrorCode::ambiguous_match: return "ambiguous-match";
    case ErrorCode::mismatched_points: return "mismatched-points";
    case ErrorCode::config_error: return "config-error";
    case ErrorCode::io_error: return "io-error";
  }
  return "unknown";
}

/// Exception carrying a machine-readable error code.
class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what)
      : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

/// Numerical failures that still carry the best result reached.
class NonConvergence : public Error {
 public:
  NonConvergence(const std::string& what, double best_residual)
      : Error(ErrorCode::non_convergence, what), best_residual_(best_residual) {}

  double best_residual() const noexcept { return best_residual_; }

 private:
  double best_residual_;
};

}  // namespace dwt
