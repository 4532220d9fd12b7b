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

#include <ostream>

#include <nlohmann/json.hpp>

#include "dwt/analysis.hpp"

namespace dwt::cli {

/// Keys: f, p_trace, F, F_int (absent values are null).
inline nlohmann::json to_json(const FidelityReport& r) {
  nlohmann::json j;
  j["f"] = nlohmann::json::object();
  for (std::size_t a = 0; a < r.alphas.size(); ++a) j["f"][r.alphas[a]] = r.f[a];
  if (r.p_trace.times.empty()) {
    j["p_trace"] = nullptr;
  } else {
    j["p_trace"] = {{"t_ms", r.p_trace.times}, {"p", r.p_trace.p}};
  }
  j["F"] = r.F ? nlohmann::json(*r.F) : nlohmann::json(nullptr);
  j["F_int"] = r.F_int ? nlohmann::json(*r.F_int) : nlohmann::json(nullptr);
  return j;
}

inline nlohmann::json to_json(const ScanResult& s) {
  nlohmann::json j;
  j["variable"] = s.variable;
  j["values"] = s.values;
  j["reports"] = nlohmann::json::array();
  for (const auto& r : s.reports) j["reports"].push_back(to_json(r));
  j["argmax"] = {{"index", s.argmax.index},
                 {"value", s.argmax.value},
                 {"population", s.argmax.population},
                 {"alpha", s.alpha == 0 ? "L" : "R"},
                 {"level", s.level}};
  return j;
}

/// One row per scan value: value, then f_n^L and f_n^R for every level.
inline void write_scan_table(std::ostream& os, const ScanResult& s) {
  os << s.variable;
  for (std::size_t a = 0; a < s.reports.front().alphas.size(); ++a) {
    for (std::size_t n = 0; n < s.reports.front().f[a].size(); ++n) {
      os << " f" << n << '_' << s.reports.front().alphas[a];
    }
  }
  os << '\n';
  os.precision(12);
  for (std::size_t i = 0; i < s.values.size(); ++i) {
    os << s.values[i];
    for (const auto& row : s.reports[i].f) {
      for (const double v : row) os << ' ' << v;
    }
    os << '\n';
  }
}

}  // namespace dwt::cli
