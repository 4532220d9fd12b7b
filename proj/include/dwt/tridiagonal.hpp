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

#include <complex>
#include <span>
#include <vector>

#include "dwt/error.hpp"
#include "dwt/units.hpp"

namespace dwt {

/// Real symmetric tridiagonal operator with constant off-diagonal, acting on
/// the interior mesh points (the walls are implicit zeros).
struct TridiagonalOperator {
  SpatialGrid grid;
  /// One value per mesh point (n + 1); the wall entries are unused.
  std::vector<double> diagonal;
  double off_diagonal = 0.0;

  std::span<const double> interior_diagonal() const noexcept {
    return {diagonal.data() + 1, diagonal.size() - 2};
  }

  /// out = H in over the interior. Both spans have interior length.
  template <typename T>
  void apply_interior(std::span<const T> in, std::span<T> out) const noexcept {
    const auto d = interior_diagonal();
    const std::size_t m = d.size();
    for (std::size_t i = 0; i < m; ++i) {
      T v = d[i] * in[i];
      if (i > 0) v += off_diagonal * in[i - 1];
      if (i + 1 < m) v += off_diagonal * in[i + 1];
      out[i] = v;
    }
  }

  WaveFn1D apply(const WaveFn1D& psi) const {
    require_same_grid(grid, psi.grid());
    WaveFn1D out(grid);
    apply_interior<cplx>(psi.interior(), out.interior());
    return out;
  }
};

/// Solves (diag_i) x_i + off (x_{i-1} + x_{i+1}) = rhs_i in place by Thomas
/// elimination. scratch must have the same length as rhs.
inline void thomas_solve(std::span<const cplx> diag, cplx off, std::span<cplx> rhs,
                         std::span<cplx> scratch) {
  const std::size_t m = diag.size();
  cplx denom = diag[0];
  if (denom == cplx{}) throw Error(ErrorCode::singular_system, "zero pivot in tridiagonal solve");
  scratch[0] = off / denom;
  rhs[0] /= denom;
  for (std::size_t i = 1; i < m; ++i) {
    denom = diag[i] - off * scratch[i - 1];
    if (denom == cplx{}) throw Error(ErrorCode::singular_system, "zero pivot in tridiagonal solve");
    scratch[i] = off / denom;
    rhs[i] = (rhs[i] - off * rhs[i - 1]) / denom;
  }
  for (std::size_t i = m - 1; i-- > 0;) rhs[i] -= scratch[i] * rhs[i + 1];
}

/// Solves the same tridiagonal system for a batch of right-hand sides stored
/// as the columns of a row-major block: rhs[i * stride + c] for c < width.
/// The inner loop runs over columns, so the block is traversed contiguously.
/// diag_of(i, c) gives the diagonal for row i and column c.
template <typename DiagFn>
void thomas_solve_columns(DiagFn&& diag_of, cplx off, cplx* rhs, std::size_t rows,
                          std::size_t width, std::size_t stride, std::vector<cplx>& scratch) {
  scratch.resize(rows * width);
  for (std::size_t c = 0; c < width; ++c) {
    const cplx d = diag_of(0, c);
    scratch[c] = off / d;
    rhs[c] /= d;
  }
  for (std::size_t i = 1; i < rows; ++i) {
    cplx* row = rhs + i * stride;
    const cplx* prev = rhs + (i - 1) * stride;
    cplx* sc = scratch.data() + i * width;
    const cplx* sp = scratch.data() + (i - 1) * width;
    for (std::size_t c = 0; c < width; ++c) {
      const cplx denom = diag_of(i, c) - off * sp[c];
      sc[c] = off / denom;
      row[c] = (row[c] - off * prev[c]) / denom;
    }
  }
  for (std::size_t i = rows - 1; i-- > 0;) {
    cplx* row = rhs + i * stride;
    const cplx* next = rhs + (i + 1) * stride;
    const cplx* sc = scratch.data() + i * width;
    for (std::size_t c = 0; c < width; ++c) row[c] -= sc[c] * next[c];
  }
}

}  // namespace dwt
