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
#include <limits>
#include <optional>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "dwt/control_sequence.hpp"
#include "dwt/error.hpp"
#include "dwt/lattice.hpp"
#include "dwt/propagate1d.hpp"
#include "dwt/tridiagonal.hpp"
#include "dwt/units.hpp"

namespace dwt {

/// Contact interaction of two atoms in a tight transverse trap.
/// g1d = 2 a_s k sqrt(nu_y nu_z), in kHz times the length unit 1/k.
struct InteractionParams {
  double a_s_nm = 0.0;
  double lambda_nm = 810.0;
  double nu_y_khz = 0.0;
  double nu_z_khz = 0.0;
  double g1d = 0.0;

  static double coupling(double a_s_nm, double lambda_nm, double nu_y_khz, double nu_z_khz) {
    return 2.0 * a_s_nm * (units::two_pi / lambda_nm) * std::sqrt(nu_y_khz * nu_z_khz);
  }

  static InteractionParams from_physical(double a_s_nm, double lambda_nm, double nu_y_khz,
                                         double nu_z_khz) {
    if (!(lambda_nm > 0.0) || !(nu_y_khz >= 0.0) || !(nu_z_khz >= 0.0) || !std::isfinite(a_s_nm)) {
      throw Error(ErrorCode::invalid_parameters, "interaction needs lambda > 0 and nu >= 0");
    }
    return {a_s_nm, lambda_nm, nu_y_khz, nu_z_khz,
            coupling(a_s_nm, lambda_nm, nu_y_khz, nu_z_khz)};
  }

  /// Rb-87 at 810 nm in a 37.4 kHz x 40 kHz transverse trap.
  static InteractionParams rubidium87() { return from_physical(5.31, 810.0, 37.4, 40.0); }

  /// Same trap, interaction switched off.
  static InteractionParams none() { return from_physical(0.0, 810.0, 37.4, 40.0); }

  bool consistent() const {
    const double g = coupling(a_s_nm, lambda_nm, nu_y_khz, nu_z_khz);
    return std::abs(g - g1d) <= 1e-12 * std::max(1.0, std::abs(g));
  }
};

namespace detail {

// Interior block of a 2D state as a dense m x m row-major array.
inline std::vector<cplx> pack_interior(const WaveFn2D& psi) {
  const int m = psi.grid().interior();
  std::vector<cplx> x(static_cast<std::size_t>(m) * m);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) x[static_cast<std::size_t>(i) * m + j] = psi(i + 1, j + 1);
  }
  return x;
}

inline WaveFn2D unpack_interior(const SpatialGrid& grid, std::span<const cplx> x, bool bosonic) {
  const int m = grid.interior();
  WaveFn2D psi(grid, bosonic);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) psi(i + 1, j + 1) = x[static_cast<std::size_t>(i) * m + j];
  }
  return psi;
}

template <typename T>
double squared_norm(std::span<const T> x) {
  double s = 0.0;
  for (const auto& v : x) s += std::norm(v);
  return s;
}

}  // namespace detail

/// H2 = H1 (x) 1 + 1 (x) H1 + (g1d/dx) on the mesh diagonal x1 = x2, acting on
/// the interior block.
struct TwoParticleHamiltonian {
  SpatialGrid grid;
  /// Single-particle interior diagonal V(x_k) + 2 K/dx^2.
  std::vector<double> diagonal;
  double off_diagonal = 0.0;
  /// Discrete delta strength g1d / dx.
  double contact = 0.0;

  int size() const noexcept { return static_cast<int>(diagonal.size()); }

  template <typename T>
  void apply_compact(const T* in, T* out) const noexcept {
    const int m = size();
    const double e = off_diagonal;
    for (int i = 0; i < m; ++i) {
      const T* row = in + static_cast<std::size_t>(i) * m;
      const T* up = i > 0 ? row - m : nullptr;
      const T* down = i + 1 < m ? row + m : nullptr;
      T* o = out + static_cast<std::size_t>(i) * m;
      const double di = diagonal[i];
      for (int j = 0; j < m; ++j) {
        T v = (di + diagonal[j]) * row[j];
        T nb = T{};
        if (up) nb += up[j];
        if (down) nb += down[j];
        if (j > 0) nb += row[j - 1];
        if (j + 1 < m) nb += row[j + 1];
        o[j] = v + e * nb;
      }
      o[i] += contact * row[i];
    }
  }

  WaveFn2D apply(const WaveFn2D& psi) const {
    require_same_grid(grid, psi.grid());
    const auto x = detail::pack_interior(psi);
    std::vector<cplx> y(x.size());
    apply_compact(x.data(), y.data());
    return detail::unpack_interior(grid, y, psi.bosonic());
  }

  /// <Psi|H2|Psi> with the dx^2 measure.
  double expectation(const WaveFn2D& psi) const {
    return std::real(inner_product(psi, apply(psi)));
  }
};

inline TwoParticleHamiltonian build_two_particle_hamiltonian(const SpatialGrid& grid,
                                                             const LatticeParams& p,
                                                             const InteractionParams& ip) {
  validate(p);
  if (!(ip.g1d >= 0.0) || !std::isfinite(ip.g1d)) {
    throw Error(ErrorCode::invalid_parameters, "coupling must be finite and non-negative");
  }
  const double hop = units::kinetic_coefficient_khz / (grid.dx() * grid.dx());
  TwoParticleHamiltonian h{grid, std::vector<double>(grid.interior()), -hop, ip.g1d / grid.dx()};
  interior_sampler(grid).potential(p, h.diagonal);
  for (auto& d : h.diagonal) d += 2.0 * hop;
  return h;
}

struct TwoParticleState {
  WaveFn2D wavefunction;
  double energy = 0.0;
  /// ||H2 Psi - E Psi|| / ||H2 Psi||.
  double residual = 0.0;
  /// |<reference|Psi>|^2 with both normalized.
  double reference_overlap = 0.0;
};

struct EigenstateOptions {
  /// Candidates farther than this from the target energy are ignored.
  double energy_window = std::numeric_limits<double>::infinity();
  double tolerance = 1e-10;
  int max_iterations = 200;
  /// Single-particle levels combined into the starting subspace.
  int seed_levels = 4;
};

/// Eigenstate of H2 with maximal overlap with `reference`, found by a
/// Davidson iteration in the bosonic sector. The correction equation is
/// preconditioned with the exact inverse of the non-interacting part,
/// applied in the product eigenbasis of H1, with an Olsen projection.
inline TwoParticleState two_particle_eigenstate(const TwoParticleHamiltonian& h,
                                                std::optional<double> target_energy,
                                                const WaveFn2D& reference,
                                                const EigenstateOptions& opt = {}) {
  using Mat = Eigen::MatrixXd;
  using Vec = Eigen::VectorXd;
  using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
  require_same_grid(h.grid, reference.grid());
  const int m = h.size();
  const Eigen::Index dim = static_cast<Eigen::Index>(m) * m;

  // Single-particle eigenbasis.
  Vec d1 = Eigen::Map<const Vec>(h.diagonal.data(), m);
  Vec e1 = Vec::Constant(m - 1, h.off_diagonal);
  Eigen::SelfAdjointEigenSolver<Mat> es;
  es.computeFromTridiagonal(d1, e1, Eigen::ComputeEigenvectors);
  const Vec& levels = es.eigenvalues();
  const Mat& phi = es.eigenvectors();

  auto apply_h = [&](const Vec& x) {
    Vec y(dim);
    h.apply_compact(x.data(), y.data());
    return y;
  };
  // (H0 - shift)^{-1} x with H0 = H1 (x) 1 + 1 (x) H1.
  const double guard = 1e-12 * (std::abs(levels(0)) + std::abs(levels(m - 1)));
  auto precondition = [&](const Vec& x, double shift) {
    Eigen::Map<const RowMat> xm(x.data(), m, m);
    Mat t = phi.transpose() * xm * phi;
    for (int a = 0; a < m; ++a) {
      for (int b = 0; b < m; ++b) {
        double den = levels(a) + levels(b) - shift;
        if (std::abs(den) < guard) den = den < 0.0 ? -guard : guard;
        t(a, b) /= den;
      }
    }
    Vec out(dim);
    Eigen::Map<RowMat> om(out.data(), m, m);
    om = phi * t * phi.transpose();
    return out;
  };
  auto symmetrize = [&](Vec& x) {
    Eigen::Map<RowMat> xm(x.data(), m, m);
    RowMat s = 0.5 * (xm + xm.transpose());
    xm = s;
  };

  // Reference: phase-aligned real part, plain-normalized.
  const auto ref_c = detail::pack_interior(reference);
  std::size_t kmax = 0;
  for (std::size_t k = 1; k < ref_c.size(); ++k) {
    if (std::abs(ref_c[k]) > std::abs(ref_c[kmax])) kmax = k;
  }
  const cplx align = ref_c[kmax] == cplx{} ? cplx{1.0} : std::conj(ref_c[kmax]) / std::abs(ref_c[kmax]);
  Vec ref(dim);
  for (Eigen::Index k = 0; k < dim; ++k) ref(k) = std::real(align * ref_c[k]);
  const double ref_c_norm = std::sqrt(detail::squared_norm<cplx>(ref_c));
  if (!(ref_c_norm > 0.0)) throw Error(ErrorCode::invalid_parameters, "reference state is null");
  symmetrize(ref);
  ref /= ref.norm();

  Mat basis(dim, 0), hbasis(dim, 0);
  auto add_vector = [&](Vec v) {
    for (int pass = 0; pass < 2; ++pass) {
      if (basis.cols() > 0) v -= basis * (basis.transpose() * v);
    }
    const double nv = v.norm();
    if (nv < 1e-10) return false;
    v /= nv;
    basis.conservativeResize(Eigen::NoChange, basis.cols() + 1);
    hbasis.conservativeResize(Eigen::NoChange, hbasis.cols() + 1);
    basis.col(basis.cols() - 1) = v;
    hbasis.col(hbasis.cols() - 1) = apply_h(v);
    return true;
  };

  add_vector(ref);
  const int seeds = std::min(opt.seed_levels, m);
  for (int a = 0; a < seeds; ++a) {
    for (int b = a; b < seeds; ++b) {
      Vec v(dim);
      Eigen::Map<RowMat> vm(v.data(), m, m);
      vm = phi.col(a) * phi.col(b).transpose() + phi.col(b) * phi.col(a).transpose();
      add_vector(v);
    }
  }

  double best_residual = std::numeric_limits<double>::infinity();
  for (int it = 0; it < opt.max_iterations; ++it) {
    const Mat small = basis.transpose() * hbasis;
    Eigen::SelfAdjointEigenSolver<Mat> ritz(0.5 * (small + small.transpose()));
    const Vec proj = basis.transpose() * ref;
    std::vector<std::pair<double, int>> cands;
    for (int c = 0; c < ritz.eigenvalues().size(); ++c) {
      const double ev = ritz.eigenvalues()(c);
      if (target_energy && std::abs(ev - *target_energy) > opt.energy_window) continue;
      const double ov = std::pow(ritz.eigenvectors().col(c).dot(proj), 2);
      cands.emplace_back(ov, c);
    }
    if (cands.empty()) {
      throw Error(ErrorCode::non_convergence, "no Ritz value inside the target energy window");
    }
    std::sort(cands.begin(), cands.end(), std::greater<>());
    const int sel = cands.front().second;
    const double theta = ritz.eigenvalues()(sel);
    const Vec y = ritz.eigenvectors().col(sel);
    Vec u = basis * y;
    Vec hu = hbasis * y;
    Vec r = hu - theta * u;
    const double res = r.norm() / std::max(hu.norm(), 1e-300);
    best_residual = std::min(best_residual, res);
    if (res <= opt.tolerance) {
      if (cands.size() > 1 && cands[1].first >= 0.99 * cands[0].first) {
        throw Error(ErrorCode::ambiguous_match,
                    "two eigenstates overlap the reference within 1% of each other");
      }
      // Sign: largest component positive, then dx^2 normalization.
      Eigen::Index imax;
      u.cwiseAbs().maxCoeff(&imax);
      if (u(imax) < 0.0) u = -u;
      std::vector<cplx> xc(dim);
      for (Eigen::Index k = 0; k < dim; ++k) xc[k] = u(k);
      TwoParticleState st{detail::unpack_interior(h.grid, xc, true), theta, res, 0.0};
      st.wavefunction.normalize();
      st.reference_overlap = std::norm(inner_product(reference, st.wavefunction)) /
                             reference.norm_squared();
      return st;
    }
    // Olsen-corrected preconditioned residual.
    const Vec mr = precondition(r, theta);
    const Vec mu = precondition(u, theta);
    const double denom = u.dot(mu);
    Vec t = std::abs(denom) > 1e-300 ? Vec(mr - (u.dot(mr) / denom) * mu) : mr;
    symmetrize(t);
    if (basis.cols() >= 48) {
      // Restart on the selected Ritz vector and the next candidates.
      Mat keep(dim, 0);
      const int nkeep = std::min<int>(12, static_cast<int>(cands.size()));
      Mat nb(dim, nkeep), nh(dim, nkeep);
      for (int k = 0; k < nkeep; ++k) {
        nb.col(k) = basis * ritz.eigenvectors().col(cands[k].second);
        nh.col(k) = hbasis * ritz.eigenvectors().col(cands[k].second);
      }
      basis = nb;
      hbasis = nh;
    }
    if (!add_vector(t)) {
      // Stagnation: fall back to the raw residual direction.
      symmetrize(r);
      if (!add_vector(r)) break;
    }
  }
  throw NonConvergence("two-particle eigensolver hit its iteration cap", best_residual);
}

/// Eigenstate of H2 continuously connected to symmetrized_product(a, b).
inline TwoParticleState two_particle_eigenstate(const TwoParticleHamiltonian& h, const WaveFn1D& a,
                                                const WaveFn1D& b,
                                                const EigenstateOptions& opt = {}) {
  return two_particle_eigenstate(h, std::nullopt, WaveFn2D::symmetrized_product(a, b), opt);
}

enum class Scheme2D {
  /// Alternating-direction step: implicit along x1 and explicit along x2,
  /// then the reverse. Each direction carries half of the contact term.
  peaceman_rachford,
  /// Full two-dimensional Crank-Nicolson step; the linear system is solved by
  /// GMRES preconditioned with the non-interacting directional factors.
  crank_nicolson,
};

struct Propagator2DOptions {
  Scheme2D scheme = Scheme2D::peaceman_rachford;
  double solver_tolerance = 1e-13;
  int restart = 30;
  int max_iterations = 300;
};

/// Two-particle stepper bound to one grid and interaction strength. States
/// are interior blocks in the layout of detail::pack_interior.
class Propagator2D {
 public:
  Propagator2D(const SpatialGrid& grid, const InteractionParams& ip,
               const Propagator2DOptions& opt = {})
      : grid_(grid),
        potential_(grid),
        opt_(opt),
        m_(grid.interior()),
        hop_(units::kinetic_coefficient_khz / (grid.dx() * grid.dx())),
        contact_(ip.g1d / grid.dx()) {
    if (!(ip.g1d >= 0.0)) throw Error(ErrorCode::invalid_parameters, "coupling must be >= 0");
  }

  const SpatialGrid& grid() const noexcept { return grid_; }
  const PotentialSampler& sampler() const noexcept { return potential_.sampler(); }
  int interior() const noexcept { return m_; }
  double measure() const noexcept { return grid_.dx() * grid_.dx(); }
  /// Krylov iterations used by the most recent step (0 for the ADI scheme).
  int last_iterations() const noexcept { return last_iterations_; }

  /// One slice between parameter nodes p0 and p1; negative dt inverts the step.
  void step(std::span<cplx> psi, const LatticeParams& p0, const LatticeParams& p1, double dt) {
    const auto& v0 = potential_(p0);
    const auto& v1 = potential_(p1);
    step(psi, v0, v1, dt);
  }

  /// Same, with the interior potentials at both nodes given directly.
  void step(std::span<cplx> psi, std::span<const double> v0, std::span<const double> v1,
            double dt) {
    const double shift = prepare(v0, v1, dt);
    if (opt_.scheme == Scheme2D::peaceman_rachford) {
      peaceman_rachford(psi);
      last_iterations_ = 0;
    } else {
      crank_nicolson(psi);
    }
    const cplx phase = std::polar(1.0, -2.0 * a_ * 2.0 * shift);
    for (auto& v : psi) v *= phase;
  }

  /// Reverse sweep of one slice for gradient evaluation (alternating-direction
  /// scheme only). psi and chi enter at the end of the slice and leave at its
  /// start; density receives the one-particle marginal D_k of the exact
  /// derivative of the discrete step, in the convention of Propagator1D::reverse.
  void reverse(std::span<cplx> psi, std::span<cplx> chi, const LatticeParams& p0,
               const LatticeParams& p1, double dt, std::span<cplx> density,
               std::size_t& ref_index) {
    if (opt_.scheme != Scheme2D::peaceman_rachford) {
      throw Error(ErrorCode::invalid_parameters,
                  "control gradients need the alternating-direction scheme");
    }
    const double shift = prepare(potential_(p0), potential_(p1), dt);
    ref_index = ref_index_;
    const std::size_t n = size();
    const cplx unphase = std::polar(1.0, 2.0 * a_ * 2.0 * shift);
    for (auto& v : psi) v *= unphase;
    for (auto& v : chi) v *= unphase;
    // Factors: A_d = 1 - i a H_d, B_d = 1 + i a H_d, step = B2^-1 A1 B1^-1 A2.
    end_.assign(psi.begin(), psi.end());
    tmp_.resize(n);
    mid_.resize(n);
    apply_direction(psi.data(), tmp_.data(), 1, 1.0);
    solve_direction(tmp_.data(), 0, -1.0);
    mid_ = tmp_;
    apply_direction(mid_.data(), psi.data(), 0, 1.0);
    solve_direction(psi.data(), 1, -1.0);
    // w = A2^-1 chi, z = A1^-1 B1 w, chi_start = B2 z.
    w_.assign(chi.begin(), chi.end());
    solve_direction(w_.data(), 1, -1.0);
    apply_direction(w_.data(), tmp_.data(), 0, 1.0);
    solve_direction(tmp_.data(), 0, -1.0);
    apply_direction(tmp_.data(), chi.data(), 1, 1.0);
    std::fill(density.begin(), density.end(), cplx{});
    const double scale = a_ * measure();
    for (int i = 0; i < m_; ++i) {
      const std::size_t r = static_cast<std::size_t>(i) * m_;
      cplx row{};
      for (int j = 0; j < m_; ++j) {
        const std::size_t k = r + j;
        row += std::conj(w_[k] + tmp_[k]) * mid_[k];
        density[j] += scale * (std::conj(w_[k]) * end_[k] + std::conj(tmp_[k]) * psi[k]);
      }
      density[i] += scale * row;
    }
  }

 private:
  std::size_t size() const noexcept { return static_cast<std::size_t>(m_) * m_; }

  // Averaged, shifted one-particle diagonal for the slice; returns the
  // per-particle energy reference, restored as an exact phase by the caller.
  double prepare(std::span<const double> v0, std::span<const double> v1, double dt) {
    hbar_.resize(m_);
    for (int i = 0; i < m_; ++i) hbar_[i] = 0.5 * (v0[i] + v1[i]);
    ref_index_ = detail::shift_index(hbar_);
    const double shift = hbar_[ref_index_];
    for (auto& d : hbar_) d += 2.0 * hop_ - shift;
    a_ = units::pi * dt;
    return shift;
  }

  // out = (1 + s i a H') x for the full operator, s = +1 or -1.
  void apply_full(const cplx* x, cplx* out, double s) const noexcept {
    const cplx ia{0.0, s * a_};
    const double e = -hop_;
    for (int i = 0; i < m_; ++i) {
      const cplx* row = x + static_cast<std::size_t>(i) * m_;
      const cplx* up = i > 0 ? row - m_ : nullptr;
      const cplx* down = i + 1 < m_ ? row + m_ : nullptr;
      cplx* o = out + static_cast<std::size_t>(i) * m_;
      const double di = hbar_[i];
      for (int j = 0; j < m_; ++j) {
        cplx nb{};
        if (up) nb += up[j];
        if (down) nb += down[j];
        if (j > 0) nb += row[j - 1];
        if (j + 1 < m_) nb += row[j + 1];
        double d = di + hbar_[j];
        if (i == j) d += contact_;
        o[j] = row[j] + ia * (d * row[j] + e * nb);
      }
    }
  }

  // out = (1 + s i a H_dir) x for one direction (0: along x1, 1: along x2),
  // where H_dir carries half of the contact term.
  void apply_direction(const cplx* x, cplx* out, int dir, double s,
                       bool with_contact = true) const noexcept {
    const cplx ia{0.0, s * a_};
    const double e = -hop_;
    const double half = with_contact ? 0.5 * contact_ : 0.0;
    for (int i = 0; i < m_; ++i) {
      const cplx* row = x + static_cast<std::size_t>(i) * m_;
      cplx* o = out + static_cast<std::size_t>(i) * m_;
      for (int j = 0; j < m_; ++j) {
        cplx nb{};
        if (dir == 0) {
          if (i > 0) nb += row[j - m_];
          if (i + 1 < m_) nb += row[j + m_];
        } else {
          if (j > 0) nb += row[j - 1];
          if (j + 1 < m_) nb += row[j + 1];
        }
        double d = dir == 0 ? hbar_[i] : hbar_[j];
        if (i == j) d += half;
        o[j] = row[j] + ia * (d * row[j] + e * nb);
      }
    }
  }

  // x <- (1 + s i a H_dir)^{-1} x. Without with_contact the contact term is
  // left out of H_dir.
  void solve_direction(cplx* x, int dir, double s = 1.0, bool with_contact = true) {
    const cplx ia{0.0, s * a_};
    const cplx off = ia * (-hop_);
    const double half = with_contact ? 0.5 * contact_ : 0.0;
    const std::size_t m = m_;
    if (dir == 0) {
      auto diag = [&](std::size_t i, std::size_t c) {
        return 1.0 + ia * (hbar_[i] + (i == c ? half : 0.0));
      };
      thomas_solve_columns(diag, off, x, m, m, m, batch_scratch_);
    } else {
      line_diag_.resize(m);
      line_scratch_.resize(m);
      for (std::size_t i = 0; i < m; ++i) {
        for (std::size_t j = 0; j < m; ++j) line_diag_[j] = 1.0 + ia * hbar_[j];
        line_diag_[i] += ia * half;
        thomas_solve(line_diag_, off, std::span<cplx>(x + i * m, m), line_scratch_);
      }
    }
  }

  // The contact ridge couples the two directions strongly at high kinetic
  // energy, so the factorized preconditioner leaves it out entirely.
  void precondition(cplx* x) {
    solve_direction(x, 0, 1.0, false);
    solve_direction(x, 1, 1.0, false);
  }

  void peaceman_rachford(std::span<cplx> psi) {
    tmp_.resize(size());
    apply_direction(psi.data(), tmp_.data(), 1, -1.0);
    solve_direction(tmp_.data(), 0);
    apply_direction(tmp_.data(), psi.data(), 0, -1.0);
    solve_direction(psi.data(), 1);
  }

  static cplx dot(const std::vector<cplx>& a, const std::vector<cplx>& b) noexcept {
    cplx s{};
    for (std::size_t k = 0; k < a.size(); ++k) s += std::conj(a[k]) * b[k];
    return s;
  }

  // Right-preconditioned restarted GMRES for (1 + i a H') x = (1 - i a H') psi.
  void crank_nicolson(std::span<cplx> psi) {
    const std::size_t n = size();
    const int k_max = opt_.restart;
    rhs_.resize(n);
    apply_full(psi.data(), rhs_.data(), -1.0);
    const double bnorm = std::sqrt(detail::squared_norm<cplx>(rhs_));
    // Initial guess: the preconditioner applied to the right-hand side.
    std::copy(rhs_.begin(), rhs_.end(), psi.begin());
    precondition(psi.data());
    if (krylov_.size() < static_cast<std::size_t>(k_max + 1)) krylov_.resize(k_max + 1);
    for (auto& v : krylov_) v.resize(n);
    w_.resize(n);
    std::vector<cplx> hess(static_cast<std::size_t>(k_max + 1) * k_max);
    std::vector<cplx> cs(k_max), sn(k_max), g(k_max + 1);
    auto H = [&](int r, int c) -> cplx& { return hess[static_cast<std::size_t>(r) * k_max + c]; };
    int total = 0;
    double residual = 0.0;
    while (true) {
      apply_full(psi.data(), w_.data(), 1.0);
      auto& v0 = krylov_[0];
      for (std::size_t k = 0; k < n; ++k) v0[k] = rhs_[k] - w_[k];
      const double beta = std::sqrt(detail::squared_norm<cplx>(v0));
      residual = beta / bnorm;
      if (residual <= opt_.solver_tolerance || total >= opt_.max_iterations) break;
      for (auto& v : v0) v /= beta;
      std::fill(g.begin(), g.end(), cplx{});
      g[0] = beta;
      int k = 0;
      for (; k < k_max && total < opt_.max_iterations; ++k, ++total) {
        tmp_ = krylov_[k];
        precondition(tmp_.data());
        apply_full(tmp_.data(), w_.data(), 1.0);
        for (int i = 0; i <= k; ++i) {
          const cplx hij = dot(krylov_[i], w_);
          H(i, k) = hij;
          const auto& vi = krylov_[i];
          for (std::size_t q = 0; q < n; ++q) w_[q] -= hij * vi[q];
        }
        const double hn = std::sqrt(detail::squared_norm<cplx>(w_));
        H(k + 1, k) = hn;
        if (hn > 0.0) {
          auto& vk = krylov_[k + 1];
          for (std::size_t q = 0; q < n; ++q) vk[q] = w_[q] / hn;
        }
        for (int i = 0; i < k; ++i) {
          const cplx t = std::conj(cs[i]) * H(i, k) + std::conj(sn[i]) * H(i + 1, k);
          H(i + 1, k) = -sn[i] * H(i, k) + cs[i] * H(i + 1, k);
          H(i, k) = t;
        }
        const cplx x = H(k, k), y = H(k + 1, k);
        const double r = std::sqrt(std::norm(x) + std::norm(y));
        cs[k] = r > 0.0 ? x / r : cplx{1.0};
        sn[k] = r > 0.0 ? y / r : cplx{};
        H(k, k) = r;
        H(k + 1, k) = 0.0;
        g[k + 1] = -sn[k] * g[k];
        g[k] = std::conj(cs[k]) * g[k];
        if (std::abs(g[k + 1]) / bnorm <= opt_.solver_tolerance) {
          ++k;
          ++total;
          break;
        }
      }
      // Back substitution and update x += P^{-1} V y.
      std::vector<cplx> yv(k);
      for (int i = k - 1; i >= 0; --i) {
        cplx s = g[i];
        for (int j = i + 1; j < k; ++j) s -= H(i, j) * yv[j];
        yv[i] = s / H(i, i);
      }
      std::fill(tmp_.begin(), tmp_.end(), cplx{});
      for (int i = 0; i < k; ++i) {
        const auto& vi = krylov_[i];
        for (std::size_t q = 0; q < n; ++q) tmp_[q] += yv[i] * vi[q];
      }
      precondition(tmp_.data());
      for (std::size_t q = 0; q < n; ++q) psi[q] += tmp_[q];
    }
    last_iterations_ = total;
    if (!(residual <= opt_.solver_tolerance)) {
      throw NonConvergence("two-particle linear solve missed its tolerance", residual);
    }
  }

  SpatialGrid grid_;
  PotentialCache potential_;
  Propagator2DOptions opt_;
  int m_;
  double hop_;
  double contact_;
  double a_ = 0.0;
  int last_iterations_ = 0;
  std::size_t ref_index_ = 0;
  std::vector<double> hbar_;
  std::vector<cplx> rhs_, tmp_, w_, mid_, end_, batch_scratch_, line_diag_, line_scratch_;
  std::vector<std::vector<cplx>> krylov_;
};

/// Peaceman-Rachford step between the operators of two time nodes:
/// implicit along x1 and explicit along x2, then the reverse. Each direction
/// carries half of the contact term. With g1d > 0 the two directional
/// operators do not commute, so norm and exchange symmetry hold to O(dt^2)
/// rather than exactly; at g1d = 0 the step factorizes into 1D Cayley steps.
inline WaveFn2D pr_step(const WaveFn2D& psi, const TwoParticleHamiltonian& h_n,
                        const TwoParticleHamiltonian& h_n1, double dt) {
  require_same_grid(psi.grid(), h_n.grid);
  require_same_grid(psi.grid(), h_n1.grid);
  if (h_n.contact != h_n1.contact || h_n.off_diagonal != h_n1.off_diagonal) {
    throw Error(ErrorCode::grid_mismatch, "operators differ in coupling or kinetic term");
  }
  InteractionParams ip;
  ip.g1d = h_n.contact * psi.grid().dx();
  Propagator2D prop(psi.grid(), ip, {Scheme2D::peaceman_rachford});
  const double hop = -h_n.off_diagonal;
  std::vector<double> v0(h_n.diagonal), v1(h_n1.diagonal);
  for (auto& v : v0) v -= 2.0 * hop;
  for (auto& v : v1) v -= 2.0 * hop;
  auto x = detail::pack_interior(psi);
  prop.step(x, v0, v1, dt);
  return detail::unpack_interior(psi.grid(), x, psi.bosonic());
}

struct Snapshot2D {
  double time = 0.0;
  WaveFn2D state;
};

struct TwoParticleEvolution {
  WaveFn2D final_state;
  std::vector<Snapshot2D> trajectory;
  /// max |1 - norm| over all steps.
  double norm_drift = 0.0;
  /// max symmetry_defect() over all steps (bosonic inputs only).
  double symmetry_drift = 0.0;
  /// Krylov iterations summed over the run.
  long solver_iterations = 0;
};

struct TwoParticleEvolveOptions {
  Propagator2DOptions propagator;
  /// Bands on |1 - norm| and on the exchange defect; when unset they follow
  /// the scheme (exact for Crank-Nicolson, discretization-sized for ADI).
  std::optional<double> norm_tolerance;
  std::optional<double> symmetry_tolerance;

  double norm_band() const {
    if (norm_tolerance) return *norm_tolerance;
    return propagator.scheme == Scheme2D::crank_nicolson ? norm_drift_tolerance : 1e-4;
  }
  double symmetry_band() const {
    if (symmetry_tolerance) return *symmetry_tolerance;
    return propagator.scheme == Scheme2D::crank_nicolson ? 1e-8 : 1e-2;
  }
};

/// Propagates a two-particle state through all slices of seq.
inline TwoParticleEvolution evolve_two_particle(const WaveFn2D& psi0, const ControlSequence& seq,
                                                const InteractionParams& ip,
                                                std::span<const double> record_times = {},
                                                const TwoParticleEvolveOptions& opt = {}) {
  detail::require_normalized(psi0.norm_squared());
  const auto& grid = psi0.grid();
  const bool bosonic = psi0.bosonic();
  if (bosonic && !(psi0.symmetry_defect() <= 1e-8)) {
    throw Error(ErrorCode::invalid_parameters, "bosonic initial state is not exchange symmetric");
  }
  const auto nodes = detail::record_nodes(seq, record_times);
  Propagator2D prop(grid, ip, opt.propagator);
  auto x = detail::pack_interior(psi0);
  TwoParticleEvolution out;
  const double dx2 = grid.dx() * grid.dx();
  auto record = [&](int j) {
    for (const int node : nodes) {
      if (node == j) out.trajectory.push_back({seq.time(j), detail::unpack_interior(grid, x, bosonic)});
    }
  };
  const int m = grid.interior();
  auto symmetry_defect = [&]() {
    double dmax = 0.0, amax = 0.0;
    for (int i = 0; i < m; ++i) {
      for (int j = 0; j < m; ++j) {
        const cplx v = x[static_cast<std::size_t>(i) * m + j];
        amax = std::max(amax, std::abs(v));
        if (j > i) dmax = std::max(dmax, std::abs(v - x[static_cast<std::size_t>(j) * m + i]));
      }
    }
    return amax > 0.0 ? dmax / amax : 0.0;
  };
  record(0);
  for (int j = 0; j < seq.steps(); ++j) {
    prop.step(x, seq[j], seq[j + 1], seq.dt());
    out.solver_iterations += prop.last_iterations();
    const double drift = std::abs(1.0 - detail::squared_norm<cplx>(x) * dx2);
    out.norm_drift = std::max(out.norm_drift, drift);
    if (!(drift <= opt.norm_band())) {
      throw Error(ErrorCode::norm_drift_exceeded, "two-particle norm left its tolerance band");
    }
    if (bosonic) {
      out.symmetry_drift = std::max(out.symmetry_drift, symmetry_defect());
      if (!(out.symmetry_drift <= opt.symmetry_band())) {
        throw Error(ErrorCode::norm_drift_exceeded, "exchange symmetry lost during propagation");
      }
    }
    record(j + 1);
  }
  out.final_state = detail::unpack_interior(grid, x, bosonic);
  return out;
}

/// Gridded density table "x1 x2 |Psi|^2", one block per x1 value.
inline void write_density(std::ostream& os, const WaveFn2D& psi) {
  const auto& g = psi.grid();
  os << "x1 x2 |Psi|^2\n";
  os.precision(10);
  for (int i = 0; i < g.points(); ++i) {
    for (int j = 0; j < g.points(); ++j) {
      os << g.x(i) << ' ' << g.x(j) << ' ' << std::norm(psi(i, j)) << '\n';
    }
    os << '\n';
  }
}

}  // namespace dwt
