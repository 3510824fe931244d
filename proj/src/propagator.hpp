#pragma once

// Internal finite-difference engine shared by the forward simulator, the
// adjoint gradient and the linearized (Born) operator.
//
// Update for step n (all fields on the padded grid):
//   psi_x  = a_x psi_x + b_x Dx u
//   zeta_x = a_x zeta_x + b_x (Dxx u + Dx psi_x)
//   T      = Dxx u + Dx psi_x + zeta_x + (same in z)
//   u_next = M (2 u - u_prev + c T)          M zeroes the free-surface row
// with c = (v dt)^2. Away from the absorbing strips psi = zeta = 0 and T is
// the plain fourth-order Laplacian.

#include <cstddef>
#include <memory>
#include <span>
#include <vector>

#include "drfwi/model.hpp"
#include "drfwi/wavesim.hpp"

namespace drfwi {

struct WaveState {
  std::vector<double> u_prev, u, psi_x, psi_z, zeta_x, zeta_z;
  explicit WaveState(std::size_t n = 0)
      : u_prev(n, 0.0), u(n, 0.0), psi_x(n, 0.0), psi_z(n, 0.0), zeta_x(n, 0.0), zeta_z(n, 0.0) {}
};

/// Adjoint variables carried between reverse steps.
struct AdjointState {
  std::vector<double> ubar_next, ubar, ubar_prev, psi_x, psi_z, zeta_x, zeta_z;
  std::vector<double> y, w;  // scratch
  explicit AdjointState(std::size_t n = 0)
      : ubar_next(n, 0.0), ubar(n, 0.0), ubar_prev(n, 0.0), psi_x(n, 0.0), psi_z(n, 0.0),
        zeta_x(n, 0.0), zeta_z(n, 0.0), y(n, 0.0), w(n, 0.0) {}
};

/// Padded computational grid: nz + pml rows by nx + 2*pml columns, surrounded
/// by a two-cell halo holding zeros (sides, bottom) or odd images (top).
class Propagator {
 public:
  Propagator(const VelocityModel& m, const WaveConfig& cfg, double dt_internal);

  std::size_t buffer_size() const noexcept { return rows_ * stride_; }
  std::size_t index(std::size_t ext_row, std::size_t ext_col) const noexcept {
    return (ext_row + 2) * stride_ + ext_col + 2;
  }
  std::size_t model_index(const GridIndex& g) const noexcept {
    return index(g.row, g.col + pml_);
  }

  /// Advances `s` by one step: updates the auxiliary fields to step n, writes
  /// u_next (without source) and optionally the stencil term T^n. Rotates
  /// u_prev <- u <- u_next is left to the caller.
  void step(WaveState& s, double* u_next, double* stencil_out) const;
  /// Reverse of `step` for the adjoint variables. `ubar_next` must be
  /// complete; contributions are added to ubar and ubar_prev.
  void adjoint_step(AdjointState& a) const;
  void refresh_ghosts(double* u) const;
  bool finite(const double* u) const;

  double dt() const noexcept { return dt_; }
  double source_scale() const noexcept { return source_scale_; }
  std::size_t ext_nz() const noexcept { return ext_nz_; }
  std::size_t ext_nx() const noexcept { return ext_nx_; }
  std::size_t pml() const noexcept { return pml_; }
  std::size_t model_nz() const noexcept { return nz_; }
  std::size_t model_nx() const noexcept { return nx_; }

  const std::vector<double>& c() const noexcept { return c_; }
  /// Velocities (km/s) on the padded grid, halo zero.
  const std::vector<double>& velocity() const noexcept { return v_; }
  /// Model cell whose velocity the padded cell copies.
  std::size_t source_model_cell(std::size_t ext_row, std::size_t ext_col) const noexcept;

 private:
  bool in_x_strip(std::size_t col) const noexcept { return col < pml_ || col >= pml_ + nx_; }

  std::size_t nz_, nx_, pml_;
  std::size_t ext_nz_, ext_nx_;
  std::size_t rows_, stride_;
  double dt_;
  double inv_dz_, inv_dx_;
  double inv_dz2_, inv_dx2_;
  double source_scale_;
  std::vector<double> c_, v_;
  std::vector<double> ax_, bx_;  // per padded column
  std::vector<double> az_, bz_;  // per padded row
  std::vector<std::size_t> x_cols_;       // strip columns
  std::vector<std::size_t> x_halo_cols_;  // strip columns widened by the stencil reach
};

/// Everything a single shot needs on the internal time axis.
struct ShotSetup {
  std::shared_ptr<const Propagator> prop;
  std::size_t source_cell = 0;              // buffer index
  std::vector<std::size_t> receiver_cells;  // buffer indices
  std::vector<double> wavelet;              // one value per internal step
  std::size_t substeps = 1;
  std::size_t nt = 0;  // recorded samples
  std::size_t internal_steps() const noexcept { return (nt - 1) * substeps; }

  /// Adds the source term of step k to u_next.
  void inject(std::size_t k, double* u_next) const;
};

ShotSetup make_shot_setup(const VelocityModel& m, const AcquisitionGeometry& geom,
                          const SourceWavelet& w, std::size_t source_index,
                          const WaveConfig& cfg);

struct WavefieldTape::Impl {
  ShotSetup setup;
  bool full = true;
  std::size_t interval = 10;
  std::size_t n_fields = 0;    // stencil terms T^0 .. T^{n_fields-1}
  std::vector<double> storage;  // full mode: all T^n; checkpoint mode: WaveState snapshots
  std::vector<double> segment;
  std::size_t segment_start = static_cast<std::size_t>(-1);

  std::span<const double> field(std::size_t k);
};

/// Runs the forward recursion. `tape` may be null.
ShotRecord run_forward(const ShotSetup& s, std::size_t source_index, WavefieldTape::Impl* tape,
                       const WaveConfig& cfg);

/// dJ/dc on the padded grid for residual r = d_syn - d_obs.
void run_adjoint(WavefieldTape::Impl& tape, const ShotRecord& residual, std::vector<double>& grad_c);

WavefieldTape::Impl& tape_impl(WavefieldTape& t);

}  // namespace drfwi
