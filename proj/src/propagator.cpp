#include "propagator.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "drfwi/errors.hpp"

namespace drfwi {

namespace {

// Fourth-order central differences.
constexpr double kC0 = -5.0 / 2.0;
constexpr double kC1 = 4.0 / 3.0;
constexpr double kC2 = -1.0 / 12.0;
constexpr double kD1 = 2.0 / 3.0;
constexpr double kD2 = -1.0 / 12.0;

inline double d2(const double* f, std::size_t k, std::size_t s) {
  return kC0 * f[k] + kC1 * (f[k - s] + f[k + s]) + kC2 * (f[k - 2 * s] + f[k + 2 * s]);
}
inline double d1(const double* f, std::size_t k, std::size_t s) {
  return kD1 * (f[k + s] - f[k - s]) + kD2 * (f[k + 2 * s] - f[k - 2 * s]);
}

}  // namespace

Propagator::Propagator(const VelocityModel& m, const WaveConfig& cfg, double dt_internal)
    : nz_(m.nz()),
      nx_(m.nx()),
      pml_(cfg.pml_width),
      ext_nz_(m.nz() + cfg.pml_width),
      ext_nx_(m.nx() + 2 * cfg.pml_width),
      rows_(ext_nz_ + 4),
      stride_(ext_nx_ + 4),
      dt_(dt_internal),
      inv_dz_(1.0 / m.dz()),
      inv_dx_(1.0 / m.dx()),
      inv_dz2_(1.0 / (m.dz() * m.dz())),
      inv_dx2_(1.0 / (m.dx() * m.dx())),
      source_scale_(1.0 / (m.dz() * m.dx())) {
  c_.assign(buffer_size(), 0.0);
  v_.assign(buffer_size(), 0.0);
  for (std::size_t i = 0; i < ext_nz_; ++i) {
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const double v = m.values()[source_model_cell(i, j)];
      const std::size_t k = index(i, j);
      v_[k] = v;
      c_[k] = (1000.0 * v * dt_) * (1000.0 * v * dt_);
    }
  }

  // Convolutional PML coefficients, 1D per axis. `cells` counts from the
  // inner edge of the strip (1 = first absorbing cell).
  auto coeffs = [&](double cells, double h, double& a, double& b) {
    const double width_m = static_cast<double>(pml_) * h;
    const double xi = cells / static_cast<double>(pml_);
    const double d0 = 3.0 * cfg.pml_velocity * 1000.0 * std::log(1.0 / cfg.pml_reflection) /
                      (2.0 * width_m);
    const double sigma = d0 * xi * xi;
    const double alpha = std::numbers::pi * cfg.pml_frequency * (1.0 - xi);
    a = std::exp(-(sigma + alpha) * dt_);
    b = sigma / (sigma + alpha) * (a - 1.0);
  };
  ax_.assign(ext_nx_, 0.0);
  bx_.assign(ext_nx_, 0.0);
  az_.assign(ext_nz_, 0.0);
  bz_.assign(ext_nz_, 0.0);
  for (std::size_t j = 0; j < ext_nx_ && pml_ > 0; ++j) {
    if (j < pml_) coeffs(static_cast<double>(pml_ - j), m.dx(), ax_[j], bx_[j]);
    if (j >= pml_ + nx_) coeffs(static_cast<double>(j - pml_ - nx_ + 1), m.dx(), ax_[j], bx_[j]);
  }
  for (std::size_t i = nz_; i < ext_nz_; ++i) {
    coeffs(static_cast<double>(i - nz_ + 1), m.dz(), az_[i], bz_[i]);
  }
  for (std::size_t j = 0; j < ext_nx_ && pml_ > 0; ++j) {
    if (in_x_strip(j)) x_cols_.push_back(j);
    if (j < pml_ + 2 || j + 2 >= pml_ + nx_) x_halo_cols_.push_back(j);
  }
}

std::size_t Propagator::source_model_cell(std::size_t ext_row, std::size_t ext_col) const noexcept {
  const std::size_t row = std::min(ext_row, nz_ - 1);
  std::size_t col = 0;
  if (ext_col >= pml_) col = std::min(ext_col - pml_, nx_ - 1);
  return row * nx_ + col;
}

void Propagator::refresh_ghosts(double* u) const {
  // Odd reflection about the surface row: u(-r) = -u(r).
  double* row_m1 = u + 1 * stride_;
  double* row_m2 = u + 0 * stride_;
  const double* row_p1 = u + 3 * stride_;
  const double* row_p2 = u + 4 * stride_;
  for (std::size_t j = 0; j < stride_; ++j) {
    row_m1[j] = -row_p1[j];
    row_m2[j] = -row_p2[j];
  }
}

void Propagator::step(WaveState& st, double* __restrict u_next, double* __restrict stencil_out) const {
  const double* __restrict u = st.u.data();
  const double* __restrict u_prev = st.u_prev.data();
  const double* __restrict c = c_.data();
  double* __restrict psi_x = st.psi_x.data();
  double* __restrict psi_z = st.psi_z.data();
  double* __restrict zeta_x = st.zeta_x.data();
  double* __restrict zeta_z = st.zeta_z.data();
  const std::size_t s = stride_;

  // Row 0 is the free surface and stays zero throughout.
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    for (std::size_t j : x_cols_) {
      const std::size_t k = index(i, j);
      psi_x[k] = ax_[j] * psi_x[k] + bx_[j] * inv_dx_ * d1(u, k, 1);
    }
  }
  for (std::size_t i = nz_; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      psi_z[k] = az_[i] * psi_z[k] + bz_[i] * inv_dz_ * d1(u, k, s);
    }
  }

  for (std::size_t j = 0; j < ext_nx_; ++j) u_next[index(0, j)] = 0.0;
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      const double lap = inv_dz2_ * d2(u, k, s) + inv_dx2_ * d2(u, k, 1);
      if (stencil_out != nullptr) stencil_out[k] = lap;
      u_next[k] = 2.0 * u[k] - u_prev[k] + c[k] * lap;
    }
  }
  if (stencil_out != nullptr) {
    for (std::size_t j = 0; j < ext_nx_; ++j) stencil_out[index(0, j)] = 0.0;
  }

  for (std::size_t i = 1; i < ext_nz_; ++i) {
    for (std::size_t j : x_halo_cols_) {
      const std::size_t k = index(i, j);
      const double dpsi = inv_dx_ * d1(psi_x, k, 1);
      double extra = dpsi;
      if (bx_[j] != 0.0) {
        zeta_x[k] = ax_[j] * zeta_x[k] + bx_[j] * (inv_dx2_ * d2(u, k, 1) + dpsi);
        extra += zeta_x[k];
      }
      if (stencil_out != nullptr) stencil_out[k] += extra;
      u_next[k] += c[k] * extra;
    }
  }
  for (std::size_t i = nz_ - 2; i < ext_nz_ && pml_ > 0; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      const double dpsi = inv_dz_ * d1(psi_z, k, s);
      double extra = dpsi;
      if (bz_[i] != 0.0) {
        zeta_z[k] = az_[i] * zeta_z[k] + bz_[i] * (inv_dz2_ * d2(u, k, s) + dpsi);
        extra += zeta_z[k];
      }
      if (stencil_out != nullptr) stencil_out[k] += extra;
      u_next[k] += c[k] * extra;
    }
  }
}

void Propagator::adjoint_step(AdjointState& st) const {
  const double* __restrict m = st.ubar_next.data();
  double* __restrict ubar = st.ubar.data();
  double* __restrict ubar_prev = st.ubar_prev.data();
  double* __restrict y = st.y.data();
  double* __restrict w = st.w.data();
  double* __restrict psi_x = st.psi_x.data();
  double* __restrict psi_z = st.psi_z.data();
  double* __restrict zeta_x = st.zeta_x.data();
  double* __restrict zeta_z = st.zeta_z.data();
  const double* __restrict c = c_.data();
  const std::size_t s = stride_;

  // y = c * M ubar_next; the row-0 entry vanishes so odd ghosts are exact.
  for (std::size_t j = 0; j < ext_nx_; ++j) y[index(0, j)] = 0.0;
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) y[base + j] = c[base + j] * m[base + j];
  }
  refresh_ghosts(y);

  for (std::size_t i = 1; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      ubar[k] += 2.0 * m[k] + inv_dz2_ * d2(y, k, s) + inv_dx2_ * d2(y, k, 1);
      ubar_prev[k] -= m[k];
    }
  }
  if (pml_ == 0) return;

  // x strips. D1 is antisymmetric and D2 symmetric under zero halos.
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    for (std::size_t j : x_cols_) {
      const std::size_t k = index(i, j);
      zeta_x[k] += y[k];
      psi_x[k] -= inv_dx_ * d1(y, k, 1);
      w[k] = bx_[j] * zeta_x[k];
    }
  }
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    for (std::size_t j : x_cols_) {
      const std::size_t k = index(i, j);
      psi_x[k] -= inv_dx_ * d1(w, k, 1);
    }
    for (std::size_t j : x_halo_cols_) {
      const std::size_t k = index(i, j);
      ubar[k] += inv_dx2_ * d2(w, k, 1);
    }
  }
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    for (std::size_t j : x_cols_) {
      const std::size_t k = index(i, j);
      zeta_x[k] *= ax_[j];
      w[k] = bx_[j] * psi_x[k];
    }
  }
  for (std::size_t i = 1; i < ext_nz_; ++i) {
    for (std::size_t j : x_halo_cols_) {
      const std::size_t k = index(i, j);
      ubar[k] -= inv_dx_ * d1(w, k, 1);
    }
    for (std::size_t j : x_cols_) {
      const std::size_t k = index(i, j);
      psi_x[k] *= ax_[j];
      w[k] = 0.0;
    }
  }

  // Bottom strip.
  for (std::size_t i = nz_; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      zeta_z[k] += y[k];
      psi_z[k] -= inv_dz_ * d1(y, k, s);
      w[k] = bz_[i] * zeta_z[k];
    }
  }
  for (std::size_t i = nz_ - 2; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      if (i >= nz_) psi_z[k] -= inv_dz_ * d1(w, k, s);
      ubar[k] += inv_dz2_ * d2(w, k, s);
    }
  }
  for (std::size_t i = nz_; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      zeta_z[k] *= az_[i];
      w[k] = bz_[i] * psi_z[k];
    }
  }
  for (std::size_t i = nz_ - 2; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      ubar[k] -= inv_dz_ * d1(w, k, s);
    }
  }
  for (std::size_t i = nz_; i < ext_nz_; ++i) {
    const std::size_t base = index(i, 0);
    for (std::size_t j = 0; j < ext_nx_; ++j) {
      const std::size_t k = base + j;
      psi_z[k] *= az_[i];
      w[k] = 0.0;
    }
  }
}

bool Propagator::finite(const double* u) const {
  for (std::size_t k = 0; k < buffer_size(); ++k) {
    if (!(std::abs(u[k]) < 1e150)) return false;
  }
  return true;
}

void ShotSetup::inject(std::size_t k, double* u_next) const {
  u_next[source_cell] += prop->c()[source_cell] * wavelet[k] * prop->source_scale();
}

ShotSetup make_shot_setup(const VelocityModel& m, const AcquisitionGeometry& geom,
                          const SourceWavelet& w, std::size_t source_index,
                          const WaveConfig& cfg) {
  geom.validate(m.nz(), m.nx());
  if (source_index >= geom.sources.size()) {
    throw InputError("source index " + std::to_string(source_index) + " out of range");
  }
  if (w.samples.size() != geom.nt) {
    throw InputError("wavelet length " + std::to_string(w.samples.size()) +
                     " does not match nt " + std::to_string(geom.nt));
  }
  if (cfg.time_substeps < 1) throw ConfigError("time_substeps must be >= 1");
  check_cfl(m, geom.dt, cfg);

  ShotSetup s;
  s.substeps = cfg.time_substeps;
  s.nt = geom.nt;
  s.prop = std::make_shared<const Propagator>(m, cfg, geom.dt / static_cast<double>(s.substeps));
  s.source_cell = s.prop->model_index(geom.sources[source_index]);
  for (const GridIndex& r : geom.receivers) s.receiver_cells.push_back(s.prop->model_index(r));

  // Linear interpolation of the recorded-rate wavelet onto the internal axis.
  const std::size_t steps = s.internal_steps();
  s.wavelet.resize(steps);
  for (std::size_t k = 0; k < steps; ++k) {
    const std::size_t q = k / s.substeps;
    const double frac = static_cast<double>(k % s.substeps) / static_cast<double>(s.substeps);
    const double w0 = w.samples[q];
    const double w1 = q + 1 < w.samples.size() ? w.samples[q + 1] : 0.0;
    s.wavelet[k] = frac == 0.0 ? w0 : (1.0 - frac) * w0 + frac * w1;
  }
  return s;
}

namespace {

void advance(const ShotSetup& s, std::size_t k, WaveState& st, std::vector<double>& next,
             double* stencil_out) {
  s.prop->step(st, next.data(), stencil_out);
  s.inject(k, next.data());
  s.prop->refresh_ghosts(next.data());
  std::swap(st.u_prev, st.u);
  std::swap(st.u, next);
}

void save_state(const WaveState& st, double* dst, std::size_t n) {
  for (const auto* f : {&st.u_prev, &st.u, &st.psi_x, &st.psi_z, &st.zeta_x, &st.zeta_z}) {
    std::copy(f->begin(), f->end(), dst);
    dst += n;
  }
}

void load_state(WaveState& st, const double* src, std::size_t n) {
  for (auto* f : {&st.u_prev, &st.u, &st.psi_x, &st.psi_z, &st.zeta_x, &st.zeta_z}) {
    std::copy(src, src + n, f->begin());
    src += n;
  }
}

constexpr std::size_t kStateFields = 6;

}  // namespace

ShotRecord run_forward(const ShotSetup& s, std::size_t source_index, WavefieldTape::Impl* tape,
                       const WaveConfig& cfg) {
  const Propagator& p = *s.prop;
  const std::size_t n = p.buffer_size();
  const std::size_t steps = s.internal_steps();
  ShotRecord rec(source_index, s.nt, s.receiver_cells.size());

  WaveState st(n);
  std::vector<double> next(n, 0.0);

  if (tape != nullptr) {
    tape->full = cfg.full_tape;
    tape->interval = std::max<std::size_t>(1, cfg.checkpoint_interval);
    tape->n_fields = steps;
    tape->storage.clear();
    if (tape->full) {
      tape->storage.assign(steps * n, 0.0);
    } else {
      const std::size_t checkpoints = (steps + tape->interval - 1) / tape->interval;
      tape->storage.assign(checkpoints * kStateFields * n, 0.0);
    }
    tape->segment.clear();
    tape->segment_start = static_cast<std::size_t>(-1);
  }

  for (std::size_t k = 0; k < steps; ++k) {
    double* stencil_out = nullptr;
    if (tape != nullptr) {
      if (tape->full) {
        stencil_out = tape->storage.data() + k * n;
      } else if (k % tape->interval == 0) {
        save_state(st, tape->storage.data() + (k / tape->interval) * kStateFields * n, n);
      }
    }
    advance(s, k, st, next, stencil_out);
    const std::size_t state = k + 1;

    if (state % s.substeps == 0) {
      const std::size_t q = state / s.substeps;
      for (std::size_t r = 0; r < s.receiver_cells.size(); ++r) {
        rec.at(q, r) = st.u[s.receiver_cells[r]];
      }
    }
    if ((state % 16 == 0 || state == steps) && !p.finite(st.u.data())) {
      throw NumericalBlowup("wavefield became non-finite", state);
    }
  }
  return rec;
}

std::span<const double> WavefieldTape::Impl::field(std::size_t k) {
  const Propagator& p = *setup.prop;
  const std::size_t n = p.buffer_size();
  if (k >= n_fields) throw InputError("tape index out of range");
  if (full) return {storage.data() + k * n, n};

  const std::size_t start = (k / interval) * interval;
  if (start != segment_start) {
    const std::size_t len = std::min(interval, n_fields - start);
    segment.assign(len * n, 0.0);
    WaveState st(n);
    std::vector<double> next(n, 0.0);
    load_state(st, storage.data() + (start / interval) * kStateFields * n, n);
    for (std::size_t t = 0; t < len; ++t) {
      advance(setup, start + t, st, next, segment.data() + t * n);
    }
    segment_start = start;
  }
  return {segment.data() + (k - start) * n, n};
}

void run_adjoint(WavefieldTape::Impl& tape, const ShotRecord& residual,
                 std::vector<double>& grad_c) {
  const ShotSetup& s = tape.setup;
  const Propagator& p = *s.prop;
  const std::size_t n = p.buffer_size();
  const std::size_t steps = s.internal_steps();
  if (residual.nt != s.nt || residual.n_receivers != s.receiver_cells.size()) {
    throw InputError("residual shape does not match acquisition");
  }
  grad_c.assign(n, 0.0);
  AdjointState a(n);

  auto add_residual = [&](std::size_t state, std::vector<double>& target) {
    if (state % s.substeps != 0) return;
    const std::size_t q = state / s.substeps;
    for (std::size_t r = 0; r < s.receiver_cells.size(); ++r) {
      target[s.receiver_cells[r]] += residual.at(q, r);
    }
  };

  add_residual(steps, a.ubar_next);
  for (std::size_t k = steps; k-- > 0;) {
    // Row 0 of u_next is pinned, so its adjoint never reaches c.
    for (std::size_t j = 0; j < p.ext_nx(); ++j) a.ubar_next[p.index(0, j)] = 0.0;
    const std::span<const double> stencil = tape.field(k);
    for (std::size_t c = 0; c < n; ++c) grad_c[c] += a.ubar_next[c] * stencil[c];
    grad_c[s.source_cell] += a.ubar_next[s.source_cell] * s.wavelet[k] * p.source_scale();

    p.adjoint_step(a);
    if (k > 0) add_residual(k, a.ubar);
    std::swap(a.ubar_next, a.ubar);
    std::swap(a.ubar, a.ubar_prev);
    std::fill(a.ubar_prev.begin(), a.ubar_prev.end(), 0.0);
  }
}

}  // namespace drfwi
