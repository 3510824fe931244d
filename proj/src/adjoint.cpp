#include "drfwi/adjoint.hpp"

#include <cmath>

#include "drfwi/binary_io.hpp"
#include "parallel.hpp"
#include "propagator.hpp"

namespace drfwi {

namespace {

// Maps dJ/dc on the padded grid to dJ/dv (km/s) on the model grid.
VelocityGradient fold_to_model(const Propagator& p, const std::vector<double>& grad_c,
                               bool mask_boundary) {
  VelocityGradient g(p.model_nz(), p.model_nx(), 0.0);
  const double dt = p.dt();
  const std::size_t pml = p.pml();
  for (std::size_t i = 0; i < p.ext_nz(); ++i) {
    for (std::size_t j = 0; j < p.ext_nx(); ++j) {
      const bool interior = i < p.model_nz() && j >= pml && j < pml + p.model_nx();
      if (mask_boundary && !interior) continue;
      const std::size_t k = p.index(i, j);
      // c = (1000 v dt)^2
      const double dc_dv = 2.0e6 * p.velocity()[k] * dt * dt;
      g[p.source_model_cell(i, j)] += grad_c[k] * dc_dv;
    }
  }
  if (mask_boundary) {
    for (std::size_t j = 0; j < g.nx(); ++j) g(0, j) = 0.0;
  }
  return g;
}

ShotRecord residual_of(const ShotRecord& syn, const ShotRecord& obs, std::size_t shot) {
  if (syn.nt != obs.nt || syn.n_receivers != obs.n_receivers) {
    throw InputError("observed shot " + std::to_string(shot) + " does not match the geometry");
  }
  ShotRecord r(syn.source_index, syn.nt, syn.n_receivers);
  for (std::size_t k = 0; k < r.traces.size(); ++k) r.traces[k] = syn.traces[k] - obs.traces[k];
  return r;
}

}  // namespace

MisfitGradient misfit_gradient(const VelocityModel& m, const AcquisitionGeometry& geom,
                               const SourceWavelet& w, std::span<const ShotRecord> observed,
                               const WaveConfig& cfg, const GradientOptions& opts) {
  geom.validate(m.nz(), m.nx());
  check_cfl(m, geom.dt, cfg);
  if (observed.size() != geom.sources.size()) {
    throw InputError("misfit_gradient: expected one observed record per source");
  }
  const std::size_t shots = geom.sources.size();
  std::vector<double> losses(shots, 0.0);
  std::vector<VelocityGradient> grads(shots);

  parallel_for(shots, worker_count(), [&](std::size_t s) {
    auto [syn, tape] = simulate_taped(m, geom, w, s, cfg);
    const ShotRecord res = residual_of(syn, observed[s], s);
    double loss = 0.0;
    for (double r : res.traces) loss += r * r;
    losses[s] = 0.5 * loss;
    std::vector<double> grad_c;
    WavefieldTape::Impl& impl = tape_impl(tape);
    run_adjoint(impl, res, grad_c);
    grads[s] = fold_to_model(*impl.setup.prop, grad_c, opts.mask_boundary);
  });

  MisfitGradient out;
  out.gradient = VelocityGradient(m.nz(), m.nx(), 0.0);
  for (std::size_t s = 0; s < shots; ++s) {
    out.loss += losses[s];
    for (std::size_t k = 0; k < out.gradient.size(); ++k) out.gradient[k] += grads[s][k];
  }
  for (double g : out.gradient.data()) {
    if (!std::isfinite(g)) throw NumericalBlowup("non-finite velocity gradient", 0);
  }
  return out;
}

ShotRecord linearized_forward(const VelocityModel& m, const AcquisitionGeometry& geom,
                              const SourceWavelet& w, std::size_t source_index,
                              const Field2D& dm, const WaveConfig& cfg) {
  require_same_shape(m.values(), dm, "linearized_forward");
  const ShotSetup s = make_shot_setup(m, geom, w, source_index, cfg);
  const Propagator& p = *s.prop;
  const std::size_t n = p.buffer_size();
  const std::size_t steps = s.internal_steps();

  // Perturbation of the stencil coefficients on the padded grid.
  std::vector<double> dc(n, 0.0);
  for (std::size_t i = 0; i < p.ext_nz(); ++i) {
    for (std::size_t j = 0; j < p.ext_nx(); ++j) {
      const std::size_t k = p.index(i, j);
      dc[k] = 2.0e6 * p.velocity()[k] * p.dt() * p.dt() * dm[p.source_model_cell(i, j)];
    }
  }

  // Tangent recursion: the same operator acting on the perturbation, driven
  // by dc times the background stencil term.
  ShotRecord rec(source_index, s.nt, s.receiver_cells.size());
  WaveState bg(n), dst(n);
  std::vector<double> next(n, 0.0), dnext(n, 0.0), stencil(n, 0.0);
  const std::size_t src = s.source_cell;

  for (std::size_t k = 0; k < steps; ++k) {
    p.step(bg, next.data(), stencil.data());
    s.inject(k, next.data());
    p.refresh_ghosts(next.data());

    p.step(dst, dnext.data(), nullptr);
    for (std::size_t c = 0; c < n; ++c) dnext[c] += dc[c] * stencil[c];
    dnext[src] += dc[src] * s.wavelet[k] * p.source_scale();
    p.refresh_ghosts(dnext.data());

    std::swap(bg.u_prev, bg.u);
    std::swap(bg.u, next);
    std::swap(dst.u_prev, dst.u);
    std::swap(dst.u, dnext);
    const std::size_t state = k + 1;
    if (state % s.substeps == 0) {
      const std::size_t q = state / s.substeps;
      for (std::size_t r = 0; r < s.receiver_cells.size(); ++r) {
        rec.at(q, r) = dst.u[s.receiver_cells[r]];
      }
    }
  }
  return rec;
}

VelocityGradient adjoint_apply(const VelocityModel& m, const AcquisitionGeometry& geom,
                               const SourceWavelet& w, std::size_t source_index,
                               const ShotRecord& dd, const WaveConfig& cfg) {
  auto [syn, tape] = simulate_taped(m, geom, w, source_index, cfg);
  WavefieldTape::Impl& impl = tape_impl(tape);
  std::vector<double> grad_c;
  run_adjoint(impl, dd, grad_c);
  return fold_to_model(*impl.setup.prop, grad_c, false);
}

void save_gradient(const VelocityGradient& g, const std::filesystem::path& path) {
  write_f32_file(path, g.data());
}

}  // namespace drfwi
