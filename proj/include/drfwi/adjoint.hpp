#pragma once

#include <span>
#include <vector>

#include "drfwi/field.hpp"
#include "drfwi/model.hpp"
#include "drfwi/wavesim.hpp"

namespace drfwi {

/// dL/dm on the model grid, in misfit units per km/s.
using VelocityGradient = Field2D;

struct GradientOptions {
  /// Drop the contributions of the padded damping strips (which copy the edge
  /// velocities) and of the free-surface row. With false the result is the
  /// exact derivative of the discrete misfit.
  bool mask_boundary = true;
};

struct MisfitGradient {
  double loss = 0.0;
  VelocityGradient gradient;
};

/// Discrete adjoint-state gradient of 0.5 * sum ||d_syn - d_obs||^2 over all
/// shots. Per-shot gradients are summed in source order.
MisfitGradient misfit_gradient(const VelocityModel& m, const AcquisitionGeometry& geom,
                               const SourceWavelet& w, std::span<const ShotRecord> observed,
                               const WaveConfig& cfg = {}, const GradientOptions& opts = {});

/// Born modeling J dm for one shot (tangent-linear of `simulate` in v).
ShotRecord linearized_forward(const VelocityModel& m, const AcquisitionGeometry& geom,
                              const SourceWavelet& w, std::size_t source_index,
                              const Field2D& dm, const WaveConfig& cfg = {});

/// J^T dd for one shot; the unmasked gradient with `dd` as the residual.
VelocityGradient adjoint_apply(const VelocityModel& m, const AcquisitionGeometry& geom,
                               const SourceWavelet& w, std::size_t source_index,
                               const ShotRecord& dd, const WaveConfig& cfg = {});

void save_gradient(const VelocityGradient& g, const std::filesystem::path& path);

}  // namespace drfwi
