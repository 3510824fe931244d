#include "drfwi/reparam.hpp"

#include <cmath>

#include "drfwi/errors.hpp"

namespace drfwi {

std::string to_string(ReparamMode mode) {
  switch (mode) {
    case ReparamMode::global_mean:
      return "global-mean";
    case ReparamMode::static_init:
      return "static-init";
    case ReparamMode::adaptive_init:
      return "adaptive-init";
  }
  return "unknown";
}

Reparameterization Reparameterization::global_mean(std::size_t nz, std::size_t nx, double dz,
                                                   double dx, double std_scale, double mean) {
  Reparameterization r;
  r.mode = ReparamMode::global_mean;
  r.std_matrix = Field2D(nz, nx, std_scale);
  r.mean = mean;
  r.dz = dz;
  r.dx = dx;
  r.validate();
  return r;
}

Reparameterization Reparameterization::static_init(const VelocityModel& m_init, double std_scale) {
  Reparameterization r;
  r.mode = ReparamMode::static_init;
  r.std_matrix = Field2D(m_init.nz(), m_init.nx(), std_scale);
  r.m_init = m_init.values();
  r.dz = m_init.dz();
  r.dx = m_init.dx();
  r.validate();
  return r;
}

Reparameterization Reparameterization::adaptive_init(const VelocityModel& m_init,
                                                     double std_scale) {
  Reparameterization r = static_init(m_init, std_scale);
  r.mode = ReparamMode::adaptive_init;
  return r;
}

void Reparameterization::validate() const {
  if (std_matrix.size() == 0) throw InputError("std matrix is empty");
  for (double s : std_matrix.data()) {
    if (!(s > 0.0) || !std::isfinite(s)) throw InputError("std matrix entries must be > 0");
  }
  if (mode == ReparamMode::global_mean) {
    if (!std::isfinite(mean)) throw InputError("global mean must be finite");
  } else {
    require_same_shape(std_matrix, m_init, "reparameterization m_init");
  }
}

Denormalized denormalize(const Reparameterization& r, const NormalizedModel& nm) {
  require_same_shape(r.std_matrix, nm, "denormalize");
  Field2D v(nm.nz(), nm.nx(), 0.0);
  std::vector<unsigned char> clipped(nm.size(), 0);
  std::size_t count = 0;
  const bool global = r.mode == ReparamMode::global_mean;
  for (std::size_t k = 0; k < nm.size(); ++k) {
    const double base = global ? r.mean : r.m_init[k];
    double value = nm[k] * r.std_matrix[k] + base;
    if (!std::isfinite(value)) throw InputError("denormalize: non-finite network output");
    if (value < kVelocityFloor) {
      value = kVelocityFloor;
      clipped[k] = 1;
      ++count;
    }
    v[k] = value;
  }
  return {VelocityModel(std::move(v), r.dz, r.dx), std::move(clipped), count};
}

DenormGradient denormalize_backward(const Reparameterization& r,
                                    const VelocityGradient& velocity_gradient,
                                    const std::vector<unsigned char>& clipped) {
  require_same_shape(r.std_matrix, velocity_gradient, "denormalize_backward");
  if (!clipped.empty() && clipped.size() != velocity_gradient.size()) {
    throw InputError("denormalize_backward: clip mask size mismatch");
  }
  DenormGradient out{Field2D(velocity_gradient.nz(), velocity_gradient.nx(), 0.0), std::nullopt};
  Field2D init(velocity_gradient.nz(), velocity_gradient.nx(), 0.0);
  for (std::size_t k = 0; k < velocity_gradient.size(); ++k) {
    if (!clipped.empty() && clipped[k] != 0) continue;
    out.output_gradient[k] = velocity_gradient[k] * r.std_matrix[k];
    init[k] = velocity_gradient[k];
  }
  if (r.trainable_init()) out.init_gradient = std::move(init);
  return out;
}

FullGradient full_parameter_gradient(const SirenEvaluation& eval, const Reparameterization& r,
                                     const VelocityGradient& velocity_gradient,
                                     const std::vector<unsigned char>& clipped) {
  DenormGradient d = denormalize_backward(r, velocity_gradient, clipped);
  return {eval.backward(d.output_gradient), std::move(d.init_gradient)};
}

FullGradient full_parameter_gradient(const SirenNetwork& net, const CoordinateGrid& grid,
                                     const Reparameterization& r,
                                     const VelocityGradient& velocity_gradient) {
  const SirenEvaluation eval(net, grid);
  const Denormalized d = denormalize(r, eval.output());
  return full_parameter_gradient(eval, r, velocity_gradient, d.clipped);
}

}  // namespace drfwi
