#pragma once

#include <optional>
#include <string>
#include <vector>

#include "drfwi/adjoint.hpp"
#include "drfwi/siren.hpp"

namespace drfwi {

enum class ReparamMode {
  global_mean,    // nm * S + M
  static_init,    // nm * S + m_init, m_init fixed
  adaptive_init,  // nm * S + m_init, m_init trained alongside the network
};

std::string to_string(ReparamMode mode);

/// Lowest velocity (km/s) a denormalized model may take.
inline constexpr double kVelocityFloor = 0.1;

/// Affine map from the dimensionless network output to velocity.
struct Reparameterization {
  ReparamMode mode = ReparamMode::global_mean;
  Field2D std_matrix;  // S, km/s
  double mean = 3.0;   // M, km/s, global_mean only
  Field2D m_init;      // km/s, init modes only
  double dz = 1.0;
  double dx = 1.0;

  static Reparameterization global_mean(std::size_t nz, std::size_t nx, double dz, double dx,
                                        double std_scale = 1.0, double mean = 3.0);
  static Reparameterization static_init(const VelocityModel& m_init, double std_scale = 1.0);
  static Reparameterization adaptive_init(const VelocityModel& m_init, double std_scale = 1.0);

  std::size_t nz() const noexcept { return std_matrix.nz(); }
  std::size_t nx() const noexcept { return std_matrix.nx(); }
  bool trainable_init() const noexcept { return mode == ReparamMode::adaptive_init; }
  /// Throws InputError when S is not positive or m_init has the wrong shape.
  void validate() const;
};

struct Denormalized {
  VelocityModel model;
  std::vector<unsigned char> clipped;  // 1 where the floor was applied
  std::size_t clip_count = 0;
};

Denormalized denormalize(const Reparameterization& r, const NormalizedModel& nm);

struct DenormGradient {
  Field2D output_gradient;
  std::optional<Field2D> init_gradient;  // adaptive_init only
};

/// Chain rule through denormalize. `clipped` (from denormalize) zeroes the
/// cells held at the floor; empty means nothing was clipped.
DenormGradient denormalize_backward(const Reparameterization& r,
                                    const VelocityGradient& velocity_gradient,
                                    const std::vector<unsigned char>& clipped = {});

struct FullGradient {
  ParameterGradient params;
  std::optional<Field2D> init_gradient;
};

/// dL/dTheta (and dL/dm_init when adaptive) from dL/dm.
FullGradient full_parameter_gradient(const SirenNetwork& net, const CoordinateGrid& grid,
                                     const Reparameterization& r,
                                     const VelocityGradient& velocity_gradient);
/// Same, reusing a forward evaluation and its clip mask.
FullGradient full_parameter_gradient(const SirenEvaluation& eval, const Reparameterization& r,
                                     const VelocityGradient& velocity_gradient,
                                     const std::vector<unsigned char>& clipped);

}  // namespace drfwi
