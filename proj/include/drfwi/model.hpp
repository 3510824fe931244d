#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "drfwi/field.hpp"

namespace drfwi {

/// 2D P-wave velocity grid in km/s. Row index is depth, spacing in meters.
/// Values are validated positive and finite at construction and never change.
class VelocityModel {
 public:
  VelocityModel(Field2D values, double dz, double dx);

  std::size_t nz() const noexcept { return values_.nz(); }
  std::size_t nx() const noexcept { return values_.nx(); }
  double dz() const noexcept { return dz_; }
  double dx() const noexcept { return dx_; }
  const Field2D& values() const noexcept { return values_; }
  double operator()(std::size_t i, std::size_t j) const { return values_(i, j); }

  double min_velocity() const;
  double max_velocity() const;

  friend bool operator==(const VelocityModel&, const VelocityModel&) = default;

 private:
  Field2D values_;
  double dz_;
  double dx_;
};

/// Network input domain: one normalized (z, x) point per model cell, row-major.
struct CoordinateGrid {
  std::size_t nz = 0;
  std::size_t nx = 0;
  std::vector<std::array<double, 2>> points;
  // coordinate = scale * index + offset, per axis
  double scale_z = 0.0, offset_z = 0.0;
  double scale_x = 0.0, offset_x = 0.0;

  std::size_t size() const noexcept { return points.size(); }
};

/// Reads nz*nx float32 little-endian values stored row-major.
VelocityModel load_model(const std::filesystem::path& path, std::size_t nz, std::size_t nx,
                         double dz, double dx);
void save_model(const VelocityModel& m, const std::filesystem::path& path);

/// Separable Gaussian blur with replicated edges, kernel truncated at 4 sigma.
VelocityModel gaussian_smooth(const VelocityModel& m, double sigma_z, double sigma_x);

VelocityModel linear_model(std::size_t nz, std::size_t nx, double dz, double dx, double v_top,
                           double v_bottom);

CoordinateGrid make_coordinate_grid(const VelocityModel& m);
CoordinateGrid make_coordinate_grid(std::size_t nz, std::size_t nx);

VelocityModel downsample(const VelocityModel& m, std::size_t factor_z, std::size_t factor_x);

/// Deterministic Marmousi-style structural model: water layer, faulted and
/// folded sediments with velocity increasing with depth, and a fast wedge at
/// depth. Stands in for the Marmousi file when none is supplied.
VelocityModel marmousi_like(std::size_t nz = 94, std::size_t nx = 288, double dz = 15.0,
                            double dx = 15.0);

}  // namespace drfwi
