#include "drfwi/model.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "drfwi/binary_io.hpp"

namespace drfwi {

VelocityModel::VelocityModel(Field2D values, double dz, double dx)
    : values_(std::move(values)), dz_(dz), dx_(dx) {
  if (values_.nz() < 3 || values_.nx() < 3) {
    throw ValidationError("velocity model must be at least 3x3");
  }
  if (!(dz_ > 0.0) || !(dx_ > 0.0) || !std::isfinite(dz_) || !std::isfinite(dx_)) {
    throw ValidationError("grid spacing must be positive");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const double v = values_[k];
    if (!std::isfinite(v) || v <= 0.0) {
      throw ValidationError("velocity at flat index " + std::to_string(k) +
                            " is not positive and finite");
    }
  }
}

double VelocityModel::min_velocity() const {
  return *std::min_element(values_.values().begin(), values_.values().end());
}

double VelocityModel::max_velocity() const {
  return *std::max_element(values_.values().begin(), values_.values().end());
}

VelocityModel load_model(const std::filesystem::path& path, std::size_t nz, std::size_t nx,
                         double dz, double dx) {
  std::vector<double> values = read_f32_file(path);
  if (values.size() != nz * nx) {
    throw InputError("model file " + path.string() + " holds " + std::to_string(values.size()) +
                     " floats, expected " + std::to_string(nz * nx));
  }
  return VelocityModel(Field2D(nz, nx, std::move(values)), dz, dx);
}

void save_model(const VelocityModel& m, const std::filesystem::path& path) {
  write_f32_file(path, m.values().data());
}

namespace {

std::vector<double> gaussian_kernel(double sigma) {
  const auto radius = static_cast<std::ptrdiff_t>(std::ceil(4.0 * sigma));
  std::vector<double> w(static_cast<std::size_t>(2 * radius + 1));
  double total = 0.0;
  for (std::ptrdiff_t k = -radius; k <= radius; ++k) {
    const double x = static_cast<double>(k) / sigma;
    w[static_cast<std::size_t>(k + radius)] = std::exp(-0.5 * x * x);
    total += w[static_cast<std::size_t>(k + radius)];
  }
  for (double& v : w) v /= total;
  return w;
}

// Convolves each line of length n (stride between samples `step`) in place.
void blur_lines(Field2D& f, double sigma, bool along_z) {
  if (sigma == 0.0) return;
  const std::vector<double> w = gaussian_kernel(sigma);
  const auto radius = static_cast<std::ptrdiff_t>(w.size() / 2);
  const std::size_t n = along_z ? f.nz() : f.nx();
  const std::size_t lines = along_z ? f.nx() : f.nz();
  std::vector<double> line(n);
  for (std::size_t l = 0; l < lines; ++l) {
    for (std::size_t k = 0; k < n; ++k) line[k] = along_z ? f(k, l) : f(l, k);
    for (std::size_t k = 0; k < n; ++k) {
      double acc = 0.0;
      for (std::ptrdiff_t t = -radius; t <= radius; ++t) {
        const auto idx = std::clamp<std::ptrdiff_t>(static_cast<std::ptrdiff_t>(k) + t, 0,
                                                    static_cast<std::ptrdiff_t>(n) - 1);
        acc += w[static_cast<std::size_t>(t + radius)] * line[static_cast<std::size_t>(idx)];
      }
      (along_z ? f(k, l) : f(l, k)) = acc;
    }
  }
}

}  // namespace

VelocityModel gaussian_smooth(const VelocityModel& m, double sigma_z, double sigma_x) {
  if (!(sigma_z >= 0.0) || !(sigma_x >= 0.0)) {
    throw InputError("gaussian_smooth: sigma must be non-negative");
  }
  Field2D f = m.values();
  blur_lines(f, sigma_z, true);
  blur_lines(f, sigma_x, false);
  // Rounding can push a blurred constant field a few ulps outside the input range.
  const double lo = m.min_velocity();
  const double hi = m.max_velocity();
  for (double& v : f.data()) v = std::clamp(v, lo, hi);
  return VelocityModel(std::move(f), m.dz(), m.dx());
}

VelocityModel linear_model(std::size_t nz, std::size_t nx, double dz, double dx, double v_top,
                           double v_bottom) {
  if (!(v_top > 0.0) || !(v_bottom > 0.0)) {
    throw InputError("linear_model: velocities must be positive");
  }
  if (nz < 2) throw InputError("linear_model: nz must be at least 2");
  Field2D f(nz, nx);
  for (std::size_t i = 0; i < nz; ++i) {
    const double v = v_top + (v_bottom - v_top) * static_cast<double>(i) /
                                 static_cast<double>(nz - 1);
    for (std::size_t j = 0; j < nx; ++j) f(i, j) = v;
  }
  return VelocityModel(std::move(f), dz, dx);
}

CoordinateGrid make_coordinate_grid(std::size_t nz, std::size_t nx) {
  if (nz < 2 || nx < 2) throw InputError("make_coordinate_grid: need at least 2 cells per axis");
  CoordinateGrid g;
  g.nz = nz;
  g.nx = nx;
  g.scale_z = 2.0 / static_cast<double>(nz - 1);
  g.offset_z = -1.0;
  g.scale_x = 2.0 / static_cast<double>(nx - 1);
  g.offset_x = -1.0;
  g.points.reserve(nz * nx);
  for (std::size_t i = 0; i < nz; ++i) {
    for (std::size_t j = 0; j < nx; ++j) {
      // Clamp so the far corner is exactly +1 regardless of rounding.
      const double z = std::min(1.0, g.scale_z * static_cast<double>(i) + g.offset_z);
      const double x = std::min(1.0, g.scale_x * static_cast<double>(j) + g.offset_x);
      g.points.push_back({z, x});
    }
  }
  return g;
}

CoordinateGrid make_coordinate_grid(const VelocityModel& m) {
  return make_coordinate_grid(m.nz(), m.nx());
}

VelocityModel downsample(const VelocityModel& m, std::size_t factor_z, std::size_t factor_x) {
  if (factor_z < 1 || factor_x < 1) throw InputError("downsample: factors must be >= 1");
  if (factor_z > m.nz() || factor_x > m.nx()) {
    throw InputError("downsample: factor exceeds model dimension");
  }
  const std::size_t nz = (m.nz() + factor_z - 1) / factor_z;
  const std::size_t nx = (m.nx() + factor_x - 1) / factor_x;
  Field2D f(nz, nx);
  for (std::size_t i = 0; i < nz; ++i)
    for (std::size_t j = 0; j < nx; ++j) f(i, j) = m(i * factor_z, j * factor_x);
  return VelocityModel(std::move(f), m.dz() * static_cast<double>(factor_z),
                       m.dx() * static_cast<double>(factor_x));
}

namespace {

struct Fault {
  double x_top;   // surface trace position (m)
  double slope;   // horizontal shift per meter of depth
  double throw_;  // downward offset of the hanging wall (m)
};

}  // namespace

VelocityModel marmousi_like(std::size_t nz, std::size_t nx, double dz, double dx) {
  constexpr double kSeafloor = 32.0;
  constexpr double kLayerTop = 60.0;
  constexpr double kLayerThickness = 70.0;
  constexpr int kLayers = 20;
  static constexpr Fault kFaults[] = {
      {1150.0, 0.55, 90.0},
      {2050.0, 0.60, 120.0},
      {2900.0, 0.50, 75.0},
      {3600.0, 0.65, 60.0},
  };
  // Per-layer base velocities (km/s): a compaction trend with strong
  // alternations, as in the Marmousi sediment column.
  static constexpr double kLayerVelocity[kLayers + 1] = {
      1.65, 2.05, 1.80, 2.35, 2.00, 2.60, 2.25, 2.90, 2.50, 3.20, 2.75,
      3.45, 3.05, 3.80, 3.30, 4.05, 3.60, 4.30, 3.90, 4.50, 4.20};

  Field2D f(nz, nx);
  const double width = dx * static_cast<double>(nx - 1);
  for (std::size_t i = 0; i < nz; ++i) {
    const double z = dz * static_cast<double>(i);
    for (std::size_t j = 0; j < nx; ++j) {
      const double x = dx * static_cast<double>(j);
      if (z < kSeafloor + 6.0 * std::sin(x / 700.0)) {
        f(i, j) = 1.5;
        continue;
      }
      double shift = 0.0;
      for (const Fault& fault : kFaults) {
        if (x > fault.x_top + fault.slope * z) shift += fault.throw_;
      }
      double zeff = z - shift;
      // Anticline centred at 60% of the width plus a regional dip to the right.
      const double xc = 0.6 * width;
      const double uplift = (80.0 + 0.18 * zeff) * std::exp(-std::pow((x - xc) / 900.0, 2.0));
      zeff += uplift - 0.045 * x + 30.0 * std::sin(x / 310.0 + zeff / 400.0);
      const double pos = (zeff - kLayerTop) / kLayerThickness;
      const int layer = std::clamp(static_cast<int>(std::floor(pos)) + 1, 0, kLayers);
      const double frac = std::clamp(pos - std::floor(pos), 0.0, 1.0);
      double v = kLayerVelocity[layer] + 0.12 * frac;
      // Fast wedge in the lower left, bounded above by a dipping surface.
      if (z > 930.0 + 0.16 * x && x < 2600.0) v = 4.6 + 0.9 * (z - 930.0) / 500.0;
      f(i, j) = std::clamp(v, 1.5, 5.5);
    }
  }
  return VelocityModel(std::move(f), dz, dx);
}

}  // namespace drfwi
