#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "drfwi/errors.hpp"

namespace drfwi {

/// Dense row-major nz x nx array of doubles.
class Field2D {
 public:
  Field2D() = default;
  Field2D(std::size_t nz, std::size_t nx, double fill = 0.0)
      : nz_(nz), nx_(nx), values_(nz * nx, fill) {}
  Field2D(std::size_t nz, std::size_t nx, std::vector<double> values)
      : nz_(nz), nx_(nx), values_(std::move(values)) {
    if (values_.size() != nz_ * nx_) {
      throw InputError("Field2D: value count does not match nz*nx");
    }
  }

  std::size_t nz() const noexcept { return nz_; }
  std::size_t nx() const noexcept { return nx_; }
  std::size_t size() const noexcept { return values_.size(); }

  double& operator()(std::size_t i, std::size_t j) { return values_[i * nx_ + j]; }
  double operator()(std::size_t i, std::size_t j) const { return values_[i * nx_ + j]; }
  double& operator[](std::size_t k) { return values_[k]; }
  double operator[](std::size_t k) const { return values_[k]; }

  std::span<double> data() noexcept { return values_; }
  std::span<const double> data() const noexcept { return values_; }
  const std::vector<double>& values() const noexcept { return values_; }

  bool same_shape(const Field2D& other) const noexcept {
    return nz_ == other.nz_ && nx_ == other.nx_;
  }

  friend bool operator==(const Field2D&, const Field2D&) = default;

 private:
  std::size_t nz_ = 0;
  std::size_t nx_ = 0;
  std::vector<double> values_;
};

inline void require_same_shape(const Field2D& a, const Field2D& b, const char* where) {
  if (!a.same_shape(b)) {
    throw InputError(std::string(where) + ": shape mismatch (" + std::to_string(a.nz()) + "x" +
                     std::to_string(a.nx()) + " vs " + std::to_string(b.nz()) + "x" +
                     std::to_string(b.nx()) + ")");
  }
}

}  // namespace drfwi
