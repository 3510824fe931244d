#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "drfwi/field.hpp"
#include "drfwi/model.hpp"

namespace drfwi {

struct DenseLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::VectorXd bias;    // out
};

/// Weights and biases of every layer, L0 (input) .. L{depth} (linear output).
/// Also used for parameter gradients, which share the structure.
struct ParameterSet {
  std::vector<DenseLayer> layers;

  std::size_t size() const;
  /// One span per weight matrix and bias vector, in L0.weight, L0.bias, ... order.
  std::vector<std::span<double>> blocks();
  std::vector<std::span<const double>> blocks() const;
  std::vector<std::string> block_names() const;
  std::vector<double> flatten() const;
  void assign(std::span<const double> flat);
  /// Same shapes, all zero.
  ParameterSet zeros_like() const;
  bool congruent(const ParameterSet& other) const;

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);
};

enum class OutputInit {
  zero,   // final layer starts at zero, so the initial output is exactly 0
  siren,  // final layer drawn like the hidden layers
};

struct SirenSpec {
  std::size_t depth = 4;  // sine layers
  std::size_t width = 128;
  double omega = 30.0;
  std::uint64_t seed = 0;
  OutputInit output_init = OutputInit::zero;
};

/// Coordinate MLP: h0 = sin(omega (W0 x + b0)), hi = sin(Wi h(i-1) + bi),
/// out = WL h + bL.
struct SirenNetwork {
  SirenSpec spec;
  ParameterSet params;

  std::size_t parameter_count() const { return params.size(); }
};

/// Network snapshot taken at a stage boundary ("INI", "stage1", "final").
struct NetworkCheckpoint {
  std::string name;
  SirenNetwork net;
};

using NormalizedModel = Field2D;
using ParameterGradient = ParameterSet;

/// First layer ~ U(-1/2, 1/2), hidden ~ U(-sqrt(6/n)/omega, sqrt(6/n)/omega),
/// biases zero.
SirenNetwork init_network(const SirenSpec& spec);
SirenNetwork init_network(std::size_t depth, std::size_t width, double omega, std::uint64_t seed);

NormalizedModel forward(const SirenNetwork& net, const CoordinateGrid& grid);
/// Gradient of sum(output_gradient * forward(net, grid)) w.r.t. every parameter.
ParameterGradient backward(const SirenNetwork& net, const CoordinateGrid& grid,
                           const Field2D& output_gradient);

/// Forward pass that keeps the activations for a following backward pass.
class SirenEvaluation {
 public:
  SirenEvaluation(const SirenNetwork& net, const CoordinateGrid& grid);
  const NormalizedModel& output() const noexcept { return output_; }
  ParameterGradient backward(const Field2D& output_gradient) const;

 private:
  const SirenNetwork* net_;
  std::size_t nz_, nx_;
  Eigen::MatrixXd input_;                    // 2 x N
  std::vector<Eigen::MatrixXd> pre_, post_;  // per sine layer, width x N
  NormalizedModel output_;
};

/// Flat float64 little-endian parameter vector plus a JSON header next to it
/// (same stem, .json).
void save_network(const SirenNetwork& net, const std::filesystem::path& path);
SirenNetwork load_network(const std::filesystem::path& path);

}  // namespace drfwi
