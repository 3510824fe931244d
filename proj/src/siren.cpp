#include "drfwi/siren.hpp"

#include <cmath>
#include <fstream>
#include <random>

#include <nlohmann/json.hpp>

#include "drfwi/binary_io.hpp"
#include "drfwi/errors.hpp"

namespace drfwi {

namespace {

// Uniform on [lo, hi) from the top 53 bits of the generator, so draws do not
// depend on the standard library's distribution implementation.
double uniform(std::mt19937_64& rng, double lo, double hi) {
  const double u = static_cast<double>(rng() >> 11) * 0x1.0p-53;
  return lo + (hi - lo) * u;
}

void fill_uniform(Eigen::MatrixXd& w, std::mt19937_64& rng, double bound) {
  // Row-major draw order: output neuron by output neuron.
  for (Eigen::Index i = 0; i < w.rows(); ++i) {
    for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = uniform(rng, -bound, bound);
  }
}

std::filesystem::path header_path(const std::filesystem::path& bin_path) {
  std::filesystem::path p = bin_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

std::size_t ParameterSet::size() const {
  std::size_t n = 0;
  for (const DenseLayer& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

std::vector<std::span<double>> ParameterSet::blocks() {
  std::vector<std::span<double>> out;
  for (DenseLayer& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::span<const double>> ParameterSet::blocks() const {
  std::vector<std::span<const double>> out;
  for (const DenseLayer& l : layers) {
    out.emplace_back(l.weight.data(), static_cast<std::size_t>(l.weight.size()));
    out.emplace_back(l.bias.data(), static_cast<std::size_t>(l.bias.size()));
  }
  return out;
}

std::vector<std::string> ParameterSet::block_names() const {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    out.push_back("L" + std::to_string(i) + ".weight");
    out.push_back("L" + std::to_string(i) + ".bias");
  }
  return out;
}

std::vector<double> ParameterSet::flatten() const {
  std::vector<double> flat;
  flat.reserve(size());
  for (auto b : blocks()) flat.insert(flat.end(), b.begin(), b.end());
  return flat;
}

void ParameterSet::assign(std::span<const double> flat) {
  if (flat.size() != size()) {
    throw InputError("parameter vector has " + std::to_string(flat.size()) + " values, expected " +
                     std::to_string(size()));
  }
  std::size_t at = 0;
  for (auto b : blocks()) {
    std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(at), b.size(), b.begin());
    at += b.size();
  }
}

ParameterSet ParameterSet::zeros_like() const {
  ParameterSet z;
  for (const DenseLayer& l : layers) {
    z.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()),
                        Eigen::VectorXd::Zero(l.bias.size())});
  }
  return z;
}

bool ParameterSet::congruent(const ParameterSet& other) const {
  if (layers.size() != other.layers.size()) return false;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    if (layers[i].weight.rows() != other.layers[i].weight.rows() ||
        layers[i].weight.cols() != other.layers[i].weight.cols() ||
        layers[i].bias.size() != other.layers[i].bias.size()) {
      return false;
    }
  }
  return true;
}

bool operator==(const ParameterSet& a, const ParameterSet& b) {
  return a.congruent(b) && a.flatten() == b.flatten();
}

SirenNetwork init_network(const SirenSpec& spec) {
  if (spec.depth < 1) throw InputError("network depth must be >= 1");
  if (spec.width < 1) throw InputError("network width must be >= 1");
  if (!(spec.omega > 0.0) || !std::isfinite(spec.omega)) throw InputError("omega must be > 0");

  SirenNetwork net{spec, {}};
  std::mt19937_64 rng(spec.seed);
  const auto w = static_cast<Eigen::Index>(spec.width);
  const double hidden_bound = std::sqrt(6.0 / static_cast<double>(spec.width)) / spec.omega;

  DenseLayer first{Eigen::MatrixXd(w, 2), Eigen::VectorXd::Zero(w)};
  fill_uniform(first.weight, rng, 0.5);
  net.params.layers.push_back(std::move(first));
  for (std::size_t i = 1; i < spec.depth; ++i) {
    DenseLayer h{Eigen::MatrixXd(w, w), Eigen::VectorXd::Zero(w)};
    fill_uniform(h.weight, rng, hidden_bound);
    net.params.layers.push_back(std::move(h));
  }
  DenseLayer out{Eigen::MatrixXd::Zero(1, w), Eigen::VectorXd::Zero(1)};
  if (spec.output_init == OutputInit::siren) fill_uniform(out.weight, rng, hidden_bound);
  net.params.layers.push_back(std::move(out));
  return net;
}

SirenNetwork init_network(std::size_t depth, std::size_t width, double omega, std::uint64_t seed) {
  SirenSpec spec;
  spec.depth = depth;
  spec.width = width;
  spec.omega = omega;
  spec.seed = seed;
  return init_network(spec);
}

SirenEvaluation::SirenEvaluation(const SirenNetwork& net, const CoordinateGrid& grid)
    : net_(&net), nz_(grid.nz), nx_(grid.nx) {
  if (grid.size() == 0) throw InputError("coordinate grid is empty");
  const auto n = static_cast<Eigen::Index>(grid.size());
  input_.resize(2, n);
  for (Eigen::Index k = 0; k < n; ++k) {
    input_(0, k) = grid.points[static_cast<std::size_t>(k)][0];
    input_(1, k) = grid.points[static_cast<std::size_t>(k)][1];
  }

  const auto& layers = net.params.layers;
  const std::size_t sine_layers = layers.size() - 1;
  pre_.resize(sine_layers);
  post_.resize(sine_layers);
  for (std::size_t i = 0; i < sine_layers; ++i) {
    const Eigen::MatrixXd& x = i == 0 ? input_ : post_[i - 1];
    pre_[i].noalias() = layers[i].weight * x;
    pre_[i].colwise() += layers[i].bias;
    if (i == 0) pre_[i] *= net.spec.omega;
    post_[i] = pre_[i].array().sin();
  }
  const Eigen::RowVectorXd out =
      (layers.back().weight * post_.back()).array() + layers.back().bias(0);
  output_ = NormalizedModel(nz_, nx_, std::vector<double>(out.data(), out.data() + out.size()));
}

ParameterGradient SirenEvaluation::backward(const Field2D& output_gradient) const {
  if (output_gradient.nz() != nz_ || output_gradient.nx() != nx_) {
    throw InputError("output gradient shape does not match the network output");
  }
  const auto& layers = net_->params.layers;
  const auto n = static_cast<Eigen::Index>(output_gradient.size());
  // Copied rather than mapped: Eigen's vectorized reductions peel by address,
  // so an unaligned view would make the rounding depend on the heap.
  const Eigen::RowVectorXd g =
      Eigen::Map<const Eigen::RowVectorXd>(output_gradient.values().data(), n);

  ParameterGradient grad = net_->params.zeros_like();
  const std::size_t last = layers.size() - 1;
  grad.layers[last].weight.noalias() = g * post_.back().transpose();
  grad.layers[last].bias(0) = g.sum();

  Eigen::MatrixXd delta = layers[last].weight.transpose() * g;
  for (std::size_t i = last; i-- > 0;) {
    delta.array() *= pre_[i].array().cos();
    if (i == 0) delta *= net_->spec.omega;
    const Eigen::MatrixXd& x = i == 0 ? input_ : post_[i - 1];
    grad.layers[i].weight.noalias() = delta * x.transpose();
    grad.layers[i].bias = delta.rowwise().sum();
    if (i > 0) delta = layers[i].weight.transpose() * delta;
  }
  return grad;
}

NormalizedModel forward(const SirenNetwork& net, const CoordinateGrid& grid) {
  return SirenEvaluation(net, grid).output();
}

ParameterGradient backward(const SirenNetwork& net, const CoordinateGrid& grid,
                           const Field2D& output_gradient) {
  return SirenEvaluation(net, grid).backward(output_gradient);
}

void save_network(const SirenNetwork& net, const std::filesystem::path& path) {
  write_f64_file(path, net.params.flatten());
  nlohmann::ordered_json j;
  j["format"] = "float64-le";
  j["layout"] = "L0.weight (column-major, out x in), L0.bias, ..., L" +
                std::to_string(net.params.layers.size() - 1) + ".bias";
  j["depth"] = net.spec.depth;
  j["width"] = net.spec.width;
  j["omega"] = net.spec.omega;
  j["seed"] = net.spec.seed;
  j["output_init"] = net.spec.output_init == OutputInit::zero ? "zero" : "siren";
  j["parameter_count"] = net.params.size();
  std::ofstream out(header_path(path), std::ios::trunc);
  if (!out) throw InputError("cannot write " + header_path(path).string());
  out << j.dump(2) << '\n';
}

SirenNetwork load_network(const std::filesystem::path& path) {
  std::ifstream in(header_path(path));
  if (!in) throw InputError("missing network header " + header_path(path).string());
  SirenSpec spec;
  try {
    nlohmann::json j;
    in >> j;
    spec.depth = j.at("depth").get<std::size_t>();
    spec.width = j.at("width").get<std::size_t>();
    spec.omega = j.at("omega").get<double>();
    spec.seed = j.at("seed").get<std::uint64_t>();
    spec.output_init = j.value("output_init", "zero") == "siren" ? OutputInit::siren : OutputInit::zero;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(header_path(path).string() + ": " + e.what());
  }
  SirenNetwork net = init_network(spec);
  net.params.assign(read_f64_file(path));
  return net;
}

}  // namespace drfwi
