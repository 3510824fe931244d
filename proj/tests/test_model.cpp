#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>

#include "drfwi/binary_io.hpp"
#include "drfwi/model.hpp"

using namespace drfwi;

namespace {

std::filesystem::path temp_file(const std::string& name) {
  auto dir = std::filesystem::temp_directory_path() / "drfwi_test_model";
  std::filesystem::create_directories(dir);
  return dir / name;
}

VelocityModel random_model(std::size_t nz, std::size_t nx, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(1.5, 4.5);
  Field2D f(nz, nx);
  for (double& v : f.data()) v = u(rng);
  return VelocityModel(f, 10.0, 10.0);
}

// Dense 2D convolution with clamped indices; independent of the separable path.
Field2D dense_blur(const Field2D& in, double sigma) {
  const int r = static_cast<int>(std::ceil(4.0 * sigma));
  std::vector<double> w;
  double total = 0.0;
  for (int k = -r; k <= r; ++k) {
    w.push_back(std::exp(-0.5 * k * k / (sigma * sigma)));
    total += w.back();
  }
  for (double& x : w) x /= total;
  Field2D out(in.nz(), in.nx());
  const int nz = static_cast<int>(in.nz()), nx = static_cast<int>(in.nx());
  for (int i = 0; i < nz; ++i)
    for (int j = 0; j < nx; ++j) {
      double acc = 0.0;
      for (int p = -r; p <= r; ++p)
        for (int q = -r; q <= r; ++q) {
          const int ii = std::clamp(i + p, 0, nz - 1);
          const int jj = std::clamp(j + q, 0, nx - 1);
          acc += w[p + r] * w[q + r] * in(ii, jj);
        }
      out(i, j) = acc;
    }
  return out;
}

}  // namespace

TEST(VelocityModel, RejectsNonPositiveAndNonFinite) {
  Field2D f(3, 3, 2.0);
  f(1, 1) = 0.0;
  EXPECT_THROW(VelocityModel(f, 10, 10), ValidationError);
  f(1, 1) = std::nan("");
  EXPECT_THROW(VelocityModel(f, 10, 10), ValidationError);
  EXPECT_THROW(VelocityModel(Field2D(2, 3, 2.0), 10, 10), ValidationError);
  EXPECT_THROW(VelocityModel(Field2D(3, 3, 2.0), 0.0, 10), ValidationError);
}

TEST(LoadModel, ConstantThreeByThree) {
  const auto path = temp_file("const.bin");
  write_f32_file(path, std::vector<double>(9, 2.0));
  const VelocityModel m = load_model(path, 3, 3, 15, 15);
  EXPECT_EQ(m.nz(), 3u);
  EXPECT_EQ(m.nx(), 3u);
  for (double v : m.values().data()) EXPECT_EQ(v, 2.0);
}

TEST(LoadModel, SizeMismatchIsInputError) {
  const auto path = temp_file("short.bin");
  write_f32_file(path, std::vector<double>(8, 2.0));
  EXPECT_THROW(load_model(path, 3, 3, 15, 15), InputError);
}

TEST(LoadModel, NonPositiveValuesAreValidationErrors) {
  const auto path = temp_file("neg.bin");
  std::vector<double> v(9, 2.0);
  v[4] = -1.0;
  write_f32_file(path, v);
  EXPECT_THROW(load_model(path, 3, 3, 15, 15), ValidationError);
}

TEST(LoadModel, MarmousiSizedFile) {
  const auto path = temp_file("marm.bin");
  save_model(marmousi_like(), path);
  const VelocityModel m = load_model(path, 94, 288, 15, 15);
  EXPECT_EQ(m.nz(), 94u);
  EXPECT_EQ(m.nx(), 288u);
  EXPECT_EQ(m.dz(), 15.0);
}

TEST(LoadModel, RoundTripIsByteIdentical) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<float> u(1.5f, 4.5f);
  std::vector<float> raw(6 * 5);
  for (float& x : raw) x = u(rng);
  const auto in = temp_file("rt_in.bin");
  const auto out = temp_file("rt_out.bin");
  {
    std::ofstream f(in, std::ios::binary);
    f.write(reinterpret_cast<const char*>(raw.data()), raw.size() * sizeof(float));
  }
  save_model(load_model(in, 6, 5, 10, 10), out);
  std::ifstream a(in, std::ios::binary), b(out, std::ios::binary);
  const std::string sa((std::istreambuf_iterator<char>(a)), {});
  const std::string sb((std::istreambuf_iterator<char>(b)), {});
  EXPECT_EQ(sa, sb);
}

TEST(GaussianSmooth, ZeroSigmaIsIdentity) {
  std::mt19937_64 rng(1);
  const VelocityModel m = random_model(7, 9, rng);
  EXPECT_EQ(gaussian_smooth(m, 0, 0), m);
}

TEST(GaussianSmooth, ConstantFieldUnchanged) {
  const VelocityModel m(Field2D(11, 13, 2.7), 10, 10);
  EXPECT_EQ(gaussian_smooth(m, 3.0, 1.5), m);
}

TEST(GaussianSmooth, SpikeMatchesDenseConvolution) {
  Field2D f(5, 5, 1.0);
  f(2, 2) = 5.0;
  const VelocityModel m(f, 10, 10);
  const Field2D expected = dense_blur(f, 1.0);
  const VelocityModel s = gaussian_smooth(m, 1.0, 1.0);
  for (std::size_t k = 0; k < expected.size(); ++k) EXPECT_NEAR(s.values()[k], expected[k], 1e-12);
}

TEST(GaussianSmooth, NegativeSigmaRejected) {
  const VelocityModel m(Field2D(3, 3, 2.0), 10, 10);
  EXPECT_THROW(gaussian_smooth(m, -1.0, 0.0), InputError);
}

TEST(GaussianSmooth, MaxPrincipleOnRandomInputs) {
  std::mt19937_64 rng(42);
  std::uniform_real_distribution<double> sig(0.0, 6.0);
  for (int trial = 0; trial < 25; ++trial) {
    const VelocityModel m = random_model(4 + trial % 9, 5 + trial % 7, rng);
    const VelocityModel s = gaussian_smooth(m, sig(rng), sig(rng));
    EXPECT_GE(s.min_velocity(), m.min_velocity());
    EXPECT_LE(s.max_velocity(), m.max_velocity());
  }
}

TEST(LinearModel, ThreeRows) {
  const VelocityModel m = linear_model(3, 4, 10, 10, 1.0, 3.0);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_DOUBLE_EQ(m(0, j), 1.0);
    EXPECT_DOUBLE_EQ(m(1, j), 2.0);
    EXPECT_DOUBLE_EQ(m(2, j), 3.0);
  }
}

TEST(LinearModel, EndpointsAndSlope) {
  const VelocityModel m = linear_model(94, 288, 15, 15, 1.5, 4.0);
  EXPECT_DOUBLE_EQ(m(0, 17), 1.5);
  EXPECT_DOUBLE_EQ(m(93, 17), 4.0);
  EXPECT_NEAR(m(47, 0) - m(46, 0), 2.5 / 93.0, 1e-12);
}

TEST(LinearModel, EqualEndsGiveConstant) {
  const VelocityModel m = linear_model(5, 6, 10, 10, 3.0, 3.0);
  for (double v : m.values().data()) EXPECT_EQ(v, 3.0);
  EXPECT_THROW(linear_model(5, 6, 10, 10, 0.0, 3.0), InputError);
}

TEST(CoordinateGrid, CornersAndCenter) {
  const VelocityModel m(Field2D(3, 3, 2.0), 10, 10);
  const CoordinateGrid g = make_coordinate_grid(m);
  ASSERT_EQ(g.size(), 9u);
  EXPECT_EQ(g.points[0], (std::array<double, 2>{-1, -1}));
  EXPECT_EQ(g.points[2], (std::array<double, 2>{-1, 1}));
  EXPECT_EQ(g.points[6], (std::array<double, 2>{1, -1}));
  EXPECT_EQ(g.points[8], (std::array<double, 2>{1, 1}));
  EXPECT_EQ(g.points[4], (std::array<double, 2>{0, 0}));
}

TEST(CoordinateGrid, MarmousiCorner) {
  const CoordinateGrid g = make_coordinate_grid(94, 288);
  EXPECT_EQ(g.points[287][0], -1.0);
  EXPECT_EQ(g.points[287][1], 1.0);
  for (const auto& p : g.points) {
    EXPECT_LE(std::abs(p[0]), 1.0);
    EXPECT_LE(std::abs(p[1]), 1.0);
  }
}

TEST(CoordinateGrid, InvariantUnderVelocityScaling) {
  std::mt19937_64 rng(3);
  const VelocityModel m = random_model(6, 8, rng);
  Field2D scaled = m.values();
  for (double& v : scaled.data()) v *= 2.5;
  const CoordinateGrid a = make_coordinate_grid(m);
  const CoordinateGrid b = make_coordinate_grid(VelocityModel(scaled, 10, 10));
  EXPECT_EQ(a.points, b.points);
}

TEST(Downsample, FactorOneIsIdentity) {
  std::mt19937_64 rng(5);
  const VelocityModel m = random_model(6, 8, rng);
  EXPECT_EQ(downsample(m, 1, 1), m);
}

TEST(Downsample, MarmousiByTwo) {
  const VelocityModel d = downsample(marmousi_like(), 2, 2);
  EXPECT_EQ(d.nz(), 47u);
  EXPECT_EQ(d.nx(), 144u);
  EXPECT_EQ(d.dz(), 30.0);
  EXPECT_EQ(d.dx(), 30.0);
  EXPECT_EQ(d(10, 20), marmousi_like()(20, 40));
}

TEST(Downsample, FactorTooLarge) {
  const VelocityModel m(Field2D(3, 3, 2.0), 10, 10);
  EXPECT_THROW(downsample(m, 5, 1), InputError);
  EXPECT_THROW(downsample(m, 0, 1), InputError);
}

TEST(MarmousiLike, PlausibleRange) {
  const VelocityModel m = marmousi_like();
  EXPECT_DOUBLE_EQ(m.min_velocity(), 1.5);
  EXPECT_LE(m.max_velocity(), 5.5);
  EXPECT_GT(m.max_velocity(), 4.5);
  EXPECT_EQ(m(0, 100), 1.5);  // water at the surface
}
