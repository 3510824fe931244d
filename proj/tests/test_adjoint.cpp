#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "drfwi/adjoint.hpp"

using namespace drfwi;

namespace {

struct Instance {
  VelocityModel model;
  AcquisitionGeometry geom;
  SourceWavelet wavelet;
};

VelocityModel random_model(std::size_t nz, std::size_t nx, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(1.6, 2.6);
  Field2D f(nz, nx, 0.0);
  for (double& v : f.data()) v = u(rng);
  return VelocityModel(f, 10.0, 10.0);
}

Instance small_instance(std::size_t n_shots, std::size_t nt = 201, unsigned seed = 7) {
  Instance in{random_model(16, 24, seed), {}, {}};
  const std::size_t cols[] = {6, 17, 11};
  for (std::size_t s = 0; s < n_shots; ++s) in.geom.sources.push_back({1, cols[s]});
  for (std::size_t j = 0; j < 24; ++j) in.geom.receivers.push_back({1, j});
  in.geom.nt = nt;  // 200 steps
  in.geom.dt = 0.001;
  in.wavelet = ricker(20.0, in.geom.dt, nt);
  return in;
}

Field2D random_field(std::size_t nz, std::size_t nx, unsigned seed, double scale = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, scale);
  Field2D f(nz, nx, 0.0);
  for (double& v : f.data()) v = n(rng);
  return f;
}

VelocityModel shifted(const VelocityModel& m, const Field2D& dm, double eps) {
  Field2D f = m.values();
  for (std::size_t k = 0; k < f.size(); ++k) f[k] += eps * dm[k];
  return VelocityModel(f, m.dz(), m.dx());
}

std::vector<ShotRecord> observed_from(const VelocityModel& truth, const Instance& in) {
  return forward_all_shots(truth, in.geom, in.wavelet);
}

double loss_at(const VelocityModel& m, const Instance& in, const std::vector<ShotRecord>& obs) {
  return data_misfit(forward_all_shots(m, in.geom, in.wavelet), obs);
}

double dot(const std::vector<double>& a, const std::vector<double>& b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

const GradientOptions kExact{.mask_boundary = false};

}  // namespace

TEST(Adjoint, DotProductTest) {
  const Instance in = small_instance(1);
  const Field2D dm = random_field(16, 24, 11);
  ShotRecord dd(0, in.geom.nt, in.geom.receivers.size());
  std::mt19937_64 rng(12);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : dd.traces) v = n(rng);

  const ShotRecord jdm = linearized_forward(in.model, in.geom, in.wavelet, 0, dm);
  const VelocityGradient jtdd = adjoint_apply(in.model, in.geom, in.wavelet, 0, dd);
  const double lhs = dot(jdm.traces, dd.traces);
  const double rhs = dot(dm.values(), jtdd.values());
  EXPECT_LT(std::abs(lhs - rhs) / std::abs(lhs), 1e-6) << lhs << " vs " << rhs;
}

TEST(Adjoint, DotProductWithCheckpointingAndSubsteps) {
  const Instance in = small_instance(1, 101);
  WaveConfig cfg;
  cfg.full_tape = false;
  cfg.checkpoint_interval = 7;
  cfg.time_substeps = 2;
  const Field2D dm = random_field(16, 24, 21);
  ShotRecord dd(0, in.geom.nt, in.geom.receivers.size());
  std::mt19937_64 rng(22);
  std::normal_distribution<double> n(0.0, 1.0);
  for (double& v : dd.traces) v = n(rng);

  const ShotRecord jdm = linearized_forward(in.model, in.geom, in.wavelet, 0, dm, cfg);
  const VelocityGradient jtdd = adjoint_apply(in.model, in.geom, in.wavelet, 0, dd, cfg);
  const double lhs = dot(jdm.traces, dd.traces);
  const double rhs = dot(dm.values(), jtdd.values());
  EXPECT_LT(std::abs(lhs - rhs) / std::abs(lhs), 1e-6) << lhs << " vs " << rhs;
}

TEST(Adjoint, BornMatchesForwardDifference) {
  const Instance in = small_instance(1);
  const Field2D dm = random_field(16, 24, 31, 0.1);
  const ShotRecord jdm = linearized_forward(in.model, in.geom, in.wavelet, 0, dm);
  const double eps = 1e-4;
  const ShotRecord up = simulate(shifted(in.model, dm, eps), in.geom, in.wavelet, 0);
  const ShotRecord dn = simulate(shifted(in.model, dm, -eps), in.geom, in.wavelet, 0);
  double num = 0.0, den = 0.0;
  for (std::size_t k = 0; k < jdm.traces.size(); ++k) {
    const double fd = (up.traces[k] - dn.traces[k]) / (2.0 * eps);
    num += (fd - jdm.traces[k]) * (fd - jdm.traces[k]);
    den += fd * fd;
  }
  EXPECT_LT(std::sqrt(num / den), 1e-5);
}

TEST(Adjoint, DirectionalDerivativeMatchesCentralDifference) {
  const Instance in = small_instance(2);
  const auto obs = observed_from(random_model(16, 24, 99), in);
  const MisfitGradient g = misfit_gradient(in.model, in.geom, in.wavelet, obs, {}, kExact);
  const Field2D dm = random_field(16, 24, 41, 0.05);
  const double eps = 1e-3;
  const double fd = (loss_at(shifted(in.model, dm, eps), in, obs) -
                     loss_at(shifted(in.model, dm, -eps), in, obs)) /
                    (2.0 * eps);
  const double ad = dot(g.gradient.values(), dm.values());
  EXPECT_LT(std::abs(fd - ad) / std::abs(fd), 1e-3) << fd << " vs " << ad;
  EXPECT_NEAR(g.loss, loss_at(in.model, in, obs), 1e-12 * g.loss);
}

TEST(Adjoint, PerCellFiniteDifferences) {
  const Instance in = small_instance(1);
  const auto obs = observed_from(random_model(16, 24, 5), in);
  const MisfitGradient g = misfit_gradient(in.model, in.geom, in.wavelet, obs, {}, kExact);
  std::mt19937_64 rng(51);
  std::uniform_int_distribution<std::size_t> cell(24, 16 * 24 - 1);  // below the pinned row
  const double eps = 1e-4;
  double scale = 0.0;
  for (double v : g.gradient.data()) scale = std::max(scale, std::abs(v));
  for (int t = 0; t < 20; ++t) {
    const std::size_t k = cell(rng);
    Field2D e(16, 24, 0.0);
    e[k] = 1.0;
    const double fd = (loss_at(shifted(in.model, e, eps), in, obs) -
                       loss_at(shifted(in.model, e, -eps), in, obs)) /
                      (2.0 * eps);
    // Relative to the cell value, floored at a small fraction of the largest
    // component for cells the wavefield barely touches.
    const double denom = std::max(std::abs(fd), 1e-3 * scale);
    EXPECT_LT(std::abs(fd - g.gradient[k]) / denom, 1e-3) << "cell " << k;
  }
}

TEST(Adjoint, ZeroAtTheMinimum) {
  const Instance in = small_instance(2);
  const auto obs = observed_from(in.model, in);
  const MisfitGradient g = misfit_gradient(in.model, in.geom, in.wavelet, obs);
  EXPECT_EQ(g.loss, 0.0);
  for (double v : g.gradient.data()) EXPECT_EQ(v, 0.0);
}

TEST(Adjoint, AdditiveOverShots) {
  const Instance both = small_instance(2);
  const auto obs = observed_from(random_model(16, 24, 3), both);
  const MisfitGradient g = misfit_gradient(both.model, both.geom, both.wavelet, obs);

  VelocityGradient sum(16, 24, 0.0);
  double loss = 0.0;
  for (std::size_t s = 0; s < 2; ++s) {
    Instance one = both;
    one.geom.sources = {both.geom.sources[s]};
    ShotRecord o = obs[s];
    o.source_index = 0;
    const MisfitGradient gs =
        misfit_gradient(one.model, one.geom, one.wavelet, std::span<const ShotRecord>(&o, 1));
    loss += gs.loss;
    for (std::size_t k = 0; k < sum.size(); ++k) sum[k] += gs.gradient[k];
  }
  EXPECT_DOUBLE_EQ(g.loss, loss);
  for (std::size_t k = 0; k < sum.size(); ++k) EXPECT_DOUBLE_EQ(g.gradient[k], sum[k]);
}

TEST(Adjoint, MaskZeroesSurfaceRowAndKeepsInterior) {
  const Instance in = small_instance(1);
  const auto obs = observed_from(random_model(16, 24, 8), in);
  const MisfitGradient masked = misfit_gradient(in.model, in.geom, in.wavelet, obs);
  const MisfitGradient exact = misfit_gradient(in.model, in.geom, in.wavelet, obs, {}, kExact);
  for (std::size_t j = 0; j < 24; ++j) EXPECT_EQ(masked.gradient(0, j), 0.0);
  // Cells away from the padded edges receive no fold-back contributions.
  for (std::size_t i = 1; i + 1 < 16; ++i) {
    for (std::size_t j = 1; j + 1 < 24; ++j) {
      EXPECT_EQ(masked.gradient(i, j), exact.gradient(i, j));
    }
  }
}

TEST(Adjoint, CheckpointedGradientMatchesFullTape) {
  const Instance in = small_instance(2);
  const auto obs = observed_from(random_model(16, 24, 4), in);
  WaveConfig ck;
  ck.full_tape = false;
  ck.checkpoint_interval = 10;
  const MisfitGradient a = misfit_gradient(in.model, in.geom, in.wavelet, obs);
  const MisfitGradient b = misfit_gradient(in.model, in.geom, in.wavelet, obs, ck);
  EXPECT_EQ(a.loss, b.loss);
  for (std::size_t k = 0; k < a.gradient.size(); ++k) {
    EXPECT_NEAR(a.gradient[k], b.gradient[k], 1e-12 * std::abs(a.gradient[k]) + 1e-300);
  }
}

TEST(Adjoint, RejectsMismatchedObservations) {
  const Instance in = small_instance(1);
  std::vector<ShotRecord> obs{ShotRecord(0, in.geom.nt - 1, in.geom.receivers.size())};
  EXPECT_THROW(misfit_gradient(in.model, in.geom, in.wavelet, obs), InputError);
}

TEST(Adjoint, GradientIsDeterministicAcrossThreads) {
  const Instance in = small_instance(3);
  const auto obs = observed_from(random_model(16, 24, 6), in);
  setenv("DRFWI_THREADS", "1", 1);
  const MisfitGradient a = misfit_gradient(in.model, in.geom, in.wavelet, obs);
  setenv("DRFWI_THREADS", "3", 1);
  const MisfitGradient b = misfit_gradient(in.model, in.geom, in.wavelet, obs);
  unsetenv("DRFWI_THREADS");
  EXPECT_EQ(a.loss, b.loss);
  EXPECT_EQ(a.gradient, b.gradient);
}
