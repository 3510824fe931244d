#include "drfwi/diagnostics.hpp"

#include <fftw3.h>

#include <cmath>
#include <limits>
#include <mutex>
#include <sstream>

#include "drfwi/errors.hpp"

namespace drfwi {

namespace {

constexpr double kSsimSigma = 1.5;
constexpr std::size_t kSsimWindow = 11;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;

// FFTW planning is not thread-safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

std::vector<double> gaussian_weights(std::size_t window) {
  std::vector<double> g(window);
  const double c = 0.5 * static_cast<double>(window - 1);
  double sum = 0.0;
  for (std::size_t i = 0; i < window; ++i) {
    const double d = static_cast<double>(i) - c;
    g[i] = std::exp(-d * d / (2.0 * kSsimSigma * kSsimSigma));
    sum += g[i];
  }
  for (double& v : g) v /= sum;
  return g;
}

// Valid-mode separable filtering of f (nz x nx) with g.
Field2D filter_valid(const Field2D& f, const std::vector<double>& g) {
  const std::size_t w = g.size();
  const std::size_t oz = f.nz() - w + 1, ox = f.nx() - w + 1;
  Field2D rows(f.nz(), ox, 0.0);
  for (std::size_t i = 0; i < f.nz(); ++i) {
    for (std::size_t j = 0; j < ox; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) s += g[t] * f(i, j + t);
      rows(i, j) = s;
    }
  }
  Field2D out(oz, ox, 0.0);
  for (std::size_t i = 0; i < oz; ++i) {
    for (std::size_t j = 0; j < ox; ++j) {
      double s = 0.0;
      for (std::size_t t = 0; t < w; ++t) s += g[t] * rows(i + t, j);
      out(i, j) = s;
    }
  }
  return out;
}

double l2_norm(std::span<const double> v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

double mean_squared_error(const Field2D& a, const Field2D& b) {
  require_same_shape(a, b, "mean_squared_error");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += (a[k] - b[k]) * (a[k] - b[k]);
  return s / static_cast<double>(a.size());
}

double ssim(const Field2D& a, const Field2D& b, double data_range) {
  require_same_shape(a, b, "ssim");
  if (!(data_range > 0.0)) throw InputError("ssim: data range must be > 0");
  std::size_t window = std::min({kSsimWindow, a.nz(), a.nx()});
  if (window % 2 == 0) --window;
  const std::vector<double> g = gaussian_weights(window);

  Field2D aa(a.nz(), a.nx()), bb(a.nz(), a.nx()), ab(a.nz(), a.nx());
  for (std::size_t k = 0; k < a.size(); ++k) {
    aa[k] = a[k] * a[k];
    bb[k] = b[k] * b[k];
    ab[k] = a[k] * b[k];
  }
  const Field2D mu_a = filter_valid(a, g), mu_b = filter_valid(b, g);
  const Field2D e_aa = filter_valid(aa, g), e_bb = filter_valid(bb, g), e_ab = filter_valid(ab, g);
  const double c1 = (kK1 * data_range) * (kK1 * data_range);
  const double c2 = (kK2 * data_range) * (kK2 * data_range);
  double sum = 0.0;
  for (std::size_t k = 0; k < mu_a.size(); ++k) {
    const double var_a = e_aa[k] - mu_a[k] * mu_a[k];
    const double var_b = e_bb[k] - mu_b[k] * mu_b[k];
    const double cov = e_ab[k] - mu_a[k] * mu_b[k];
    sum += ((2.0 * (mu_a[k] * mu_b[k]) + c1) * (2.0 * cov + c2)) /
           ((mu_a[k] * mu_a[k] + mu_b[k] * mu_b[k] + c1) * (var_a + var_b + c2));
  }
  return sum / static_cast<double>(mu_a.size());
}

MetricsBlock compute_metrics(const VelocityModel& predicted, const VelocityModel& truth) {
  const Field2D& p = predicted.values();
  const Field2D& t = truth.values();
  require_same_shape(p, t, "compute_metrics");
  const double n = static_cast<double>(t.size());
  double mean = 0.0;
  for (double v : t.data()) mean += v;
  mean /= n;
  double ss_tot = 0.0, ss_res = 0.0, abs_sum = 0.0;
  for (std::size_t k = 0; k < t.size(); ++k) {
    ss_tot += (t[k] - mean) * (t[k] - mean);
    ss_res += (p[k] - t[k]) * (p[k] - t[k]);
    abs_sum += std::abs(p[k] - t[k]);
  }
  if (ss_tot == 0.0) throw InputError("compute_metrics: R^2 undefined for a constant truth model");
  MetricsBlock m;
  m.mse = ss_res / n;
  m.mae = abs_sum / n;
  m.r2 = 1.0 - ss_res / ss_tot;
  m.ssim = ssim(p, t, truth.max_velocity() - truth.min_velocity());
  return m;
}

std::vector<SpectrumProfile> wavenumber_spectrum(const Field2D& values, double dz,
                                                 std::span<const std::size_t> columns) {
  const std::size_t nz = values.nz();
  const std::size_t bins = nz / 2 + 1;
  std::vector<SpectrumProfile> out;
  double* in = fftw_alloc_real(nz);
  fftw_complex* spec = fftw_alloc_complex(bins);
  fftw_plan plan;
  {
    std::lock_guard lock(fftw_planner_mutex());
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(nz), in, spec, FFTW_ESTIMATE);
  }
  try {
    for (std::size_t col : columns) {
      if (col >= values.nx()) {
        throw InputError("spectrum column " + std::to_string(col) + " out of range (nx = " +
                         std::to_string(values.nx()) + ")");
      }
      double mean = 0.0;
      for (std::size_t i = 0; i < nz; ++i) mean += values(i, col);
      mean /= static_cast<double>(nz);
      for (std::size_t i = 0; i < nz; ++i) in[i] = values(i, col) - mean;
      fftw_execute(plan);
      SpectrumProfile p;
      p.column = col;
      for (std::size_t k = 0; k < bins; ++k) {
        p.wavenumber.push_back(1000.0 * static_cast<double>(k) / (static_cast<double>(nz) * dz));
        p.magnitude.push_back(std::hypot(spec[k][0], spec[k][1]));
      }
      out.push_back(std::move(p));
    }
  } catch (...) {
    std::lock_guard lock(fftw_planner_mutex());
    fftw_destroy_plan(plan);
    fftw_free(in);
    fftw_free(spec);
    throw;
  }
  std::lock_guard lock(fftw_planner_mutex());
  fftw_destroy_plan(plan);
  fftw_free(in);
  fftw_free(spec);
  return out;
}

std::vector<SpectrumProfile> wavenumber_spectrum(const VelocityModel& m,
                                                 std::span<const std::size_t> columns) {
  return wavenumber_spectrum(m.values(), m.dz(), columns);
}

std::vector<std::size_t> default_profile_columns(std::size_t nx) {
  std::vector<std::size_t> cols;
  for (std::size_t k = 1; k <= 4; ++k) cols.push_back(nx * k / 5);
  return cols;
}

double low_band_magnitude(const SpectrumProfile& p, std::size_t count) {
  double s = 0.0;
  for (std::size_t k = 1; k <= count && k < p.magnitude.size(); ++k) s += p.magnitude[k];
  return s;
}

TargetDecomposition target_decomposition(const VelocityModel& m_true, const Reparameterization& r) {
  require_same_shape(m_true.values(), r.std_matrix, "target_decomposition");
  TargetDecomposition d{m_true.values(), Field2D(m_true.nz(), m_true.nx(), 0.0)};
  const bool global = r.mode == ReparamMode::global_mean;
  for (std::size_t k = 0; k < d.target.size(); ++k) {
    d.perturbation[k] = d.target[k] - (global ? r.mean : r.m_init[k]);
  }
  return d;
}

std::vector<LayerSimilarityRow> parameter_similarity(const ParameterSet& a, const ParameterSet& b) {
  if (!a.congruent(b)) throw InputError("parameter_similarity: parameter sets differ in shape");
  const auto ba = a.blocks();
  const auto bb = b.blocks();
  const auto names = a.block_names();
  std::vector<LayerSimilarityRow> rows;
  for (std::size_t i = 0; i < ba.size(); ++i) {
    double dot = 0.0, dist = 0.0;
    for (std::size_t k = 0; k < ba[i].size(); ++k) {
      dot += ba[i][k] * bb[i][k];
      dist += (ba[i][k] - bb[i][k]) * (ba[i][k] - bb[i][k]);
    }
    LayerSimilarityRow row{names[i], std::nullopt, std::sqrt(dist)};
    const double na = l2_norm(ba[i]), nb = l2_norm(bb[i]);
    if (na > 0.0 && nb > 0.0) row.cs = std::clamp(dot / (na * nb), -1.0, 1.0);
    rows.push_back(std::move(row));
  }
  return rows;
}

std::vector<SimilarityColumn> similarity_report(std::span<const NetworkCheckpoint> checkpoints) {
  auto find = [&](const std::string& name) -> const NetworkCheckpoint* {
    for (const NetworkCheckpoint& c : checkpoints) {
      if (c.name == name) return &c;
    }
    return nullptr;
  };
  const NetworkCheckpoint* ini = find("INI");
  const NetworkCheckpoint* stage1 = find("stage1");
  const NetworkCheckpoint* final_ = find("final");
  if (ini == nullptr) throw InputError("similarity_report: missing INI checkpoint");
  if (final_ == nullptr) throw InputError("similarity_report: missing final checkpoint");
  std::vector<SimilarityColumn> cols;
  if (stage1 != nullptr) {
    cols.push_back({"Stage 1 vs INI", parameter_similarity(stage1->net.params, ini->net.params)});
    cols.push_back(
        {"Stage 1 vs Stage 2", parameter_similarity(stage1->net.params, final_->net.params)});
  } else {
    cols.push_back({"FWI vs INI", parameter_similarity(final_->net.params, ini->net.params)});
  }
  return cols;
}

std::string similarity_csv(std::span<const SimilarityColumn> columns) {
  std::ostringstream out;
  out.precision(10);
  out << "layer";
  for (const SimilarityColumn& c : columns) out << ',' << c.title << " CS," << c.title << " ED";
  out << '\n';
  if (columns.empty()) return out.str();
  for (std::size_t r = 0; r < columns.front().rows.size(); ++r) {
    out << columns.front().rows[r].layer;
    for (const SimilarityColumn& c : columns) {
      out << ',';
      if (c.rows[r].cs) {
        out << *c.rows[r].cs;
      } else {
        out << "undefined";
      }
      out << ',' << c.rows[r].ed;
    }
    out << '\n';
  }
  return out.str();
}

double mean_weight_cs(const SimilarityColumn& column, bool absolute) {
  double sum = 0.0;
  std::size_t n = 0;
  for (const LayerSimilarityRow& r : column.rows) {
    if (!r.layer.ends_with(".weight") || !r.cs) continue;
    sum += absolute ? std::abs(*r.cs) : *r.cs;
    ++n;
  }
  return n == 0 ? std::numeric_limits<double>::quiet_NaN() : sum / static_cast<double>(n);
}

}  // namespace drfwi
