#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drfwi/reparam.hpp"
#include "drfwi/siren.hpp"

namespace drfwi {

struct MetricsBlock {
  double mse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double ssim = 0.0;
};

/// MSE, MAE, R^2 (about the truth mean) and SSIM with an 11x11 Gaussian
/// window (sigma 1.5), K1 = 0.01, K2 = 0.03 and range max(truth) - min(truth).
/// SSIM averages over windows that fit inside the grid; grids smaller than
/// 11 cells use the largest odd window that fits.
MetricsBlock compute_metrics(const VelocityModel& predicted, const VelocityModel& truth);
double mean_squared_error(const Field2D& a, const Field2D& b);
double ssim(const Field2D& a, const Field2D& b, double data_range);

struct SpectrumProfile {
  std::size_t column = 0;
  std::vector<double> wavenumber;  // cycles per km
  std::vector<double> magnitude;   // |DFT| of the mean-removed profile, unnormalized
};

/// One-sided spectra (nz/2 + 1 bins) of vertical profiles.
std::vector<SpectrumProfile> wavenumber_spectrum(const VelocityModel& m,
                                                 std::span<const std::size_t> columns);
std::vector<SpectrumProfile> wavenumber_spectrum(const Field2D& values, double dz,
                                                 std::span<const std::size_t> columns);
/// Four evenly spaced interior columns: nx * k / 5 for k = 1..4.
std::vector<std::size_t> default_profile_columns(std::size_t nx);
/// Sum of the magnitudes of bins 1..count (DC excluded).
double low_band_magnitude(const SpectrumProfile& p, std::size_t count = 3);

struct TargetDecomposition {
  Field2D target;        // what the denormalized model must become: m_true
  Field2D perturbation;  // what the network output (times S) must represent
};

TargetDecomposition target_decomposition(const VelocityModel& m_true, const Reparameterization& r);

struct LayerSimilarityRow {
  std::string layer;
  std::optional<double> cs;  // empty when either vector has zero norm
  double ed = 0.0;
};

/// Cosine similarity and Euclidean distance per flattened weight matrix and
/// bias vector, ordered L0.weight, L0.bias, ..., L{depth}.bias.
std::vector<LayerSimilarityRow> parameter_similarity(const ParameterSet& a, const ParameterSet& b);

struct SimilarityColumn {
  std::string title;  // e.g. "Stage 1 vs INI"
  std::vector<LayerSimilarityRow> rows;
};

/// Pretrain runs (INI, stage1, final) give "Stage 1 vs INI" and
/// "Stage 1 vs Stage 2"; denorm runs (INI, final) give "FWI vs INI".
std::vector<SimilarityColumn> similarity_report(std::span<const NetworkCheckpoint> checkpoints);
std::string similarity_csv(std::span<const SimilarityColumn> columns);

/// Mean CS (or |CS|) over weight rows with a defined CS; NaN when none are.
double mean_weight_cs(const SimilarityColumn& column, bool absolute = false);

}  // namespace drfwi
