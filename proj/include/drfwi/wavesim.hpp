#pragma once

#include <cstddef>
#include <filesystem>
#include <memory>
#include <span>
#include <utility>
#include <vector>

#include "drfwi/model.hpp"

namespace drfwi {

struct GridIndex {
  std::size_t row = 0;
  std::size_t col = 0;
  friend bool operator==(const GridIndex&, const GridIndex&) = default;
};

/// Sources and receivers are model-grid cells; row 0 is the free surface and
/// therefore not a valid position. Receiver selection plays the role of the
/// acquisition mask on the synthetic wavefield.
struct AcquisitionGeometry {
  std::vector<GridIndex> sources;
  std::vector<GridIndex> receivers;
  std::size_t nt = 0;  // recorded samples per trace
  double dt = 0.0;     // recording interval (s)

  void validate(std::size_t nz, std::size_t nx) const;
};

struct SourceWavelet {
  std::vector<double> samples;  // one per recorded time step
  double peak_frequency = 0.0;
};

SourceWavelet ricker(double peak_frequency, double dt, std::size_t nt, double delay);
/// Ricker with the conventional 1.5 / f delay.
SourceWavelet ricker(double peak_frequency, double dt, std::size_t nt);

/// Traces of one shot, nt x n_receivers row-major.
struct ShotRecord {
  std::size_t source_index = 0;
  std::size_t nt = 0;
  std::size_t n_receivers = 0;
  std::vector<double> traces;

  ShotRecord() = default;
  ShotRecord(std::size_t source, std::size_t nt_, std::size_t nr)
      : source_index(source), nt(nt_), n_receivers(nr), traces(nt_ * nr, 0.0) {}

  double& at(std::size_t t, std::size_t r) { return traces[t * n_receivers + r]; }
  double at(std::size_t t, std::size_t r) const { return traces[t * n_receivers + r]; }
  std::vector<double> trace(std::size_t r) const;
};

struct WaveConfig {
  std::size_t pml_width = 20;
  double pml_reflection = 1e-4;
  double cfl_factor = 0.5;
  /// Reference velocity (km/s) for the absorbing profile. Fixed so the
  /// absorbing coefficients do not depend on the model being simulated.
  double pml_velocity = 4.0;
  /// Frequency shift (Hz) of the convolutional PML; 0 gives a classical PML.
  double pml_frequency = 0.0;
  /// Internal leapfrog steps per recorded sample.
  std::size_t time_substeps = 1;
  /// Store every internal step for the adjoint (true) or checkpoint every
  /// `checkpoint_interval` steps and recompute between them.
  bool full_tape = true;
  std::size_t checkpoint_interval = 10;
};

class Propagator;

/// Forward states needed by the adjoint pass, either stored or recomputable.
class WavefieldTape {
 public:
  WavefieldTape();
  ~WavefieldTape();
  WavefieldTape(WavefieldTape&&) noexcept;
  WavefieldTape& operator=(WavefieldTape&&) noexcept;

  std::size_t steps() const noexcept;  // number of internal steps
  /// Stencil term of internal step k (padded layout), i.e. the factor that
  /// multiplies (v dt)^2 in the update. Reverse-order access is efficient in
  /// checkpoint mode; random access recomputes a segment.
  std::span<const double> field(std::size_t k);
  std::size_t stored_bytes() const noexcept;

  struct Impl;  // opaque, defined by the simulator

 private:
  friend class Simulation;
  std::unique_ptr<Impl> impl_;
};

/// Throws ConfigError with "cfl" in the message when the time step is unstable.
void check_cfl(const VelocityModel& m, double dt, const WaveConfig& cfg);

/// Second-order in time, fourth-order in space acoustic solve of
/// u_tt = v^2 lap(u) + s with a pressure-free top row and convolutional PML
/// strips on the other sides.
ShotRecord simulate(const VelocityModel& m, const AcquisitionGeometry& geom,
                    const SourceWavelet& w, std::size_t source_index,
                    const WaveConfig& cfg = {});
std::pair<ShotRecord, WavefieldTape> simulate_taped(const VelocityModel& m,
                                                    const AcquisitionGeometry& geom,
                                                    const SourceWavelet& w,
                                                    std::size_t source_index,
                                                    const WaveConfig& cfg = {});

/// One record per source, ordered by source index. Shots run on up to
/// `worker_count()` threads.
std::vector<ShotRecord> forward_all_shots(const VelocityModel& m, const AcquisitionGeometry& geom,
                                          const SourceWavelet& w, const WaveConfig& cfg = {});

/// 0.5 * sum of squared residuals over all shots.
double data_misfit(std::span<const ShotRecord> synthetic, std::span<const ShotRecord> observed);

/// Thread count from DRFWI_THREADS, else hardware concurrency.
std::size_t worker_count();

/// Shot file: raw float32 LE traces plus a JSON sidecar with the same stem.
void save_shot(const ShotRecord& shot, const AcquisitionGeometry& geom,
               const std::filesystem::path& bin_path);
ShotRecord load_shot(const std::filesystem::path& bin_path);

}  // namespace drfwi
