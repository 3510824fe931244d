#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "drfwi/diagnostics.hpp"
#include "drfwi/reparam.hpp"

namespace drfwi {

/// Adam over a fixed list of parameter blocks.
class AdamState {
 public:
  AdamState() = default;
  AdamState(std::span<const std::size_t> block_sizes, double lr, double beta1 = 0.9,
            double beta2 = 0.999, double epsilon = 1e-8);

  double lr() const noexcept { return lr_; }
  std::size_t steps() const noexcept { return t_; }
  const std::vector<std::vector<double>>& first_moment() const noexcept { return m_; }
  const std::vector<std::vector<double>>& second_moment() const noexcept { return v_; }

  /// m <- b1 m + (1-b1) g; v <- b2 v + (1-b2) g^2; theta -= lr mhat / (sqrt(vhat) + eps).
  /// A non-finite gradient throws TrainingError(epoch) before anything changes.
  void step(std::span<const std::span<double>> params,
            std::span<const std::span<const double>> grads, std::size_t epoch = 0);

 private:
  std::vector<std::vector<double>> m_, v_;
  std::size_t t_ = 0;
  double lr_ = 1e-3, beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

/// Steps network parameters (and optionally one extra block) with Adam.
void adam_step(AdamState& state, ParameterSet& params, const ParameterGradient& grads,
               std::size_t epoch = 0);

enum class Incorporation { pretrain, s_denorm, a_denorm };

std::string to_string(Incorporation mode);
/// Accepts "pretrain", "s-denorm", "a-denorm".
Incorporation parse_incorporation(const std::string& s);

struct TrainingConfig {
  Incorporation mode = Incorporation::s_denorm;
  std::size_t pretrain_epochs = 1000;
  double pretrain_lr = 5e-5;
  std::size_t fwi_epochs = 1000;
  double fwi_lr = 1e-4;
  /// Learning rate of the trainable initial model; 0 means fwi_lr.
  double init_lr = 0.0;
  double std_scale = 1.0;  // S
  double mean = 3.0;       // M, pretrain mode
  /// Model MSE against the truth is logged every `eval_every` epochs (0 = never).
  std::size_t eval_every = 1;
  bool mask_boundary = true;

  void validate() const;
};

struct EpochLog {
  std::string stage;  // "pretrain" or "fwi"
  std::size_t epoch = 0;
  double loss = 0.0;       // objective of the stage, at the start of the epoch
  double model_mse = 0.0;  // NaN when not evaluated
  std::size_t clipped = 0;
  double seconds = 0.0;
};

struct InversionReport {
  explicit InversionReport(const VelocityModel& m_init)
      : initial_model(m_init), stage_start(m_init), final_model(m_init) {}

  Incorporation mode = Incorporation::s_denorm;
  std::vector<EpochLog> curve;  // pretrain epochs first, then fwi epochs
  VelocityModel initial_model;  // m_init
  VelocityModel stage_start;    // model entering the FWI stage
  VelocityModel final_model;
  std::optional<Field2D> final_init;  // trained m_init, a-denorm only
  std::optional<MetricsBlock> initial_metrics;
  std::optional<MetricsBlock> final_metrics;
  std::vector<NetworkCheckpoint> checkpoints;

  std::vector<double> losses(const std::string& stage) const;
};

/// Everything one inversion needs, already in memory.
struct InversionProblem {
  VelocityModel m_init;
  std::optional<VelocityModel> m_true;
  AcquisitionGeometry geom;
  SourceWavelet wavelet;
  std::vector<ShotRecord> observed;
  WaveConfig wave;
  SirenSpec network;
  TrainingConfig training;
};

using EpochCallback = std::function<void(const EpochLog&)>;

struct PretrainResult {
  std::vector<double> loss;
};

/// Fits D1(f(I)) = f(I) S + M to m_init by minimizing 0.5 ||m_init - D1||^2.
PretrainResult pretrain(SirenNetwork& net, const CoordinateGrid& grid, const Reparameterization& r,
                        const VelocityModel& m_init, const TrainingConfig& cfg,
                        const std::optional<VelocityModel>& m_true = std::nullopt,
                        std::vector<EpochLog>* log = nullptr, const EpochCallback& cb = {});

/// FWI stage through the reparameterization. `r.m_init` is updated in place
/// in adaptive mode.
InversionReport run_fwi(SirenNetwork& net, const CoordinateGrid& grid, Reparameterization& r,
                        const InversionProblem& p, const EpochCallback& cb = {});

/// Pretrain: INI -> stage 1 (pretrain) -> FWI with D1. Denorm: INI -> FWI
/// with D2. Checkpoints: INI, stage1 (pretrain only), final.
InversionReport run_pipeline(const InversionProblem& p, const EpochCallback& cb = {});

struct SweepRow {
  std::size_t epochs = 0;
  double lr = 0.0;
  double mse = 0.0;  // NaN when the run failed
  std::string error;
};

struct SweepResult {
  std::vector<SweepRow> rows;  // ordered by epochs, then lr
  std::optional<std::size_t> best;
};

/// Runs the pretrain pipeline for every (epochs, lr) pair.
SweepResult sweep_pretraining(const InversionProblem& base, std::span<const std::size_t> epochs,
                              std::span<const double> lrs);
std::string sweep_csv(const SweepResult& s);

}  // namespace drfwi
