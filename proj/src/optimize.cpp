#include "drfwi/optimize.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <limits>
#include <sstream>

#include "drfwi/errors.hpp"

namespace drfwi {

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

std::vector<std::size_t> block_sizes(const ParameterSet& p) {
  std::vector<std::size_t> sizes;
  for (auto b : p.blocks()) sizes.push_back(b.size());
  return sizes;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

bool due(std::size_t epoch, std::size_t every) { return every > 0 && epoch % every == 0; }

}  // namespace

AdamState::AdamState(std::span<const std::size_t> block_sizes, double lr, double beta1,
                     double beta2, double epsilon)
    : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(epsilon) {
  if (!(lr > 0.0)) throw ConfigError("learning rate must be > 0");
  for (std::size_t n : block_sizes) {
    m_.emplace_back(n, 0.0);
    v_.emplace_back(n, 0.0);
  }
}

void AdamState::step(std::span<const std::span<double>> params,
                     std::span<const std::span<const double>> grads, std::size_t epoch) {
  if (params.size() != m_.size() || grads.size() != m_.size()) {
    throw InputError("adam: block count does not match the optimizer state");
  }
  for (std::size_t b = 0; b < m_.size(); ++b) {
    if (params[b].size() != m_[b].size() || grads[b].size() != m_[b].size()) {
      throw InputError("adam: block " + std::to_string(b) + " size mismatch");
    }
    for (double g : grads[b]) {
      if (!std::isfinite(g)) throw TrainingError("non-finite gradient", epoch);
    }
  }
  ++t_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t b = 0; b < m_.size(); ++b) {
    std::vector<double>& m = m_[b];
    std::vector<double>& v = v_[b];
    for (std::size_t k = 0; k < m.size(); ++k) {
      const double g = grads[b][k];
      m[k] = beta1_ * m[k] + (1.0 - beta1_) * g;
      v[k] = beta2_ * v[k] + (1.0 - beta2_) * g * g;
      params[b][k] -= lr_ * (m[k] / c1) / (std::sqrt(v[k] / c2) + eps_);
    }
  }
}

void adam_step(AdamState& state, ParameterSet& params, const ParameterGradient& grads,
               std::size_t epoch) {
  if (!params.congruent(grads)) throw InputError("adam: gradient does not match parameters");
  const auto p = params.blocks();
  const auto g = grads.blocks();
  state.step(p, g, epoch);
}

std::string to_string(Incorporation mode) {
  switch (mode) {
    case Incorporation::pretrain:
      return "pretrain";
    case Incorporation::s_denorm:
      return "s-denorm";
    case Incorporation::a_denorm:
      return "a-denorm";
  }
  return "unknown";
}

Incorporation parse_incorporation(const std::string& s) {
  if (s == "pretrain") return Incorporation::pretrain;
  if (s == "s-denorm") return Incorporation::s_denorm;
  if (s == "a-denorm") return Incorporation::a_denorm;
  throw ConfigError("unknown incorporation mode '" + s + "' (pretrain | s-denorm | a-denorm)");
}

void TrainingConfig::validate() const {
  if (!(pretrain_lr > 0.0)) throw ConfigError("pretrain_lr must be > 0");
  if (!(fwi_lr > 0.0)) throw ConfigError("fwi_lr must be > 0");
  if (init_lr < 0.0) throw ConfigError("init_lr must be >= 0");
  if (!(std_scale > 0.0)) throw ConfigError("std_scale must be > 0");
}

std::vector<double> InversionReport::losses(const std::string& stage) const {
  std::vector<double> out;
  for (const EpochLog& e : curve) {
    if (e.stage == stage) out.push_back(e.loss);
  }
  return out;
}

PretrainResult pretrain(SirenNetwork& net, const CoordinateGrid& grid, const Reparameterization& r,
                        const VelocityModel& m_init, const TrainingConfig& cfg,
                        const std::optional<VelocityModel>& m_true, std::vector<EpochLog>* log,
                        const EpochCallback& cb) {
  if (r.mode != ReparamMode::global_mean) {
    throw InputError("pretrain requires the global-mean denormalization");
  }
  require_same_shape(r.std_matrix, m_init.values(), "pretrain");
  PretrainResult out;
  if (cfg.pretrain_epochs == 0) return out;
  const auto sizes = block_sizes(net.params);
  AdamState adam(sizes, cfg.pretrain_lr);
  Field2D residual(m_init.nz(), m_init.nx(), 0.0);

  for (std::size_t e = 0; e < cfg.pretrain_epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const SirenEvaluation eval(net, grid);
    const Denormalized d = denormalize(r, eval.output());
    double loss = 0.0;
    for (std::size_t k = 0; k < residual.size(); ++k) {
      residual[k] = d.model.values()[k] - m_init.values()[k];
      loss += 0.5 * residual[k] * residual[k];
    }
    if (!std::isfinite(loss)) throw TrainingError("non-finite pretraining loss", e);
    EpochLog entry{"pretrain", e, loss, kNaN, d.clip_count, 0.0};
    if (m_true && due(e, cfg.eval_every)) {
      entry.model_mse = mean_squared_error(d.model.values(), m_true->values());
    }
    const FullGradient g = full_parameter_gradient(eval, r, residual, d.clipped);
    adam_step(adam, net.params, g.params, e);
    entry.seconds = seconds_since(t0);
    out.loss.push_back(loss);
    if (log != nullptr) log->push_back(entry);
    if (cb) cb(entry);
  }
  return out;
}

InversionReport run_fwi(SirenNetwork& net, const CoordinateGrid& grid, Reparameterization& r,
                        const InversionProblem& p, const EpochCallback& cb) {
  const TrainingConfig& cfg = p.training;
  InversionReport report(p.m_init);
  report.mode = cfg.mode;
  if (p.observed.size() != p.geom.sources.size()) {
    throw InputError("run_fwi: expected one observed record per source");
  }
  AdamState adam(block_sizes(net.params), cfg.fwi_lr);
  const std::size_t n_init = r.m_init.size();
  AdamState init_adam;
  if (r.trainable_init()) {
    const std::size_t sizes[] = {n_init};
    init_adam = AdamState(sizes, cfg.init_lr > 0.0 ? cfg.init_lr : cfg.fwi_lr);
  }
  const GradientOptions opts{.mask_boundary = cfg.mask_boundary};

  for (std::size_t e = 0; e < cfg.fwi_epochs; ++e) {
    const auto t0 = std::chrono::steady_clock::now();
    const SirenEvaluation eval(net, grid);
    const Denormalized d = denormalize(r, eval.output());
    if (e == 0) report.stage_start = d.model;
    MisfitGradient g;
    try {
      g = misfit_gradient(d.model, p.geom, p.wavelet, p.observed, p.wave, opts);
    } catch (const NumericalBlowup& err) {
      throw TrainingError(std::string("simulation blew up: ") + err.what() + " at step " +
                              std::to_string(err.step()),
                          e);
    } catch (const ConfigError& err) {
      throw TrainingError(err.what(), e);
    }
    if (!std::isfinite(g.loss)) throw TrainingError("non-finite data misfit", e);
    EpochLog entry{"fwi", e, g.loss, kNaN, d.clip_count, 0.0};
    if (p.m_true && due(e, cfg.eval_every)) {
      entry.model_mse = mean_squared_error(d.model.values(), p.m_true->values());
    }
    const FullGradient fg = full_parameter_gradient(eval, r, g.gradient, d.clipped);
    adam_step(adam, net.params, fg.params, e);
    if (r.trainable_init()) {
      const std::span<double> params[] = {r.m_init.data()};
      const std::span<const double> grads[] = {fg.init_gradient->data()};
      init_adam.step(params, grads, e);
    }
    entry.seconds = seconds_since(t0);
    report.curve.push_back(entry);
    if (cb) cb(entry);
  }

  const Denormalized final_model = denormalize(r, forward(net, grid));
  report.final_model = final_model.model;
  if (cfg.fwi_epochs == 0) report.stage_start = final_model.model;
  if (r.trainable_init()) report.final_init = r.m_init;
  return report;
}

InversionReport run_pipeline(const InversionProblem& p, const EpochCallback& cb) {
  p.training.validate();
  const TrainingConfig& cfg = p.training;
  const VelocityModel& m_init = p.m_init;
  if (p.m_true) require_same_shape(p.m_true->values(), m_init.values(), "run_pipeline m_true");

  SirenNetwork net = init_network(p.network);
  const CoordinateGrid grid = make_coordinate_grid(m_init);
  std::vector<NetworkCheckpoint> checkpoints{{"INI", net}};

  std::vector<EpochLog> pre_log;
  Reparameterization r;
  if (cfg.mode == Incorporation::pretrain) {
    r = Reparameterization::global_mean(m_init.nz(), m_init.nx(), m_init.dz(), m_init.dx(),
                                        cfg.std_scale, cfg.mean);
    pretrain(net, grid, r, m_init, cfg, p.m_true, &pre_log, cb);
    checkpoints.push_back({"stage1", net});
  } else if (cfg.mode == Incorporation::s_denorm) {
    r = Reparameterization::static_init(m_init, cfg.std_scale);
  } else {
    r = Reparameterization::adaptive_init(m_init, cfg.std_scale);
  }

  InversionReport report = run_fwi(net, grid, r, p, cb);
  checkpoints.push_back({"final", net});
  report.curve.insert(report.curve.begin(), pre_log.begin(), pre_log.end());
  report.checkpoints = std::move(checkpoints);
  if (p.m_true) {
    report.initial_metrics = compute_metrics(m_init, *p.m_true);
    report.final_metrics = compute_metrics(report.final_model, *p.m_true);
  }
  return report;
}

SweepResult sweep_pretraining(const InversionProblem& base, std::span<const std::size_t> epochs,
                              std::span<const double> lrs) {
  if (epochs.empty() || lrs.empty()) throw ConfigError("sweep needs at least one epoch count and one lr");
  if (!base.m_true) throw ConfigError("sweep needs a true model to score runs");
  std::vector<std::size_t> es(epochs.begin(), epochs.end());
  std::vector<double> ls(lrs.begin(), lrs.end());
  std::sort(es.begin(), es.end());
  std::sort(ls.begin(), ls.end());

  SweepResult out;
  for (std::size_t e : es) {
    for (double lr : ls) {
      InversionProblem p = base;
      p.training.mode = Incorporation::pretrain;
      p.training.pretrain_epochs = e;
      p.training.pretrain_lr = lr;
      SweepRow row{e, lr, kNaN, ""};
      try {
        row.mse = run_pipeline(p).final_metrics->mse;
      } catch (const std::exception& err) {
        row.error = err.what();
      }
      out.rows.push_back(row);
    }
  }
  for (std::size_t i = 0; i < out.rows.size(); ++i) {
    if (std::isnan(out.rows[i].mse)) continue;
    if (!out.best || out.rows[i].mse < out.rows[*out.best].mse) out.best = i;
  }
  return out;
}

std::string sweep_csv(const SweepResult& s) {
  std::ostringstream out;
  out.precision(12);
  out << "epochs,lr,mse,best,error\n";
  for (std::size_t i = 0; i < s.rows.size(); ++i) {
    const SweepRow& r = s.rows[i];
    out << r.epochs << ',' << r.lr << ',';
    if (std::isnan(r.mse)) {
      out << "nan";
    } else {
      out << r.mse;
    }
    std::string err = r.error;
    std::replace(err.begin(), err.end(), '"', '\'');
    out << ',' << (s.best && *s.best == i ? 1 : 0) << ',' << '"' << err << '"' << '\n';
  }
  return out.str();
}

}  // namespace drfwi
