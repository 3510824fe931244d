#include "drfwi/wavesim.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <numbers>
#include <string>
#include <thread>

#include <nlohmann/json.hpp>

#include "drfwi/binary_io.hpp"
#include "parallel.hpp"
#include "propagator.hpp"

namespace drfwi {

void AcquisitionGeometry::validate(std::size_t nz, std::size_t nx) const {
  if (nt < 1) throw InputError("acquisition: nt must be >= 1");
  if (!(dt > 0.0) || !std::isfinite(dt)) throw InputError("acquisition: dt must be positive");
  if (sources.empty()) throw InputError("acquisition: no sources");
  if (receivers.empty()) throw InputError("acquisition: no receivers");
  auto check = [&](const GridIndex& g, const char* what) {
    if (g.row < 1 || g.row >= nz || g.col >= nx) {
      throw InputError(std::string("acquisition: ") + what + " at (" + std::to_string(g.row) +
                       ", " + std::to_string(g.col) + ") is outside the interior grid");
    }
  };
  for (const auto& s : sources) check(s, "source");
  for (const auto& r : receivers) check(r, "receiver");
}

SourceWavelet ricker(double peak_frequency, double dt, std::size_t nt, double delay) {
  if (!(peak_frequency > 0.0)) throw InputError("ricker: peak frequency must be positive");
  SourceWavelet w;
  w.peak_frequency = peak_frequency;
  w.samples.resize(nt);
  const double pf2 = std::numbers::pi * std::numbers::pi * peak_frequency * peak_frequency;
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = static_cast<double>(k) * dt - delay;
    const double arg = pf2 * t * t;
    w.samples[k] = (1.0 - 2.0 * arg) * std::exp(-arg);
  }
  return w;
}

SourceWavelet ricker(double peak_frequency, double dt, std::size_t nt) {
  return ricker(peak_frequency, dt, nt, 1.5 / peak_frequency);
}

std::vector<double> ShotRecord::trace(std::size_t r) const {
  std::vector<double> out(nt);
  for (std::size_t t = 0; t < nt; ++t) out[t] = at(t, r);
  return out;
}

void check_cfl(const VelocityModel& m, double dt, const WaveConfig& cfg) {
  const double dt_internal = dt / static_cast<double>(std::max<std::size_t>(cfg.time_substeps, 1));
  const double limit = cfg.cfl_factor * std::min(m.dz(), m.dx()) / (1000.0 * m.max_velocity());
  if (!(dt_internal <= limit)) {
    throw ConfigError("cfl violation: internal dt " + std::to_string(dt_internal) +
                      " s exceeds stability limit " + std::to_string(limit) + " s for v_max " +
                      std::to_string(m.max_velocity()) + " km/s");
  }
}

WavefieldTape::WavefieldTape() : impl_(std::make_unique<Impl>()) {}
WavefieldTape::~WavefieldTape() = default;
WavefieldTape::WavefieldTape(WavefieldTape&&) noexcept = default;
WavefieldTape& WavefieldTape::operator=(WavefieldTape&&) noexcept = default;

std::size_t WavefieldTape::steps() const noexcept { return impl_->n_fields; }
std::span<const double> WavefieldTape::field(std::size_t k) { return impl_->field(k); }
std::size_t WavefieldTape::stored_bytes() const noexcept {
  return (impl_->storage.size() + impl_->segment.size()) * sizeof(double);
}

ShotRecord simulate(const VelocityModel& m, const AcquisitionGeometry& geom,
                    const SourceWavelet& w, std::size_t source_index, const WaveConfig& cfg) {
  const ShotSetup s = make_shot_setup(m, geom, w, source_index, cfg);
  return run_forward(s, source_index, nullptr, cfg);
}

// Friend of WavefieldTape; builds tapes for the adjoint module as well.
class Simulation {
 public:
  static std::pair<ShotRecord, WavefieldTape> run(const VelocityModel& m,
                                                  const AcquisitionGeometry& geom,
                                                  const SourceWavelet& w, std::size_t source_index,
                                                  const WaveConfig& cfg) {
    WavefieldTape tape;
    tape.impl_->setup = make_shot_setup(m, geom, w, source_index, cfg);
    ShotRecord rec = run_forward(tape.impl_->setup, source_index, tape.impl_.get(), cfg);
    return {std::move(rec), std::move(tape)};
  }
  static WavefieldTape::Impl& impl(WavefieldTape& t) { return *t.impl_; }
};

WavefieldTape::Impl& tape_impl(WavefieldTape& t) { return Simulation::impl(t); }

std::pair<ShotRecord, WavefieldTape> simulate_taped(const VelocityModel& m,
                                                    const AcquisitionGeometry& geom,
                                                    const SourceWavelet& w,
                                                    std::size_t source_index,
                                                    const WaveConfig& cfg) {
  return Simulation::run(m, geom, w, source_index, cfg);
}

std::size_t worker_count() {
  if (const char* env = std::getenv("DRFWI_THREADS")) {
    const long n = std::strtol(env, nullptr, 10);
    if (n >= 1) return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

std::vector<ShotRecord> forward_all_shots(const VelocityModel& m, const AcquisitionGeometry& geom,
                                          const SourceWavelet& w, const WaveConfig& cfg) {
  geom.validate(m.nz(), m.nx());
  check_cfl(m, geom.dt, cfg);
  std::vector<ShotRecord> out(geom.sources.size());
  parallel_for(out.size(), worker_count(),
               [&](std::size_t s) { out[s] = simulate(m, geom, w, s, cfg); });
  return out;
}

double data_misfit(std::span<const ShotRecord> synthetic, std::span<const ShotRecord> observed) {
  if (synthetic.size() != observed.size()) {
    throw InputError("data_misfit: shot count mismatch");
  }
  double total = 0.0;
  for (std::size_t s = 0; s < synthetic.size(); ++s) {
    const ShotRecord& a = synthetic[s];
    const ShotRecord& b = observed[s];
    if (a.nt != b.nt || a.n_receivers != b.n_receivers || a.traces.size() != b.traces.size()) {
      throw InputError("data_misfit: shape mismatch in shot " + std::to_string(s));
    }
    double shot = 0.0;
    for (std::size_t k = 0; k < a.traces.size(); ++k) {
      const double r = b.traces[k] - a.traces[k];
      shot += r * r;
    }
    total += 0.5 * shot;
  }
  return total;
}

namespace {

std::filesystem::path sidecar_path(const std::filesystem::path& bin_path) {
  std::filesystem::path p = bin_path;
  p.replace_extension(".json");
  return p;
}

}  // namespace

void save_shot(const ShotRecord& shot, const AcquisitionGeometry& geom,
               const std::filesystem::path& bin_path) {
  write_f32_file(bin_path, shot.traces);
  nlohmann::ordered_json j;
  j["format"] = "float32-le";
  j["layout"] = "nt x n_receivers, row-major";
  j["source_index"] = shot.source_index;
  j["nt"] = shot.nt;
  j["dt"] = geom.dt;
  j["n_receivers"] = shot.n_receivers;
  if (shot.source_index < geom.sources.size()) {
    const GridIndex& s = geom.sources[shot.source_index];
    j["source"] = {s.row, s.col};
  }
  nlohmann::json recv = nlohmann::json::array();
  for (const GridIndex& r : geom.receivers) recv.push_back({r.row, r.col});
  j["receivers"] = recv;
  std::ofstream out(sidecar_path(bin_path), std::ios::trunc);
  if (!out) throw InputError("cannot write " + sidecar_path(bin_path).string());
  out << j.dump(2) << '\n';
}

ShotRecord load_shot(const std::filesystem::path& bin_path) {
  std::ifstream in(sidecar_path(bin_path));
  if (!in) throw InputError("missing sidecar " + sidecar_path(bin_path).string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(sidecar_path(bin_path).string() + ": " + e.what());
  }
  ShotRecord shot(j.at("source_index").get<std::size_t>(), j.at("nt").get<std::size_t>(),
                  j.at("n_receivers").get<std::size_t>());
  std::vector<double> traces = read_f32_file(bin_path);
  if (traces.size() != shot.traces.size()) {
    throw InputError(bin_path.string() + ": trace count does not match sidecar");
  }
  shot.traces = std::move(traces);
  return shot;
}

}  // namespace drfwi
