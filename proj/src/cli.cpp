#include "drfwi/cli.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <nlohmann/json.hpp>
#include <sstream>

#include "svg.hpp"

namespace drfwi::cli {
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// Reads one config object, recording every value it hands out (defaults
// included) into `out` and rejecting keys nobody asked for.
class Block {
 public:
  Block(const json* in, json* out, std::string path) : in_(in), out_(out), path_(std::move(path)) {
    if (in_ && !in_->is_object()) fail("", "expected an object");
    *out_ = json::object();
  }

  bool has(const std::string& key) const { return in_ && in_->contains(key) && !(*in_)[key].is_null(); }

  double number(const std::string& key, double fallback) {
    const double v = has(key) ? typed(key, &json::is_number, "a number").get<double>() : fallback;
    (*out_)[key] = v;
    return v;
  }
  double number(const std::string& key) {
    require(key);
    return number(key, 0.0);
  }
  double positive(const std::string& key, double fallback) {
    const double v = number(key, fallback);
    if (!(v > 0.0) || !std::isfinite(v)) fail(key, "must be positive");
    return v;
  }
  std::size_t count(const std::string& key, std::size_t fallback) {
    std::size_t v = fallback;
    if (has(key)) {
      const json& j = typed(key, &json::is_number_integer, "a non-negative integer");
      if (j.get<long long>() < 0) fail(key, "expected a non-negative integer");
      v = j.get<std::size_t>();
    }
    (*out_)[key] = v;
    return v;
  }
  std::size_t count(const std::string& key) {
    require(key);
    return count(key, 0);
  }
  bool flag(const std::string& key, bool fallback) {
    const bool v = has(key) ? typed(key, &json::is_boolean, "true or false").get<bool>() : fallback;
    (*out_)[key] = v;
    return v;
  }
  std::string text(const std::string& key, const std::string& fallback) {
    const std::string v =
        has(key) ? typed(key, &json::is_string, "a string").get<std::string>() : fallback;
    (*out_)[key] = v;
    return v;
  }
  std::string choice(const std::string& key, const std::string& fallback,
                     std::initializer_list<const char*> allowed) {
    const std::string v = text(key, fallback);
    for (const char* a : allowed)
      if (v == a) return v;
    std::string msg = "must be one of";
    for (const char* a : allowed) msg += std::string(" ") + a;
    fail(key, msg);
  }
  const json* raw(const std::string& key) {
    seen_.push_back(key);
    return has(key) ? &(*in_)[key] : nullptr;
  }
  void store(const std::string& key, json v) { (*out_)[key] = std::move(v); }
  Block child(const std::string& key) {
    seen_.push_back(key);
    return Block(has(key) ? &(*in_)[key] : nullptr, &(*out_)[key], sub(key));
  }
  void finish() const {
    if (!in_) return;
    for (const auto& [k, v] : in_->items()) {
      if (!out_->contains(k) && std::find(seen_.begin(), seen_.end(), k) == seen_.end()) {
        fail(k, "unknown key");
      }
    }
  }
  [[noreturn]] void fail(const std::string& key, const std::string& msg) const {
    throw ConfigError("config: " + (key.empty() ? path_ : sub(key)) + ": " + msg);
  }
  std::string sub(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

 private:
  const json& typed(const std::string& key, bool (json::*check)() const noexcept,
                    const char* what) const {
    const json& j = (*in_)[key];
    if (!(j.*check)()) fail(key, std::string("expected ") + what);
    return j;
  }
  void require(const std::string& key) const {
    if (!has(key)) fail(key, "required");
  }

  const json* in_;
  json* out_;
  std::string path_;
  std::vector<std::string> seen_;
};

void apply_override(json& doc, const std::string& spec) {
  const auto eq = spec.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + spec + "': expected key.path=value");
  }
  const std::string key = spec.substr(0, eq);
  const std::string text = spec.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;
  json* node = &doc;
  std::size_t start = 0;
  while (true) {
    const auto dot = key.find('.', start);
    const std::string part = key.substr(start, dot == std::string::npos ? dot : dot - start);
    if (part.empty()) throw ConfigError("override '" + spec + "': empty key segment");
    if (!node->is_object()) {
      throw ConfigError("override '" + spec + "': " + key.substr(0, start) + " is not an object");
    }
    if (dot == std::string::npos) {
      (*node)[part] = value;
      return;
    }
    node = &(*node)[part];
    if (node->is_null()) *node = json::object();
    start = dot + 1;
  }
}

fs::path resolve(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : base / path;
}

fs::path existing_file(Block& b, const std::string& key, const fs::path& base) {
  const fs::path p = resolve(base, b.text(key, ""));
  if (p.empty() || !fs::exists(p)) b.fail(key, "file not found: " + p.string());
  return p;
}

VelocityModel read_true_model(Block b, const fs::path& base) {
  const std::string source = b.choice("source", "marmousi_like", {"marmousi_like", "file"});
  std::optional<VelocityModel> m;
  if (source == "marmousi_like") {
    const std::size_t nz = b.count("nz", 94), nx = b.count("nx", 288);
    const double dz = b.positive("dz", 15.0), dx = b.positive("dx", 15.0);
    if (nz < 2 || nx < 2) b.fail("nz", "grid must be at least 2x2");
    m = marmousi_like(nz, nx, dz, dx);
  } else {
    const fs::path file = existing_file(b, "file", base);
    try {
      m = load_model(file, b.count("nz"), b.count("nx"), b.positive("dz", 0.0), b.positive("dx", 0.0));
    } catch (const InputError& e) {
      b.fail("file", e.what());
    } catch (const ValidationError& e) {
      b.fail("file", e.what());
    }
  }
  const std::size_t fz = b.count("downsample_z", 1), fx = b.count("downsample_x", 1);
  if (fz == 0 || fx == 0) b.fail("downsample_z", "factors must be at least 1");
  b.finish();
  return fz == 1 && fx == 1 ? *m : downsample(*m, fz, fx);
}

VelocityModel read_initial_model(Block b, const VelocityModel& truth, const fs::path& base) {
  const std::string kind = b.choice("kind", "smooth", {"smooth", "linear", "file"});
  std::optional<VelocityModel> m;
  if (kind == "smooth") {
    m = gaussian_smooth(truth, b.positive("sigma_z", 8.0), b.positive("sigma_x", 8.0));
  } else if (kind == "linear") {
    m = linear_model(truth.nz(), truth.nx(), truth.dz(), truth.dx(), b.positive("v_top", 1.5),
                     b.positive("v_bottom", 4.0));
  } else {
    const fs::path file = existing_file(b, "file", base);
    try {
      m = load_model(file, truth.nz(), truth.nx(), truth.dz(), truth.dx());
    } catch (const InputError& e) {
      b.fail("file", e.what());
    } catch (const ValidationError& e) {
      b.fail("file", e.what());
    }
  }
  b.finish();
  return *m;
}

std::vector<GridIndex> read_layout(Block& parent, const std::string& key, std::size_t nz,
                                   std::size_t nx, GridIndex first, std::size_t spacing,
                                   std::optional<std::size_t> count) {
  const json* j = parent.raw(key);
  std::vector<GridIndex> out;
  if (j && j->is_array()) {
    for (std::size_t k = 0; k < j->size(); ++k) {
      const json& e = (*j)[k];
      if (!e.is_array() || e.size() != 2 || !e[0].is_number_unsigned() || !e[1].is_number_unsigned()) {
        parent.fail(key + "[" + std::to_string(k) + "]", "expected [row, col]");
      }
      out.push_back({e[0].get<std::size_t>(), e[1].get<std::size_t>()});
    }
    parent.store(key, *j);
  } else {
    Block b = parent.child(key);
    first.row = b.count("row", first.row);
    spacing = b.count("spacing", spacing);
    if (spacing == 0) b.fail("spacing", "must be at least 1");
    std::size_t n = count ? *count : (nx > first.col ? (nx - 1 - first.col) / spacing + 1 : 0);
    n = b.count("count", n);
    if (!b.has("first") && n > 0 && spacing * (n - 1) < nx) {
      first.col = (nx - 1 - spacing * (n - 1)) / 2;  // centred when unspecified
    }
    first.col = b.count("first", first.col);
    b.finish();
    for (std::size_t k = 0; k < n; ++k) out.push_back({first.row, first.col + k * spacing});
  }
  for (std::size_t k = 0; k < out.size(); ++k) {
    if (out[k].row == 0 || out[k].row >= nz || out[k].col >= nx) {
      parent.fail(key, "position " + std::to_string(k) + " (" + std::to_string(out[k].row) + ", " +
                           std::to_string(out[k].col) + ") lies outside rows 1.." +
                           std::to_string(nz - 1) + ", cols 0.." + std::to_string(nx - 1));
    }
  }
  if (out.empty()) parent.fail(key, "no positions");
  return out;
}

void write_text(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw InputError("cannot write " + p.string());
}

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json metrics_json(const MetricsBlock& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"r2", m.r2}, {"ssim", m.ssim}};
}

json similarity_json(std::span<const SimilarityColumn> cols) {
  json out = json::array();
  for (const SimilarityColumn& c : cols) {
    json rows = json::array();
    for (const LayerSimilarityRow& r : c.rows) {
      rows.push_back({{"layer", r.layer}, {"cs", r.cs ? json(*r.cs) : json(nullptr)}, {"ed", r.ed}});
    }
    const double mean = mean_weight_cs(c);
    out.push_back({{"title", c.title},
                   {"mean_weight_cs", std::isnan(mean) ? json(nullptr) : json(mean)},
                   {"rows", rows}});
  }
  return out;
}

std::vector<ShotRecord> load_observed(const fs::path& dir, const AcquisitionGeometry& geom) {
  std::ifstream in(dir / "manifest.json");
  if (!in) throw InputError("missing " + (dir / "manifest.json").string());
  json manifest;
  try {
    in >> manifest;
  } catch (const json::exception& e) {
    throw InputError((dir / "manifest.json").string() + ": " + e.what());
  }
  std::vector<ShotRecord> shots;
  for (const json& f : manifest.at("files")) shots.push_back(load_shot(dir / f.get<std::string>()));
  if (shots.size() != geom.sources.size()) {
    throw InputError("observed data has " + std::to_string(shots.size()) + " shots, config has " +
                     std::to_string(geom.sources.size()) + " sources");
  }
  for (const ShotRecord& s : shots) {
    if (s.nt != geom.nt || s.n_receivers != geom.receivers.size()) {
      throw InputError("observed shot " + std::to_string(s.source_index) +
                       " does not match the configured acquisition");
    }
  }
  return shots;
}

InversionProblem make_problem(const RunConfig& cfg) {
  InversionProblem p{*cfg.initial, cfg.truth, cfg.geom, cfg.wavelet, {}, cfg.wave,
                     cfg.network, cfg.training};
  if (cfg.observed_dir) {
    p.observed = load_observed(*cfg.observed_dir, cfg.geom);
  } else {
    if (!cfg.truth) throw ConfigError("config: model: needed to synthesize observed data");
    p.observed = forward_all_shots(*cfg.truth, cfg.geom, cfg.wavelet, cfg.wave);
  }
  return p;
}

void expect_written(const fs::path& p) {
  if (!fs::exists(p) || fs::file_size(p) == 0) throw InputError("output missing: " + p.string());
}

fs::path prepare_directory(const RunConfig& cfg, std::string_view command, std::string_view extra) {
  const fs::path dir = run_directory(cfg, command, extra);
  fs::create_directories(dir);
  write_text(dir / "config.json", cfg.resolved_json + "\n");
  return dir;
}

void plot_curves(const InversionReport& rep, const fs::path& dir) {
  svg::Series loss{"data misfit", {}, {}}, pre{"pretrain loss", {}, {}};
  svg::Series err{"model MSE", {}, {}};
  double boundary = NAN;
  for (std::size_t k = 0; k < rep.curve.size(); ++k) {
    const EpochLog& e = rep.curve[k];
    const double x = static_cast<double>(k);
    (e.stage == "fwi" ? loss : pre).x.push_back(x);
    (e.stage == "fwi" ? loss : pre).y.push_back(e.loss);
    if (e.stage == "fwi" && std::isnan(boundary)) boundary = x;
    err.x.push_back(x);
    err.y.push_back(e.model_mse);
  }
  svg::LinePlot lp{"Training loss", "epoch", "loss", true, {}, {}};
  if (!pre.x.empty()) lp.series.push_back(pre);
  lp.series.push_back(loss);
  if (!pre.x.empty() && !std::isnan(boundary)) lp.x_markers.push_back(boundary);
  write_text(dir / "loss.svg", svg::render(lp));
  svg::LinePlot ep{"Model error", "epoch", "MSE", false, {err}, lp.x_markers};
  write_text(dir / "error.svg", svg::render(ep));
}

}  // namespace

RunConfig parse_config(std::string_view json_text, const fs::path& base_dir,
                       std::span<const std::string> overrides) {
  json doc = json::parse(json_text, nullptr, false);
  if (doc.is_discarded()) throw ConfigError("config: not valid JSON");
  if (!doc.is_object()) throw ConfigError("config: top level must be an object");
  for (const std::string& o : overrides) apply_override(doc, o);

  json resolved;
  Block root(&doc, &resolved, "");
  RunConfig cfg;

  {
    Block b = root.child("paths");
    cfg.output_root = resolve(base_dir, b.text("output_dir", "runs"));
    if (b.has("observed_dir")) {
      cfg.observed_dir = resolve(base_dir, b.text("observed_dir", ""));
      if (!fs::exists(*cfg.observed_dir / "manifest.json")) {
        b.fail("observed_dir", "no manifest.json in " + cfg.observed_dir->string());
      }
    }
    b.finish();
  }
  // The output location does not change results, so it stays out of the hash.
  resolved["paths"].erase("output_dir");

  cfg.truth = read_true_model(root.child("model"), base_dir);
  cfg.initial = read_initial_model(root.child("initial"), *cfg.truth, base_dir);
  const std::size_t nz = cfg.truth->nz(), nx = cfg.truth->nx();

  {
    Block b = root.child("physics");
    cfg.geom.dt = b.positive("dt", 0.001);
    cfg.geom.nt = b.count("nt", 1000);
    if (cfg.geom.nt < 2) b.fail("nt", "need at least 2 samples");
    const double f_peak = b.positive("f_peak", 8.0);
    cfg.wave.pml_width = b.count("pml_width", cfg.wave.pml_width);
    cfg.wave.pml_reflection = b.positive("pml_reflection", cfg.wave.pml_reflection);
    cfg.wave.pml_velocity = b.positive("pml_velocity", cfg.wave.pml_velocity);
    cfg.wave.pml_frequency = b.number("pml_frequency", cfg.wave.pml_frequency);
    cfg.wave.cfl_factor = b.positive("cfl_factor", cfg.wave.cfl_factor);
    cfg.wave.time_substeps = b.count("time_substeps", 1);
    if (cfg.wave.time_substeps == 0) b.fail("time_substeps", "must be at least 1");
    cfg.wave.full_tape = b.choice("tape", "full", {"full", "checkpoint"}) == "full";
    cfg.wave.checkpoint_interval = b.count("checkpoint_interval", cfg.wave.checkpoint_interval);
    if (cfg.wave.checkpoint_interval == 0) b.fail("checkpoint_interval", "must be at least 1");
    b.finish();
    cfg.wavelet = ricker(f_peak, cfg.geom.dt, cfg.geom.nt);
    try {
      check_cfl(*cfg.truth, cfg.geom.dt, cfg.wave);
      check_cfl(*cfg.initial, cfg.geom.dt, cfg.wave);
    } catch (const ConfigError& e) {
      b.fail("dt", e.what());
    }
  }

  {
    Block b = root.child("acquisition");
    cfg.geom.sources = read_layout(b, "sources", nz, nx, {1, 0}, 20, 13);
    cfg.geom.receivers = read_layout(b, "receivers", nz, nx, {1, 0}, 1, std::nullopt);
    b.finish();
  }

  {
    Block b = root.child("network");
    cfg.network.depth = b.count("depth", cfg.network.depth);
    cfg.network.width = b.count("width", cfg.network.width);
    if (cfg.network.depth == 0 || cfg.network.width == 0) b.fail("width", "depth and width must be positive");
    cfg.network.omega = b.positive("omega", cfg.network.omega);
    cfg.network.seed = b.count("seed", 0);
    cfg.network.output_init =
        b.choice("output_init", "zero", {"zero", "siren"}) == "zero" ? OutputInit::zero : OutputInit::siren;
    b.finish();
  }

  {
    Block b = root.child("training");
    TrainingConfig& t = cfg.training;
    t.mode = parse_incorporation(b.choice("mode", "a-denorm", {"pretrain", "s-denorm", "a-denorm"}));
    t.pretrain_epochs = b.count("pretrain_epochs", t.pretrain_epochs);
    t.pretrain_lr = b.positive("pretrain_lr", t.pretrain_lr);
    t.fwi_epochs = b.count("fwi_epochs", t.fwi_epochs);
    t.fwi_lr = b.positive("fwi_lr", t.fwi_lr);
    t.init_lr = b.number("init_lr", t.init_lr);
    if (t.init_lr < 0.0) b.fail("init_lr", "must be non-negative (0 means fwi_lr)");
    t.std_scale = b.positive("std", t.std_scale);
    t.mean = b.positive("mean", t.mean);
    t.mask_boundary = b.flag("mask_boundary", t.mask_boundary);
    b.finish();
  }

  {
    Block b = root.child("diagnostics");
    cfg.training.eval_every = b.count("eval_every", 1);
    if (const json* cols = b.raw("spectrum_columns")) {
      if (!cols->is_array() || cols->empty()) b.fail("spectrum_columns", "expected a list of columns");
      for (const json& c : *cols) {
        if (!c.is_number_unsigned() || c.get<std::size_t>() >= nx) {
          b.fail("spectrum_columns", "entries must be column indices below " + std::to_string(nx));
        }
        cfg.spectrum_columns.push_back(c.get<std::size_t>());
      }
    } else {
      cfg.spectrum_columns = default_profile_columns(nx);
    }
    b.store("spectrum_columns", cfg.spectrum_columns);
    b.finish();
  }
  root.finish();

  try {
    cfg.training.validate();
  } catch (const ConfigError& e) {
    throw ConfigError(std::string("config: training: ") + e.what());
  }
  cfg.resolved_json = resolved.dump(2);
  return cfg;
}

RunConfig load_config(const fs::path& file, std::span<const std::string> overrides) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw ConfigError("config: cannot open " + file.string());
  std::ostringstream text;
  text << in.rdbuf();
  return parse_config(text.str(), file.parent_path(), overrides);
}

std::string fnv1a_hex(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

fs::path run_directory(const RunConfig& cfg, std::string_view command, std::string_view extra) {
  std::string key(command);
  key += '\n';
  key += cfg.resolved_json;
  key += '\n';
  key += extra;
  return cfg.output_root / (std::string(command) + "-" + fnv1a_hex(key));
}

void write_model(const VelocityModel& m, const fs::path& bin_path) {
  save_model(m, bin_path);
  fs::path side = bin_path;
  side.replace_extension(".json");
  json j = {{"format", "float32-le"}, {"layout", "nz x nx, row-major, km/s"},
            {"nz", m.nz()}, {"nx", m.nx()}, {"dz", m.dz()}, {"dx", m.dx()}};
  write_text(side, j.dump(2) + "\n");
}

VelocityModel read_model(const fs::path& bin_path) {
  fs::path side = bin_path;
  side.replace_extension(".json");
  std::ifstream in(side);
  if (!in) throw InputError("missing sidecar " + side.string());
  try {
    json j;
    in >> j;
    return load_model(bin_path, j.at("nz").get<std::size_t>(), j.at("nx").get<std::size_t>(),
                      j.at("dz").get<double>(), j.at("dx").get<double>());
  } catch (const json::exception& e) {
    throw InputError(side.string() + ": " + e.what());
  }
}

fs::path cmd_forward(const RunConfig& cfg) {
  if (!cfg.truth) throw ConfigError("config: model: required for forward modelling");
  const fs::path dir = prepare_directory(cfg, "forward", {});
  const std::vector<ShotRecord> shots = forward_all_shots(*cfg.truth, cfg.geom, cfg.wavelet, cfg.wave);
  json files = json::array();
  for (const ShotRecord& s : shots) {
    char name[32];
    std::snprintf(name, sizeof name, "shot_%03zu.bin", s.source_index);
    save_shot(s, cfg.geom, dir / name);
    expect_written(dir / name);
    files.push_back(name);
  }
  json sources = json::array();
  for (const GridIndex& s : cfg.geom.sources) sources.push_back({s.row, s.col});
  const json manifest = {{"nt", cfg.geom.nt}, {"dt", cfg.geom.dt},
                         {"n_receivers", cfg.geom.receivers.size()}, {"sources", sources},
                         {"files", files}};
  write_text(dir / "manifest.json", manifest.dump(2) + "\n");
  write_model(*cfg.truth, dir / "true_model.bin");
  return dir;
}

fs::path cmd_invert(const RunConfig& cfg, std::ostream* progress) {
  const InversionProblem p = make_problem(cfg);
  const fs::path dir = prepare_directory(cfg, "invert", {});
  std::ofstream timing(dir / "timing.csv", std::ios::trunc);
  timing << "stage,epoch,seconds\n";
  const InversionReport rep = run_pipeline(p, [&](const EpochLog& e) {
    timing << e.stage << ',' << e.epoch << ',' << format_double(e.seconds) << '\n';
    if (progress) {
      *progress << e.stage << " epoch " << e.epoch << " loss " << e.loss;
      if (!std::isnan(e.model_mse)) *progress << " mse " << e.model_mse;
      *progress << '\n';
    }
  });

  write_model(rep.initial_model, dir / "initial_model.bin");
  write_model(rep.final_model, dir / "final_model.bin");
  if (cfg.truth) write_model(*cfg.truth, dir / "true_model.bin");
  if (rep.final_init) {
    write_model(VelocityModel(*rep.final_init, rep.initial_model.dz(), rep.initial_model.dx()),
                dir / "final_init.bin");
  }

  std::ostringstream curves;
  curves << "stage,epoch,loss,model_mse,clipped\n";
  for (const EpochLog& e : rep.curve) {
    curves << e.stage << ',' << e.epoch << ',' << format_double(e.loss) << ','
           << format_double(e.model_mse) << ',' << e.clipped << '\n';
  }
  write_text(dir / "curves.csv", curves.str());

  fs::create_directories(dir / "checkpoints");
  for (const NetworkCheckpoint& c : rep.checkpoints) save_network(c.net, dir / "checkpoints" / (c.name + ".bin"));
  const std::vector<SimilarityColumn> sim = similarity_report(rep.checkpoints);
  write_text(dir / "similarity.csv", similarity_csv(sim));

  json metrics = {{"mode", to_string(rep.mode)}, {"epochs", rep.curve.size()}};
  if (rep.initial_metrics) metrics["initial"] = metrics_json(*rep.initial_metrics);
  if (rep.final_metrics) metrics["final"] = metrics_json(*rep.final_metrics);
  metrics["similarity"] = similarity_json(sim);
  write_text(dir / "metrics.json", metrics.dump(2) + "\n");
  plot_curves(rep, dir);

  for (const char* f : {"final_model.bin", "curves.csv", "metrics.json", "loss.svg", "error.svg"}) {
    expect_written(dir / f);
  }
  for (const NetworkCheckpoint& c : rep.checkpoints) expect_written(dir / "checkpoints" / (c.name + ".bin"));
  return dir;
}

fs::path cmd_sweep(const RunConfig& cfg, std::span<const std::size_t> epochs,
                   std::span<const double> lrs) {
  InversionProblem p = make_problem(cfg);
  p.training.mode = Incorporation::pretrain;
  if (!p.m_true) throw ConfigError("config: model: a sweep needs the true model");
  const SweepResult s = sweep_pretraining(p, epochs, lrs);
  std::string extra;
  for (std::size_t e : epochs) extra += std::to_string(e) + ',';
  extra += ';';
  for (double l : lrs) extra += format_double(l) + ',';
  const fs::path dir = prepare_directory(cfg, "sweep", extra);
  write_text(dir / "sweep.csv", sweep_csv(s));

  // Rows follow sorted epochs, columns sorted lrs, as in the result table.
  std::vector<std::size_t> es;
  std::vector<double> ls;
  for (const SweepRow& r : s.rows) {
    if (std::find(es.begin(), es.end(), r.epochs) == es.end()) es.push_back(r.epochs);
    if (std::find(ls.begin(), ls.end(), r.lr) == ls.end()) ls.push_back(r.lr);
  }
  svg::Heatmap map{"Pretraining sweep: final model MSE", "learning rate", "pretraining epochs",
                   {}, {}, std::vector<std::vector<double>>(es.size(), std::vector<double>(ls.size(), NAN)),
                   -1, -1};
  for (double l : ls) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", l);
    map.x_ticks.push_back(buf);
  }
  for (std::size_t e : es) map.y_ticks.push_back(std::to_string(e));
  for (std::size_t k = 0; k < s.rows.size(); ++k) {
    const auto i = static_cast<std::size_t>(std::find(es.begin(), es.end(), s.rows[k].epochs) - es.begin());
    const auto j = static_cast<std::size_t>(std::find(ls.begin(), ls.end(), s.rows[k].lr) - ls.begin());
    map.cells[i][j] = s.rows[k].mse;
    if (s.best && *s.best == k) {
      map.marked_row = static_cast<int>(i);
      map.marked_col = static_cast<int>(j);
    }
  }
  write_text(dir / "sweep.svg", svg::render(map));
  expect_written(dir / "sweep.csv");
  return dir;
}

namespace {

template <class T>
T parse_number(std::string_view item) {
  T v{};
  const char* end = item.data() + item.size();
  auto [ptr, ec] = std::from_chars(item.data(), end, v);
  if (ec != std::errc() || ptr != end) throw InputError("malformed list entry '" + std::string(item) + "'");
  return v;
}

template <class T>
std::vector<T> parse_list(std::string_view text) {
  std::vector<T> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = text.find(',', start);
    std::string_view item = text.substr(start, comma == std::string_view::npos ? comma : comma - start);
    while (!item.empty() && item.front() == ' ') item.remove_prefix(1);
    while (!item.empty() && item.back() == ' ') item.remove_suffix(1);
    if (item.empty()) throw InputError("malformed list '" + std::string(text) + "'");
    out.push_back(parse_number<T>(item));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::vector<NetworkCheckpoint> checkpoints_from(const fs::path& ini, const fs::path& stage1,
                                                const fs::path& final) {
  std::vector<NetworkCheckpoint> c{{"INI", load_network(ini)}};
  if (!stage1.empty()) c.push_back({"stage1", load_network(stage1)});
  c.push_back({"final", load_network(final)});
  return c;
}

}  // namespace

std::vector<std::size_t> parse_size_list(std::string_view text) {
  if (!text.empty() && text.find('-') != std::string_view::npos) {
    throw InputError("malformed list '" + std::string(text) + "': negative entry");
  }
  return parse_list<std::size_t>(text);
}

std::vector<double> parse_double_list(std::string_view text) {
  std::vector<double> v = parse_list<double>(text);
  for (double x : v)
    if (!(x > 0.0) || !std::isfinite(x)) throw InputError("malformed list '" + std::string(text) + "': entries must be positive");
  return v;
}

int run(int argc, char** argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Neural-reparameterized full waveform inversion"};
  app.require_subcommand(1);
  std::string config;
  std::vector<std::string> overrides;
  bool quiet = false;
  auto add_config = [&](CLI::App* sub) {
    sub->add_option("-c,--config", config, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--set", overrides, "override a config value, key.path=value");
  };

  CLI::App* forward = app.add_subcommand("forward", "simulate observed shot records");
  add_config(forward);
  CLI::App* invert = app.add_subcommand("invert", "run an inversion and write its report");
  add_config(invert);
  invert->add_flag("-q,--quiet", quiet, "no per-epoch progress");
  CLI::App* sweep = app.add_subcommand("sweep", "grid over pretraining epochs and learning rates");
  add_config(sweep);
  std::string epochs_text, lrs_text;
  sweep->add_option("--epochs", epochs_text, "comma-separated epoch counts")->required();
  sweep->add_option("--lrs", lrs_text, "comma-separated learning rates")->required();

  CLI::App* metrics = app.add_subcommand("metrics", "MSE, MAE, R2 and SSIM of a model against a reference");
  std::string model_file, reference_file, out_path;
  metrics->add_option("--model", model_file, "model .bin with .json sidecar")->required()->check(CLI::ExistingFile);
  metrics->add_option("--reference", reference_file, "reference model")->required()->check(CLI::ExistingFile);
  metrics->add_option("-o,--out", out_path, "write JSON here instead of stdout");

  CLI::App* spectrum = app.add_subcommand("spectrum", "wavenumber spectra of vertical profiles");
  std::string columns_text, spectrum_file;
  spectrum->add_option("--model", spectrum_file, "model .bin with .json sidecar")->check(CLI::ExistingFile);
  spectrum->add_option("--columns", columns_text, "comma-separated columns");
  spectrum->add_option("-c,--config", config, "compare inversion targets for this config")->check(CLI::ExistingFile);
  spectrum->add_option("--set", overrides, "override a config value, key.path=value");
  spectrum->add_option("-o,--out", out_path, "output directory");

  CLI::App* paramdiag = app.add_subcommand("paramdiag", "per-layer cosine similarity and distance");
  std::string run_dir, ini_file, stage1_file, final_file;
  paramdiag->add_option("--run", run_dir, "invert output directory")->check(CLI::ExistingDirectory);
  paramdiag->add_option("--ini", ini_file, "initial network checkpoint")->check(CLI::ExistingFile);
  paramdiag->add_option("--stage1", stage1_file, "checkpoint after pretraining")->check(CLI::ExistingFile);
  paramdiag->add_option("--final", final_file, "final network checkpoint")->check(CLI::ExistingFile);
  paramdiag->add_option("-o,--out", out_path, "output directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? 0 : 2;
  }

  try {
    if (forward->parsed()) {
      out << cmd_forward(load_config(config, overrides)).string() << '\n';
    } else if (invert->parsed()) {
      const RunConfig cfg = load_config(config, overrides);
      out << cmd_invert(cfg, quiet ? nullptr : &err).string() << '\n';
    } else if (sweep->parsed()) {
      std::vector<std::size_t> epochs;
      std::vector<double> lrs;
      try {
        epochs = parse_size_list(epochs_text);
        lrs = parse_double_list(lrs_text);
      } catch (const InputError& e) {
        err << "usage error: " << e.what() << '\n';
        return 2;
      }
      out << cmd_sweep(load_config(config, overrides), epochs, lrs).string() << '\n';
    } else if (metrics->parsed()) {
      const VelocityModel m = read_model(model_file), ref = read_model(reference_file);
      if (m.nz() != ref.nz() || m.nx() != ref.nx()) throw InputError("model and reference grids differ");
      const std::string text = metrics_json(compute_metrics(m, ref)).dump(2) + "\n";
      if (out_path.empty()) {
        out << text;
      } else {
        write_text(out_path, text);
      }
    } else if (spectrum->parsed()) {
      if (spectrum_file.empty() == config.empty()) {
        err << "usage error: spectrum takes exactly one of --model or --config\n";
        return 2;
      }
      std::ostringstream csv;
      fs::path dir;
      std::vector<std::vector<SpectrumProfile>> sets;
      std::vector<std::string> names;
      if (!spectrum_file.empty()) {
        const VelocityModel m = read_model(spectrum_file);
        std::vector<std::size_t> cols;
        try {
          cols = columns_text.empty() ? default_profile_columns(m.nx()) : parse_size_list(columns_text);
        } catch (const InputError& e) {
          err << "usage error: " << e.what() << '\n';
          return 2;
        }
        sets.push_back(wavenumber_spectrum(m, cols));
        names.push_back("magnitude");
        dir = out_path.empty() ? fs::path(".") : fs::path(out_path);
      } else {
        const RunConfig cfg = load_config(config, overrides);
        std::vector<std::size_t> cols = cfg.spectrum_columns;
        if (!columns_text.empty()) cols = parse_size_list(columns_text);
        const VelocityModel& m0 = *cfg.initial;
        const auto denorm = target_decomposition(*cfg.truth, Reparameterization::static_init(m0, cfg.training.std_scale));
        const auto pre = target_decomposition(
            *cfg.truth, Reparameterization::global_mean(m0.nz(), m0.nx(), m0.dz(), m0.dx(),
                                                         cfg.training.std_scale, cfg.training.mean));
        sets.push_back(wavenumber_spectrum(denorm.perturbation, m0.dz(), cols));
        sets.push_back(wavenumber_spectrum(pre.perturbation, m0.dz(), cols));
        names = {"denorm_target", "pretrain_target"};
        dir = out_path.empty() ? prepare_directory(cfg, "spectrum", columns_text) : fs::path(out_path);
      }
      fs::create_directories(dir);
      csv << "column,wavenumber";
      for (const std::string& n : names) csv << ',' << n;
      csv << '\n';
      svg::LinePlot plot{"Vertical wavenumber spectra", "wavenumber (1/km)", "magnitude", false, {}, {}};
      for (std::size_t c = 0; c < sets[0].size(); ++c) {
        const SpectrumProfile& p0 = sets[0][c];
        for (std::size_t k = 0; k < p0.wavenumber.size(); ++k) {
          csv << p0.column << ',' << format_double(p0.wavenumber[k]);
          for (const auto& set : sets) csv << ',' << format_double(set[c].magnitude[k]);
          csv << '\n';
        }
        for (std::size_t s = 0; s < sets.size(); ++s) {
          plot.series.push_back({names[s] + " col " + std::to_string(p0.column), p0.wavenumber, sets[s][c].magnitude});
        }
      }
      write_text(dir / "spectrum.csv", csv.str());
      write_text(dir / "spectrum.svg", svg::render(plot));
      out << dir.string() << '\n';
    } else if (paramdiag->parsed()) {
      std::vector<NetworkCheckpoint> cps;
      if (!run_dir.empty()) {
        const fs::path c = fs::path(run_dir) / "checkpoints";
        const fs::path s1 = c / "stage1.bin";
        cps = checkpoints_from(c / "INI.bin", fs::exists(s1) ? s1 : fs::path(), c / "final.bin");
      } else if (!ini_file.empty() && !final_file.empty()) {
        cps = checkpoints_from(ini_file, stage1_file, final_file);
      } else {
        err << "usage error: paramdiag takes --run or both --ini and --final\n";
        return 2;
      }
      const std::vector<SimilarityColumn> sim = similarity_report(cps);
      const fs::path dir = out_path.empty() ? (run_dir.empty() ? fs::path(".") : fs::path(run_dir)) : fs::path(out_path);
      fs::create_directories(dir);
      write_text(dir / "similarity.csv", similarity_csv(sim));
      write_text(dir / "similarity.json", similarity_json(sim).dump(2) + "\n");
      out << similarity_csv(sim);
    }
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}

}  // namespace drfwi::cli
