#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "drfwi/optimize.hpp"

namespace drfwi::cli {

/// A fully resolved run configuration. Built only by parse_config/load_config,
/// which fill every default, check every path and validate the time step.
struct RunConfig {
  std::string resolved_json;  // canonical form with defaults, used for hashing
  std::filesystem::path output_root;
  std::optional<std::filesystem::path> observed_dir;
  std::optional<VelocityModel> truth;
  std::optional<VelocityModel> initial;
  AcquisitionGeometry geom;
  SourceWavelet wavelet;
  WaveConfig wave;
  SirenSpec network;
  TrainingConfig training;
  std::vector<std::size_t> spectrum_columns;
};

/// Overrides are "dotted.key=value"; the value is parsed as JSON when it can
/// be, otherwise taken as a string. Errors carry the key path.
RunConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir,
                       std::span<const std::string> overrides = {});
RunConfig load_config(const std::filesystem::path& file,
                      std::span<const std::string> overrides = {});

/// 64-bit FNV-1a, as 16 lowercase hex digits.
std::string fnv1a_hex(std::string_view bytes);

/// <output_root>/<command>-<hash of config and extra>
std::filesystem::path run_directory(const RunConfig& cfg, std::string_view command,
                                    std::string_view extra = {});

/// Models on disk are raw float32 plus a .json sidecar with the grid.
void write_model(const VelocityModel& m, const std::filesystem::path& bin_path);
VelocityModel read_model(const std::filesystem::path& bin_path);

std::filesystem::path cmd_forward(const RunConfig& cfg);
std::filesystem::path cmd_invert(const RunConfig& cfg, std::ostream* progress = nullptr);
std::filesystem::path cmd_sweep(const RunConfig& cfg, std::span<const std::size_t> epochs,
                                std::span<const double> lrs);

/// Comma-separated list; throws InputError on anything malformed or empty.
std::vector<std::size_t> parse_size_list(std::string_view text);
std::vector<double> parse_double_list(std::string_view text);

/// Exit codes: 0 success, 1 run failure, 2 usage or configuration error.
int run(int argc, char** argv, std::ostream& out, std::ostream& err);

}  // namespace drfwi::cli
