#pragma once

#include <filesystem>
#include <span>
#include <vector>

namespace drfwi {

// Raw little-endian sample files. Values are widened to double on read.
std::vector<double> read_f32_file(const std::filesystem::path& path);
void write_f32_file(const std::filesystem::path& path, std::span<const double> values);
std::vector<double> read_f64_file(const std::filesystem::path& path);
void write_f64_file(const std::filesystem::path& path, std::span<const double> values);

}  // namespace drfwi
