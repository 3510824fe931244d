#include "drfwi/binary_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iterator>

#include "drfwi/errors.hpp"

namespace drfwi {

namespace {

template <typename Word>
Word to_little(Word w) {
  if constexpr (std::endian::native == std::endian::big) {
    Word r = 0;
    for (std::size_t b = 0; b < sizeof(Word); ++b) {
      r = static_cast<Word>((r << 8) | (w & 0xff));
      w >>= 8;
    }
    return r;
  } else {
    return w;
  }
}

std::vector<char> slurp(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void dump(const std::filesystem::path& path, const std::vector<char>& bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot write " + path.string());
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw InputError("short write to " + path.string());
}

template <typename Float, typename Word>
std::vector<double> decode(const std::vector<char>& bytes, const std::filesystem::path& path) {
  if (bytes.size() % sizeof(Word) != 0) {
    throw InputError(path.string() + ": size is not a multiple of " +
                     std::to_string(sizeof(Word)) + " bytes");
  }
  std::vector<double> out(bytes.size() / sizeof(Word));
  for (std::size_t k = 0; k < out.size(); ++k) {
    Word w;
    std::memcpy(&w, bytes.data() + k * sizeof(Word), sizeof(Word));
    out[k] = static_cast<double>(std::bit_cast<Float>(to_little(w)));
  }
  return out;
}

template <typename Float, typename Word>
std::vector<char> encode(std::span<const double> values) {
  std::vector<char> bytes(values.size() * sizeof(Word));
  for (std::size_t k = 0; k < values.size(); ++k) {
    const Word w = to_little(std::bit_cast<Word>(static_cast<Float>(values[k])));
    std::memcpy(bytes.data() + k * sizeof(Word), &w, sizeof(Word));
  }
  return bytes;
}

}  // namespace

std::vector<double> read_f32_file(const std::filesystem::path& path) {
  return decode<float, std::uint32_t>(slurp(path), path);
}

void write_f32_file(const std::filesystem::path& path, std::span<const double> values) {
  dump(path, encode<float, std::uint32_t>(values));
}

std::vector<double> read_f64_file(const std::filesystem::path& path) {
  return decode<double, std::uint64_t>(slurp(path), path);
}

void write_f64_file(const std::filesystem::path& path, std::span<const double> values) {
  dump(path, encode<double, std::uint64_t>(values));
}

}  // namespace drfwi
