#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace xs {

// Shortest decimal text that parses back to the identical double.
std::string format_double(double value);

// Strict parse of a full field; nullopt for empty or unparseable text.
std::optional<double> parse_double(std::string_view text);

std::vector<std::string_view> split_fields(std::string_view line, char sep = ',');

std::string read_file(const std::string& path);
void write_file(const std::string& path, std::string_view content);

// splitmix64 finalizer; used to derive independent child seeds from a
// master seed and a counter.
inline std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t counter) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (counter + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

}  // namespace xs
