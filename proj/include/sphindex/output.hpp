#pragma once

// Deterministic text output: shortest round-trip number formatting, the
// metadata block carried by every artifact, and atomic file writes.

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace sphindex {

inline constexpr const char* kVersion = "0.1.0";

struct RunMetadata {
  std::string command;
  std::uint64_t config_hash = 0;
  std::uint64_t seed = 0;
};

// Shortest representation that parses back to the same double; "nan", "inf".
std::string format_double(double x);

std::string hex_hash(std::uint64_t h);

// "# key: value" lines prepended to CSV files.
std::string csv_metadata(const RunMetadata& meta);
nlohmann::ordered_json json_metadata(const RunMetadata& meta);

// Writes through a temporary file in the same directory, then renames.
void write_text_file(const std::filesystem::path& path, const std::string& text);

}  // namespace sphindex
