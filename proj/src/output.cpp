#include "sphindex/output.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>

#include "sphindex/error.hpp"

namespace sphindex {

std::string format_double(double x) {
  if (std::isnan(x)) return "nan";
  if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), x);
  return std::string(buf.data(), ptr);
}

std::string hex_hash(std::uint64_t h) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

std::string csv_metadata(const RunMetadata& meta) {
  return "# sphindex " + std::string(kVersion) + "\n# command: " + meta.command +
         "\n# config_hash: fnv1a64:" + hex_hash(meta.config_hash) + "\n# seed: " + std::to_string(meta.seed) + "\n";
}

nlohmann::ordered_json json_metadata(const RunMetadata& meta) {
  nlohmann::ordered_json j;
  j["version"] = kVersion;
  j["command"] = meta.command;
  j["config_hash"] = "fnv1a64:" + hex_hash(meta.config_hash);
  j["seed"] = meta.seed;
  return j;
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::filesystem::path tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error(ErrorCode::DataError, "cannot write " + tmp.string());
    out << text;
    if (!out) throw Error(ErrorCode::DataError, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

}  // namespace sphindex
