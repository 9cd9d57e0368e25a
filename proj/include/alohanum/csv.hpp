#ifndef ALOHANUM_CSV_HPP_
#define ALOHANUM_CSV_HPP_

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "alohanum/errors.hpp"

namespace alohanum {

inline constexpr int kCsvSchemaVersion = 1;

/// Fixed-decimal rendering with nine significant digits.
inline std::string format_sig9(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  if (v == 0.0) return "0.00000000";
  const int exponent = static_cast<int>(std::floor(std::log10(std::abs(v))));
  const int decimals = std::clamp(8 - exponent, 0, 40);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", decimals, v);
  return buf;
}

inline std::string csv_cell(double v) { return format_sig9(v); }
inline std::string csv_cell(int v) { return std::to_string(v); }
inline std::string csv_cell(long v) { return std::to_string(v); }
inline std::string csv_cell(long long v) { return std::to_string(v); }
inline std::string csv_cell(unsigned long v) { return std::to_string(v); }
inline std::string csv_cell(unsigned long long v) { return std::to_string(v); }
inline std::string csv_cell(const std::string& v) { return v; }
inline std::string csv_cell(const char* v) { return v; }

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  template <typename... Cells>
  void add(const Cells&... cells) {
    rows.push_back({csv_cell(cells)...});
  }

  void write(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write output file: " + path);
    for (std::size_t i = 0; i < header.size(); ++i) out << (i ? "," : "") << header[i];
    out << "\n";
    for (const auto& row : rows) {
      for (std::size_t i = 0; i < row.size(); ++i) out << (i ? "," : "") << row[i];
      out << "\n";
    }
    if (!out) throw IoError("failed while writing output file: " + path);
  }
};

/// Sidecar with the full run configuration, written next to the CSV so a
/// result file is reproducible on its own.
inline void write_manifest(const std::string& csv_path, const std::string& command,
                           const nlohmann::ordered_json& config) {
  nlohmann::ordered_json manifest;
  manifest["schema_version"] = kCsvSchemaVersion;
  manifest["command"] = command;
  manifest["config"] = config;
  const std::string path = csv_path + ".manifest.json";
  std::ofstream out(path);
  if (!out) throw IoError("cannot write manifest: " + path);
  out << manifest.dump(2) << "\n";
}

}  // namespace alohanum

#endif  // ALOHANUM_CSV_HPP_
