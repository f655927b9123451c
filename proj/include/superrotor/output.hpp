#ifndef SUPERROTOR_OUTPUT_HPP
#define SUPERROTOR_OUTPUT_HPP

// Deterministic result files. Floats are printed with 17 significant digits and
// every file carries the tool version and the config hash.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace superrotor {

std::string_view tool_version();

std::string format_double(double value);

/// Lowercase hex SHA-256 of a byte string.
std::string sha256_hex(std::string_view data);

/// Writes via a temporary file in the same directory and renames it into place.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

struct Column {
  std::string name;
  std::string unit;  // empty for dimensionless
};

struct Table {
  std::string suffix;  // appended to the output name, may be empty
  std::vector<Column> columns;
  std::vector<std::vector<double>> rows;

  void add(std::vector<double> row);
};

/// One output request rendered as tables plus free-form metadata.
struct OutputData {
  std::string name;
  std::string kind;
  std::vector<Table> tables;
  nlohmann::ordered_json meta = nlohmann::ordered_json::object();
};

struct Provenance {
  std::string config_sha256;
  std::uint64_t seed = 0;
};

enum class OutputFormat { csv, json };

/// csv: <name><suffix>.csv per table plus <name>.json metadata.
/// json: a single <name>.json with metadata and all tables.
/// Returns the written paths.
std::vector<std::filesystem::path> write_output(const OutputData& data, const Provenance& provenance,
                                                const std::filesystem::path& dir, OutputFormat format);

std::string render_csv(const Table& table, const Provenance& provenance);

}  // namespace superrotor

#endif  // SUPERROTOR_OUTPUT_HPP
