#include "superrotor/output.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include <unistd.h>

#include <openssl/evp.h>

#include "superrotor/error.hpp"

namespace superrotor {

std::string_view tool_version() { return SUPERROTOR_VERSION; }

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  if (value == 0.0) return "0";  // folds -0
  char buffer[32];
  std::snprintf(buffer, sizeof buffer, "%.17g", value);
  return buffer;
}

std::string sha256_hex(std::string_view data) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(data.data(), data.size(), digest, &length, EVP_sha256(), nullptr) != 1) {
    throw std::runtime_error("sha256: digest failed");
  }
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xf];
  }
  return out;
}

void write_file_atomic(const std::filesystem::path& path, std::string_view content) {
  std::error_code ec;
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path(), ec);
    if (ec) throw IoError("cannot create directory '" + path.parent_path().string() + "': " + ec.message());
  }
  auto tmp = path;
  tmp += ".tmp." + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + tmp.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    out.flush();
    if (!out) {
      std::filesystem::remove(tmp, ec);
      throw IoError("write failed for '" + tmp.string() + "'");
    }
  }
  std::filesystem::rename(tmp, path, ec);
  if (ec) {
    std::error_code ignored;
    std::filesystem::remove(tmp, ignored);
    throw IoError("cannot rename into '" + path.string() + "': " + ec.message());
  }
}

void Table::add(std::vector<double> row) {
  if (row.size() != columns.size()) throw std::logic_error("table: row width mismatch");
  rows.push_back(std::move(row));
}

std::string render_csv(const Table& table, const Provenance& provenance) {
  std::string out = "# superrotor " + std::string(tool_version()) +
                    " config_sha256=" + provenance.config_sha256 +
                    " seed=" + std::to_string(provenance.seed) + "\n";
  for (std::size_t i = 0; i < table.columns.size(); ++i) {
    if (i) out += ',';
    out += table.columns[i].name;
  }
  out += '\n';
  for (const auto& row : table.rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out += ',';
      out += format_double(row[i]);
    }
    out += '\n';
  }
  return out;
}

namespace {

nlohmann::ordered_json column_json(const Table& table) {
  auto cols = nlohmann::ordered_json::array();
  for (const auto& c : table.columns) cols.push_back({{"name", c.name}, {"unit", c.unit}});
  return cols;
}

nlohmann::ordered_json header_json(const OutputData& data, const Provenance& provenance) {
  nlohmann::ordered_json j;
  j["tool"] = "superrotor";
  j["version"] = std::string(tool_version());
  j["config_sha256"] = provenance.config_sha256;
  j["seed"] = provenance.seed;
  j["output"] = data.name;
  j["kind"] = data.kind;
  j["meta"] = data.meta;
  return j;
}

}  // namespace

std::vector<std::filesystem::path> write_output(const OutputData& data, const Provenance& provenance,
                                                const std::filesystem::path& dir, OutputFormat format) {
  std::vector<std::filesystem::path> written;
  nlohmann::ordered_json j = header_json(data, provenance);
  auto tables = nlohmann::ordered_json::array();
  for (const auto& table : data.tables) {
    nlohmann::ordered_json t;
    t["suffix"] = table.suffix;
    t["columns"] = column_json(table);
    if (format == OutputFormat::csv) {
      const auto file = dir / (data.name + table.suffix + ".csv");
      write_file_atomic(file, render_csv(table, provenance));
      written.push_back(file);
      t["file"] = file.filename().string();
      t["rows"] = table.rows.size();
    } else {
      auto rows = nlohmann::ordered_json::array();
      for (const auto& row : table.rows) {
        auto r = nlohmann::ordered_json::array();
        for (double v : row) {
          // JSON has no NaN; keep the exact text form used in CSV for non-finite values.
          if (std::isfinite(v)) r.push_back(v);
          else r.push_back(format_double(v));
        }
        rows.push_back(std::move(r));
      }
      t["rows"] = std::move(rows);
    }
    tables.push_back(std::move(t));
  }
  j["tables"] = std::move(tables);
  const auto file = dir / (data.name + ".json");
  write_file_atomic(file, j.dump(2) + "\n");
  written.push_back(file);
  return written;
}

}  // namespace superrotor
