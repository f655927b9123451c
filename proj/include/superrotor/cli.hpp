#ifndef SUPERROTOR_CLI_HPP
#define SUPERROTOR_CLI_HPP

// Commands behind the superrotor executable. Exit codes: 0 success, 2 invalid
// configuration, 3 numerical guard, 4 I/O, 1 anything else.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "superrotor/config.hpp"
#include "superrotor/molecule.hpp"
#include "superrotor/output.hpp"

namespace superrotor {

inline constexpr int kExitConfig = 2;
inline constexpr int kExitNumerical = 3;
inline constexpr int kExitIo = 4;

struct CliOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;  // overrides the config's seed
  int jobs = 0;
  std::filesystem::path out_dir = ".";
  OutputFormat format = OutputFormat::csv;
  bool quiet = false;
};

enum class ScanParameter { tau, delta, omega_max, probe_fwhm };

ScanParameter parse_scan_parameter(const std::string& name);

/// "start:stop:step", inclusive of stop within rounding.
std::vector<double> parse_scan_range(const std::string& text);

struct RunContext {
  std::uint64_t seed = 0;
  int jobs = 0;
  std::function<void(const std::string&)> log;  // progress and warnings, may be empty
};

/// Runs one configuration and renders every requested output (plus the thermal
/// report) in memory.
std::vector<OutputData> simulate_outputs(const RunConfig& config, const MoleculeDatabase& db,
                                         const RunContext& context);

/// Copy of the config with the scan parameter set; throws ConfigError when the
/// config has nothing the parameter applies to.
RunConfig apply_scan_value(const RunConfig& config, ScanParameter parameter, double value);

/// Outputs of all scan points merged: every table gains a leading parameter column.
std::vector<OutputData> scan_outputs(const RunConfig& config, const MoleculeDatabase& db,
                                     ScanParameter parameter, const std::vector<double>& values,
                                     const RunContext& context);

struct ValidationReport {
  std::vector<std::string> errors;    // schema
  std::vector<std::string> violations;
  std::vector<std::string> warnings;
};

ValidationReport validate_config(const std::filesystem::path& path, const MoleculeDatabase* db);

int command_simulate(const CliOptions& options, std::ostream& err);
int command_scan(const CliOptions& options, const std::string& parameter,
                 const std::vector<double>& values, std::ostream& err);
int command_validate(const CliOptions& options, std::ostream& out, std::ostream& err);

/// Runs body, mapping library exceptions to exit codes with a one-line
/// "error[<kind>]: <reason>" message.
int run_guarded(const std::function<int()>& body, std::ostream& err);

}  // namespace superrotor

#endif  // SUPERROTOR_CLI_HPP
