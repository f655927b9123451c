#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "superrotor/cli.hpp"
#include "superrotor/error.hpp"

namespace {

void add_common(CLI::App* cmd, superrotor::CliOptions& options, std::string& format) {
  cmd->add_option("config", options.config, "Run configuration file")->required();
  cmd->add_option("--seed", options.seed, "Override the config seed");
  cmd->add_option("--jobs", options.jobs, "Worker threads (0 = all cores)")->check(CLI::NonNegativeNumber);
  cmd->add_option("--out-dir", options.out_dir, "Output directory");
  cmd->add_option("--format", format, "Data format")->check(CLI::IsMember({"csv", "json"}));
  cmd->add_flag("--quiet", options.quiet, "Suppress progress messages");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Rotational wave-packet simulator"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(superrotor::tool_version()));

  superrotor::CliOptions options;
  std::string format = "csv";
  std::string parameter;
  std::string range;
  std::vector<double> values;

  auto* simulate = app.add_subcommand("simulate", "Run a configuration and write its outputs");
  add_common(simulate, options, format);
  auto* scan = app.add_subcommand("scan", "Repeat a configuration over one parameter");
  add_common(scan, options, format);
  scan->add_option("--param", parameter, "tau | delta | omega_max | probe_fwhm")->required();
  auto* range_opt = scan->add_option("--range", range, "start:stop:step");
  auto* values_opt = scan->add_option("--values", values, "Explicit values")->delimiter(',');
  range_opt->excludes(values_opt);
  auto* validate = app.add_subcommand("validate", "Check a configuration without running it");
  validate->add_option("config", options.config, "Run configuration file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);
    std::cerr << "error[config]: " << e.what() << '\n';
    return superrotor::kExitConfig;
  }
  options.format = format == "json" ? superrotor::OutputFormat::json : superrotor::OutputFormat::csv;

  return superrotor::run_guarded(
      [&]() -> int {
        if (*simulate) return superrotor::command_simulate(options, std::cerr);
        if (*scan) {
          if (range.empty() && values.empty()) {
            throw superrotor::ConfigError("scan: give --range or --values");
          }
          const auto v = range.empty() ? values : superrotor::parse_scan_range(range);
          return superrotor::command_scan(options, parameter, v, std::cerr);
        }
        return superrotor::command_validate(options, std::cout, std::cerr);
      },
      std::cerr);
}
