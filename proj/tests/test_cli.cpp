#include <doctest.h>

#include <sys/wait.h>

#include <cstdlib>
#include <fstream>
#include <sstream>

#include "superrotor/cli.hpp"
#include "superrotor/error.hpp"

using namespace superrotor;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("superrotor_test_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

fs::path write_text(const fs::path& path, const std::string& text) {
  std::ofstream(path) << text;
  return path;
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path);
  std::stringstream s;
  s << in.rdbuf();
  return s.str();
}

const MoleculeDatabase& db() {
  static const MoleculeDatabase d = MoleculeDatabase::load(default_molecule_database_path());
  return d;
}

const char* kSmallConfig = R"(
[run]
molecule = N2
temperature = 10
n_max = 24

[kick]
strength = 1.5
polarization = 20

[free]
duration = 2

[output pops]
kind = populations
times = 0.5, 2

[output spec]
kind = spectrogram
handedness = 1
probe_fwhm = 3.75
delay_start = 0
delay_stop = 2
delay_step = 0.5
shift_start = -60
shift_stop = 60
shift_step = 2
)";

int run_cli(const std::string& args) {
  const std::string cmd = std::string(SUPERROTOR_CLI_PATH) + " " + args + " >/dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

}  // namespace

TEST_CASE("doubles are printed so that they read back exactly") {
  for (double v : {0.1, 1.0 / 3.0, -2.5e-300, 6.02214076e23, 1e-320}) {
    CHECK(std::strtod(format_double(v).c_str(), nullptr) == v);
  }
  CHECK(format_double(-0.0) == "0");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(format_double(-HUGE_VAL) == "-inf");
}

TEST_CASE("sha256 matches the standard test vectors") {
  CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("atomic writes create directories and leave no temporary files") {
  const fs::path dir = scratch_dir("atomic");
  const fs::path file = dir / "a" / "b" / "out.txt";
  write_file_atomic(file, "first");
  write_file_atomic(file, "second");
  CHECK(read_text(file) == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(file.parent_path())) ++entries;
  CHECK(entries == 1);
  write_text(dir / "blocker", "x");
  CHECK_THROWS_AS(write_file_atomic(dir / "blocker" / "out.txt", "x"), IoError);
  fs::remove_all(dir);
}

TEST_CASE("csv rendering carries provenance and one row per line") {
  Table t;
  t.columns = {{"time", "ps"}, {"value", ""}};
  t.add({0.5, -0.0});
  t.add({1.0, 0.25});
  CHECK_THROWS_AS(t.add({1.0}), std::logic_error);
  const std::string csv = render_csv(t, {"abc123", 7});
  CHECK(csv == "# superrotor " + std::string(tool_version()) + " config_sha256=abc123 seed=7\n"
               "time,value\n0.5,0\n1,0.25\n");
}

TEST_CASE("an empty program reports the thermal distribution only") {
  const RunConfig c = parse_run_config("[run]\nmolecule = N2\ntemperature = 50\nn_max = 30\n", "t");
  const auto outputs = simulate_outputs(c, db(), {});
  REQUIRE(outputs.size() == 1);
  CHECK(outputs[0].name == "thermal");
  double total = 0.0;
  for (const auto& row : outputs[0].tables.at(0).rows) total += row.at(1);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(outputs[0].meta.at("temperature_K").get<double>() == 50.0);
}

TEST_CASE("a single-point scan reproduces the plain run plus a parameter column") {
  const RunConfig c = parse_run_config(kSmallConfig, "t");
  const auto plain = simulate_outputs(c, db(), {});
  const auto scanned = scan_outputs(c, db(), ScanParameter::probe_fwhm, {3.75}, {});
  REQUIRE(plain.size() == scanned.size());
  for (std::size_t i = 0; i < plain.size(); ++i) {
    REQUIRE(plain[i].tables.size() == scanned[i].tables.size());
    for (std::size_t k = 0; k < plain[i].tables.size(); ++k) {
      const auto& a = plain[i].tables[k];
      const auto& b = scanned[i].tables[k];
      REQUIRE(a.rows.size() == b.rows.size());
      CHECK(b.columns.size() == a.columns.size() + 1);
      for (std::size_t r = 0; r < a.rows.size(); ++r) {
        CHECK(b.rows[r][0] == 3.75);
        CHECK(std::vector<double>(b.rows[r].begin() + 1, b.rows[r].end()) == a.rows[r]);
      }
    }
  }
  CHECK_THROWS_AS(scan_outputs(c, db(), ScanParameter::omega_max, {10.0}, {}), ConfigError);
  CHECK_THROWS_AS(parse_scan_parameter("wavelength"), ConfigError);
  CHECK(parse_scan_range("1:2:0.5") == std::vector<double>{1.0, 1.5, 2.0});
  CHECK_THROWS_AS(parse_scan_range("1:2"), ConfigError);
}

TEST_CASE("simulation outputs are deterministic and independent of the worker count") {
  const RunConfig c = parse_run_config(kSmallConfig, "t");
  RunContext one;
  one.jobs = 1;
  RunContext many;
  many.jobs = 3;
  const auto a = simulate_outputs(c, db(), one);
  const auto b = simulate_outputs(c, db(), many);
  REQUIRE(a.size() == b.size());
  for (std::size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].meta == b[i].meta);
    for (std::size_t k = 0; k < a[i].tables.size(); ++k) CHECK(a[i].tables[k].rows == b[i].tables[k].rows);
  }
}

TEST_CASE("validate reports guard violations and warnings") {
  const fs::path dir = scratch_dir("validate");
  const std::string run = "[run]\nmolecule = N2\ntemperature = 10\nn_max = 30\n";
  ValidationReport ok = validate_config(write_text(dir / "ok.cfg", run + "[kick]\nstrength = 1\n"), &db());
  CHECK(ok.errors.empty());
  CHECK(ok.violations.empty());
  CHECK(ok.warnings.empty());

  const ValidationReport cap =
      validate_config(write_text(dir / "cap.cfg", run + "[pulse]\nfwhm_fs = 50\nintensity = 1e14\n"), &db());
  REQUIRE(cap.warnings.size() >= 1);
  CHECK(cap.warnings[0].find("intensity_cap") != std::string::npos);

  const ValidationReport slow =
      validate_config(write_text(dir / "slow.cfg", run + "[kick]\nfwhm_fs = 5000\nintensity = 1e11\n"), &db());
  REQUIRE(slow.violations.size() == 1);
  CHECK(slow.violations[0].find("impulsive_validity") != std::string::npos);

  const ValidationReport hot =
      validate_config(write_text(dir / "hot.cfg", "[run]\nmolecule = N2\ntemperature = 3000\nn_max = 20\n"), &db());
  CHECK(hot.violations.size() == 1);

  const ValidationReport bad = validate_config(write_text(dir / "bad.cfg", "[run]\nmolecule = Xe2\nn_max = 4\n"), &db());
  CHECK(bad.errors.size() == 1);

  std::ostringstream out, err;
  CliOptions o;
  o.config = dir / "slow.cfg";
  CHECK(command_validate(o, out, err) == 0);
  CHECK(out.str().find("violation: ") != std::string::npos);
  CHECK(out.str().find("summary: 0 errors, 1 violations") != std::string::npos);
  fs::remove_all(dir);
}

TEST_CASE("library exceptions map to exit codes") {
  std::ostringstream err;
  CHECK(run_guarded([] { return 0; }, err) == 0);
  CHECK(run_guarded([]() -> int { throw ConfigError("bad key"); }, err) == kExitConfig);
  CHECK(run_guarded([]() -> int { throw TruncationError("top shells", 50); }, err) == kExitNumerical);
  CHECK(run_guarded([]() -> int { throw NumericalGuardError("step"); }, err) == kExitNumerical);
  CHECK(run_guarded([]() -> int { throw IoError("disk"); }, err) == kExitIo);
  CHECK(run_guarded([]() -> int { throw std::runtime_error("x\ny"); }, err) == 1);
  CHECK(err.str() ==
        "error[config]: bad key\nerror[numerical]: top shells\nerror[numerical]: step\n"
        "error[io]: disk\nerror[internal]: x y\n");
}

TEST_CASE("command line tool writes identical files for identical inputs") {
  const fs::path dir = scratch_dir("binary");
  const fs::path cfg = write_text(dir / "run.cfg", kSmallConfig);
  const std::string base = "simulate " + cfg.string() + " --quiet --seed 5 --out-dir ";
  REQUIRE(run_cli(base + (dir / "a").string()) == 0);
  REQUIRE(run_cli(base + (dir / "b").string()) == 0);
  int files = 0;
  for (const auto& e : fs::directory_iterator(dir / "a")) {
    CHECK(read_text(e.path()) == read_text(dir / "b" / e.path().filename()));
    ++files;
  }
  CHECK(files >= 5);
  const std::string csv = read_text(dir / "a" / "pops.csv");
  CHECK(csv.rfind("# superrotor ", 0) == 0);
  CHECK(csv.find("seed=5") != std::string::npos);

  CHECK(run_cli(base + (dir / "c").string() + " --format json") == 0);
  CHECK(fs::exists(dir / "c" / "pops.json"));
  CHECK_FALSE(fs::exists(dir / "c" / "pops.csv"));

  CHECK(run_cli("simulate " + (dir / "missing.cfg").string()) == kExitIo);
  write_text(dir / "broken.cfg", "[run]\nmolecule = N2\n");
  CHECK(run_cli("simulate " + (dir / "broken.cfg").string()) == kExitConfig);
  write_text(dir / "trunc.cfg", "[run]\nmolecule = N2\ninitial = state\ninitial_n = 0\nn_max = 6\n[kick]\nstrength = 30\n[output p]\nkind = populations\n");
  CHECK(run_cli("simulate " + (dir / "trunc.cfg").string() + " --out-dir " + (dir / "d").string()) ==
        kExitNumerical);
  CHECK(run_cli("scan " + cfg.string() + " --param delta --values 0.1 --out-dir " + (dir / "e").string()) ==
        kExitConfig);
  CHECK(run_cli("validate " + (dir / "broken.cfg").string()) == 0);
  CHECK(run_cli("frobnicate") == kExitConfig);
  CHECK(run_cli("--version") == 0);
  fs::remove_all(dir);
}
