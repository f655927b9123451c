#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <numbers>

#include "superrotor/config.hpp"
#include "superrotor/error.hpp"

using namespace superrotor;

namespace {

const MoleculeDatabase& db() {
  static const MoleculeDatabase d = MoleculeDatabase::load(default_molecule_database_path());
  return d;
}

RunConfig parse(const std::string& text) { return parse_run_config(text, "test.cfg"); }

}  // namespace

TEST_CASE("range values include the stop point") {
  CHECK(Range{0.0, 1.0, 0.25}.values() == std::vector<double>{0.0, 0.25, 0.5, 0.75, 1.0});
  CHECK(Range{0.1, 0.3, 0.1}.values().size() == 3);
  CHECK(Range{2.0, 2.0, 1.0}.values() == std::vector<double>{2.0});
  CHECK_THROWS_AS((Range{1.0, 0.0, 0.1}.values()), ConfigError);
  CHECK_THROWS_AS((Range{0.0, 1.0, 0.0}.values()), ConfigError);
  CHECK_THROWS_AS((Range{0.0, 1.0, 1e-9}.values()), ConfigError);
}

TEST_CASE("segments keep file order and outputs are parsed by kind") {
  const RunConfig c = parse(R"(
[run]
molecule = N2
temperature = 10
n_max = 30

[kick]
strength = 1.5
polarization = 30

[free]
duration_trev = 0.5

[train]
count = 4
period_trev = 1
strength = 0.5
angle_step = 22.5
polarization = 0

[output pops]
kind = populations

[output maps]
kind = angular_map
time_start = 0
time_stop = 1
time_step = 0.5
)");
  CHECK(c.molecules == std::vector<std::string>{"N2"});
  CHECK(c.fractions == std::vector<double>{1.0});
  CHECK(c.temperature == 10.0);
  REQUIRE(c.segments.size() == 3);
  const auto& kick = std::get<KickConfig>(c.segments[0]);
  CHECK(*kick.strength == 1.5);
  CHECK_FALSE(kick.polarization.lab_z);
  CHECK(kick.polarization.angle == doctest::Approx(std::numbers::pi / 6));
  CHECK(std::holds_alternative<FreeConfig>(c.segments[1]));
  const auto& train = std::get<TrainConfig>(c.segments[2]);
  CHECK(train.spec.count == 4);
  CHECK(train.spec.angle_step == doctest::Approx(std::numbers::pi / 8));
  REQUIRE(c.outputs.size() == 2);
  CHECK(c.outputs[0].name == "pops");
  CHECK(std::holds_alternative<AngularMapOutput>(c.outputs[1].spec));
  CHECK(c.needs_states());

  const MoleculeSpec& n2 = db().get("N2");
  const FieldProgram program = build_program(c, n2);
  REQUIRE(program.segments.size() == 1 + 1 + 4 + 3);
  CHECK(std::get<FreeSegment>(program.segments[1]).duration == doctest::Approx(0.5 * revival_time(n2)));
  CHECK(std::get<FreeSegment>(program.segments[3]).duration == doctest::Approx(revival_time(n2)));
  CHECK(program.total_duration() == doctest::Approx(3.5 * revival_time(n2)));
}

TEST_CASE("invalid configurations are rejected with a location") {
  const std::string run = "[run]\nmolecule = N2\nn_max = 20\n";
  CHECK_THROWS_AS(parse(""), ConfigError);
  CHECK_THROWS_AS(parse("[run]\nmolecule = N2\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "bogus = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[nonsense]\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "temperature = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "temperature = nan\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "initial = coherent\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[kick]\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[kick]\nstrength = -1\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[train]\ncount = 2\nstrength = 1\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[train]\ncount = 2\nstrength = 1\nperiod = 1\nstart = 3\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[free]\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[centrifuge]\nbeta = 0.5\nintensity = 1e12\nomega_max = 10\nrelease_n = 9\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse(run + "[output x]\nkind = nothing\n"), ConfigError);
  CHECK_THROWS_AS(parse(run + "[output x]\nkind = populations\n[output x]\nkind = populations\n"),
                  ConfigError);
  CHECK_THROWS_AS(parse("[run]\nmolecule = N2, O2\nfractions = 0.5, 0.6\nn_max = 20\n"), ConfigError);
  try {
    parse(run + "bogus = 1\n");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("test.cfg:4") != std::string::npos);
  }
}

TEST_CASE("release_n sets the terminal frequency from the line resonance") {
  const RunConfig c = parse(R"(
[run]
molecule = O2
initial = state
initial_n = 1
initial_m = 1
n_max = 40

[centrifuge]
duration = 50
beta = 0.3
intensity = 2e12
theta0 = 0
release_n = 21
)");
  const MoleculeSpec& o2 = db().get("O2");
  const FieldProgram p = build_program(c, o2);
  const auto& seg = std::get<CentrifugeSegment>(p.segments.at(0));
  const double expected = std::numbers::pi * 0.0299792458 * (energy(o2, 22) - energy(o2, 20));
  CHECK(*seg.spec.omega_max == doctest::Approx(expected).epsilon(1e-12));
  CHECK(resonant_frequency(o2, 21) == doctest::Approx(expected).epsilon(1e-12));
  CHECK(*seg.spec.theta0 == 0.0);
  const Wavefunction psi = initial_state(c, o2);
  CHECK(std::norm(psi(1, 1)) == doctest::Approx(1.0));
}

TEST_CASE("initial states respect the basis and the spin statistics") {
  const MoleculeSpec& o2 = db().get("O2");
  CHECK_THROWS_AS(initial_state(parse("[run]\nmolecule = O2\ninitial = state\ninitial_n = 2\nn_max = 10\n"), o2),
                  ConfigError);
  CHECK_THROWS_AS(initial_state(parse("[run]\nmolecule = O2\ninitial = state\ninitial_n = 12\nn_max = 10\n"), o2),
                  ConfigError);
  const Wavefunction packet = initial_state(
      parse("[run]\nmolecule = O2\ninitial = packet\npacket_center = 21\npacket_width = 2\nn_max = 40\n"), o2);
  CHECK(packet.norm_squared() == doctest::Approx(1.0));
  double even = 0.0, center = 0.0;
  for (int n = 0; n <= 40; ++n) {
    const double p = std::norm(packet(n, n));
    if (n % 2 == 0) even += p;
    center += n * p;
  }
  CHECK(even == 0.0);
  CHECK(center == doctest::Approx(21.0).epsilon(1e-3));
}

TEST_CASE("every bundled configuration parses and builds") {
  int count = 0;
  for (const auto& entry : std::filesystem::directory_iterator(SUPERROTOR_CONFIG_DIR)) {
    if (entry.path().extension() != ".cfg") continue;
    CAPTURE(entry.path().string());
    std::string raw;
    const RunConfig c = load_run_config(entry.path().string(), &raw);
    CHECK_FALSE(raw.empty());
    for (const auto& name : c.molecules) CHECK_NOTHROW(build_program(c, db().get(name)));
    ++count;
  }
  CHECK(count >= 10);
  CHECK_THROWS_AS(load_run_config("/nonexistent/run.cfg"), IoError);
}
