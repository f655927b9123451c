#include <doctest.h>

#include <cmath>
#include <cstdlib>

#include "oracles.hpp"
#include "superrotor/error.hpp"
#include "superrotor/molecule.hpp"

using namespace superrotor;

namespace {

constexpr double c_cm_ps = 0.0299792458;

MoleculeSpec n2() {
  MoleculeSpec m;
  m.name = "N2";
  m.b = 1.98957;
  m.d = 5.76e-6;
  m.delta_alpha = 0.70;
  m.spin_weight_even = 2;
  m.spin_weight_odd = 1;
  return m;
}

MoleculeSpec o2() {
  MoleculeSpec m;
  m.name = "O2";
  m.b = 1.4377;
  m.d = 4.839e-6;
  m.delta_alpha = 1.10;
  m.spin_weight_even = 0;
  m.spin_weight_odd = 1;
  return m;
}

}  // namespace

TEST_CASE("term values and line shifts") {
  const auto m = n2();
  CHECK(energy(m, 0) == 0.0);
  CHECK(energy(m, 3) == doctest::Approx(m.b * 12 - m.d * 144).epsilon(1e-15));
  for (int n = 0; n < 50; ++n) {
    CHECK(raman_shift(m, n) == doctest::Approx(energy(m, n + 2) - energy(m, n)).epsilon(1e-15));
  }
  // Rigid rotor: the shift is 4B(N + 3/2).
  MoleculeSpec rigid = m;
  rigid.d = 0.0;
  CHECK(raman_shift(rigid, 10) == doctest::Approx(4 * rigid.b * 11.5));
  CHECK_THROWS(energy(m, -1));
}

TEST_CASE("revival times") {
  MoleculeSpec m = n2();
  m.b = 1.9896;
  CHECK(revival_time(m) == doctest::Approx(1.0 / (2 * 1.9896 * c_cm_ps)).epsilon(1e-14));
  CHECK(revival_time(m) == doctest::Approx(8.38).epsilon(0.01));
  const auto o = o2();
  MoleculeSpec rigid = o;
  rigid.d = 0.0;
  CHECK(quarter_revival_distorted(rigid, 69) == doctest::Approx(revival_time(o) / 4));
  const double eps = o.d / o.b;
  CHECK(quarter_revival_distorted(o, 69) ==
        doctest::Approx(1.0 / (8 * o.b * c_cm_ps * (1 - 6 * eps * 69 * 70))));
  CHECK_THROWS(quarter_revival_distorted(o, 100000));
}

TEST_CASE("classical rotation frequency is half the line spacing") {
  const auto o = o2();
  for (int n : {1, 39, 99}) {
    const double nu = classical_rotation_frequency(o, n);
    CHECK(nu == doctest::Approx(c_cm_ps * (energy(o, n + 1) - energy(o, n - 1)) / 2));
  }
  CHECK_THROWS(classical_rotation_frequency(o, 0));
}

TEST_CASE("monotone energy limit") {
  MoleculeSpec h2;
  h2.name = "H2";
  h2.b = 59.322;
  h2.d = 0.0471;
  h2.delta_alpha = 0.31;
  const int limit = monotone_energy_limit(h2);
  CHECK(energy(h2, limit) > energy(h2, limit - 1));
  CHECK(energy(h2, limit + 1) <= energy(h2, limit));
}

TEST_CASE("thermal populations agree with a long-sum oracle") {
  for (double t : {10.0, 77.0, 295.0}) {
    for (const auto& m : {n2(), o2()}) {
      const auto w = thermal_populations(m, t, 80);
      const auto ref = oracle::thermal_shells(m.b, m.d, m.spin_weight_even, m.spin_weight_odd, t, 80);
      const double total = w.total();
      CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
      for (int n = 0; n <= 80; ++n) {
        CHECK(w.shell(n) / total == doctest::Approx(ref[n]).epsilon(1e-10).scale(1e-15));
      }
    }
  }
}

TEST_CASE("spin statistics and zero temperature") {
  const auto w = thermal_populations(o2(), 295.0, 60);
  for (int n = 0; n <= 60; n += 2) CHECK(w.shell(n) == 0.0);
  const auto cold = thermal_populations(o2(), 0.0, 10);
  CHECK(cold.shell(1) == doctest::Approx(1.0));
  CHECK(cold.weight(1, -1) == doctest::Approx(1.0 / 3));
  const auto cold_n2 = thermal_populations(n2(), 0.0, 10);
  CHECK(cold_n2.shell(0) == 1.0);
}

TEST_CASE("a basis too small for the thermal tail reports the size it needs") {
  try {
    thermal_populations(n2(), 295.0, 20);
    FAIL("expected TruncationError");
  } catch (const TruncationError& e) {
    CHECK(e.required_n_max() > 20);
    CHECK_NOTHROW(thermal_populations(n2(), 295.0, e.required_n_max()));
  }
}

TEST_CASE("molecule database parsing") {
  const auto db = MoleculeDatabase::parse(
      "[molecule A]\nB = 2\ndelta_alpha = 1\n"
      "[molecule B]\nB = 1\nD = 1e-6\ndelta_alpha = 1\nspin_weight_even = 0\n"
      "fine_structure.S1 = -0.03\nfine_structure.S2 = 0\nfine_structure.S3 = 0.03\n",
      "db");
  CHECK(db.names() == std::vector<std::string>{"A", "B"});
  CHECK(db.get("A").d == 0.0);
  CHECK(db.get("B").lowest_allowed_n() == 1);
  REQUIRE(db.get("B").fine_structure.has_value());
  CHECK(db.get("B").fine_structure->offset(0, 50) == doctest::Approx(-0.03));
  CHECK_THROWS_AS(db.get("C"), ConfigError);

  CHECK_THROWS_AS(MoleculeDatabase::parse("[molecule A]\ndelta_alpha = 1\n", "db"), ConfigError);
  CHECK_THROWS_AS(MoleculeDatabase::parse("[molecule A]\nB = 1\ndelta_alpha = 1\nfoo = 2\n", "db"),
                  ConfigError);
  CHECK_THROWS_AS(MoleculeDatabase::parse("[molecule A]\nB = -1\ndelta_alpha = 1\n", "db"), ConfigError);
  CHECK_THROWS_AS(
      MoleculeDatabase::parse("[molecule A]\nB = 1\ndelta_alpha = 1\nspin_weight_even = 0\nspin_weight_odd = 0\n", "db"),
      ConfigError);
  CHECK_THROWS_AS(MoleculeDatabase::parse("[molecule A]\nB = 1\ndelta_alpha = 1\n[molecule A]\nB = 1\ndelta_alpha = 1\n", "db"),
                  ConfigError);
  CHECK_THROWS_AS(MoleculeDatabase::load("/nonexistent/molecules.db"), IoError);
}

TEST_CASE("bundled database") {
  const auto db = MoleculeDatabase::load(default_molecule_database_path());
  for (const char* name : {"N2", "15N2", "O2", "CO2", "H2"}) CHECK(db.contains(name));
  CHECK(db.get("O2").spin_weight(2) == 0.0);
  CHECK(db.get("O2").fine_structure.has_value());
  CHECK(db.get("H2").spin_weight(1) == 3 * db.get("H2").spin_weight(0));
}

TEST_CASE("database path can be overridden from the environment") {
  ::setenv("SUPERROTOR_MOLECULE_DB", "/tmp/other.db", 1);
  CHECK(default_molecule_database_path() == "/tmp/other.db");
  ::unsetenv("SUPERROTOR_MOLECULE_DB");
  CHECK(default_molecule_database_path() != "/tmp/other.db");
}
