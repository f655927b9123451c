#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "superrotor/error.hpp"
#include "superrotor/fields.hpp"
#include "superrotor/molecule.hpp"

using namespace superrotor;

namespace {

constexpr double pi = std::numbers::pi;

MoleculeSpec n2() {
  MoleculeSpec m;
  m.name = "N2";
  m.b = 1.98957;
  m.d = 5.76e-6;
  m.delta_alpha = 0.70;
  m.spin_weight_even = 2;
  return m;
}

CentrifugeSpec centrifuge() {
  CentrifugeSpec c;
  c.duration = 100;
  c.beta = 0.628;
  c.peak_intensity = 5e12;
  c.theta0 = 0.3;
  return c;
}

// Independent evaluation of P = (delta_alpha / 4 hbar) * integral E^2 dt in SI units.
double kick_oracle(double delta_alpha_a3, double fwhm_fs, double intensity_w_cm2) {
  const double eps0 = 8.8541878128e-12, c = 299792458.0, hbar = 1.054571817e-34;
  const double alpha = 4 * pi * eps0 * delta_alpha_a3 * 1e-30;
  const double e2_peak = 2 * intensity_w_cm2 * 1e4 / (eps0 * c);
  // Midpoint rule over +-6 FWHM of exp(-4 ln2 t^2 / fwhm^2).
  const double tau = fwhm_fs * 1e-15;
  const int steps = 20000;
  const double h = 12 * tau / steps;
  double integral = 0.0;
  for (int k = 0; k < steps; ++k) {
    const double t = -6 * tau + (k + 0.5) * h;
    integral += std::exp(-4 * std::log(2.0) * t * t / (tau * tau)) * h;
  }
  return alpha * e2_peak * integral / (4 * hbar);
}

}  // namespace

TEST_CASE("kick strength follows the pulse-area formula") {
  PulseSpec p;
  p.fwhm_fs = 120;
  p.peak_intensity = 1e13;
  const double value = kick_strength(p, 0.70);
  CHECK(value == doctest::Approx(kick_oracle(0.70, 120, 1e13)).epsilon(1e-9));
  CHECK(value == doctest::Approx(1.777).epsilon(1e-3));
  CHECK(kick_strength(p, 0.70, 2.0) == doctest::Approx(2 * value));

  // Linear in intensity, duration and anisotropy.
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.5, 2.0);
  for (int i = 0; i < 50; ++i) {
    const double a = u(rng), b = u(rng), c = u(rng);
    PulseSpec q = p;
    q.fwhm_fs *= a;
    q.peak_intensity *= b;
    CHECK(kick_strength(q, 0.70 * c) == doctest::Approx(a * b * c * value).epsilon(1e-12));
  }
  PulseSpec bad = p;
  bad.fwhm_fs = 0;
  CHECK_THROWS_AS(kick_strength(bad, 0.7), ConfigError);
}

TEST_CASE("Gaussian intensity profile") {
  PulseSpec p;
  p.center = 1.0;
  p.fwhm_fs = 200;
  p.peak_intensity = 4.0;
  CHECK(p.intensity(1.0) == 4.0);
  CHECK(p.intensity(1.1) == doctest::Approx(2.0));
  CHECK(p.intensity(0.9) == doctest::Approx(2.0));
}

TEST_CASE("impulsive limit is one hundredth of the revival time") {
  const double t_rev = revival_time(n2());
  CHECK(is_impulsive(50, t_rev));
  CHECK_FALSE(is_impulsive(120, t_rev));
  CHECK_FALSE(is_impulsive(t_rev * 10.0, t_rev));
}

TEST_CASE("train kicks") {
  TrainSpec t;
  t.count = 4;
  t.period = 8.0;
  t.start = 1.0;
  t.first = Polarization::in_plane(0.1);
  t.angle_step = 0.25;
  t.strength = 0.5;
  const auto kicks = train_kicks(t, 0.7);
  REQUIRE(kicks.size() == 4);
  for (int n = 0; n < 4; ++n) {
    CHECK(kicks[n].time == doctest::Approx(1.0 + 8.0 * n));
    CHECK(kicks[n].polarization.angle == doctest::Approx(0.1 + 0.25 * n));
    CHECK(kicks[n].strength == 0.5);
  }
  TrainSpec e = t;
  e.strength.reset();
  e.explicit_strengths = {1, 2, 3, 4};
  CHECK(train_kicks(e, 0.7)[2].strength == 3);
  e.explicit_strengths = {1, 2};
  CHECK_THROWS_AS(train_kicks(e, 0.7), ConfigError);

  TrainSpec z = t;
  z.first = Polarization::along_z();
  CHECK_THROWS_AS(z.validate(), ConfigError);
  TrainSpec none = t;
  none.strength.reset();
  CHECK_THROWS_AS(none.validate(), ConfigError);
  TrainSpec fast = t;
  fast.strength.reset();
  fast.pulse = PulseSpec{0.0, 100.0, 1e12, {}};
  fast.period = 0.05;
  CHECK_THROWS_AS(fast.validate(), ConfigError);
}

TEST_CASE("centrifuge angle is quadratic, then linear after the clamp") {
  auto c = centrifuge();
  c.handedness = -1;
  c.omega_max = 0.628 * 40;
  CHECK(c.clamp_time() == doctest::Approx(40));
  CHECK(c.terminal_frequency() == doctest::Approx(0.628 * 40));
  const auto a = centrifuge_angle(c, 0.3, 10.0);
  CHECK(a.angle == doctest::Approx(0.3 - 0.5 * 0.628 * 100));
  CHECK(a.omega == doctest::Approx(-6.28));
  const auto b = centrifuge_angle(c, 0.3, 60.0);
  CHECK(b.omega == doctest::Approx(-0.628 * 40));
  CHECK(b.angle == doctest::Approx(0.3 - (0.5 * 0.628 * 1600 + 0.628 * 40 * 20)));
  CHECK_THROWS(centrifuge_angle(c, 0.0, 101.0));

  // Finite-difference derivative of the angle equals omega.
  for (double t : {5.0, 39.0, 41.0, 90.0}) {
    const double h = 1e-5;
    const double d = (centrifuge_angle(c, 0, t + h).angle - centrifuge_angle(c, 0, t - h).angle) / (2 * h);
    CHECK(d == doctest::Approx(centrifuge_angle(c, 0, t).omega).epsilon(1e-6));
  }
}

TEST_CASE("centrifuge envelope and validation") {
  auto c = centrifuge();
  CHECK(c.envelope(0.0) == 0.0);
  CHECK(c.envelope(2.5) == doctest::Approx(0.5));
  CHECK(c.envelope(50.0) == 1.0);
  CHECK(c.envelope(97.5) == doctest::Approx(0.5));
  CHECK(c.envelope(101.0) == 0.0);
  auto bad = c;
  bad.beta = -1;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.handedness = 0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad = c;
  bad.ramp_on = 60;
  bad.ramp_off = 60;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("field spectrogram ridges are chirped at +-beta / 2 pi") {
  const auto c = centrifuge();
  std::vector<double> times, freqs;
  for (double t = 20; t <= 80; t += 2) times.push_back(t);
  for (double f = 364; f <= 386; f += 0.05) freqs.push_back(f);
  const auto s = field_spectrogram(c, *c.theta0, 375.0, 2.0, times, freqs);
  const auto slopes = fit_trace_slopes(s, 375.0, 20, 80);
  const double expected = c.beta / (2 * pi);
  CHECK(slopes.upper == doctest::Approx(expected).epsilon(0.01));
  CHECK(slopes.lower == doctest::Approx(-expected).epsilon(0.01));
}

TEST_CASE("orientation folding and projections") {
  for (double a : {0.2, -0.2, pi - 0.2, pi + 0.2, 7.0}) {
    const double f = fold_orientation(a);
    CHECK(f >= 0.0);
    CHECK(f <= pi / 2);
  }
  CHECK(fold_orientation(0.2) == doctest::Approx(fold_orientation(-0.2)));
  CHECK(fold_orientation(0.2) == doctest::Approx(fold_orientation(pi - 0.2)));

  const auto c = centrifuge();
  Rng rng(9);
  std::vector<double> samples(500);
  for (auto& s : samples) s = rng.uniform(0.0, pi);
  for (const auto& p : orientation_statistics(samples, c, 0.0)) {
    CHECK(p.ex2 + p.ey2 == doctest::Approx(1.0));
    CHECK(p.estimate == doctest::Approx(fold_orientation(p.theta)).epsilon(1e-9));
  }
}

TEST_CASE("seeded generator is reproducible and uniform") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  double mean = 0.0;
  for (int i = 0; i < 10000; ++i) {
    const double x = a.uniform();
    CHECK(x == b.uniform());
    if (x != c.uniform()) differs = true;
    CHECK(x >= 0.0);
    CHECK(x < 1.0);
    mean += x / 10000;
  }
  CHECK(differs);
  CHECK(mean == doctest::Approx(0.5).epsilon(0.02));
}

TEST_CASE("program realization and guards") {
  FieldProgram p;
  auto c = centrifuge();
  c.theta0.reset();
  p.segments.emplace_back(CentrifugeSegment{c});
  p.segments.emplace_back(FreeSegment{10.0});
  CHECK_FALSE(p.is_realized());
  const auto r1 = p.realize(7), r2 = p.realize(7), r3 = p.realize(8);
  CHECK(r1.is_realized());
  const auto theta = [](const FieldProgram& f) { return *std::get<CentrifugeSegment>(f.segments[0]).spec.theta0; };
  CHECK(theta(r1) == theta(r2));
  CHECK(theta(r1) != theta(r3));
  CHECK(p.total_duration() == doctest::Approx(110.0));

  CHECK(p.check(n2()).ok());
  CHECK(p.check(n2()).warnings.empty());

  FieldProgram hot;
  PulseSpec strong{0.0, 50.0, 1e14, Polarization::along_z()};
  hot.segments.emplace_back(KickSegment{kick_strength(strong, 0.7), Polarization::along_z(), strong});
  const auto report = hot.check(n2());
  REQUIRE(report.warnings.size() == 1);
  CHECK(report.warnings[0].find("intensity_cap") != std::string::npos);
  CHECK(report.warnings[0].find("1e+13") != std::string::npos);
  CHECK(report.ok());

  FieldProgram slow;
  PulseSpec longp{0.0, 5000.0, 1e12, Polarization::along_z()};
  slow.segments.emplace_back(KickSegment{kick_strength(longp, 0.7), Polarization::along_z(), longp});
  const auto bad = slow.check(n2());
  CHECK_FALSE(bad.ok());
  CHECK(bad.violations[0].find("impulsive_validity") != std::string::npos);
}

TEST_CASE("appending a train interleaves kicks and free gaps") {
  TrainSpec t;
  t.count = 3;
  t.period = 5.0;
  t.strength = 1.0;
  FieldProgram p;
  p.append_train(t, 0.7);
  REQUIRE(p.segments.size() == 5);
  CHECK(std::holds_alternative<KickSegment>(p.segments[0]));
  CHECK(std::get<FreeSegment>(p.segments[1]).duration == 5.0);
  CHECK(p.total_duration() == doctest::Approx(10.0));
}
