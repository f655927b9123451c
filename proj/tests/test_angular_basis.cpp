#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <boost/math/special_functions/spherical_harmonic.hpp>

#include "oracles.hpp"
#include "superrotor/angular_basis.hpp"

using namespace superrotor;

namespace {

Wavefunction random_state(int n_max, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Wavefunction psi(n_max);
  for (int i = 0; i < psi.basis.size(); ++i) psi.coefficients[i] = Complex(g(rng), g(rng));
  psi.normalize();
  return psi;
}

Complex element(const AngularOperator& op, int n1, int m1, int n2, int m2) {
  return op.matrix.coeff(op.basis.index(n1, m1), op.basis.index(n2, m2));
}

}  // namespace

TEST_CASE("basis index round trip") {
  BasisIndex b(7);
  CHECK(b.size() == 64);
  for (int i = 0; i < b.size(); ++i) {
    CHECK(b.index(b.n_of(i), b.m_of(i)) == i);
    CHECK(b.contains(b.n_of(i), b.m_of(i)));
  }
  CHECK_FALSE(b.contains(3, 4));
  CHECK_FALSE(b.contains(8, 0));
}

TEST_CASE("cos^2 matrix elements match sphere quadrature for N <= 12") {
  const int n_max = 12;
  const std::vector<Polarization> pols{Polarization::along_z(), Polarization::in_plane(0.0),
                                       Polarization::in_plane(0.7)};
  for (const auto& pol : pols) {
    const auto op = cos2_matrix(n_max, pol);
    const oracle::Direction u{pol.lab_z, pol.angle};
    double worst = 0.0;
    for (int n1 = 0; n1 <= n_max; ++n1) {
      for (int m1 = -n1; m1 <= n1; ++m1) {
        for (int n2 = std::max(0, n1 - 2); n2 <= std::min(n_max, n1 + 2); ++n2) {
          for (int m2 = std::max(-n2, m1 - 2); m2 <= std::min(n2, m1 + 2); ++m2) {
            worst = std::max(worst, std::abs(element(op, n1, m1, n2, m2) -
                                             oracle::cos2_element(n1, m1, n2, m2, u)));
          }
        }
      }
    }
    CHECK(worst < 1e-10);
  }
}

TEST_CASE("elements outside the selection rules vanish by quadrature") {
  const oracle::Direction u{false, 0.4};
  CHECK(std::abs(oracle::cos2_element(2, 0, 5, 0, u)) < 1e-12);
  CHECK(std::abs(oracle::cos2_element(3, 1, 3, -2, u)) < 1e-12);
  const auto op = cos2_matrix(8, Polarization::in_plane(0.4));
  CHECK(op.stamp_violations() == 0);
  CHECK(op.stamp.allows(2, -2));
  CHECK_FALSE(op.stamp.allows(4, 0));
  const auto z = cos2_matrix(8, Polarization::along_z());
  CHECK(z.stamp_violations() == 0);
  CHECK_FALSE(z.stamp.allows(0, 2));
}

TEST_CASE("cos^2 operators are Hermitian with the isotropic shell trace") {
  for (const auto& pol : {Polarization::along_z(), Polarization::in_plane(1.1)}) {
    const auto op = cos2_matrix(20, pol);
    CHECK(op.max_hermitian_asymmetry() < 1e-15);
    for (int n = 0; n <= 18; ++n) {
      Complex trace = 0.0;
      for (int m = -n; m <= n; ++m) trace += element(op, n, m, n, m);
      CHECK(trace.real() == doctest::Approx((2.0 * n + 1.0) / 3.0).epsilon(1e-13));
      CHECK(std::abs(trace.imag()) < 1e-14);
    }
  }
}

TEST_CASE("in-plane operator is the x operator rotated about z") {
  const double phi = 0.9;
  const auto ox = cos2_matrix(10, Polarization::in_plane(0.0));
  const auto op = cos2_matrix(10, Polarization::in_plane(phi));
  for (int n1 = 0; n1 <= 10; ++n1) {
    for (int m1 = -n1; m1 <= n1; ++m1) {
      for (int n2 = std::max(0, n1 - 2); n2 <= std::min(10, n1 + 2); ++n2) {
        for (int m2 = std::max(-n2, m1 - 2); m2 <= std::min(n2, m1 + 2); ++m2) {
          const Complex expected = std::exp(Complex(0.0, -phi * (m1 - m2))) * element(ox, n1, m1, n2, m2);
          CHECK(std::abs(element(op, n1, m1, n2, m2) - expected) < 1e-14);
        }
      }
    }
  }
}

TEST_CASE("individual elements agree with the assembled matrix") {
  const auto z = cos2_matrix(9, Polarization::along_z());
  CHECK(cos2_element_lab_z(0, 0, 0, 0) == doctest::Approx(1.0 / 3.0));
  CHECK(cos2_element_lab_z(2, 1, 0, 1) == 0.0);
  CHECK(element(z, 4, 2, 6, 2).real() == doctest::Approx(cos2_element_lab_z(4, 2, 6, 2)));
  // (sin theta e^{i phi})^2 raises M by two.
  const oracle::Direction x{false, 0.0};
  CHECK(sin2_raise_element(5, 2, 5, 1) == 0.0);
  const auto ox = cos2_matrix(9, Polarization::in_plane(0.0));
  CHECK(element(ox, 5, 3, 5, 1).real() == doctest::Approx(0.25 * sin2_raise_element(5, 3, 5, 1)));
  CHECK(std::abs(element(ox, 5, 3, 5, 1) - oracle::cos2_element(5, 3, 5, 1, x)) < 1e-12);
}

TEST_CASE("spherical harmonics agree with Boost") {
  for (int n = 0; n <= 15; ++n) {
    for (int m = -n; m <= n; ++m) {
      for (double theta : {0.1, 1.0, 2.5}) {
        const Complex a = spherical_harmonic(n, m, theta, 0.8);
        const Complex b = boost::math::spherical_harmonic(n, m, theta, 0.8);
        CHECK(std::abs(a - b) < 1e-12);
      }
    }
  }
}

TEST_CASE("grid transform round trip") {
  const auto psi = random_state(14, 3);
  const auto grid = SphereGrid::exact_for(14);
  const auto back = inverse_grid_transform(grid_transform(psi, grid), grid, 14);
  CHECK((back.coefficients - psi.coefficients).norm() < 1e-12);
  CHECK_THROWS(inverse_grid_transform(grid_transform(psi, SphereGrid::make(4, 8)), SphereGrid::make(4, 8), 14));
}

TEST_CASE("Gauss-Legendre rule integrates polynomials exactly") {
  std::vector<double> x, w;
  gauss_legendre(12, x, w);
  double s0 = 0.0, s22 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    s0 += w[i];
    s22 += w[i] * std::pow(x[i], 22);
  }
  CHECK(s0 == doctest::Approx(2.0).epsilon(1e-14));
  CHECK(s22 == doctest::Approx(2.0 / 23.0).epsilon(1e-13));
}

TEST_CASE("populations, J_z and coherences") {
  const auto psi = random_state(9, 11);
  const auto pops = population_by_n(psi);
  double sum = 0.0;
  for (double p : pops) sum += p;
  CHECK(sum == doctest::Approx(1.0).epsilon(1e-14));

  double jz = 0.0;
  for (int n = 0; n <= 9; ++n) jz += jz_in_shell(psi, n);
  CHECK(jz_expectation(psi) == doctest::Approx(jz).epsilon(1e-13));
  const auto jop = jz_matrix(9);
  const Complex direct = psi.coefficients.dot(jop.matrix * psi.coefficients);
  CHECK(direct.real() == doctest::Approx(jz).epsilon(1e-13));

  Complex rho = 0.0;
  for (int m = -3; m <= 3; ++m) {
    if (std::abs(m + 2) <= 5) rho += std::conj(psi(5, m + 2)) * psi(3, m);
  }
  CHECK(std::abs(coherence(psi, 3, 2) - rho) < 1e-15);

  const auto basis = Wavefunction::basis_state(5, 2, -1);
  CHECK(jz_expectation(basis) == doctest::Approx(-1.0));
  CHECK(population_by_n(basis)[2] == 1.0);
}

TEST_CASE("coupled blocks of cos^2 operators") {
  const BasisIndex b(10);
  const auto z_blocks = coupled_blocks(b, cos2_lab_z_real(10));
  // Lab z couples states of equal M and equal N parity.
  for (const auto& block : z_blocks) {
    for (int i : block) {
      CHECK(b.m_of(i) == b.m_of(block.front()));
      CHECK((b.n_of(i) - b.n_of(block.front())) % 2 == 0);
    }
  }
  const auto x_blocks = coupled_blocks(b, cos2_lab_x_real(10));
  std::size_t covered = 0;
  for (const auto& block : x_blocks) covered += block.size();
  CHECK(covered == static_cast<std::size_t>(b.size()));
  CHECK(x_blocks.size() == 4);
}

TEST_CASE("angular density is normalized and follows the state") {
  const int count = 360;
  std::vector<double> phis(count);
  for (int k = 0; k < count; ++k) phis[k] = 2 * std::numbers::pi * k / count;
  // |3, 3> - |3, -3> is proportional to sin^3(theta) cos(3 phi).
  Wavefunction psi(6);
  psi(3, 3) = 1.0;
  psi(3, -3) = -1.0;
  psi.normalize();
  const auto rho = normalize_over_grid(angular_density(psi, phis));
  double integral = 0.0;
  for (double r : rho) integral += r * 2 * std::numbers::pi / count;
  CHECK(integral == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(rho[0] > rho[30]);  // maximum at phi = 0, node at pi/6
  CHECK(rho[30] < 1e-12);
  const auto marginal = normalize_over_grid(angular_density(psi, phis, DensitySlice::phi_marginal));
  CHECK(marginal[30] < 1e-12);
}

TEST_CASE("wavefunction text round trip is exact") {
  const auto psi = random_state(6, 5);
  std::stringstream ss;
  write_wavefunction(ss, psi, 12.5);
  double t = 0.0;
  const auto back = read_wavefunction(ss, &t);
  CHECK(t == 12.5);
  CHECK(back.n_max() == 6);
  CHECK((back.coefficients - psi.coefficients).norm() == 0.0);
}
