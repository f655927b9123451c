#include "oracles.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/special_functions/legendre.hpp>
#include <boost/math/special_functions/spherical_harmonic.hpp>

namespace oracle {

namespace {
constexpr double pi = std::numbers::pi;

int index(int n, int m) { return n * n + n + m; }
}  // namespace

void gauss_legendre(int n, std::vector<double>& x, std::vector<double>& w) {
  x.assign(n, 0.0);
  w.assign(n, 0.0);
  for (int i = 0; i < n; ++i) {
    double z = std::cos(pi * (i + 0.75) / (n + 0.5));
    for (int iter = 0; iter < 100; ++iter) {
      const double p = boost::math::legendre_p(n, z);
      const double dp = boost::math::legendre_p_prime(n, z);
      const double dz = p / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    const double dp = boost::math::legendre_p_prime(n, z);
    x[i] = z;
    w[i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

double projection_squared(const Direction& u, double theta, double phi) {
  if (u.lab_z) {
    const double c = std::cos(theta);
    return c * c;
  }
  const double p = std::sin(theta) * std::cos(phi - u.angle);
  return p * p;
}

Complex cos2_element(int n1, int m1, int n2, int m2, const Direction& u) {
  constexpr int n_theta = 24;
  constexpr int n_phi = 32;
  constexpr int n_cached = 16;
  if (std::max(n1, n2) > n_cached) throw std::invalid_argument("cos2_element: N > 16");
  // Harmonics on the quadrature grid, evaluated once.
  static const auto table = [] {
    struct Table {
      std::vector<double> theta, weight;
      std::vector<Complex> y;  // [state][point]
    } t;
    std::vector<double> x;
    gauss_legendre(n_theta, x, t.weight);
    for (double xi : x) t.theta.push_back(std::acos(xi));
    const int states = (n_cached + 1) * (n_cached + 1);
    t.y.resize(static_cast<std::size_t>(states) * n_theta * n_phi);
    for (int n = 0; n <= n_cached; ++n) {
      for (int m = -n; m <= n; ++m) {
        for (int i = 0; i < n_theta; ++i) {
          for (int k = 0; k < n_phi; ++k) {
            t.y[(static_cast<std::size_t>(index(n, m)) * n_theta + i) * n_phi + k] =
                boost::math::spherical_harmonic(n, m, t.theta[i], 2.0 * pi * k / n_phi);
          }
        }
      }
    }
    return t;
  }();
  const auto* a = &table.y[static_cast<std::size_t>(index(n1, m1)) * n_theta * n_phi];
  const auto* b = &table.y[static_cast<std::size_t>(index(n2, m2)) * n_theta * n_phi];
  Complex sum = 0.0;
  for (int i = 0; i < n_theta; ++i) {
    for (int k = 0; k < n_phi; ++k) {
      const int p = i * n_phi + k;
      const double phi = 2.0 * pi * k / n_phi;
      sum += table.weight[i] * (2.0 * pi / n_phi) * std::conj(a[p]) *
             projection_squared(u, table.theta[i], phi) * b[p];
    }
  }
  return sum;
}

std::vector<Complex> grid_kick(const std::vector<Complex>& psi, int n_max, double strength,
                               const Direction& u) {
  const int size = (n_max + 1) * (n_max + 1);
  if (static_cast<int>(psi.size()) != size) throw std::invalid_argument("grid_kick: size");
  // The kicked function is not band limited; the grid resolves components far
  // above n_max so the projection is not aliased.
  const int band = n_max + 48;
  const int n_theta = band + 2;
  const int n_phi = 2 * band + 4;
  std::vector<double> x, w;
  gauss_legendre(n_theta, x, w);
  std::vector<Complex> out(size, 0.0);
  std::vector<Complex> y(size);
  for (int i = 0; i < n_theta; ++i) {
    const double theta = std::acos(x[i]);
    for (int k = 0; k < n_phi; ++k) {
      const double phi = 2.0 * pi * k / n_phi;
      Complex value = 0.0;
      for (int n = 0; n <= n_max; ++n) {
        for (int m = -n; m <= n; ++m) {
          y[index(n, m)] = boost::math::spherical_harmonic(n, m, theta, phi);
          value += psi[index(n, m)] * y[index(n, m)];
        }
      }
      value *= std::exp(Complex(0.0, strength * projection_squared(u, theta, phi)));
      const double dw = w[i] * 2.0 * pi / n_phi;
      for (int j = 0; j < size; ++j) out[j] += dw * std::conj(y[j]) * value;
    }
  }
  return out;
}

std::vector<double> thermal_shells(double b, double d, double weight_even, double weight_odd,
                                   double temperature, int n_out, int n_hi) {
  const long double c2 = 1.438776877L;  // hc/k, cm K
  auto energy = [&](int n) { return static_cast<long double>(b) * n * (n + 1) -
                                    static_cast<long double>(d) * n * n * (n + 1.0L) * (n + 1.0L); };
  const int lowest = weight_even > 0.0 ? 0 : 1;
  std::vector<long double> shells(n_hi + 1, 0.0L);
  long double total = 0.0L;
  for (int n = 0; n <= n_hi; ++n) {
    if (n > 0 && energy(n) <= energy(n - 1)) break;
    const double g = n % 2 == 0 ? weight_even : weight_odd;
    shells[n] = g * (2 * n + 1) * std::exp(-c2 * (energy(n) - energy(lowest)) / temperature);
    total += shells[n];
  }
  std::vector<double> out(n_out + 1);
  for (int n = 0; n <= n_out; ++n) out[n] = static_cast<double>(shells[n] / total);
  return out;
}

}  // namespace oracle
