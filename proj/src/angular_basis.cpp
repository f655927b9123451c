#include "superrotor/angular_basis.hpp"

#include <cmath>
#include <iomanip>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "superrotor/error.hpp"
#include "superrotor/units.hpp"

namespace superrotor {

BasisIndex::BasisIndex(int n_max) : n_max_(n_max) {
  if (n_max < 0) throw std::invalid_argument("BasisIndex: n_max must be >= 0");
  n_of_.reserve(size());
  m_of_.reserve(size());
  for (int n = 0; n <= n_max; ++n) {
    for (int m = -n; m <= n; ++m) {
      n_of_.push_back(n);
      m_of_.push_back(m);
    }
  }
}

Wavefunction::Wavefunction(int n_max)
    : basis(n_max), coefficients(Eigen::VectorXcd::Zero(basis.size())) {}

Wavefunction Wavefunction::basis_state(int n_max, int n, int m) {
  Wavefunction psi(n_max);
  if (!psi.basis.contains(n, m)) throw std::invalid_argument("basis_state: |N,M> outside basis");
  psi(n, m) = 1.0;
  return psi;
}

void Wavefunction::normalize() {
  const double norm = coefficients.norm();
  if (norm == 0.0) throw std::invalid_argument("normalize: zero wavefunction");
  coefficients /= norm;
}

double overlap_magnitude(const Wavefunction& a, const Wavefunction& b) {
  if (!(a.basis == b.basis)) throw std::invalid_argument("overlap: basis mismatch");
  return std::abs(a.coefficients.dot(b.coefficients));
}

bool SelectionStamp::allows(int dn, int dm) const {
  return std::find(delta_n.begin(), delta_n.end(), dn) != delta_n.end() &&
         std::find(delta_m.begin(), delta_m.end(), dm) != delta_m.end();
}

double AngularOperator::max_hermitian_asymmetry() const {
  const Matrix adjoint = matrix.adjoint();
  const Matrix diff = matrix - adjoint;
  double worst = 0.0;
  for (int k = 0; k < diff.outerSize(); ++k) {
    for (Matrix::InnerIterator it(diff, k); it; ++it) worst = std::max(worst, std::abs(it.value()));
  }
  return worst;
}

int AngularOperator::stamp_violations() const {
  int bad = 0;
  for (int row = 0; row < matrix.outerSize(); ++row) {
    for (Matrix::InnerIterator it(matrix, row); it; ++it) {
      const int dn = basis.n_of(row) - basis.n_of(it.col());
      const int dm = basis.m_of(row) - basis.m_of(it.col());
      if (!stamp.allows(dn, dm)) ++bad;
    }
  }
  return bad;
}

namespace {

// <N+1, M| cos theta |N, M>
double cos_ladder(int n, int m) {
  if (n < 0 || std::abs(m) > n) return 0.0;
  const double num = static_cast<double>((n + 1) * (n + 1) - m * m);
  return std::sqrt(num / ((2.0 * n + 1.0) * (2.0 * n + 3.0)));
}

// sin(theta) e^{i phi} |l,m> = up(l,m) |l+1,m+1> + down(l,m) |l-1,m+1>
double raise_up(int l, int m) {
  if (l < 0 || std::abs(m) > l) return 0.0;
  return -std::sqrt(static_cast<double>((l + m + 1) * (l + m + 2)) /
                    ((2.0 * l + 1.0) * (2.0 * l + 3.0)));
}

double raise_down(int l, int m) {
  if (l < 1 || std::abs(m) > l) return 0.0;
  return std::sqrt(static_cast<double>((l - m) * (l - m - 1)) /
                   ((2.0 * l - 1.0) * (2.0 * l + 1.0)));
}

using Triplet = Eigen::Triplet<double>;

Eigen::SparseMatrix<double, Eigen::RowMajor> from_triplets(int size,
                                                           const std::vector<Triplet>& t) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> out(size, size);
  out.setFromTriplets(t.begin(), t.end());
  out.prune(0.0);
  out.makeCompressed();
  return out;
}

}  // namespace

double cos2_element_lab_z(int n_out, int m_out, int n_in, int m_in) {
  if (m_out != m_in || std::abs(m_in) > n_in || std::abs(m_out) > n_out) return 0.0;
  const int m = m_in;
  if (n_out == n_in) {
    const double up = cos_ladder(n_in, m);
    const double down = cos_ladder(n_in - 1, m);
    return up * up + down * down;
  }
  if (n_out == n_in + 2) return cos_ladder(n_in, m) * cos_ladder(n_in + 1, m);
  if (n_out == n_in - 2) return cos_ladder(n_out, m) * cos_ladder(n_out + 1, m);
  return 0.0;
}

double sin2_raise_element(int n_out, int m_out, int n_in, int m_in) {
  if (m_out != m_in + 2 || std::abs(m_in) > n_in || std::abs(m_out) > n_out) return 0.0;
  const int l = n_in;
  const int m = m_in;
  if (n_out == l + 2) return raise_up(l, m) * raise_up(l + 1, m + 1);
  if (n_out == l) return raise_up(l, m) * raise_down(l + 1, m + 1) +
                         raise_down(l, m) * raise_up(l - 1, m + 1);
  if (n_out == l - 2) return raise_down(l, m) * raise_down(l - 1, m + 1);
  return 0.0;
}

Eigen::SparseMatrix<double, Eigen::RowMajor> cos2_lab_z_real(int n_max) {
  const BasisIndex basis(n_max);
  std::vector<Triplet> t;
  for (int i = 0; i < basis.size(); ++i) {
    const int n = basis.n_of(i);
    const int m = basis.m_of(i);
    for (int dn : {-2, 0, 2}) {
      if (!basis.contains(n + dn, m)) continue;
      const double v = cos2_element_lab_z(n + dn, m, n, m);
      if (v != 0.0) t.emplace_back(basis.index(n + dn, m), i, v);
    }
  }
  return from_triplets(basis.size(), t);
}

namespace {

// S+ = (sin theta e^{i phi})^2 restricted to the basis; S- is its transpose.
Eigen::SparseMatrix<double, Eigen::RowMajor> sin2_raise_real(int n_max) {
  const BasisIndex basis(n_max);
  std::vector<Triplet> t;
  for (int i = 0; i < basis.size(); ++i) {
    const int n = basis.n_of(i);
    const int m = basis.m_of(i);
    for (int dn : {-2, 0, 2}) {
      if (!basis.contains(n + dn, m + 2)) continue;
      const double v = sin2_raise_element(n + dn, m + 2, n, m);
      if (v != 0.0) t.emplace_back(basis.index(n + dn, m + 2), i, v);
    }
  }
  return from_triplets(basis.size(), t);
}

Eigen::SparseMatrix<double, Eigen::RowMajor> identity_real(int size) {
  Eigen::SparseMatrix<double, Eigen::RowMajor> id(size, size);
  id.setIdentity();
  return id;
}

}  // namespace

Eigen::SparseMatrix<double, Eigen::RowMajor> cos2_lab_x_real(int n_max) {
  const BasisIndex basis(n_max);
  const auto cz = cos2_lab_z_real(n_max);
  const auto raise = sin2_raise_real(n_max);
  Eigen::SparseMatrix<double, Eigen::RowMajor> lower = raise.transpose();
  Eigen::SparseMatrix<double, Eigen::RowMajor> out =
      0.5 * (identity_real(basis.size()) - cz) + 0.25 * (raise + lower);
  out.prune(1e-300);
  out.makeCompressed();
  return out;
}

AngularOperator cos2_matrix(int n_max, const Polarization& polarization) {
  if (n_max < 2) throw std::invalid_argument("cos2_matrix: n_max must be >= 2");
  const BasisIndex basis(n_max);
  AngularOperator op{basis, {}, {}};
  if (polarization.lab_z) {
    op.matrix = cos2_lab_z_real(n_max).cast<Complex>();
    op.stamp = {{-2, 0, 2}, {0}};
    return op;
  }
  const auto cz = cos2_lab_z_real(n_max);
  const auto raise = sin2_raise_real(n_max);
  const Eigen::SparseMatrix<double, Eigen::RowMajor> lower = raise.transpose();
  const Complex phase_up = std::polar(0.25, -2.0 * polarization.angle);
  const Complex phase_down = std::conj(phase_up);
  AngularOperator::Matrix m = (0.5 * (identity_real(basis.size()) - cz)).cast<Complex>();
  m += phase_up * raise.cast<Complex>();
  m += phase_down * lower.cast<Complex>();
  m.makeCompressed();
  op.matrix = std::move(m);
  op.stamp = {{-2, 0, 2}, {-2, 0, 2}};
  return op;
}

AngularOperator jz_matrix(int n_max) {
  const BasisIndex basis(n_max);
  std::vector<Eigen::Triplet<Complex>> t;
  for (int i = 0; i < basis.size(); ++i) {
    if (basis.m_of(i) != 0) t.emplace_back(i, i, Complex(basis.m_of(i), 0.0));
  }
  AngularOperator op{basis, AngularOperator::Matrix(basis.size(), basis.size()), {{0}, {0}}};
  op.matrix.setFromTriplets(t.begin(), t.end());
  op.matrix.makeCompressed();
  return op;
}

std::vector<double> population_by_n(const Wavefunction& psi) {
  std::vector<double> pop(psi.n_max() + 1, 0.0);
  for (int i = 0; i < psi.basis.size(); ++i) pop[psi.basis.n_of(i)] += std::norm(psi.coefficients[i]);
  return pop;
}

double jz_expectation(const Wavefunction& psi) {
  double sum = 0.0;
  for (int i = 0; i < psi.basis.size(); ++i) sum += psi.basis.m_of(i) * std::norm(psi.coefficients[i]);
  return sum;
}

double jz_in_shell(const Wavefunction& psi, int n) {
  double sum = 0.0;
  for (int m = -n; m <= n; ++m) sum += m * std::norm(psi(n, m));
  return sum;
}

Complex coherence(const Wavefunction& psi, int n, int delta_m) {
  if (n < 0 || n + 2 > psi.n_max()) throw std::invalid_argument("coherence: N+2 exceeds n_max");
  if (delta_m != 0 && delta_m != 2 && delta_m != -2) {
    throw std::invalid_argument("coherence: delta_m must be 0 or +-2");
  }
  Complex sum = 0.0;
  for (int m = -n; m <= n; ++m) {
    const int mp = m + delta_m;
    if (std::abs(mp) > n + 2) continue;
    sum += std::conj(psi(n + 2, mp)) * psi(n, m);
  }
  return sum;
}

std::vector<std::vector<int>> coupled_blocks(
    const BasisIndex& basis, const Eigen::SparseMatrix<double, Eigen::RowMajor>& op) {
  std::vector<int> parent(basis.size());
  std::iota(parent.begin(), parent.end(), 0);
  auto root = [&](int i) {
    while (parent[i] != i) i = parent[i] = parent[parent[i]];
    return i;
  };
  for (int row = 0; row < op.outerSize(); ++row) {
    for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op, row); it; ++it) {
      const int a = root(row);
      const int b = root(static_cast<int>(it.col()));
      if (a != b) parent[std::max(a, b)] = std::min(a, b);
    }
  }
  std::vector<int> block_of(basis.size(), -1);
  std::vector<std::vector<int>> blocks;
  for (int i = 0; i < basis.size(); ++i) {
    const int r = root(i);
    if (block_of[r] < 0) {
      block_of[r] = static_cast<int>(blocks.size());
      blocks.emplace_back();
    }
    blocks[block_of[r]].push_back(i);
  }
  return blocks;
}

LegendreTable::LegendreTable(int n_max, double x)
    : n_max_(n_max), values_((n_max + 1) * (n_max + 1), 0.0) {
  const double s = std::sqrt(std::max(0.0, 1.0 - x * x));
  auto at = [&](int l, int m) -> double& { return values_[l * (n_max_ + 1) + m]; };
  double pmm = std::sqrt(1.0 / (4.0 * units::pi));
  for (int m = 0; m <= n_max; ++m) {
    if (m > 0) pmm *= -std::sqrt((2.0 * m + 1.0) / (2.0 * m)) * s;
    at(m, m) = pmm;
    if (m + 1 > n_max) break;
    at(m + 1, m) = x * std::sqrt(2.0 * m + 3.0) * pmm;
    for (int l = m + 2; l <= n_max; ++l) {
      const double a = std::sqrt((4.0 * l * l - 1.0) / (static_cast<double>(l) * l - m * m));
      const double b = std::sqrt((static_cast<double>(l - 1) * (l - 1) - m * m) /
                                 (4.0 * (l - 1) * (l - 1) - 1.0));
      at(l, m) = a * (x * at(l - 1, m) - b * at(l - 2, m));
    }
  }
}

double LegendreTable::operator()(int l, int m) const {
  const int am = std::abs(m);
  const double v = values_[l * (n_max_ + 1) + am];
  return (m < 0 && (am % 2 == 1)) ? -v : v;
}

Complex spherical_harmonic(int n, int m, double theta, double phi) {
  if (n < 0 || std::abs(m) > n) return 0.0;
  const LegendreTable table(n, std::cos(theta));
  return table(n, m) * std::polar(1.0, m * phi);
}

namespace {

// psi at the given x = cos(theta) for every phi.
void evaluate_ring(const Wavefunction& psi, const LegendreTable& table,
                   std::span<const double> phis, std::vector<Complex>& out) {
  const int n_max = psi.n_max();
  std::vector<Complex> by_m(2 * n_max + 1, 0.0);
  for (int n = 0; n <= n_max; ++n) {
    for (int m = -n; m <= n; ++m) by_m[m + n_max] += psi(n, m) * table(n, m);
  }
  out.assign(phis.size(), 0.0);
  for (std::size_t j = 0; j < phis.size(); ++j) {
    Complex sum = 0.0;
    for (int m = -n_max; m <= n_max; ++m) {
      if (by_m[m + n_max] != Complex(0.0)) sum += by_m[m + n_max] * std::polar(1.0, m * phis[j]);
    }
    out[j] = sum;
  }
}

}  // namespace

std::vector<double> angular_density(const Wavefunction& psi, std::span<const double> phis,
                                    DensitySlice slice) {
  if (phis.empty()) throw std::invalid_argument("angular_density: empty phi grid");
  std::vector<double> density(phis.size(), 0.0);
  std::vector<Complex> ring;
  if (slice == DensitySlice::equator) {
    const LegendreTable table(psi.n_max(), 0.0);
    evaluate_ring(psi, table, phis, ring);
    for (std::size_t j = 0; j < phis.size(); ++j) density[j] = std::norm(ring[j]);
    return density;
  }
  std::vector<double> nodes, weights;
  gauss_legendre(2 * psi.n_max() + 16, nodes, weights);
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const LegendreTable table(psi.n_max(), nodes[i]);
    evaluate_ring(psi, table, phis, ring);
    for (std::size_t j = 0; j < phis.size(); ++j) density[j] += weights[i] * std::norm(ring[j]);
  }
  return density;
}

std::vector<double> normalize_over_grid(std::span<const double> density) {
  if (density.empty()) throw std::invalid_argument("normalize_over_grid: empty grid");
  const double step = 2.0 * units::pi / static_cast<double>(density.size());
  double sum = 0.0;
  for (double d : density) sum += d * step;
  std::vector<double> out(density.begin(), density.end());
  if (sum > 0.0) {
    for (double& d : out) d /= sum;
  }
  return out;
}

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be >= 1");
  nodes.assign(n, 0.0);
  weights.assign(n, 0.0);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double z = std::cos(units::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p0 = 1.0, p1 = 0.0;
      for (int k = 1; k <= n; ++k) {
        const double p2 = p1;
        p1 = p0;
        p0 = ((2.0 * k - 1.0) * z * p1 - (k - 1.0) * p2) / k;
      }
      dp = n * (z * p0 - p1) / (z * z - 1.0);
      const double dz = p0 / dp;
      z -= dz;
      if (std::abs(dz) < 1e-16) break;
    }
    nodes[i] = -z;
    nodes[n - 1 - i] = z;
    weights[i] = weights[n - 1 - i] = 2.0 / ((1.0 - z * z) * dp * dp);
  }
}

SphereGrid SphereGrid::make(int n_theta, int n_phi) {
  if (n_phi < 1) throw std::invalid_argument("SphereGrid: n_phi must be >= 1");
  SphereGrid g;
  gauss_legendre(n_theta, g.cos_theta, g.weights);
  g.phis.resize(n_phi);
  for (int j = 0; j < n_phi; ++j) g.phis[j] = 2.0 * units::pi * j / n_phi;
  return g;
}

SphereGrid SphereGrid::exact_for(int n_max, int extra) {
  return make(n_max + 1 + extra, 2 * (n_max + extra) + 1);
}

Eigen::MatrixXcd grid_transform(const Wavefunction& psi, const SphereGrid& grid) {
  Eigen::MatrixXcd values(grid.n_theta(), grid.n_phi());
  std::vector<Complex> ring;
  for (int i = 0; i < grid.n_theta(); ++i) {
    const LegendreTable table(psi.n_max(), grid.cos_theta[i]);
    evaluate_ring(psi, table, grid.phis, ring);
    for (int j = 0; j < grid.n_phi(); ++j) values(i, j) = ring[j];
  }
  return values;
}

Wavefunction inverse_grid_transform(const Eigen::MatrixXcd& values, const SphereGrid& grid,
                                    int n_max) {
  if (grid.n_theta() < n_max + 1 || grid.n_phi() < 2 * n_max + 1) {
    std::ostringstream os;
    os << "grid_transform: quadrature order insufficient for N_max=" << n_max << " (need "
       << n_max + 1 << " theta nodes and " << 2 * n_max + 1 << " phi points)";
    throw NumericalGuardError(os.str());
  }
  if (values.rows() != grid.n_theta() || values.cols() != grid.n_phi()) {
    throw std::invalid_argument("inverse_grid_transform: value/grid shape mismatch");
  }
  Wavefunction psi(n_max);
  const double dphi = 2.0 * units::pi / grid.n_phi();
  // Fourier coefficients in phi for every theta ring.
  Eigen::MatrixXcd by_m(grid.n_theta(), 2 * n_max + 1);
  for (int i = 0; i < grid.n_theta(); ++i) {
    for (int m = -n_max; m <= n_max; ++m) {
      Complex sum = 0.0;
      for (int j = 0; j < grid.n_phi(); ++j) sum += values(i, j) * std::polar(1.0, -m * grid.phis[j]);
      by_m(i, m + n_max) = sum * dphi;
    }
  }
  for (int i = 0; i < grid.n_theta(); ++i) {
    const LegendreTable table(n_max, grid.cos_theta[i]);
    for (int n = 0; n <= n_max; ++n) {
      for (int m = -n; m <= n; ++m) psi(n, m) += grid.weights[i] * table(n, m) * by_m(i, m + n_max);
    }
  }
  return psi;
}

void write_wavefunction(std::ostream& os, const Wavefunction& psi, double time) {
  os << "# superrotor-wavefunction v1\n";
  os << "# n_max " << psi.n_max() << "\n";
  os << std::setprecision(17) << "# time_ps " << time << "\n";
  os << "N,M,re,im\n";
  for (int i = 0; i < psi.basis.size(); ++i) {
    const auto c = psi.coefficients[i];
    os << psi.basis.n_of(i) << "," << psi.basis.m_of(i) << "," << c.real() << "," << c.imag() << "\n";
  }
}

Wavefunction read_wavefunction(std::istream& is, double* time) {
  std::string line;
  int n_max = -1;
  double t = 0.0;
  while (std::getline(is, line)) {
    if (line.rfind("# n_max ", 0) == 0) n_max = std::stoi(line.substr(8));
    else if (line.rfind("# time_ps ", 0) == 0) t = std::stod(line.substr(10));
    else if (line == "N,M,re,im") break;
  }
  if (n_max < 0) throw IoError("read_wavefunction: missing n_max header");
  Wavefunction psi(n_max);
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream row(line);
    int n = 0, m = 0;
    double re = 0.0, im = 0.0;
    char comma = 0;
    if (!(row >> n >> comma >> m >> comma >> re >> comma >> im) || !psi.basis.contains(n, m)) {
      throw IoError("read_wavefunction: malformed row '" + line + "'");
    }
    psi(n, m) = Complex(re, im);
  }
  if (time) *time = t;
  return psi;
}

}  // namespace superrotor
