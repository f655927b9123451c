#ifndef SUPERROTOR_ANGULAR_BASIS_HPP
#define SUPERROTOR_ANGULAR_BASIS_HPP

// Truncated |N,M> basis of a linear rotor and the angular operators acting on it.
//
// Spherical harmonics follow the Condon-Shortley convention:
//   Y_{N,-M} = (-1)^M conj(Y_{N,M}),  Y_{1,1} = -sqrt(3/8pi) sin(theta) e^{i phi}.
// With this choice every cos^2 matrix element is real for a polarization along
// lab z or lab x, and the Delta M = +2 coupling of an in-plane polarization at
// angle phi_p carries the phase exp(-2 i phi_p).

#include <complex>
#include <iosfwd>
#include <span>
#include <vector>

#include <Eigen/Dense>
#include <Eigen/Sparse>

namespace superrotor {

using Complex = std::complex<double>;

class BasisIndex {
 public:
  explicit BasisIndex(int n_max);

  int n_max() const { return n_max_; }
  int size() const { return (n_max_ + 1) * (n_max_ + 1); }
  bool contains(int n, int m) const { return n >= 0 && n <= n_max_ && m >= -n && m <= n; }
  int index(int n, int m) const { return n * n + n + m; }
  int n_of(int i) const { return n_of_[i]; }
  int m_of(int i) const { return m_of_[i]; }

  friend bool operator==(const BasisIndex& a, const BasisIndex& b) { return a.n_max_ == b.n_max_; }

 private:
  int n_max_;
  std::vector<int> n_of_;
  std::vector<int> m_of_;
};

struct Wavefunction {
  BasisIndex basis;
  Eigen::VectorXcd coefficients;

  explicit Wavefunction(int n_max);
  static Wavefunction basis_state(int n_max, int n, int m);

  int n_max() const { return basis.n_max(); }
  Complex& operator()(int n, int m) { return coefficients[basis.index(n, m)]; }
  Complex operator()(int n, int m) const { return coefficients[basis.index(n, m)]; }
  double norm_squared() const { return coefficients.squaredNorm(); }
  void normalize();
};

/// |<a|b>|
double overlap_magnitude(const Wavefunction& a, const Wavefunction& b);

struct Polarization {
  bool lab_z = true;
  double angle = 0.0;  // in-plane (xy) angle from lab x, rad

  static Polarization along_z() { return {true, 0.0}; }
  static Polarization in_plane(double angle) { return {false, angle}; }
};

struct SelectionStamp {
  std::vector<int> delta_n;
  std::vector<int> delta_m;
  bool allows(int dn, int dm) const;
};

struct AngularOperator {
  using Matrix = Eigen::SparseMatrix<Complex, Eigen::RowMajor>;
  BasisIndex basis;
  Matrix matrix;
  SelectionStamp stamp;

  double max_hermitian_asymmetry() const;
  /// Number of stored nonzeros outside the stamped Delta N / Delta M.
  int stamp_violations() const;
};

/// Matrix of (u . r)^2 for unit polarization u. Elements are closed-form:
/// lab z uses the cos(theta) ladder; in-plane u at angle phi_p uses
/// (u.r)^2 = (1 - cos^2)/2 + [e^{-2i phi_p} S+ + e^{2i phi_p} S-]/4 with S+ = (sin theta e^{i phi})^2,
/// i.e. the lab-z operator rotated by pi/2 about y and by phi_p about z.
AngularOperator cos2_matrix(int n_max, const Polarization& polarization);

/// Real-valued pieces of the cos^2 operators, used by the propagator.
Eigen::SparseMatrix<double, Eigen::RowMajor> cos2_lab_z_real(int n_max);
Eigen::SparseMatrix<double, Eigen::RowMajor> cos2_lab_x_real(int n_max);

/// Individual matrix elements (exact, independent of any truncation).
double cos2_element_lab_z(int n_out, int m_out, int n_in, int m_in);
/// <n_out, m_out| (sin theta e^{i phi})^2 |n_in, m_in>
double sin2_raise_element(int n_out, int m_out, int n_in, int m_in);

AngularOperator jz_matrix(int n_max);

std::vector<double> population_by_n(const Wavefunction& psi);
double jz_expectation(const Wavefunction& psi);
/// <J_z> restricted to shell N.
double jz_in_shell(const Wavefunction& psi, int n);

/// sum_M conj(c_{N+2, M+dM}) c_{N,M}
Complex coherence(const Wavefunction& psi, int n, int delta_m);

/// Index sets of the connected blocks of an operator's sparsity graph.
std::vector<std::vector<int>> coupled_blocks(const BasisIndex& basis,
                                             const Eigen::SparseMatrix<double, Eigen::RowMajor>& op);

// Normalized associated Legendre functions including the Condon-Shortley phase:
// Y_{l,m}(theta, phi) = legendre(l, m) * e^{i m phi} for m >= 0.
class LegendreTable {
 public:
  LegendreTable(int n_max, double x);
  double operator()(int l, int m) const;  // any |m| <= l, negative m carry (-1)^m

 private:
  int n_max_;
  std::vector<double> values_;
};

Complex spherical_harmonic(int n, int m, double theta, double phi);

enum class DensitySlice { equator, phi_marginal };

/// |psi(theta = pi/2, phi)|^2 on the grid, or the sin(theta)-weighted theta integral.
std::vector<double> angular_density(const Wavefunction& psi, std::span<const double> phis,
                                    DensitySlice slice = DensitySlice::equator);

/// Density rescaled so that its trapezoidal integral over a uniform periodic phi grid is 1.
std::vector<double> normalize_over_grid(std::span<const double> density);

/// Gauss-Legendre nodes (in cos theta) times a uniform periodic phi grid.
struct SphereGrid {
  std::vector<double> cos_theta;
  std::vector<double> weights;
  std::vector<double> phis;

  static SphereGrid make(int n_theta, int n_phi);
  /// Smallest grid that integrates products of two functions with N <= n_max exactly.
  static SphereGrid exact_for(int n_max, int extra = 0);
  int n_theta() const { return static_cast<int>(cos_theta.size()); }
  int n_phi() const { return static_cast<int>(phis.size()); }
};

void gauss_legendre(int n, std::vector<double>& nodes, std::vector<double>& weights);

/// Values on the grid, row-major (theta index major).
Eigen::MatrixXcd grid_transform(const Wavefunction& psi, const SphereGrid& grid);
/// Projection of grid values onto |N,M>, N <= n_max; throws if the grid is too coarse.
Wavefunction inverse_grid_transform(const Eigen::MatrixXcd& values, const SphereGrid& grid,
                                    int n_max);

void write_wavefunction(std::ostream& os, const Wavefunction& psi, double time);
Wavefunction read_wavefunction(std::istream& is, double* time = nullptr);

}  // namespace superrotor

#endif  // SUPERROTOR_ANGULAR_BASIS_HPP
