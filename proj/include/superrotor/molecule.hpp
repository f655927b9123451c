#ifndef SUPERROTOR_MOLECULE_HPP
#define SUPERROTOR_MOLECULE_HPP

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace superrotor {

/// Effective line model for the three S-branch components that replace every
/// N -> N+2 Raman line of a molecule with electronic spin (O2). Each offset is a
/// polynomial in N (coefficients in ascending powers), in cm^-1.
struct FineStructureModel {
  std::array<std::vector<double>, 3> offsets;
  std::array<double, 3> amplitudes{1.0, 1.0, 1.0};

  double offset(int branch, int n) const;

  // Exactly three components; pairwise offsets below 0.1 cm^-1 for every N <= n_check.
  void validate(int n_check = 200) const;
};

struct MoleculeSpec {
  std::string name;
  double b = 0.0;            // rotational constant, cm^-1
  double d = 0.0;            // centrifugal constant, cm^-1
  double delta_alpha = 0.0;  // polarizability anisotropy, A^3
  double spin_weight_even = 1.0;
  double spin_weight_odd = 1.0;
  std::optional<FineStructureModel> fine_structure;

  double epsilon() const { return d / b; }
  double spin_weight(int n) const { return n % 2 == 0 ? spin_weight_even : spin_weight_odd; }
  int lowest_allowed_n() const { return spin_weight_even > 0.0 ? 0 : 1; }

  void validate() const;
};

/// Rotational term value BN(N+1) - DN^2(N+1)^2 in cm^-1.
double energy(const MoleculeSpec& spec, int n);

/// Shift of the N -> N+2 Raman line, cm^-1.
double raman_shift(const MoleculeSpec& spec, int n);

/// 1/(2Bc) in ps.
double revival_time(const MoleculeSpec& spec);

/// [8Bc(1 - 6 eps N(N+1))]^-1 in ps; rejects N outside the formula's validity.
double quarter_revival_distorted(const MoleculeSpec& spec, int n);

/// Classical rotation frequency of a molecule with angular momentum N, in THz:
/// half the shift of the (N-1) -> (N+1) line.
double classical_rotation_frequency(const MoleculeSpec& spec, int n);

/// Largest N (inclusive) up to which energy(N) is strictly increasing.
int monotone_energy_limit(const MoleculeSpec& spec);

/// Boltzmann weights over |N,M> including (2N+1) degeneracy and spin statistics.
struct ThermalWeights {
  double temperature = 0.0;
  int n_max = 0;
  std::vector<double> per_state;  // weight of each |N,M>, identical for every M of shell N

  double weight(int n, int m) const;
  double shell(int n) const { return per_state.at(n) * (2 * n + 1); }
  double total() const;
};

inline constexpr double kThermalTailTolerance = 1e-9;

/// Throws TruncationError (carrying the required n_max) when the tail above
/// n_max exceeds kThermalTailTolerance of the total weight.
ThermalWeights thermal_populations(const MoleculeSpec& spec, double temperature, int n_max);

/// Plain-text molecule database; see data/molecules.db for the schema.
class MoleculeDatabase {
 public:
  static MoleculeDatabase load(const std::filesystem::path& path);
  static MoleculeDatabase parse(const std::string& text, const std::string& source);

  const MoleculeSpec& get(const std::string& name) const;
  bool contains(const std::string& name) const { return molecules_.contains(name); }
  std::vector<std::string> names() const;

 private:
  std::map<std::string, MoleculeSpec> molecules_;
};

/// Database path: $SUPERROTOR_MOLECULE_DB if set, else the bundled file.
std::filesystem::path default_molecule_database_path();

}  // namespace superrotor

#endif  // SUPERROTOR_MOLECULE_HPP
