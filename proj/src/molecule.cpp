#include "superrotor/molecule.hpp"

#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>

#include "superrotor/error.hpp"
#include "superrotor/text_format.hpp"
#include "superrotor/units.hpp"

#ifndef SUPERROTOR_DEFAULT_MOLECULE_DB
#define SUPERROTOR_DEFAULT_MOLECULE_DB "data/molecules.db"
#endif

namespace superrotor {

double FineStructureModel::offset(int branch, int n) const {
  const auto& coeffs = offsets.at(branch);
  double value = 0.0;
  for (auto it = coeffs.rbegin(); it != coeffs.rend(); ++it) value = value * n + *it;
  return value;
}

void FineStructureModel::validate(int n_check) const {
  for (double a : amplitudes) {
    if (!(a >= 0.0)) throw ConfigError("fine structure: component amplitudes must be >= 0");
  }
  for (int n = 0; n <= n_check; ++n) {
    for (int i = 0; i < 3; ++i) {
      for (int j = i + 1; j < 3; ++j) {
        if (std::abs(offset(i, n) - offset(j, n)) >= 0.1) {
          std::ostringstream os;
          os << "fine structure: components S" << i + 1 << " and S" << j + 1
             << " differ by >= 0.1 cm^-1 at N=" << n;
          throw ConfigError(os.str());
        }
      }
    }
  }
}

void MoleculeSpec::validate() const {
  const std::string who = "molecule '" + name + "': ";
  if (!(b > 0.0)) throw ConfigError(who + "B must be > 0");
  if (!(d >= 0.0)) throw ConfigError(who + "D must be >= 0");
  if (!(d / b < 1e-3)) throw ConfigError(who + "D/B must be < 1e-3");
  if (!(delta_alpha >= 0.0)) throw ConfigError(who + "delta_alpha must be >= 0");
  if (!(spin_weight_even >= 0.0) || !(spin_weight_odd >= 0.0)) {
    throw ConfigError(who + "spin weights must be >= 0");
  }
  if (!(spin_weight_even > 0.0 || spin_weight_odd > 0.0)) {
    throw ConfigError(who + "at least one spin weight must be > 0");
  }
  if (fine_structure) fine_structure->validate();
}

namespace {
void require_nonnegative(int n, const char* what) {
  if (n < 0) throw std::invalid_argument(std::string(what) + ": N must be >= 0");
}
}  // namespace

double energy(const MoleculeSpec& spec, int n) {
  require_nonnegative(n, "energy");
  const double nn = static_cast<double>(n) * (n + 1);
  return spec.b * nn - spec.d * nn * nn;
}

double raman_shift(const MoleculeSpec& spec, int n) {
  require_nonnegative(n, "raman_shift");
  return energy(spec, n + 2) - energy(spec, n);
}

double revival_time(const MoleculeSpec& spec) {
  if (!(spec.b > 0.0)) throw std::invalid_argument("revival_time: B must be > 0");
  return 1.0 / (2.0 * spec.b * units::speed_of_light_cm_per_ps);
}

double quarter_revival_distorted(const MoleculeSpec& spec, int n) {
  require_nonnegative(n, "quarter_revival_distorted");
  const double stretch = 6.0 * spec.epsilon() * n * (n + 1.0);
  if (!(stretch < 1.0)) {
    throw std::invalid_argument("quarter_revival_distorted: 6 eps N(N+1) >= 1, formula invalid");
  }
  return 1.0 / (8.0 * spec.b * units::speed_of_light_cm_per_ps * (1.0 - stretch));
}

double classical_rotation_frequency(const MoleculeSpec& spec, int n) {
  if (n < 1) throw std::invalid_argument("classical_rotation_frequency: N must be >= 1");
  return units::wavenumber_to_thz(0.5 * raman_shift(spec, n - 1));
}

int monotone_energy_limit(const MoleculeSpec& spec) {
  if (spec.d == 0.0) return std::numeric_limits<int>::max();
  // E(N+1) > E(N)  <=>  (N+1)(N+2) + N(N+1) < B/D
  int n = 0;
  while (energy(spec, n + 1) > energy(spec, n)) ++n;
  return n;
}

double ThermalWeights::weight(int n, int m) const {
  if (n < 0 || n > n_max || std::abs(m) > n) return 0.0;
  return per_state[n];
}

double ThermalWeights::total() const {
  double sum = 0.0;
  for (int n = 0; n <= n_max; ++n) sum += shell(n);
  return sum;
}

ThermalWeights thermal_populations(const MoleculeSpec& spec, double temperature, int n_max) {
  if (!(temperature >= 0.0)) throw std::invalid_argument("thermal_populations: T must be >= 0");
  if (n_max < 0) throw std::invalid_argument("thermal_populations: n_max must be >= 0");

  ThermalWeights out;
  out.temperature = temperature;
  out.n_max = n_max;
  out.per_state.assign(n_max + 1, 0.0);

  const int lowest = spec.lowest_allowed_n();
  if (lowest > n_max) {
    throw TruncationError("thermal_populations: basis excludes the lowest allowed level", lowest);
  }
  if (temperature == 0.0) {
    out.per_state[lowest] = 1.0 / (2 * lowest + 1);
    return out;
  }

  // Boltzmann factors relative to the lowest allowed level keep the sum O(1).
  const double beta = units::second_radiation_constant / temperature;
  const double e0 = energy(spec, lowest);
  auto shell_weight = [&](int n) {
    return spec.spin_weight(n) * (2 * n + 1) * std::exp(-beta * (energy(spec, n) - e0));
  };

  double kept = 0.0;
  for (int n = 0; n <= n_max; ++n) {
    const double w = shell_weight(n);
    out.per_state[n] = w / (2 * n + 1);
    kept += w;
  }

  // Tail above n_max: summed until terms are negligible (terms decay super-exponentially).
  const int limit = std::min(monotone_energy_limit(spec), n_max + 100000);
  double tail = 0.0;
  int required = n_max;
  double running = kept;
  for (int n = n_max + 1; n <= limit; ++n) {
    const double w = shell_weight(n);
    tail += w;
    running += w;
    if (w < 1e-30 * running && n > n_max + 10) break;
  }
  if (tail > kThermalTailTolerance * (kept + tail)) {
    double remaining = tail;
    required = n_max;
    while (remaining > kThermalTailTolerance * (kept + tail) && required < limit) {
      ++required;
      remaining -= shell_weight(required);
    }
    std::ostringstream os;
    os << "thermal_populations: tail above N_max=" << n_max << " is " << tail / (kept + tail)
       << " of the total at T=" << temperature << " K; need N_max >= " << required;
    throw TruncationError(os.str(), required);
  }

  for (auto& w : out.per_state) w /= kept;
  return out;
}

MoleculeDatabase MoleculeDatabase::parse(const std::string& text, const std::string& source) {
  MoleculeDatabase db;
  for (const auto& section : parse_sections(text, source)) {
    if (section.kind != "molecule") {
      throw ConfigError(source + ":" + std::to_string(section.line) + ": unexpected section [" +
                        section.kind + "]");
    }
    if (section.label.empty()) {
      throw ConfigError(source + ":" + std::to_string(section.line) + ": molecule needs a name");
    }
    SectionReader r(section, source);
    MoleculeSpec spec;
    spec.name = section.label;
    spec.b = r.number("B");
    spec.d = r.number("D", 0.0);
    spec.delta_alpha = r.number("delta_alpha");
    spec.spin_weight_even = r.number("spin_weight_even", 1.0);
    spec.spin_weight_odd = r.number("spin_weight_odd", 1.0);
    if (r.has("fine_structure.S1") || r.has("fine_structure.S2") || r.has("fine_structure.S3")) {
      FineStructureModel fs;
      fs.offsets[0] = r.numbers("fine_structure.S1");
      fs.offsets[1] = r.numbers("fine_structure.S2");
      fs.offsets[2] = r.numbers("fine_structure.S3");
      if (r.has("fine_structure.amplitudes")) {
        const auto amps = r.numbers("fine_structure.amplitudes");
        if (amps.size() != 3) r.fail("fine_structure.amplitudes", "expected three values");
        std::copy(amps.begin(), amps.end(), fs.amplitudes.begin());
      }
      spec.fine_structure = fs;
    }
    r.finish();
    spec.validate();
    if (db.molecules_.contains(spec.name)) {
      throw ConfigError(source + ": duplicate molecule '" + spec.name + "'");
    }
    db.molecules_.emplace(spec.name, std::move(spec));
  }
  return db;
}

MoleculeDatabase MoleculeDatabase::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open molecule database '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse(buffer.str(), path.string());
}

const MoleculeSpec& MoleculeDatabase::get(const std::string& name) const {
  const auto it = molecules_.find(name);
  if (it == molecules_.end()) throw ConfigError("unknown molecule '" + name + "'");
  return it->second;
}

std::vector<std::string> MoleculeDatabase::names() const {
  std::vector<std::string> out;
  for (const auto& [name, spec] : molecules_) out.push_back(name);
  return out;
}

std::filesystem::path default_molecule_database_path() {
  if (const char* env = std::getenv("SUPERROTOR_MOLECULE_DB"); env && *env) return env;
  return SUPERROTOR_DEFAULT_MOLECULE_DB;
}

}  // namespace superrotor
