#ifndef SUPERROTOR_PROPAGATOR_HPP
#define SUPERROTOR_PROPAGATOR_HPP

// Time evolution of rotational wave packets.
//
// Kicks apply exp(i P cos^2) exactly. Free evolution multiplies c_{N,M} by
// exp(-i omega_N t), omega_N = 2 pi c E(N). Continuous fields are integrated in the
// frame co-rotating with the polarization, where the generator is
//   H' = omega_N - Omega(t) J_z - U(t) cos^2_{x'},
// with a Strang split: exact diagonal phase, Taylor-series step for the coupling.
// Snapshots are always reported in the lab frame.

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <vector>

#include "superrotor/angular_basis.hpp"
#include "superrotor/fields.hpp"
#include "superrotor/molecule.hpp"

namespace superrotor {

enum class SnapshotPolicy {
  boundaries,  // keep the state at every segment boundary
  final,       // keep only what the last free interval and the end state need
  none,        // keep derived records only
};

struct PropagatorSettings {
  int n_max = 40;
  double free_sample_step = 0.05;    // ps, output grid inside free intervals
  double driven_sample_step = 0.25;  // ps, snapshot/record spacing inside driven segments
  double steps_per_period = 50.0;    // dt <= 1/(k Omega_max), 1/(k omega_trap), FWHM/k
  std::optional<double> dt;          // fixed step; rejected if coarser than the rule
  bool richardson_check = false;     // repeat driven segments at dt/2 and compare
  double richardson_tolerance = 1e-6;
  double truncation_threshold = 1e-6;  // allowed population in the top two shells
  SnapshotPolicy snapshots = SnapshotPolicy::boundaries;
  bool store_driven_snapshots = true;
  int window_margin = 8;  // shells kept above the highest populated one while driving

  void validate() const;
};

/// Derived per-time quantities of one state.
struct Record {
  double time = 0.0;
  std::vector<double> populations;  // by N
  std::vector<double> jz_by_n;      // <J_z> restricted to shell N
  double jz = 0.0;
  // coherences[k][N] = sum_M conj(c_{N+2, M+dM}) c_{N,M}, dM = 2k - 2, N = 0..n_max-2
  std::array<std::vector<Complex>, 3> coherences;

  const std::vector<Complex>& coherence(int delta_m) const { return coherences.at(delta_m / 2 + 1); }
};

Record make_record(const Wavefunction& psi, double time);

/// Free evolution of a record's coherences (populations are constant).
Record advance_record(const Record& record, const MoleculeSpec& molecule, double dt);

struct Snapshot {
  double time = 0.0;
  Wavefunction psi;
};

class Trajectory {
 public:
  Trajectory(MoleculeSpec molecule, int n_max) : molecule_(std::move(molecule)), n_max_(n_max) {}

  const MoleculeSpec& molecule() const { return molecule_; }
  int n_max() const { return n_max_; }
  double start_time() const { return start_; }
  double end_time() const { return end_; }
  const std::vector<Snapshot>& snapshots() const { return snapshots_; }
  /// Throws under SnapshotPolicy::none.
  const Wavefunction& final_state() const;

  /// Lab-frame state at t: free intervals are reconstructed analytically, driven
  /// intervals need a stored snapshot at exactly t.
  Wavefunction state_at(double t) const;
  Record record_at(double t) const;
  bool covers(double t) const;

  /// Output grid: free_sample_step inside free intervals, driven records elsewhere.
  std::vector<double> sample_times() const;

  struct FreeInterval {
    double begin = 0.0;
    double end = 0.0;
    Record base;                  // record at begin
    std::optional<Wavefunction> state;  // state at begin, if retained
  };
  const std::vector<FreeInterval>& free_intervals() const { return free_; }
  const std::vector<Record>& driven_records() const { return driven_; }

  // Builders used by run_program.
  void begin(const Wavefunction& psi, double t, double free_sample_step);
  void add_snapshot(const Wavefunction& psi, double t);
  void add_free(const Wavefunction& psi_begin, double t_begin, double t_end, bool keep_state);
  void add_driven_record(Record record);
  void finish(const Wavefunction& psi, double t, SnapshotPolicy policy);

 private:
  MoleculeSpec molecule_;
  int n_max_;
  double start_ = 0.0;
  double end_ = 0.0;
  std::vector<Snapshot> snapshots_;
  std::vector<FreeInterval> free_;
  std::vector<Record> driven_;
  Wavefunction final_{0};
  Record final_record_;
  double free_step_ = 0.05;
};

/// exp(i P cos^2_u) psi. Throws TruncationError when the top two shells exceed the threshold.
Wavefunction apply_kick(const Wavefunction& psi, double strength, const Polarization& polarization,
                        double truncation_threshold = 1e-6);

Wavefunction propagate_free(const Wavefunction& psi, const MoleculeSpec& molecule, double dt);

/// Population in shells n_max-1 and n_max.
double top_shell_population(const Wavefunction& psi);

struct DriveReport {
  double dt = 0.0;
  long steps = 0;
  double richardson_overlap = 1.0;  // |<psi(dt)|psi(dt/2)>| if checked
  double norm_drift = 0.0;
};

/// Continuous propagation through a centrifuge segment starting at t0; the
/// segment's theta0 must be realized. Records and snapshots go to traj when given.
Wavefunction propagate_centrifuge(const Wavefunction& psi, const MoleculeSpec& molecule,
                                  const CentrifugeSpec& cfg, const PropagatorSettings& settings,
                                  double t0 = 0.0, Trajectory* traj = nullptr,
                                  DriveReport* report = nullptr);

/// Continuous propagation through a Gaussian pulse window.
Wavefunction propagate_pulse(const Wavefunction& psi, const MoleculeSpec& molecule,
                             const PulseSegment& pulse, const PropagatorSettings& settings,
                             double t0 = 0.0, Trajectory* traj = nullptr,
                             DriveReport* report = nullptr);

/// Largest step allowed for a centrifuge segment.
double centrifuge_step_limit(const MoleculeSpec& molecule, const CentrifugeSpec& cfg,
                             double steps_per_period);

Trajectory run_program(const Wavefunction& initial, const FieldProgram& program,
                       const MoleculeSpec& molecule, const PropagatorSettings& settings);

struct EnsembleMember {
  int n = 0;
  int m = 0;
  double weight = 0.0;
  Trajectory trajectory;
};

class EnsembleResult {
 public:
  std::vector<EnsembleMember> members;

  static EnsembleResult single(Trajectory trajectory);

  double total_weight() const;
  /// Incoherent weighted average; coherences average the per-member coherences.
  Record record_at(double t) const;
  std::vector<double> populations_at(double t) const { return record_at(t).populations; }
  const MoleculeSpec& molecule() const { return members.at(0).trajectory.molecule(); }
  std::vector<double> sample_times() const { return members.at(0).trajectory.sample_times(); }
  double end_time() const { return members.at(0).trajectory.end_time(); }
};

struct EnsembleOptions {
  std::uint64_t seed = 0;   // realizes random centrifuge orientations once per run
  int jobs = 0;             // worker threads, 0 = all available
};

/// Shells holding less than this fraction of the thermal weight are not propagated.
inline constexpr double kNegligibleShellWeight = 1e-12;

EnsembleResult run_ensemble(const ThermalWeights& weights, const FieldProgram& program,
                            const MoleculeSpec& molecule, const PropagatorSettings& settings,
                            const EnsembleOptions& options = {});

}  // namespace superrotor

#endif  // SUPERROTOR_PROPAGATOR_HPP
