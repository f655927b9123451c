#ifndef SUPERROTOR_CONFIG_HPP
#define SUPERROTOR_CONFIG_HPP

// Run configuration: the block format of text_format.hpp with these sections,
// in file order (segments run in the order they appear):
//
//   [run]                 molecule(s), ensemble and propagation settings
//   [kick] [pulse] [train] [free] [centrifuge]
//                         field program segments
//   [output NAME]         one requested observable, selected by `kind`
//
// See configs/README.md for every key.

#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "superrotor/fields.hpp"
#include "superrotor/molecule.hpp"
#include "superrotor/observables.hpp"
#include "superrotor/propagator.hpp"

namespace superrotor {

struct KickConfig {
  std::optional<double> strength;
  std::optional<PulseSpec> pulse;
  Polarization polarization;
  double calibration = 1.0;
};

struct TrainConfig {
  TrainSpec spec;
  std::optional<double> period_trev;  // period in units of the molecule's revival time
};

struct FreeConfig {
  double duration = 0.0;
  std::optional<double> duration_trev;
};

struct CentrifugeConfig {
  CentrifugeSpec spec;
  std::optional<int> release_n;  // omega_max from the N-1 -> N+1 resonance
};

using SegmentConfig = std::variant<KickConfig, PulseSegment, TrainConfig, FreeConfig, CentrifugeConfig>;

struct Range {
  double start = 0.0;
  double stop = 0.0;
  double step = 1.0;
  std::vector<double> values() const;
};

struct PopulationsOutput {
  std::vector<double> times;  // empty = end of the program
};

struct SpectrogramOutput {
  ProbeSpec probe;
  Range delays;
  Range shifts;
  bool fine_structure = false;
  double fine_structure_reference = 0.0;
  NAxisRule n_axis = NAxisRule::upper_level;
};

struct RevivalOutput {
  Range times;
  int delta_m = 2;
  TraceKind kind = TraceKind::summed_intensity;
  RevivalOptions options;
};

struct AngularMapOutput {
  Range times;
  int phi_points = 180;
  DensitySlice slice = DensitySlice::equator;
};

struct CompositionOutput {
  std::optional<double> time;
  ProbeSpec probe;
  int min_n = 0;
};

struct TrainScanOutput {
  Range taus;
  bool in_revivals = false;  // tau values are multiples of the revival time
  int max_level = 7;
  bool directionality = false;
};

struct FieldSpectrogramOutput {
  double carrier_thz = 375.0;
  double window = 2.0;
  Range times;
  Range frequencies;
  double fit_begin = 0.0;
  double fit_end = 0.0;
};

struct OrientationOutput {
  int samples = 1000;
  double probe_time = 0.0;
};

struct BeatsOutput {
  int n = 0;
  Range delays;
};

using OutputSpec = std::variant<PopulationsOutput, SpectrogramOutput, RevivalOutput, AngularMapOutput,
                                CompositionOutput, TrainScanOutput, FieldSpectrogramOutput,
                                OrientationOutput, BeatsOutput>;

struct OutputRequest {
  std::string name;
  OutputSpec spec;
};

enum class InitialKind { thermal, state, packet };

struct RunConfig {
  std::vector<std::string> molecules;
  std::vector<double> fractions;
  double temperature = 0.0;
  std::uint64_t seed = 0;
  InitialKind initial = InitialKind::thermal;
  int initial_n = 0;
  int initial_m = 0;
  double packet_center = 0.0;
  double packet_width = 2.0;  // shells, standard deviation of the packet populations
  PropagatorSettings propagator;
  double intensity_cap = kDefaultIntensityCap;
  std::vector<SegmentConfig> segments;
  std::vector<OutputRequest> outputs;

  bool needs_states() const;
};

RunConfig parse_run_config(const std::string& text, const std::string& source);
RunConfig load_run_config(const std::string& path, std::string* raw_text = nullptr);

/// Program for one molecule (kick strengths and revival-relative times depend on it).
FieldProgram build_program(const RunConfig& config, const MoleculeSpec& molecule);

/// Initial pure state for InitialKind::state / packet.
Wavefunction initial_state(const RunConfig& config, const MoleculeSpec& molecule);

/// Resonant frequency 2 pi c [E(N+1) - E(N-1)] / 2 in rad/ps.
double resonant_frequency(const MoleculeSpec& molecule, int n);

}  // namespace superrotor

#endif  // SUPERROTOR_CONFIG_HPP
