#ifndef SUPERROTOR_OBSERVABLES_HPP
#define SUPERROTOR_OBSERVABLES_HPP

// Measured quantities synthesized from trajectories.
//
// Raman sign convention: a Delta M = +2 coherence (counter-clockwise rotation
// about lab z) appears at shift +h (E(N+2) - E(N)) for a probe of handedness h,
// a Delta M = -2 coherence at -h (E(N+2) - E(N)). Positive shift therefore means
// rotation co-rotating with the probe. The probe spectral profile is a Gaussian
// whose intensity has the configured FWHM.

#include <functional>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "superrotor/propagator.hpp"

namespace superrotor {

struct ProbeSpec {
  double fwhm = 3.75;  // cm^-1
  int handedness = 1;
  std::vector<double> delays;  // ps

  void validate() const;
  /// Amplitude profile, exp(-2 ln2 x^2 / fwhm^2).
  double profile(double detuning) const;
};

struct RamanLine {
  double shift = 0.0;  // signed, cm^-1
  Complex amplitude;
  int n = 0;           // lower level of the N -> N+2 coherence
  int branch = -1;     // fine-structure component, -1 when unsplit
};

struct RamanOptions {
  bool fine_structure = false;
  double fine_structure_reference = 0.0;  // ps, time at which the split components are in phase
};

/// Lines of one record. Amplitudes are delta_alpha times the coherence.
std::vector<RamanLine> raman_lines(const Record& record, const MoleculeSpec& molecule,
                                   int handedness, const RamanOptions& options = {});

/// Lines as a function of delay.
using LineSource = std::function<std::vector<RamanLine>(double delay)>;

LineSource ensemble_lines(const EnsembleResult& result, int handedness,
                          const RamanOptions& options = {});

/// A line oscillating freely at its own shift: amplitude * exp(i 2 pi c |shift| t).
RamanLine free_line(double shift, Complex amplitude, double t);

/// Complex spectrum at the given shifts.
std::vector<Complex> raman_amplitude(std::span<const RamanLine> lines, const ProbeSpec& probe,
                                     std::span<const double> shifts);

enum class NAxisRule {
  upper_level,  // solve E(N) - E(N-2) = |shift|, label the upper level
  energy,       // solve B N(N+1) - D N^2 (N+1)^2 = |shift|
};

/// Continuous N label of a shift, NaN outside the monotone range.
double shift_to_n(const MoleculeSpec& molecule, double shift, NAxisRule rule = NAxisRule::upper_level);

struct Spectrogram {
  std::vector<double> delays;
  std::vector<double> shifts;
  std::vector<double> n_axis;  // label per shift, NaN where undefined
  Eigen::MatrixXcd amplitude;  // delays x shifts
  Eigen::MatrixXd intensity;
  int handedness = 1;
  double probe_fwhm = 0.0;
};

struct SpeciesSource {
  LineSource lines;
  double fraction = 1.0;  // number fraction; amplitudes already carry delta_alpha
};

Spectrogram mixture_spectrogram(std::span<const SpeciesSource> species, const ProbeSpec& probe,
                                std::span<const double> shifts,
                                const MoleculeSpec* axis_molecule = nullptr,
                                NAxisRule rule = NAxisRule::upper_level);

Spectrogram raman_spectrogram(const EnsembleResult& result, const ProbeSpec& probe,
                              std::span<const double> shifts, const RamanOptions& options = {},
                              NAxisRule rule = NAxisRule::upper_level);

/// Sum over shifts of |amplitude|^2 before convolution equals the sum of |line amplitude|^2.
double line_power(std::span<const RamanLine> lines);

/// Intensity of one line split into the model's three components, vs delay.
std::vector<double> fine_structure_beats(int n, const FineStructureModel* model,
                                         std::span<const double> delays);

struct PeriodSpectrum {
  std::vector<double> frequencies;  // 1/ps
  std::vector<double> power;
  double peak_frequency = 0.0;
  double peak_period = 0.0;
};

struct RevivalOptions {
  std::optional<double> expected_period;  // ps; trace must span >= 4 of them
  double min_period = 0.0;                // search window for the peak, ps
  double max_period = 0.0;                // 0 = trace length / 4
  int zero_padding = 16;
};

/// Hann-windowed, mean-removed spectrum of a uniformly sampled trace with a
/// quadratically interpolated peak.
PeriodSpectrum revival_analysis(std::span<const double> times, std::span<const double> trace,
                                const RevivalOptions& options = {});

enum class TraceKind {
  summed_intensity,  // |sum_N rho_N|^2
  real_part,         // Re sum_N rho_N
};

std::vector<double> coherence_trace(const EnsembleResult& result, std::span<const double> times,
                                    int delta_m, TraceKind kind = TraceKind::summed_intensity);

/// Dominant period of the part of a trace inside [t0, t1].
double local_period(std::span<const double> times, std::span<const double> trace, double t0,
                    double t1);

struct AngularMap {
  std::vector<double> times;
  std::vector<double> phis;
  Eigen::MatrixXd density;  // times x phis, normalized over the phi grid
};

AngularMap angular_density_map(const EnsembleResult& result, std::span<const double> times,
                               std::span<const double> phis,
                               DensitySlice slice = DensitySlice::equator);

/// Rotation frequency (THz) of the two-lobed pattern from the unwrapped phase of
/// its second angular harmonic.
double dumbbell_frequency(const AngularMap& map);

struct TrainScan {
  std::vector<double> taus;
  std::vector<int> levels;
  Eigen::MatrixXd values;  // taus x levels
};

/// Populations of N = 0..max_level after the train, for every period.
TrainScan train_period_scan(const MoleculeSpec& molecule, const ThermalWeights& weights,
                            const TrainSpec& train, std::span<const double> taus,
                            const PropagatorSettings& settings, int max_level = 7, int jobs = 0);

/// <J_z>_N / (N P_N) after the train, for every period; 0 where P_N is negligible.
TrainScan directionality_scan(const MoleculeSpec& molecule, const ThermalWeights& weights,
                              const TrainSpec& train, std::span<const double> taus,
                              const PropagatorSettings& settings, int max_level = 8, int jobs = 0);

std::vector<double> directionality(const Record& record);

struct CompositionEntry {
  int n = 0;
  double population = 0.0;
  double line_intensity = 0.0;  // probe-resolved intensity at the N -> N+2 line
};

std::vector<CompositionEntry> wavepacket_composition(const Record& record,
                                                     const MoleculeSpec& molecule,
                                                     const ProbeSpec& probe);

/// Population-weighted mean N over shells n >= min_n.
double packet_center(std::span<const double> populations, int min_n);

/// Number of shells whose population exceeds fraction * max over shells n >= min_n.
int packet_width(std::span<const double> populations, int min_n, double fraction = 0.01);

/// Total-variation distance between two distributions.
double total_variation(std::span<const double> a, std::span<const double> b);

}  // namespace superrotor

#endif  // SUPERROTOR_OBSERVABLES_HPP
