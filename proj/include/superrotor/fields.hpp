#ifndef SUPERROTOR_FIELDS_HPP
#define SUPERROTOR_FIELDS_HPP

// Declarative descriptions of the excitation: impulsive kicks, pulse trains,
// continuous Gaussian pulses and the optical centrifuge.
//
// Field convention: E(t) is the envelope amplitude with I = eps0 c E^2 / 2 and the
// pulse FWHM refers to the intensity profile.

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "superrotor/angular_basis.hpp"

namespace superrotor {

struct MoleculeSpec;

inline constexpr double kDefaultIntensityCap = 1e13;  // W/cm^2

struct PulseSpec {
  double center = 0.0;          // ps
  double fwhm_fs = 100.0;       // intensity FWHM
  double peak_intensity = 0.0;  // W/cm^2
  Polarization polarization;

  void validate() const;
  /// Intensity at time t (ps), W/cm^2.
  double intensity(double t) const;
};

/// P = calibration * (delta_alpha / 4 hbar) * integral E^2 dt, dimensionless.
double kick_strength(const PulseSpec& pulse, double delta_alpha, double calibration = 1.0);

/// Instantaneous-kick regime: FWHM < T_rev / 100.
bool is_impulsive(double fwhm_fs, double revival_time_ps);

struct TrainSpec {
  int count = 1;
  double period = 0.0;      // ps
  double angle_step = 0.0;  // rad, rotation of the polarization from pulse to pulse
  double start = 0.0;       // ps, time of the first pulse
  Polarization first;       // polarization of the first pulse
  std::optional<double> strength;      // every pulse has this kick strength ...
  std::optional<PulseSpec> pulse;      // ... or derives it from a pulse template
  std::vector<double> explicit_strengths;  // ... or per-pulse strengths
  double calibration = 1.0;

  void validate() const;
};

struct Kick {
  double time = 0.0;
  Polarization polarization;
  double strength = 0.0;
};

std::vector<Kick> train_kicks(const TrainSpec& train, double delta_alpha);

struct CentrifugeSpec {
  double duration = 100.0;     // ps
  double beta = 0.0;           // |angular acceleration|, rad/ps^2
  int handedness = 1;          // +1: counter-clockwise about lab z, -1: clockwise
  std::optional<double> theta0;  // rad; empty = random per shot
  double peak_intensity = 0.0;   // W/cm^2
  double ramp_on = 5.0;          // ps, linear intensity ramps
  double ramp_off = 5.0;
  std::optional<double> omega_max;  // rad/ps, terminal (release) frequency

  void validate() const;
  /// Intensity envelope in [0, 1].
  double envelope(double t) const;
  /// Time at which the rotation frequency reaches omega_max (duration if untruncated).
  double clamp_time() const;
  double terminal_frequency() const;
};

struct CentrifugeAngle {
  double angle = 0.0;  // rad
  double omega = 0.0;  // rad/ps, signed by handedness
};

CentrifugeAngle centrifuge_angle(const CentrifugeSpec& cfg, double theta0, double t);

struct FieldSpectrogram {
  std::vector<double> times;        // ps
  std::vector<double> frequencies;  // THz
  Eigen::MatrixXd intensity;        // times x frequencies
};

/// Gaussian-gated spectrogram of the two counter-rotating circular components
/// centered at carrier +- Omega(t)/2pi.
FieldSpectrogram field_spectrogram(const CentrifugeSpec& cfg, double theta0, double carrier_thz,
                                   double window_ps, std::span<const double> times,
                                   std::span<const double> frequencies);

struct TraceSlopes {
  double upper = 0.0;  // THz/ps
  double lower = 0.0;
};

/// Least-squares slopes of the ridge above and below the carrier over [t_begin, t_end].
TraceSlopes fit_trace_slopes(const FieldSpectrogram& spec, double carrier_thz, double t_begin,
                             double t_end);

struct OrientationPoint {
  double theta = 0.0;     // orientation at the probe instant
  double ex2 = 0.0;       // |E_x|^2 normalized to |E|^2
  double ey2 = 0.0;
  double estimate = 0.0;  // recovered folded orientation
};

/// Folds an orientation into [0, pi/2]: intensities of the two projections
/// cannot distinguish theta, -theta and pi - theta.
double fold_orientation(double angle);

std::vector<OrientationPoint> orientation_statistics(std::span<const double> theta0_samples,
                                                     const CentrifugeSpec& cfg,
                                                     double probe_time = 0.0);

/// Seeded generator; doubles come from the top 53 bits so sequences do not depend
/// on the standard library's distribution implementation.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::mt19937_64 engine_;
};

struct KickSegment {
  double strength = 0.0;
  Polarization polarization;
  std::optional<PulseSpec> source;  // pulse the strength was derived from
};

/// Continuous Gaussian pulse; the pulse is centered in a window of the given length.
struct PulseSegment {
  PulseSpec pulse;      // center is ignored
  double window = 0.0;  // ps
  double calibration = 1.0;  // same role as in kick_strength
};

struct FreeSegment {
  double duration = 0.0;
};

struct CentrifugeSegment {
  CentrifugeSpec spec;
};

using Segment = std::variant<KickSegment, PulseSegment, FreeSegment, CentrifugeSegment>;

double segment_duration(const Segment& segment);

struct GuardReport {
  std::vector<std::string> warnings;
  std::vector<std::string> violations;
  bool ok() const { return violations.empty(); }
};

struct FieldProgram {
  std::vector<Segment> segments;
  double intensity_cap = kDefaultIntensityCap;

  double total_duration() const;
  void append_train(const TrainSpec& train, double delta_alpha);
  /// Replaces every random centrifuge orientation with a draw from the seeded generator.
  FieldProgram realize(std::uint64_t seed) const;
  bool is_realized() const;
  /// Physics guards (intensity cap, impulsive validity) for a given molecule.
  GuardReport check(const MoleculeSpec& molecule) const;
};

}  // namespace superrotor

#endif  // SUPERROTOR_FIELDS_HPP
