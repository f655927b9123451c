#include "superrotor/fields.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include "superrotor/error.hpp"
#include "superrotor/molecule.hpp"
#include "superrotor/units.hpp"

namespace superrotor {
namespace {
constexpr double kFourLn2 = 2.772588722239781;
}

void PulseSpec::validate() const {
  if (!(fwhm_fs > 0.0)) throw ConfigError("pulse: FWHM must be > 0");
  if (!(peak_intensity >= 0.0)) throw ConfigError("pulse: peak intensity must be >= 0");
}

double PulseSpec::intensity(double t) const {
  const double tau = fwhm_fs * 1e-3;
  const double x = (t - center) / tau;
  return peak_intensity * std::exp(-kFourLn2 * x * x);
}

double kick_strength(const PulseSpec& pulse, double delta_alpha, double calibration) {
  pulse.validate();
  // integral of I(t) dt for a Gaussian intensity profile, J/m^2
  const double fluence = pulse.peak_intensity * 1e4 * pulse.fwhm_fs * 1e-15 *
                         std::sqrt(units::pi / kFourLn2);
  const double field_integral = 2.0 * fluence / (units::epsilon0_si * units::speed_of_light_si);
  return calibration * units::polarizability_volume_to_si(delta_alpha) * field_integral /
         (4.0 * units::hbar_si);
}

bool is_impulsive(double fwhm_fs, double revival_time_ps) {
  return fwhm_fs * 1e-3 < revival_time_ps / 100.0;
}

void TrainSpec::validate() const {
  if (count < 1) throw ConfigError("train: count must be >= 1");
  const int sources = (strength ? 1 : 0) + (pulse ? 1 : 0) + (explicit_strengths.empty() ? 0 : 1);
  if (sources != 1) {
    throw ConfigError("train: give exactly one of strength, pulse template or explicit strengths");
  }
  if (!explicit_strengths.empty() && static_cast<int>(explicit_strengths.size()) != count) {
    throw ConfigError("train: explicit strength list must have 'count' entries");
  }
  if (pulse) pulse->validate();
  if (count > 1) {
    const double fwhm_ps = pulse ? pulse->fwhm_fs * 1e-3 : 0.0;
    if (!(period > fwhm_ps) || !(period > 0.0)) {
      throw ConfigError("train: period must exceed the pulse FWHM");
    }
  }
  if (first.lab_z && angle_step != 0.0) {
    throw ConfigError("train: a polarization step requires in-plane polarization");
  }
}

std::vector<Kick> train_kicks(const TrainSpec& train, double delta_alpha) {
  train.validate();
  std::vector<Kick> kicks;
  kicks.reserve(train.count);
  const double template_strength =
      train.strength ? *train.strength
                     : (train.pulse ? kick_strength(*train.pulse, delta_alpha, train.calibration) : 0.0);
  for (int n = 0; n < train.count; ++n) {
    Kick k;
    k.time = train.start + n * train.period;
    k.polarization = train.first;
    if (!train.first.lab_z) k.polarization.angle = train.first.angle + n * train.angle_step;
    k.strength = train.explicit_strengths.empty() ? template_strength : train.explicit_strengths[n];
    kicks.push_back(k);
  }
  return kicks;
}

void CentrifugeSpec::validate() const {
  if (!(duration > 0.0)) throw ConfigError("centrifuge: duration must be > 0");
  if (!(beta >= 0.0)) throw ConfigError("centrifuge: beta must be >= 0 (use handedness for sense)");
  if (handedness != 1 && handedness != -1) throw ConfigError("centrifuge: handedness must be +1 or -1");
  if (!(peak_intensity >= 0.0)) throw ConfigError("centrifuge: peak intensity must be >= 0");
  if (!(ramp_on >= 0.0) || !(ramp_off >= 0.0) || ramp_on + ramp_off > duration) {
    throw ConfigError("centrifuge: ramps must be >= 0 and fit inside the duration");
  }
  if (omega_max && !(*omega_max > 0.0)) throw ConfigError("centrifuge: omega_max must be > 0");
}

double CentrifugeSpec::envelope(double t) const {
  if (t < 0.0 || t > duration) return 0.0;
  double e = 1.0;
  if (ramp_on > 0.0 && t < ramp_on) e = std::min(e, t / ramp_on);
  if (ramp_off > 0.0 && t > duration - ramp_off) e = std::min(e, (duration - t) / ramp_off);
  return std::clamp(e, 0.0, 1.0);
}

double CentrifugeSpec::clamp_time() const {
  if (!omega_max || beta == 0.0) return duration;
  return std::min(duration, *omega_max / beta);
}

double CentrifugeSpec::terminal_frequency() const {
  return beta * clamp_time();
}

CentrifugeAngle centrifuge_angle(const CentrifugeSpec& cfg, double theta0, double t) {
  if (t < 0.0 || t > cfg.duration) {
    throw std::invalid_argument("centrifuge_angle: t outside the centrifuge segment");
  }
  const double tc = cfg.clamp_time();
  double swept = 0.0;
  double omega = 0.0;
  if (t <= tc) {
    swept = 0.5 * cfg.beta * t * t;
    omega = cfg.beta * t;
  } else {
    omega = cfg.beta * tc;
    swept = 0.5 * cfg.beta * tc * tc + omega * (t - tc);
  }
  return {theta0 + cfg.handedness * swept, cfg.handedness * omega};
}

FieldSpectrogram field_spectrogram(const CentrifugeSpec& cfg, double theta0, double carrier_thz,
                                   double window_ps, std::span<const double> times,
                                   std::span<const double> frequencies) {
  if (!(window_ps > 0.0)) throw std::invalid_argument("field_spectrogram: window must be > 0");
  cfg.validate();
  FieldSpectrogram out;
  out.times.assign(times.begin(), times.end());
  out.frequencies.assign(frequencies.begin(), frequencies.end());
  out.intensity = Eigen::MatrixXd::Zero(times.size(), frequencies.size());

  // Baseband samples of the two circular components, e_+ = A e^{-i Theta}, e_- = A e^{+i Theta}.
  const double max_baseband = cfg.terminal_frequency() / (2.0 * units::pi) + 4.0 / window_ps;
  const double dt = std::min(0.25 / max_baseband, window_ps / 20.0);
  const double half_span = 3.0 * window_ps;
  const double gate = 2.0 * std::log(2.0) / (window_ps * window_ps);

  std::vector<double> t_samples;
  for (double t = -half_span; t <= cfg.duration + half_span; t += dt) t_samples.push_back(t);
  std::vector<Complex> plus(t_samples.size()), minus(t_samples.size());
  for (std::size_t k = 0; k < t_samples.size(); ++k) {
    const double t = t_samples[k];
    const double a = std::sqrt(cfg.envelope(t));
    if (a == 0.0) continue;
    const double theta = centrifuge_angle(cfg, theta0, t).angle;
    plus[k] = std::polar(a, -theta);
    minus[k] = std::polar(a, theta);
  }

  for (std::size_t i = 0; i < times.size(); ++i) {
    const double tc = times[i];
    const auto lo = static_cast<std::size_t>(std::max(0.0, std::floor((tc - half_span - t_samples[0]) / dt)));
    const auto hi = std::min(t_samples.size(), static_cast<std::size_t>((tc + half_span - t_samples[0]) / dt) + 1);
    for (std::size_t j = 0; j < frequencies.size(); ++j) {
      const double w = 2.0 * units::pi * (frequencies[j] - carrier_thz);
      Complex sp = 0.0, sm = 0.0;
      for (std::size_t k = lo; k < hi; ++k) {
        const double u = t_samples[k] - tc;
        const Complex kernel = std::polar(std::exp(-gate * u * u), w * t_samples[k]);
        sp += plus[k] * kernel;
        sm += minus[k] * kernel;
      }
      out.intensity(i, j) = (std::norm(sp) + std::norm(sm)) * dt * dt;
    }
  }
  return out;
}

namespace {

// Peak position within [lo, hi) of row i with parabolic refinement.
double ridge(const FieldSpectrogram& s, Eigen::Index i, std::size_t lo, std::size_t hi) {
  std::size_t best = lo;
  for (std::size_t j = lo; j < hi; ++j) {
    if (s.intensity(i, j) > s.intensity(i, best)) best = j;
  }
  if (best == lo || best + 1 >= hi) return s.frequencies[best];
  const double ym = s.intensity(i, best - 1), y0 = s.intensity(i, best), yp = s.intensity(i, best + 1);
  const double denom = ym - 2.0 * y0 + yp;
  const double shift = denom == 0.0 ? 0.0 : 0.5 * (ym - yp) / denom;
  const double step = s.frequencies[best + 1] - s.frequencies[best];
  return s.frequencies[best] + shift * step;
}

double slope(const std::vector<double>& x, const std::vector<double>& y) {
  const double n = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sx += x[k];
    sy += y[k];
    sxx += x[k] * x[k];
    sxy += x[k] * y[k];
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

}  // namespace

TraceSlopes fit_trace_slopes(const FieldSpectrogram& spec, double carrier_thz, double t_begin,
                             double t_end) {
  std::size_t split = 0;
  while (split < spec.frequencies.size() && spec.frequencies[split] < carrier_thz) ++split;
  std::vector<double> t, up, down;
  for (std::size_t i = 0; i < spec.times.size(); ++i) {
    if (spec.times[i] < t_begin || spec.times[i] > t_end) continue;
    t.push_back(spec.times[i]);
    up.push_back(ridge(spec, static_cast<Eigen::Index>(i), split, spec.frequencies.size()));
    down.push_back(ridge(spec, static_cast<Eigen::Index>(i), 0, split));
  }
  if (t.size() < 2) throw std::invalid_argument("fit_trace_slopes: fewer than two time columns");
  return {slope(t, up), slope(t, down)};
}

double fold_orientation(double angle) {
  double a = std::fmod(angle, units::pi);
  if (a < 0.0) a += units::pi;
  return a <= 0.5 * units::pi ? a : units::pi - a;
}

std::vector<OrientationPoint> orientation_statistics(std::span<const double> theta0_samples,
                                                     const CentrifugeSpec& cfg, double probe_time) {
  if (theta0_samples.empty()) throw std::invalid_argument("orientation_statistics: no samples");
  std::vector<OrientationPoint> out;
  out.reserve(theta0_samples.size());
  for (double theta0 : theta0_samples) {
    OrientationPoint p;
    p.theta = centrifuge_angle(cfg, theta0, probe_time).angle;
    const double c = std::cos(p.theta), s = std::sin(p.theta);
    p.ex2 = c * c;
    p.ey2 = s * s;
    const double total = p.ex2 + p.ey2;
    p.estimate = std::atan2(std::sqrt(p.ey2 / total), std::sqrt(p.ex2 / total));
    out.push_back(p);
  }
  return out;
}

double segment_duration(const Segment& segment) {
  return std::visit(
      [](const auto& s) -> double {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, KickSegment>) return 0.0;
        else if constexpr (std::is_same_v<T, PulseSegment>) return s.window;
        else if constexpr (std::is_same_v<T, FreeSegment>) return s.duration;
        else return s.spec.duration;
      },
      segment);
}

double FieldProgram::total_duration() const {
  double total = 0.0;
  for (const auto& s : segments) total += segment_duration(s);
  return total;
}

void FieldProgram::append_train(const TrainSpec& train, double delta_alpha) {
  const auto kicks = train_kicks(train, delta_alpha);
  for (std::size_t n = 0; n < kicks.size(); ++n) {
    if (n > 0) segments.emplace_back(FreeSegment{train.period});
    KickSegment k{kicks[n].strength, kicks[n].polarization, std::nullopt};
    if (train.pulse) {
      k.source = *train.pulse;
      k.source->polarization = kicks[n].polarization;
    }
    segments.emplace_back(k);
  }
}

FieldProgram FieldProgram::realize(std::uint64_t seed) const {
  FieldProgram out = *this;
  Rng rng(seed);
  for (auto& s : out.segments) {
    if (auto* c = std::get_if<CentrifugeSegment>(&s); c && !c->spec.theta0) {
      c->spec.theta0 = rng.uniform(0.0, units::pi);
    }
  }
  return out;
}

bool FieldProgram::is_realized() const {
  for (const auto& s : segments) {
    if (const auto* c = std::get_if<CentrifugeSegment>(&s); c && !c->spec.theta0) return false;
  }
  return true;
}

GuardReport FieldProgram::check(const MoleculeSpec& molecule) const {
  GuardReport report;
  const double t_rev = revival_time(molecule);
  auto cap_check = [&](double intensity, std::size_t index) {
    if (intensity > intensity_cap) {
      std::ostringstream os;
      os << "intensity_cap: segment " << index << " peak intensity " << intensity
         << " W/cm^2 exceeds the configured limit " << intensity_cap << " W/cm^2";
      report.warnings.push_back(os.str());
    }
  };
  for (std::size_t i = 0; i < segments.size(); ++i) {
    std::visit(
        [&](const auto& s) {
          using T = std::decay_t<decltype(s)>;
          if constexpr (std::is_same_v<T, KickSegment>) {
            if (!(s.strength >= 0.0)) report.violations.push_back("kick: strength must be >= 0");
            if (s.source) {
              cap_check(s.source->peak_intensity, i);
              if (!is_impulsive(s.source->fwhm_fs, t_rev)) {
                std::ostringstream os;
                os << "impulsive_validity: segment " << i << " FWHM " << s.source->fwhm_fs
                   << " fs is not below T_rev/100 = " << t_rev * 10.0
                   << " fs; use a continuous pulse segment";
                report.violations.push_back(os.str());
              }
            }
          } else if constexpr (std::is_same_v<T, PulseSegment>) {
            cap_check(s.pulse.peak_intensity, i);
            if (!(s.window > 0.0)) report.violations.push_back("pulse: window must be > 0");
          } else if constexpr (std::is_same_v<T, FreeSegment>) {
            if (!(s.duration >= 0.0)) report.violations.push_back("free: duration must be >= 0");
          } else {
            cap_check(s.spec.peak_intensity, i);
          }
        },
        segments[i]);
  }
  return report;
}

}  // namespace superrotor
