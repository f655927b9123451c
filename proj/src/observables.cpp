#include "superrotor/observables.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <mutex>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <fftw3.h>

#include "superrotor/error.hpp"
#include "superrotor/units.hpp"

namespace superrotor {

namespace {
constexpr double kTwoLn2 = 1.3862943611198906;
}

void ProbeSpec::validate() const {
  if (!(fwhm > 0.0)) throw ConfigError("probe: FWHM must be > 0");
  if (handedness != 1 && handedness != -1) throw ConfigError("probe: handedness must be +1 or -1");
}

double ProbeSpec::profile(double detuning) const {
  return std::exp(-kTwoLn2 * detuning * detuning / (fwhm * fwhm));
}

std::vector<RamanLine> raman_lines(const Record& record, const MoleculeSpec& molecule,
                                   int handedness, const RamanOptions& options) {
  if (handedness != 1 && handedness != -1) {
    throw std::invalid_argument("raman_lines: handedness must be +1 or -1");
  }
  const FineStructureModel* fs = nullptr;
  double amplitude_sum = 1.0;
  if (options.fine_structure) {
    if (!molecule.fine_structure) {
      throw ConfigError("raman: fine structure requested but molecule '" + molecule.name +
                        "' has no fine-structure model");
    }
    fs = &*molecule.fine_structure;
    amplitude_sum = fs->amplitudes[0] + fs->amplitudes[1] + fs->amplitudes[2];
  }
  std::vector<RamanLine> lines;
  const int count = static_cast<int>(record.coherence(2).size());
  for (int dm : {-2, 2}) {
    const auto& coh = record.coherence(dm);
    const int sign = dm > 0 ? handedness : -handedness;
    for (int n = 0; n < count; ++n) {
      if (coh[n] == Complex(0.0, 0.0)) continue;
      const double delta_e = raman_shift(molecule, n);
      const Complex a = molecule.delta_alpha * coh[n];
      if (!fs) {
        lines.push_back({sign * delta_e, a, n, -1});
        continue;
      }
      for (int b = 0; b < 3; ++b) {
        const double offset = fs->offset(b, n);
        const double phase = units::wavenumber_to_angular(offset) *
                             (record.time - options.fine_structure_reference);
        lines.push_back({sign * (delta_e + offset),
                         a * (fs->amplitudes[b] / amplitude_sum) * std::polar(1.0, phase), n, b});
      }
    }
  }
  return lines;
}

LineSource ensemble_lines(const EnsembleResult& result, int handedness, const RamanOptions& options) {
  return [&result, handedness, options](double delay) {
    return raman_lines(result.record_at(delay), result.molecule(), handedness, options);
  };
}

RamanLine free_line(double shift, Complex amplitude, double t) {
  RamanLine line;
  line.shift = shift;
  line.amplitude = amplitude * std::polar(1.0, units::wavenumber_to_angular(std::abs(shift)) * t);
  return line;
}

std::vector<Complex> raman_amplitude(std::span<const RamanLine> lines, const ProbeSpec& probe,
                                     std::span<const double> shifts) {
  probe.validate();
  std::vector<Complex> out(shifts.size(), Complex(0.0, 0.0));
  const double reach = 6.0 * probe.fwhm;
  for (const auto& line : lines) {
    for (std::size_t k = 0; k < shifts.size(); ++k) {
      const double d = shifts[k] - line.shift;
      if (std::abs(d) > reach) continue;
      out[k] += line.amplitude * probe.profile(d);
    }
  }
  return out;
}

double line_power(std::span<const RamanLine> lines) {
  double p = 0.0;
  for (const auto& l : lines) p += std::norm(l.amplitude);
  return p;
}

namespace {

double continuous_energy(const MoleculeSpec& m, double x) {
  const double j = x * (x + 1.0);
  return m.b * j - m.d * j * j;
}

// Monotone inversion of f on [lo, hi] by bisection; NaN outside the range.
template <class F>
double invert(F f, double target, double lo, double hi) {
  if (target < f(lo) || target > f(hi)) return std::numeric_limits<double>::quiet_NaN();
  for (int it = 0; it < 200 && hi - lo > 1e-13 * std::max(1.0, hi); ++it) {
    const double mid = 0.5 * (lo + hi);
    (f(mid) < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

}  // namespace

double shift_to_n(const MoleculeSpec& molecule, double shift, NAxisRule rule) {
  const double target = std::abs(shift);
  if (rule == NAxisRule::energy) {
    double hi = 1e6;
    if (molecule.d > 0.0) {
      // dE/dx = (2x+1)(B - 2D x(x+1)) vanishes at x(x+1) = B/2D
      hi = 0.5 * (-1.0 + std::sqrt(1.0 + 2.0 * molecule.b / molecule.d));
    }
    return invert([&](double x) { return continuous_energy(molecule, x); }, target, 0.0, hi);
  }
  auto g = [&](double x) { return continuous_energy(molecule, x) - continuous_energy(molecule, x - 2.0); };
  double hi = 1e6;
  if (molecule.d > 0.0) {
    // g is increasing up to its first stationary point; locate it on a coarse grid.
    double x = 0.5;
    while (g(x + 0.5) > g(x) && x < 1e6) x += 0.5;
    hi = x;
  }
  return invert(g, target, 0.5, hi);
}

Spectrogram mixture_spectrogram(std::span<const SpeciesSource> species, const ProbeSpec& probe,
                                std::span<const double> shifts, const MoleculeSpec* axis_molecule,
                                NAxisRule rule) {
  probe.validate();
  if (species.empty()) throw ConfigError("mixture: no species");
  double total = 0.0;
  for (const auto& s : species) {
    if (!(s.fraction >= 0.0)) throw ConfigError("mixture: fractions must be >= 0");
    total += s.fraction;
  }
  if (std::abs(total - 1.0) > 1e-12) throw ConfigError("mixture: fractions must sum to 1");
  if (probe.delays.empty()) throw ConfigError("probe: empty delay grid");

  Spectrogram out;
  out.delays = probe.delays;
  out.shifts.assign(shifts.begin(), shifts.end());
  out.handedness = probe.handedness;
  out.probe_fwhm = probe.fwhm;
  out.n_axis.resize(shifts.size(), std::numeric_limits<double>::quiet_NaN());
  if (axis_molecule) {
    for (std::size_t k = 0; k < shifts.size(); ++k) out.n_axis[k] = shift_to_n(*axis_molecule, shifts[k], rule);
  }
  const auto rows = static_cast<Eigen::Index>(out.delays.size());
  out.amplitude = Eigen::MatrixXcd::Zero(rows, static_cast<Eigen::Index>(shifts.size()));
  std::vector<std::exception_ptr> errors(out.delays.size());
#pragma omp parallel for schedule(dynamic)
  for (Eigen::Index i = 0; i < rows; ++i) {
    try {
      for (const auto& s : species) {
        const auto lines = s.lines(out.delays[i]);
        const auto amp = raman_amplitude(lines, probe, shifts);
        for (std::size_t k = 0; k < shifts.size(); ++k) {
          out.amplitude(i, static_cast<Eigen::Index>(k)) += s.fraction * amp[k];
        }
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  out.intensity = out.amplitude.cwiseAbs2();
  return out;
}

Spectrogram raman_spectrogram(const EnsembleResult& result, const ProbeSpec& probe,
                              std::span<const double> shifts, const RamanOptions& options,
                              NAxisRule rule) {
  for (double t : probe.delays) {
    for (const auto& m : result.members) {
      if (!m.trajectory.covers(t)) {
        std::ostringstream os;
        os << "raman: probe delay " << t << " ps is outside the trajectory";
        throw ConfigError(os.str());
      }
    }
  }
  const SpeciesSource single{ensemble_lines(result, probe.handedness, options), 1.0};
  return mixture_spectrogram(std::span(&single, 1), probe, shifts, &result.molecule(), rule);
}

std::vector<double> fine_structure_beats(int n, const FineStructureModel* model,
                                         std::span<const double> delays) {
  if (!model) throw ConfigError("fine_structure_beats: no fine-structure model");
  const double sum = model->amplitudes[0] + model->amplitudes[1] + model->amplitudes[2];
  std::vector<double> out;
  out.reserve(delays.size());
  for (double t : delays) {
    Complex a(0.0, 0.0);
    for (int b = 0; b < 3; ++b) {
      a += model->amplitudes[b] * std::polar(1.0, units::wavenumber_to_angular(model->offset(b, n)) * t);
    }
    out.push_back(std::norm(a) / (sum * sum));
  }
  return out;
}

namespace {
std::mutex fftw_planner_mutex;
}

PeriodSpectrum revival_analysis(std::span<const double> times, std::span<const double> trace,
                                const RevivalOptions& options) {
  const std::size_t n = times.size();
  if (n != trace.size()) throw std::invalid_argument("revival_analysis: size mismatch");
  if (n < 16) throw NumericalGuardError("revival_analysis: trace too short (fewer than 16 samples)");
  const double dt = (times[n - 1] - times[0]) / static_cast<double>(n - 1);
  for (std::size_t k = 1; k < n; ++k) {
    if (std::abs(times[k] - times[k - 1] - dt) > 1e-6 * dt) {
      throw std::invalid_argument("revival_analysis: times must be uniformly spaced");
    }
  }
  const double length = times[n - 1] - times[0];
  if (options.expected_period && length < 4.0 * *options.expected_period) {
    std::ostringstream os;
    os << "revival_analysis: trace too short (" << length << " ps < 4 x " << *options.expected_period
       << " ps)";
    throw NumericalGuardError(os.str());
  }

  const double mean = std::accumulate(trace.begin(), trace.end(), 0.0) / static_cast<double>(n);
  std::size_t padded = 1;
  while (padded < n * static_cast<std::size_t>(std::max(1, options.zero_padding))) padded <<= 1;
  std::vector<double> input(padded, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double w = 0.5 - 0.5 * std::cos(2.0 * units::pi * static_cast<double>(k) / static_cast<double>(n - 1));
    input[k] = (trace[k] - mean) * w;
  }
  std::vector<fftw_complex> output(padded / 2 + 1);
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    plan = fftw_plan_dft_r2c_1d(static_cast<int>(padded), input.data(), output.data(), FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex);
    fftw_destroy_plan(plan);
  }

  PeriodSpectrum out;
  const double df = 1.0 / (static_cast<double>(padded) * dt);
  out.frequencies.resize(output.size());
  out.power.resize(output.size());
  for (std::size_t k = 0; k < output.size(); ++k) {
    out.frequencies[k] = static_cast<double>(k) * df;
    out.power[k] = output[k][0] * output[k][0] + output[k][1] * output[k][1];
  }
  const double max_period = options.max_period > 0.0 ? options.max_period : length / 4.0;
  const double f_lo = 1.0 / max_period;
  const double f_hi = options.min_period > 0.0 ? 1.0 / options.min_period : out.frequencies.back();
  std::size_t best = 0;
  for (std::size_t k = 1; k + 1 < out.power.size(); ++k) {
    if (out.frequencies[k] < f_lo || out.frequencies[k] > f_hi) continue;
    if (best == 0 || out.power[k] > out.power[best]) best = k;
  }
  if (best == 0) throw NumericalGuardError("revival_analysis: no spectral peak inside the period window");
  const double ym = out.power[best - 1], y0 = out.power[best], yp = out.power[best + 1];
  const double denom = ym - 2.0 * y0 + yp;
  const double shift = denom == 0.0 ? 0.0 : 0.5 * (ym - yp) / denom;
  out.peak_frequency = (static_cast<double>(best) + shift) * df;
  out.peak_period = 1.0 / out.peak_frequency;
  return out;
}

std::vector<double> coherence_trace(const EnsembleResult& result, std::span<const double> times,
                                    int delta_m, TraceKind kind) {
  if (delta_m != -2 && delta_m != 0 && delta_m != 2) {
    throw std::invalid_argument("coherence_trace: delta_m must be -2, 0 or 2");
  }
  std::vector<double> out(times.size());
  std::vector<std::exception_ptr> errors(times.size());
#pragma omp parallel for schedule(static)
  for (std::size_t i = 0; i < times.size(); ++i) {
    try {
      const Record r = result.record_at(times[i]);
      Complex sum(0.0, 0.0);
      for (const auto& c : r.coherence(delta_m)) sum += c;
      out[i] = kind == TraceKind::summed_intensity ? std::norm(sum) : sum.real();
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return out;
}

double local_period(std::span<const double> times, std::span<const double> trace, double t0,
                    double t1) {
  std::vector<double> t, y;
  for (std::size_t k = 0; k < times.size(); ++k) {
    if (times[k] >= t0 && times[k] <= t1) {
      t.push_back(times[k]);
      y.push_back(trace[k]);
    }
  }
  return revival_analysis(t, y).peak_period;
}

AngularMap angular_density_map(const EnsembleResult& result, std::span<const double> times,
                               std::span<const double> phis, DensitySlice slice) {
  if (phis.empty()) throw std::invalid_argument("angular_density_map: empty phi grid");
  AngularMap map;
  map.times.assign(times.begin(), times.end());
  map.phis.assign(phis.begin(), phis.end());
  map.density = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(times.size()),
                                      static_cast<Eigen::Index>(phis.size()));
  const double total = result.total_weight();
  std::vector<std::exception_ptr> errors(times.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < times.size(); ++i) {
    try {
      std::vector<double> row(phis.size(), 0.0);
      for (const auto& m : result.members) {
        const auto d = angular_density(m.trajectory.state_at(times[i]), phis, slice);
        for (std::size_t k = 0; k < phis.size(); ++k) row[k] += m.weight / total * d[k];
      }
      const auto normalized = normalize_over_grid(row);
      for (std::size_t k = 0; k < phis.size(); ++k) {
        map.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = normalized[k];
      }
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  return map;
}

namespace {

double fit_slope(const std::vector<double>& x, const std::vector<double>& y) {
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

double dumbbell_frequency(const AngularMap& map) {
  if (map.times.size() < 2) throw std::invalid_argument("dumbbell_frequency: need two times");
  std::vector<double> angles;
  double previous = 0.0;
  for (Eigen::Index i = 0; i < map.density.rows(); ++i) {
    Complex h(0.0, 0.0);
    for (Eigen::Index k = 0; k < map.density.cols(); ++k) {
      h += map.density(i, k) * std::polar(1.0, 2.0 * map.phis[static_cast<std::size_t>(k)]);
    }
    double a = 0.5 * std::arg(h);
    if (!angles.empty()) {
      while (a - previous > 0.5 * units::pi) a -= units::pi;
      while (a - previous < -0.5 * units::pi) a += units::pi;
    }
    angles.push_back(a);
    previous = a;
  }
  return fit_slope(map.times, angles) / (2.0 * units::pi);
}

std::vector<double> directionality(const Record& record) {
  std::vector<double> out(record.populations.size(), 0.0);
  for (std::size_t n = 1; n < out.size(); ++n) {
    if (record.populations[n] > 1e-12) {
      out[n] = record.jz_by_n[n] / (static_cast<double>(n) * record.populations[n]);
    }
  }
  return out;
}

namespace {

template <class Extract>
TrainScan scan_train(const MoleculeSpec& molecule, const ThermalWeights& weights,
                     const TrainSpec& train, std::span<const double> taus,
                     const PropagatorSettings& settings, int max_level, int jobs, Extract extract) {
  if (taus.empty()) throw ConfigError("scan: empty period range");
  if (max_level > settings.n_max) throw ConfigError("scan: max level exceeds n_max");
  PropagatorSettings quiet = settings;
  quiet.snapshots = SnapshotPolicy::none;
  quiet.store_driven_snapshots = false;
  TrainScan scan;
  scan.taus.assign(taus.begin(), taus.end());
  for (int n = 0; n <= max_level; ++n) scan.levels.push_back(n);
  scan.values = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(taus.size()), max_level + 1);
  for (std::size_t i = 0; i < taus.size(); ++i) {
    TrainSpec t = train;
    t.period = taus[i];
    FieldProgram program;
    program.append_train(t, molecule.delta_alpha);
    EnsembleOptions options;
    options.jobs = jobs;
    const EnsembleResult result = run_ensemble(weights, program, molecule, quiet, options);
    const Record r = result.record_at(result.end_time());
    const std::vector<double> v = extract(r);
    for (int n = 0; n <= max_level; ++n) scan.values(static_cast<Eigen::Index>(i), n) = v[n];
  }
  return scan;
}

}  // namespace

TrainScan train_period_scan(const MoleculeSpec& molecule, const ThermalWeights& weights,
                            const TrainSpec& train, std::span<const double> taus,
                            const PropagatorSettings& settings, int max_level, int jobs) {
  return scan_train(molecule, weights, train, taus, settings, max_level, jobs,
                    [](const Record& r) { return r.populations; });
}

TrainScan directionality_scan(const MoleculeSpec& molecule, const ThermalWeights& weights,
                              const TrainSpec& train, std::span<const double> taus,
                              const PropagatorSettings& settings, int max_level, int jobs) {
  return scan_train(molecule, weights, train, taus, settings, max_level, jobs,
                    [](const Record& r) { return directionality(r); });
}

std::vector<CompositionEntry> wavepacket_composition(const Record& record,
                                                     const MoleculeSpec& molecule,
                                                     const ProbeSpec& probe) {
  probe.validate();
  const auto lines = raman_lines(record, molecule, probe.handedness);
  std::vector<CompositionEntry> out;
  for (std::size_t n = 0; n < record.populations.size(); ++n) {
    CompositionEntry e;
    e.n = static_cast<int>(n);
    e.population = record.populations[n];
    if (n + 2 < record.populations.size()) {
      const double s = raman_shift(molecule, static_cast<int>(n));
      const std::array<double, 2> at{s, -s};
      const auto amp = raman_amplitude(lines, probe, at);
      e.line_intensity = std::norm(amp[0]) + std::norm(amp[1]);
    }
    out.push_back(e);
  }
  return out;
}

double packet_center(std::span<const double> populations, int min_n) {
  double w = 0.0, s = 0.0;
  for (std::size_t n = static_cast<std::size_t>(std::max(0, min_n)); n < populations.size(); ++n) {
    w += populations[n];
    s += static_cast<double>(n) * populations[n];
  }
  if (w <= 0.0) return std::numeric_limits<double>::quiet_NaN();
  return s / w;
}

int packet_width(std::span<const double> populations, int min_n, double fraction) {
  double peak = 0.0;
  for (std::size_t n = static_cast<std::size_t>(std::max(0, min_n)); n < populations.size(); ++n) {
    peak = std::max(peak, populations[n]);
  }
  int count = 0;
  for (std::size_t n = static_cast<std::size_t>(std::max(0, min_n)); n < populations.size(); ++n) {
    if (populations[n] > fraction * peak) ++count;
  }
  return count;
}

double total_variation(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = std::max(a.size(), b.size());
  double tv = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    const double x = k < a.size() ? a[k] : 0.0;
    const double y = k < b.size() ? b[k] : 0.0;
    tv += std::abs(x - y);
  }
  return 0.5 * tv;
}

}  // namespace superrotor
