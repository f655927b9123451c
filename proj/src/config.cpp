#include "superrotor/config.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

#include "superrotor/error.hpp"
#include "superrotor/text_format.hpp"
#include "superrotor/units.hpp"

namespace superrotor {

std::vector<double> Range::values() const {
  if (!(step > 0.0)) throw ConfigError("range: step must be > 0");
  if (stop < start) throw ConfigError("range: stop must be >= start");
  const auto count = static_cast<long>(std::floor((stop - start) / step + 1e-9)) + 1;
  if (count > 10'000'000) throw ConfigError("range: more than 1e7 points");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (long k = 0; k < count; ++k) out.push_back(start + static_cast<double>(k) * step);
  return out;
}

bool RunConfig::needs_states() const {
  for (const auto& o : outputs) {
    if (std::holds_alternative<AngularMapOutput>(o.spec)) return true;
  }
  return false;
}

namespace {

std::vector<std::string> split_list(const std::string& value) {
  std::vector<std::string> out;
  std::string item;
  for (char c : value + ",") {
    if (c == ',') {
      const auto b = item.find_first_not_of(" \t");
      const auto e = item.find_last_not_of(" \t");
      if (b != std::string::npos) out.push_back(item.substr(b, e - b + 1));
      item.clear();
    } else {
      item += c;
    }
  }
  return out;
}

Polarization read_polarization(const SectionReader& r, std::string_view fallback) {
  const std::string p = r.text("polarization", fallback);
  if (p == "z") return Polarization::along_z();
  return Polarization::in_plane(units::degrees(parse_double(p, "polarization")));
}

Range read_range(const SectionReader& r, const std::string& prefix, std::optional<Range> fallback = {}) {
  Range out;
  if (fallback && !r.has(prefix + "_start") && !r.has(prefix + "_stop") && !r.has(prefix + "_step")) {
    return *fallback;
  }
  out.start = r.number(prefix + "_start");
  out.stop = r.number(prefix + "_stop");
  out.step = r.number(prefix + "_step");
  out.values();
  return out;
}

std::optional<PulseSpec> read_pulse(const SectionReader& r, const Polarization& polarization) {
  if (!r.has("fwhm_fs") && !r.has("intensity")) return std::nullopt;
  PulseSpec p;
  p.fwhm_fs = r.number("fwhm_fs");
  p.peak_intensity = r.number("intensity");
  p.polarization = polarization;
  try {
    p.validate();
  } catch (const ConfigError& e) {
    r.fail("fwhm_fs", e.what());
  }
  return p;
}

ProbeSpec read_probe(const SectionReader& r) {
  ProbeSpec p;
  p.fwhm = r.number("probe_fwhm", 3.75);
  p.handedness = static_cast<int>(r.integer("handedness", 1));
  try {
    p.validate();
  } catch (const ConfigError& e) {
    r.fail("probe_fwhm", e.what());
  }
  return p;
}

void read_run(const SectionReader& r, RunConfig& c) {
  c.molecules = split_list(r.text("molecule"));
  if (c.molecules.empty()) r.fail("molecule", "at least one molecule is required");
  if (r.has("fractions")) {
    c.fractions = r.numbers("fractions");
  } else {
    c.fractions.assign(c.molecules.size(), 1.0 / static_cast<double>(c.molecules.size()));
  }
  if (c.fractions.size() != c.molecules.size()) r.fail("fractions", "one fraction per molecule");
  double total = 0.0;
  for (double f : c.fractions) {
    if (!(f >= 0.0)) r.fail("fractions", "fractions must be >= 0");
    total += f;
  }
  if (std::abs(total - 1.0) > 1e-12) r.fail("fractions", "fractions must sum to 1");

  c.temperature = r.number("temperature", 0.0);
  if (!(c.temperature >= 0.0)) r.fail("temperature", "must be >= 0");
  const long seed = r.integer("seed", 0);
  if (seed < 0) r.fail("seed", "must be >= 0");
  c.seed = static_cast<std::uint64_t>(seed);

  const std::string initial = r.text("initial", "thermal");
  if (initial == "thermal") {
    c.initial = InitialKind::thermal;
  } else if (initial == "state") {
    c.initial = InitialKind::state;
    c.initial_n = static_cast<int>(r.integer("initial_n"));
    c.initial_m = static_cast<int>(r.integer("initial_m", 0));
  } else if (initial == "packet") {
    c.initial = InitialKind::packet;
    c.packet_center = r.number("packet_center");
    c.packet_width = r.number("packet_width", 2.0);
    if (!(c.packet_width > 0.0)) r.fail("packet_width", "must be > 0");
  } else {
    r.fail("initial", "expected thermal, state or packet");
  }

  auto& p = c.propagator;
  p.n_max = static_cast<int>(r.integer("n_max"));
  p.free_sample_step = r.number("free_sample_step", p.free_sample_step);
  p.driven_sample_step = r.number("driven_sample_step", p.driven_sample_step);
  p.steps_per_period = r.number("steps_per_period", p.steps_per_period);
  p.dt = r.optional_number("dt");
  p.richardson_check = r.boolean("richardson", p.richardson_check);
  p.richardson_tolerance = r.number("richardson_tolerance", p.richardson_tolerance);
  p.truncation_threshold = r.number("truncation_threshold", p.truncation_threshold);
  p.window_margin = static_cast<int>(r.integer("window_margin", p.window_margin));
  try {
    p.validate();
  } catch (const ConfigError& e) {
    r.fail("n_max", e.what());
  }
  c.intensity_cap = r.number("intensity_cap", c.intensity_cap);
  if (!(c.intensity_cap > 0.0)) r.fail("intensity_cap", "must be > 0");
}

SegmentConfig read_kick(const SectionReader& r) {
  KickConfig k;
  k.polarization = read_polarization(r, "z");
  k.calibration = r.number("calibration", 1.0);
  k.strength = r.optional_number("strength");
  k.pulse = read_pulse(r, k.polarization);
  if (k.strength.has_value() == k.pulse.has_value()) {
    r.fail("strength", "give either strength or fwhm_fs + intensity");
  }
  if (k.strength && !(*k.strength >= 0.0)) r.fail("strength", "must be >= 0");
  return k;
}

SegmentConfig read_pulse_segment(const SectionReader& r) {
  PulseSegment p;
  const auto pol = read_polarization(r, "z");
  auto pulse = read_pulse(r, pol);
  if (!pulse) r.fail("fwhm_fs", "continuous pulse needs fwhm_fs and intensity");
  p.pulse = *pulse;
  p.window = r.number("window", 10.0 * p.pulse.fwhm_fs * 1e-3);
  if (!(p.window > 0.0)) r.fail("window", "must be > 0");
  p.calibration = r.number("calibration", 1.0);
  return p;
}

SegmentConfig read_train(const SectionReader& r) {
  TrainConfig t;
  auto& s = t.spec;
  s.count = static_cast<int>(r.integer("count"));
  if (r.has("period") == r.has("period_trev")) r.fail("period", "give exactly one of period, period_trev");
  if (r.has("period")) s.period = r.number("period");
  else t.period_trev = r.number("period_trev");
  s.angle_step = units::degrees(r.number("angle_step", 0.0));
  s.start = r.number("start", 0.0);
  s.first = read_polarization(r, "z");
  s.calibration = r.number("calibration", 1.0);
  s.strength = r.optional_number("strength");
  s.pulse = read_pulse(r, s.first);
  if (r.has("strengths")) s.explicit_strengths = r.numbers("strengths");
  if (s.start != 0.0) r.fail("start", "trains start at the current program time; use a [free] segment");
  try {
    TrainSpec probe = s;
    if (t.period_trev) probe.period = std::max(1.0, 2.0 * (probe.pulse ? probe.pulse->fwhm_fs * 1e-3 : 0.0));
    probe.validate();
  } catch (const ConfigError& e) {
    r.fail("count", e.what());
  }
  return t;
}

SegmentConfig read_free(const SectionReader& r) {
  FreeConfig f;
  if (r.has("duration") == r.has("duration_trev")) {
    r.fail("duration", "give exactly one of duration, duration_trev");
  }
  if (r.has("duration")) f.duration = r.number("duration");
  else f.duration_trev = r.number("duration_trev");
  if (!(f.duration >= 0.0) || (f.duration_trev && !(*f.duration_trev >= 0.0))) {
    r.fail("duration", "must be >= 0");
  }
  return f;
}

SegmentConfig read_centrifuge(const SectionReader& r) {
  CentrifugeConfig c;
  auto& s = c.spec;
  s.duration = r.number("duration");
  s.beta = r.number("beta");
  s.handedness = static_cast<int>(r.integer("handedness", 1));
  const std::string theta0 = r.text("theta0", "random");
  if (theta0 != "random") s.theta0 = units::degrees(parse_double(theta0, "theta0"));
  s.peak_intensity = r.number("intensity");
  s.ramp_on = r.number("ramp_on", 5.0);
  s.ramp_off = r.number("ramp_off", 5.0);
  if (r.has("omega_max") && r.has("release_n")) r.fail("omega_max", "give at most one of omega_max, release_n");
  s.omega_max = r.optional_number("omega_max");
  if (r.has("release_n")) {
    c.release_n = static_cast<int>(r.integer("release_n"));
    if (*c.release_n < 1) r.fail("release_n", "must be >= 1");
  }
  try {
    s.validate();
  } catch (const ConfigError& e) {
    r.fail("duration", e.what());
  }
  return c;
}

OutputSpec read_output(const SectionReader& r) {
  const std::string kind = r.text("kind");
  if (kind == "populations") {
    PopulationsOutput o;
    if (r.has("times")) o.times = r.numbers("times");
    return o;
  }
  if (kind == "spectrogram") {
    SpectrogramOutput o;
    o.probe = read_probe(r);
    o.delays = read_range(r, "delay");
    o.shifts = read_range(r, "shift");
    o.fine_structure = r.boolean("fine_structure", false);
    o.fine_structure_reference = r.number("fine_structure_reference", 0.0);
    const std::string axis = r.text("n_axis", "upper_level");
    if (axis == "upper_level") o.n_axis = NAxisRule::upper_level;
    else if (axis == "energy") o.n_axis = NAxisRule::energy;
    else r.fail("n_axis", "expected upper_level or energy");
    return o;
  }
  if (kind == "revival") {
    RevivalOutput o;
    o.times = read_range(r, "time");
    o.delta_m = static_cast<int>(r.integer("delta_m", 2));
    if (o.delta_m != -2 && o.delta_m != 0 && o.delta_m != 2) r.fail("delta_m", "expected -2, 0 or 2");
    const std::string trace = r.text("trace", "intensity");
    if (trace == "intensity") o.kind = TraceKind::summed_intensity;
    else if (trace == "real") o.kind = TraceKind::real_part;
    else r.fail("trace", "expected intensity or real");
    o.options.expected_period = r.optional_number("expected_period");
    o.options.min_period = r.number("min_period", 0.0);
    o.options.max_period = r.number("max_period", 0.0);
    return o;
  }
  if (kind == "angular_map") {
    AngularMapOutput o;
    o.times = read_range(r, "time");
    o.phi_points = static_cast<int>(r.integer("phi_points", 180));
    if (o.phi_points < 4) r.fail("phi_points", "must be >= 4");
    const std::string slice = r.text("slice", "equator");
    if (slice == "equator") o.slice = DensitySlice::equator;
    else if (slice == "marginal") o.slice = DensitySlice::phi_marginal;
    else r.fail("slice", "expected equator or marginal");
    return o;
  }
  if (kind == "composition") {
    CompositionOutput o;
    o.time = r.optional_number("time");
    o.probe = read_probe(r);
    o.min_n = static_cast<int>(r.integer("min_n", 0));
    return o;
  }
  if (kind == "train_scan" || kind == "directionality_scan") {
    TrainScanOutput o;
    o.taus = read_range(r, "tau");
    const std::string unit = r.text("tau_unit", "ps");
    if (unit == "trev") o.in_revivals = true;
    else if (unit != "ps") r.fail("tau_unit", "expected ps or trev");
    o.max_level = static_cast<int>(r.integer("max_level", 7));
    o.directionality = kind == "directionality_scan";
    return o;
  }
  if (kind == "field_spectrogram") {
    FieldSpectrogramOutput o;
    o.carrier_thz = r.number("carrier_thz", 375.0);
    o.window = r.number("window", 2.0);
    o.times = read_range(r, "time");
    o.frequencies = read_range(r, "frequency");
    o.fit_begin = r.number("fit_begin", o.times.start);
    o.fit_end = r.number("fit_end", o.times.stop);
    return o;
  }
  if (kind == "orientation") {
    OrientationOutput o;
    o.samples = static_cast<int>(r.integer("samples", 1000));
    if (o.samples < 1) r.fail("samples", "must be >= 1");
    o.probe_time = r.number("probe_time", 0.0);
    return o;
  }
  if (kind == "fine_structure_beats") {
    BeatsOutput o;
    o.n = static_cast<int>(r.integer("n"));
    o.delays = read_range(r, "delay");
    return o;
  }
  r.fail("kind", "unknown output kind '" + kind + "'");
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::string& source) {
  RunConfig c;
  bool have_run = false;
  for (const auto& section : parse_sections(text, source)) {
    SectionReader r(section, source);
    if (section.kind == "run") {
      if (have_run) throw ConfigError(source + ":" + std::to_string(section.line) + ": duplicate [run]");
      read_run(r, c);
      have_run = true;
    } else if (section.kind == "kick") {
      c.segments.push_back(read_kick(r));
    } else if (section.kind == "pulse") {
      c.segments.push_back(read_pulse_segment(r));
    } else if (section.kind == "train") {
      c.segments.push_back(read_train(r));
    } else if (section.kind == "free") {
      c.segments.push_back(read_free(r));
    } else if (section.kind == "centrifuge") {
      c.segments.push_back(read_centrifuge(r));
    } else if (section.kind == "output") {
      if (section.label.empty()) {
        throw ConfigError(source + ":" + std::to_string(section.line) + ": output needs a name");
      }
      for (const auto& o : c.outputs) {
        if (o.name == section.label) {
          throw ConfigError(source + ":" + std::to_string(section.line) + ": duplicate output '" +
                            section.label + "'");
        }
      }
      c.outputs.push_back({section.label, read_output(r)});
    } else {
      throw ConfigError(source + ":" + std::to_string(section.line) + ": unknown section [" +
                        section.kind + "]");
    }
    r.finish();
  }
  if (!have_run) throw ConfigError(source + ": missing [run] section");
  return c;
}

RunConfig load_run_config(const std::string& path, std::string* raw_text) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config '" + path + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  if (raw_text) *raw_text = buffer.str();
  return parse_run_config(buffer.str(), path);
}

double resonant_frequency(const MoleculeSpec& molecule, int n) {
  if (n < 1) throw std::invalid_argument("resonant_frequency: N must be >= 1");
  return 0.5 * units::wavenumber_to_angular(energy(molecule, n + 1) - energy(molecule, n - 1));
}

FieldProgram build_program(const RunConfig& config, const MoleculeSpec& molecule) {
  FieldProgram program;
  program.intensity_cap = config.intensity_cap;
  const double t_rev = revival_time(molecule);
  for (const auto& seg : config.segments) {
    if (const auto* k = std::get_if<KickConfig>(&seg)) {
      KickSegment s;
      s.polarization = k->polarization;
      if (k->strength) {
        s.strength = *k->strength;
      } else {
        s.source = *k->pulse;
        s.strength = kick_strength(*k->pulse, molecule.delta_alpha, k->calibration);
      }
      program.segments.emplace_back(s);
    } else if (const auto* p = std::get_if<PulseSegment>(&seg)) {
      program.segments.emplace_back(*p);
    } else if (const auto* t = std::get_if<TrainConfig>(&seg)) {
      TrainSpec spec = t->spec;
      if (t->period_trev) spec.period = *t->period_trev * t_rev;
      program.append_train(spec, molecule.delta_alpha);
    } else if (const auto* f = std::get_if<FreeConfig>(&seg)) {
      program.segments.emplace_back(FreeSegment{f->duration_trev ? *f->duration_trev * t_rev : f->duration});
    } else if (const auto* c = std::get_if<CentrifugeConfig>(&seg)) {
      CentrifugeSegment s{c->spec};
      if (c->release_n) s.spec.omega_max = resonant_frequency(molecule, *c->release_n);
      program.segments.emplace_back(s);
    }
  }
  return program;
}

Wavefunction initial_state(const RunConfig& config, const MoleculeSpec& molecule) {
  const int n_max = config.propagator.n_max;
  if (config.initial == InitialKind::state) {
    if (config.initial_n < 0 || config.initial_n > n_max || std::abs(config.initial_m) > config.initial_n) {
      throw ConfigError("initial state |N,M> lies outside the basis");
    }
    if (molecule.spin_weight(config.initial_n) == 0.0) {
      throw ConfigError("initial state N=" + std::to_string(config.initial_n) +
                        " has zero nuclear-spin weight for " + molecule.name);
    }
    return Wavefunction::basis_state(n_max, config.initial_n, config.initial_m);
  }
  if (config.initial == InitialKind::packet) {
    // In-phase Gaussian superposition of |N, M=N> over the spin-allowed shells;
    // packet_width is the standard deviation of the population envelope.
    Wavefunction psi(n_max);
    const double w = config.packet_width;
    for (int n = 0; n <= n_max - 2; ++n) {
      if (molecule.spin_weight(n) == 0.0) continue;
      const double x = (n - config.packet_center) / w;
      psi(n, n) = std::exp(-0.25 * x * x);
    }
    if (psi.norm_squared() < 1e-300) throw ConfigError("packet: no amplitude inside the basis");
    psi.normalize();
    return psi;
  }
  throw std::logic_error("initial_state: thermal runs start from an ensemble");
}

}  // namespace superrotor
