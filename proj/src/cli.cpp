#include "superrotor/cli.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "superrotor/error.hpp"
#include "superrotor/observables.hpp"
#include "superrotor/propagator.hpp"
#include "superrotor/text_format.hpp"
#include "superrotor/units.hpp"

namespace superrotor {

using Json = nlohmann::ordered_json;

ScanParameter parse_scan_parameter(const std::string& name) {
  if (name == "tau") return ScanParameter::tau;
  if (name == "delta") return ScanParameter::delta;
  if (name == "omega_max") return ScanParameter::omega_max;
  if (name == "probe_fwhm") return ScanParameter::probe_fwhm;
  throw ConfigError("unknown scan parameter '" + name + "' (expected tau, delta, omega_max, probe_fwhm)");
}

std::vector<double> parse_scan_range(const std::string& text) {
  std::vector<double> parts;
  std::string item;
  std::istringstream in(text);
  while (std::getline(in, item, ':')) parts.push_back(parse_double(item, "--range"));
  if (parts.size() != 3) throw ConfigError("--range: expected start:stop:step");
  return Range{parts[0], parts[1], parts[2]}.values();
}

namespace {

const char* parameter_name(ScanParameter p) {
  switch (p) {
    case ScanParameter::tau: return "tau";
    case ScanParameter::delta: return "delta";
    case ScanParameter::omega_max: return "omega_max";
    case ScanParameter::probe_fwhm: return "probe_fwhm";
  }
  return "";
}

const char* parameter_unit(ScanParameter p) {
  switch (p) {
    case ScanParameter::tau: return "ps";
    case ScanParameter::delta: return "deg";
    case ScanParameter::omega_max: return "rad/ps";
    case ScanParameter::probe_fwhm: return "cm^-1";
  }
  return "";
}

std::string fmt(double v) { return format_double(v); }

void say(const RunContext& context, const std::string& message) {
  if (context.log) context.log(message);
}

std::vector<double> linspace_open(double a, double b, int count) {
  std::vector<double> out(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) out[static_cast<std::size_t>(k)] = a + (b - a) * k / count;
  return out;
}

// One molecule of the run with its lazily computed ensemble.
struct Species {
  MoleculeSpec molecule;
  double fraction = 1.0;
  FieldProgram program;   // realized
  std::optional<EnsembleResult> result;
};

class Session {
 public:
  Session(const RunConfig& config, const MoleculeDatabase& db, const RunContext& context)
      : config_(config), context_(context) {
    settings_ = config.propagator;
    const bool states = config.needs_states();
    settings_.snapshots = states ? SnapshotPolicy::boundaries : SnapshotPolicy::none;
    settings_.store_driven_snapshots = states;
    for (std::size_t i = 0; i < config.molecules.size(); ++i) {
      Species s;
      s.molecule = db.get(config.molecules[i]);
      s.fraction = config.fractions[i];
      FieldProgram program = build_program(config, s.molecule);
      const GuardReport guard = program.check(s.molecule);
      for (const auto& w : guard.warnings) say(context, "warning: " + s.molecule.name + ": " + w);
      if (!guard.ok()) throw ConfigError(s.molecule.name + ": " + guard.violations.front());
      s.program = program.realize(context.seed);
      species_.push_back(std::move(s));
    }
  }

  std::vector<Species>& species() { return species_; }
  const RunConfig& config() const { return config_; }

  const EnsembleResult& result(Species& s) {
    if (s.result) return *s.result;
    say(context_, "propagating " + s.molecule.name);
    if (config_.initial == InitialKind::thermal) {
      const auto weights = thermal_populations(s.molecule, config_.temperature, settings_.n_max);
      EnsembleOptions options;
      options.seed = context_.seed;
      options.jobs = context_.jobs;
      s.result = run_ensemble(weights, s.program, s.molecule, settings_, options);
    } else {
      s.result = EnsembleResult::single(
          run_program(initial_state(config_, s.molecule), s.program, s.molecule, settings_));
    }
    return *s.result;
  }

 private:
  const RunConfig& config_;
  RunContext context_;
  PropagatorSettings settings_;
  std::vector<Species> species_;
};

void require_covered(const EnsembleResult& result, std::span<const double> times, const std::string& what) {
  const auto& traj = result.members.at(0).trajectory;
  for (double t : times) {
    if (!traj.covers(t)) {
      throw ConfigError(what + ": no data at t=" + fmt(t) +
                        " ps (outside the program or between driven records)");
    }
  }
}

Json molecule_json(const MoleculeSpec& m) {
  Json j;
  j["name"] = m.name;
  j["b_cm"] = m.b;
  j["d_cm"] = m.d;
  j["delta_alpha_a3"] = m.delta_alpha;
  j["spin_weights"] = {m.spin_weight_even, m.spin_weight_odd};
  j["revival_time_ps"] = revival_time(m);
  return j;
}

OutputData thermal_report(Session& session) {
  const RunConfig& config = session.config();
  OutputData out;
  out.name = "thermal";
  out.kind = "thermal_report";
  const bool many = session.species().size() > 1;
  for (auto& s : session.species()) {
    Table t;
    t.suffix = many ? "_" + s.molecule.name : "";
    t.columns = {{"N", ""}, {"population", ""}};
    std::vector<double> pops;
    if (config.initial == InitialKind::thermal) {
      const auto w = thermal_populations(s.molecule, config.temperature, config.propagator.n_max);
      const double total = w.total();
      for (int n = 0; n <= w.n_max; ++n) pops.push_back(w.shell(n) / total);
    } else {
      pops = population_by_n(initial_state(config, s.molecule));
    }
    double mean = 0.0;
    for (std::size_t n = 0; n < pops.size(); ++n) {
      t.add({static_cast<double>(n), pops[n]});
      mean += static_cast<double>(n) * pops[n];
    }
    out.tables.push_back(std::move(t));
    Json m = molecule_json(s.molecule);
    m["fraction"] = s.fraction;
    m["mean_n"] = mean;
    out.meta["molecules"].push_back(m);
  }
  out.meta["temperature_K"] = config.temperature;
  out.meta["initial"] = config.initial == InitialKind::thermal ? "thermal"
                        : config.initial == InitialKind::state ? "state"
                                                               : "packet";
  out.meta["n_max"] = config.propagator.n_max;
  return out;
}

// ---------------------------------------------------------------------------
// Per-molecule outputs

OutputData populations_output(Session& session, Species& s, const PopulationsOutput& spec) {
  const auto& result = session.result(s);
  std::vector<double> times = spec.times.empty() ? std::vector<double>{result.end_time()} : spec.times;
  require_covered(result, times, "populations");
  OutputData out;
  Table t;
  t.columns = {{"time", "ps"}, {"N", ""}, {"population", ""}, {"jz", "hbar"}};
  for (double time : times) {
    const Record r = result.record_at(time);
    for (std::size_t n = 0; n < r.populations.size(); ++n) {
      t.add({time, static_cast<double>(n), r.populations[n], r.jz_by_n[n]});
    }
    out.meta["total_jz"].push_back({{"time_ps", time}, {"jz", r.jz}});
  }
  out.tables.push_back(std::move(t));
  return out;
}

OutputData revival_output(Session& session, Species& s, const RevivalOutput& spec) {
  const auto& result = session.result(s);
  const auto times = spec.times.values();
  require_covered(result, times, "revival");
  const auto trace = coherence_trace(result, times, spec.delta_m, spec.kind);
  const auto spectrum = revival_analysis(times, trace, spec.options);
  OutputData out;
  Table t;
  t.columns = {{"time", "ps"}, {"trace", ""}};
  for (std::size_t i = 0; i < times.size(); ++i) t.add({times[i], trace[i]});
  Table f;
  f.suffix = "_spectrum";
  f.columns = {{"frequency", "1/ps"}, {"period", "ps"}, {"power", ""}};
  for (std::size_t i = 0; i < spectrum.frequencies.size(); ++i) {
    const double nu = spectrum.frequencies[i];
    f.add({nu, nu > 0.0 ? 1.0 / nu : std::numeric_limits<double>::infinity(), spectrum.power[i]});
  }
  out.tables = {std::move(t), std::move(f)};
  out.meta["delta_m"] = spec.delta_m;
  out.meta["trace"] = spec.kind == TraceKind::summed_intensity ? "|sum_N rho_N|^2" : "Re sum_N rho_N";
  out.meta["peak_period_ps"] = spectrum.peak_period;
  out.meta["quarter_revival_rigid_ps"] = revival_time(s.molecule) / 4.0;
  return out;
}

OutputData angular_output(Session& session, Species& s, const AngularMapOutput& spec) {
  const auto& result = session.result(s);
  const auto times = spec.times.values();
  require_covered(result, times, "angular_map");
  const auto phis = linspace_open(0.0, 2.0 * units::pi, spec.phi_points);
  const AngularMap map = angular_density_map(result, times, phis, spec.slice);
  OutputData out;
  Table t;
  t.columns = {{"time", "ps"}, {"phi", "rad"}, {"density", "1/rad"}};
  for (std::size_t i = 0; i < map.times.size(); ++i) {
    for (std::size_t k = 0; k < map.phis.size(); ++k) {
      t.add({map.times[i], map.phis[k], map.density(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))});
    }
  }
  out.tables.push_back(std::move(t));
  out.meta["slice"] = spec.slice == DensitySlice::equator ? "equator" : "phi_marginal";
  if (map.times.size() >= 2) out.meta["dumbbell_frequency_thz"] = dumbbell_frequency(map);
  return out;
}

OutputData composition_output(Session& session, Species& s, const CompositionOutput& spec) {
  const auto& result = session.result(s);
  const double time = spec.time.value_or(result.end_time());
  const std::array<double, 1> at{time};
  require_covered(result, at, "composition");
  const Record r = result.record_at(time);
  const auto entries = wavepacket_composition(r, s.molecule, spec.probe);
  OutputData out;
  Table t;
  t.columns = {{"N", ""}, {"population", ""}, {"line_intensity", ""}};
  for (const auto& e : entries) {
    if (e.n >= spec.min_n) t.add({static_cast<double>(e.n), e.population, e.line_intensity});
  }
  const double center = packet_center(r.populations, spec.min_n);
  const int width = packet_width(r.populations, spec.min_n);
  Table summary;
  summary.suffix = "_summary";
  summary.columns = {{"time", "ps"}, {"center", ""}, {"width", "shells"}, {"jz", "hbar"}};
  summary.add({time, center, static_cast<double>(width), r.jz});
  out.tables = {std::move(t), std::move(summary)};
  out.meta["probe_fwhm_cm"] = spec.probe.fwhm;
  out.meta["min_n"] = spec.min_n;
  return out;
}

const TrainConfig& single_train(const RunConfig& config) {
  const TrainConfig* found = nullptr;
  for (const auto& seg : config.segments) {
    if (const auto* t = std::get_if<TrainConfig>(&seg)) {
      if (found) throw ConfigError("train_scan: exactly one [train] segment is required");
      found = t;
    }
  }
  if (!found) throw ConfigError("train_scan: exactly one [train] segment is required");
  return *found;
}

OutputData train_scan_output(Session& session, Species& s, const TrainScanOutput& spec,
                             const RunContext& context) {
  const RunConfig& config = session.config();
  if (config.initial != InitialKind::thermal) throw ConfigError("train_scan: needs a thermal initial state");
  const TrainConfig& train = single_train(config);
  const double t_rev = revival_time(s.molecule);
  auto taus = spec.taus.values();
  if (spec.in_revivals) {
    for (auto& t : taus) t *= t_rev;
  }
  PropagatorSettings settings = config.propagator;
  const auto weights = thermal_populations(s.molecule, config.temperature, settings.n_max);
  say(context, "scanning train period for " + s.molecule.name);
  const TrainScan scan = spec.directionality
                             ? directionality_scan(s.molecule, weights, train.spec, taus, settings,
                                                   spec.max_level, context.jobs)
                             : train_period_scan(s.molecule, weights, train.spec, taus, settings,
                                                 spec.max_level, context.jobs);
  OutputData out;
  Table t;
  t.columns = {{"tau", "ps"}, {"tau_trev", ""}, {"N", ""},
               {spec.directionality ? "directionality" : "population", ""}};
  for (std::size_t i = 0; i < scan.taus.size(); ++i) {
    for (std::size_t k = 0; k < scan.levels.size(); ++k) {
      t.add({scan.taus[i], scan.taus[i] / t_rev, static_cast<double>(scan.levels[k]),
             scan.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))});
    }
  }
  out.tables.push_back(std::move(t));
  out.meta["revival_time_ps"] = t_rev;
  out.meta["pulses"] = train.spec.count;
  out.meta["angle_step_deg"] = train.spec.angle_step * 180.0 / units::pi;
  if (spec.directionality) out.meta["definition"] = "<J_z>_N / (N P_N)";
  return out;
}

const CentrifugeSpec& first_centrifuge(const FieldProgram& program, const std::string& what) {
  for (const auto& seg : program.segments) {
    if (const auto* c = std::get_if<CentrifugeSegment>(&seg)) return c->spec;
  }
  throw ConfigError(what + ": the program has no [centrifuge] segment");
}

OutputData field_output(Species& s, const FieldSpectrogramOutput& spec) {
  const CentrifugeSpec& cfg = first_centrifuge(s.program, "field_spectrogram");
  const auto times = spec.times.values();
  const auto freqs = spec.frequencies.values();
  const auto fs = field_spectrogram(cfg, *cfg.theta0, spec.carrier_thz, spec.window, times, freqs);
  OutputData out;
  Table t;
  t.columns = {{"time", "ps"}, {"frequency", "THz"}, {"intensity", ""}};
  for (std::size_t i = 0; i < fs.times.size(); ++i) {
    for (std::size_t k = 0; k < fs.frequencies.size(); ++k) {
      t.add({fs.times[i], fs.frequencies[k], fs.intensity(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k))});
    }
  }
  out.tables.push_back(std::move(t));
  const auto slopes = fit_trace_slopes(fs, spec.carrier_thz, spec.fit_begin, spec.fit_end);
  out.meta["carrier_thz"] = spec.carrier_thz;
  out.meta["window_ps"] = spec.window;
  out.meta["slope_upper_thz_per_ps"] = slopes.upper;
  out.meta["slope_lower_thz_per_ps"] = slopes.lower;
  out.meta["expected_slope_thz_per_ps"] = cfg.beta / (2.0 * units::pi);
  out.meta["times"] = "relative to the centrifuge start";
  return out;
}

OutputData orientation_output(Species& s, const OrientationOutput& spec, std::uint64_t seed) {
  // The template keeps its configured orientation choice; samples emulate separate shots.
  const CentrifugeSpec& cfg = first_centrifuge(s.program, "orientation");
  Rng rng(seed);
  std::vector<double> theta0(static_cast<std::size_t>(spec.samples));
  for (auto& t : theta0) t = rng.uniform(0.0, units::pi);
  const auto points = orientation_statistics(theta0, cfg, spec.probe_time);
  OutputData out;
  Table t;
  t.columns = {{"theta0", "rad"}, {"theta", "rad"}, {"ex2", ""}, {"ey2", ""}, {"estimate", "rad"}};
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto& p = points[i];
    t.add({theta0[i], p.theta, p.ex2, p.ey2, p.estimate});
  }
  out.tables.push_back(std::move(t));
  out.meta["probe_time_ps"] = spec.probe_time;
  return out;
}

OutputData beats_output(Species& s, const BeatsOutput& spec) {
  if (!s.molecule.fine_structure) {
    throw ConfigError("fine_structure_beats: molecule " + s.molecule.name + " has no fine-structure model");
  }
  const auto delays = spec.delays.values();
  const auto beats = fine_structure_beats(spec.n, &*s.molecule.fine_structure, delays);
  OutputData out;
  Table t;
  t.columns = {{"delay", "ps"}, {"intensity", ""}};
  for (std::size_t i = 0; i < delays.size(); ++i) t.add({delays[i], beats[i]});
  out.tables.push_back(std::move(t));
  out.meta["n"] = spec.n;
  return out;
}

// ---------------------------------------------------------------------------
// Mixture-level outputs

OutputData spectrogram_output(Session& session, const SpectrogramOutput& spec) {
  ProbeSpec probe = spec.probe;
  probe.delays = spec.delays.values();
  const auto shifts = spec.shifts.values();
  RamanOptions options;
  options.fine_structure = spec.fine_structure;
  options.fine_structure_reference = spec.fine_structure_reference;
  std::vector<SpeciesSource> sources;
  for (auto& s : session.species()) {
    const auto& result = session.result(s);
    require_covered(result, probe.delays, "spectrogram");
    if (spec.fine_structure && !s.molecule.fine_structure) {
      throw ConfigError("spectrogram: molecule " + s.molecule.name + " has no fine-structure model");
    }
    sources.push_back({ensemble_lines(result, probe.handedness, options), s.fraction});
  }
  const Spectrogram sg =
      mixture_spectrogram(sources, probe, shifts, &session.species().front().molecule, spec.n_axis);
  OutputData out;
  Table t;
  t.columns = {{"delay", "ps"}, {"shift", "cm^-1"}, {"n_label", ""}, {"intensity", ""},
               {"re", ""}, {"im", ""}};
  for (std::size_t i = 0; i < sg.delays.size(); ++i) {
    for (std::size_t k = 0; k < sg.shifts.size(); ++k) {
      const auto ii = static_cast<Eigen::Index>(i);
      const auto kk = static_cast<Eigen::Index>(k);
      const Complex a = sg.amplitude(ii, kk);
      t.add({sg.delays[i], sg.shifts[k], sg.n_axis[k], sg.intensity(ii, kk), a.real(), a.imag()});
    }
  }
  out.tables.push_back(std::move(t));
  out.meta["probe_fwhm_cm"] = probe.fwhm;
  out.meta["probe_handedness"] = probe.handedness;
  out.meta["sign_convention"] =
      "positive shift: rotation co-rotating with the probe; Delta M = +2 coherence at +h*(E(N+2)-E(N))";
  out.meta["n_axis"] = spec.n_axis == NAxisRule::upper_level ? "upper level of E(N)-E(N-2)=|shift|"
                                                             : "B N(N+1) - D N^2 (N+1)^2 = |shift|";
  out.meta["amplitude"] = "delta_alpha [A^3] x coherence, probe amplitude profile exp(-2 ln2 x^2/fwhm^2)";
  return out;
}

// Prefixes table suffixes with the molecule name when the run has several species.
void merge_species(OutputData& into, OutputData part, const std::string& molecule, bool many) {
  for (auto& t : part.tables) {
    if (many) t.suffix = "_" + molecule + t.suffix;
    into.tables.push_back(std::move(t));
  }
  if (many) into.meta[molecule] = std::move(part.meta);
  else into.meta = std::move(part.meta);
}

}  // namespace

std::vector<OutputData> simulate_outputs(const RunConfig& config, const MoleculeDatabase& db,
                                         const RunContext& context) {
  Session session(config, db, context);
  std::vector<OutputData> outputs;
  outputs.push_back(thermal_report(session));
  const bool many = session.species().size() > 1;
  for (const auto& request : config.outputs) {
    OutputData out;
    out.name = request.name;
    if (const auto* sp = std::get_if<SpectrogramOutput>(&request.spec)) {
      OutputData part = spectrogram_output(session, *sp);
      out.tables = std::move(part.tables);
      out.meta = std::move(part.meta);
      out.kind = "spectrogram";
    } else {
      for (auto& s : session.species()) {
        OutputData part = std::visit(
            [&](const auto& spec) -> OutputData {
              using T = std::decay_t<decltype(spec)>;
              if constexpr (std::is_same_v<T, PopulationsOutput>) {
                out.kind = "populations";
                return populations_output(session, s, spec);
              } else if constexpr (std::is_same_v<T, RevivalOutput>) {
                out.kind = "revival";
                return revival_output(session, s, spec);
              } else if constexpr (std::is_same_v<T, AngularMapOutput>) {
                out.kind = "angular_map";
                return angular_output(session, s, spec);
              } else if constexpr (std::is_same_v<T, CompositionOutput>) {
                out.kind = "composition";
                return composition_output(session, s, spec);
              } else if constexpr (std::is_same_v<T, TrainScanOutput>) {
                out.kind = spec.directionality ? "directionality_scan" : "train_scan";
                return train_scan_output(session, s, spec, context);
              } else if constexpr (std::is_same_v<T, FieldSpectrogramOutput>) {
                out.kind = "field_spectrogram";
                return field_output(s, spec);
              } else if constexpr (std::is_same_v<T, OrientationOutput>) {
                out.kind = "orientation";
                return orientation_output(s, spec, context.seed);
              } else if constexpr (std::is_same_v<T, BeatsOutput>) {
                out.kind = "fine_structure_beats";
                return beats_output(s, spec);
              } else {
                throw std::logic_error("unhandled output kind");
              }
            },
            request.spec);
        merge_species(out, std::move(part), s.molecule.name, many);
      }
    }
    outputs.push_back(std::move(out));
  }
  return outputs;
}

RunConfig apply_scan_value(const RunConfig& config, ScanParameter parameter, double value) {
  RunConfig out = config;
  int applied = 0;
  switch (parameter) {
    case ScanParameter::tau:
      if (!(value > 0.0)) throw ConfigError("scan: tau must be > 0");
      for (auto& seg : out.segments) {
        if (auto* t = std::get_if<TrainConfig>(&seg)) {
          t->spec.period = value;
          t->period_trev.reset();
          ++applied;
        }
      }
      break;
    case ScanParameter::delta:
      for (auto& seg : out.segments) {
        if (auto* t = std::get_if<TrainConfig>(&seg)) {
          t->spec.angle_step = units::degrees(value);
          ++applied;
        }
      }
      break;
    case ScanParameter::omega_max:
      if (!(value > 0.0)) throw ConfigError("scan: omega_max must be > 0");
      for (auto& seg : out.segments) {
        if (auto* c = std::get_if<CentrifugeConfig>(&seg)) {
          c->spec.omega_max = value;
          c->release_n.reset();
          ++applied;
        }
      }
      break;
    case ScanParameter::probe_fwhm:
      if (!(value > 0.0)) throw ConfigError("scan: probe_fwhm must be > 0");
      for (auto& o : out.outputs) {
        if (auto* s = std::get_if<SpectrogramOutput>(&o.spec)) {
          s->probe.fwhm = value;
          ++applied;
        } else if (auto* c = std::get_if<CompositionOutput>(&o.spec)) {
          c->probe.fwhm = value;
          ++applied;
        }
      }
      break;
  }
  if (applied == 0) {
    throw ConfigError(std::string("scan: nothing in the config uses parameter '") +
                      parameter_name(parameter) + "'");
  }
  return out;
}

std::vector<OutputData> scan_outputs(const RunConfig& config, const MoleculeDatabase& db,
                                     ScanParameter parameter, const std::vector<double>& values,
                                     const RunContext& context) {
  if (values.empty()) throw ConfigError("scan: no parameter values");
  std::vector<OutputData> merged;
  for (double value : values) {
    say(context, std::string("scan point ") + parameter_name(parameter) + "=" + fmt(value));
    const RunConfig point = apply_scan_value(config, parameter, value);
    auto outputs = simulate_outputs(point, db, context);
    if (merged.empty()) {
      merged = outputs;
      for (auto& o : merged) {
        o.meta = Json::object();
        for (auto& t : o.tables) {
          t.columns.insert(t.columns.begin(), Column{parameter_name(parameter), parameter_unit(parameter)});
          t.rows.clear();
        }
        o.meta["scan"] = {{"parameter", parameter_name(parameter)},
                          {"unit", parameter_unit(parameter)},
                          {"values", values}};
      }
    }
    for (std::size_t i = 0; i < outputs.size(); ++i) {
      auto& target = merged[i];
      for (std::size_t k = 0; k < outputs[i].tables.size(); ++k) {
        for (auto& row : outputs[i].tables[k].rows) {
          row.insert(row.begin(), value);
          target.tables[k].rows.push_back(std::move(row));
        }
      }
      target.meta["points"].push_back(std::move(outputs[i].meta));
    }
  }
  return merged;
}

// ---------------------------------------------------------------------------
// Validation

namespace {

// Rough upper bound of the populated N after the program, for the report only.
int estimate_reach(const RunConfig& config, const MoleculeSpec& molecule, const FieldProgram& program) {
  int n = 0;
  if (config.initial == InitialKind::state) {
    n = config.initial_n;
  } else if (config.initial == InitialKind::packet) {
    n = static_cast<int>(std::ceil(config.packet_center + 4.0 * config.packet_width));
  } else {
    const int low = molecule.lowest_allowed_n();
    const double t = std::max(config.temperature, 1e-300);
    const double w0 = molecule.spin_weight(low) * (2 * low + 1);
    for (int k = low; k <= std::min(400, monotone_energy_limit(molecule)); ++k) {
      const double w = molecule.spin_weight(k) * (2 * k + 1) *
                       std::exp(-units::second_radiation_constant *
                                (energy(molecule, k) - energy(molecule, low)) / t);
      if (w > 1e-6 * w0) n = k;
    }
  }
  // Kick strengths add at most linearly (exactly so at quantum resonance).
  double total_strength = 0.0;
  int centrifuge_reach = 0;
  const int limit = monotone_energy_limit(molecule);
  for (const auto& seg : program.segments) {
    if (const auto* k = std::get_if<KickSegment>(&seg)) {
      total_strength += k->strength;
    } else if (const auto* p = std::get_if<PulseSegment>(&seg)) {
      total_strength += kick_strength(p->pulse, molecule.delta_alpha, p->calibration);
    } else if (const auto* c = std::get_if<CentrifugeSegment>(&seg)) {
      const double omega = std::abs(c->spec.terminal_frequency());
      int release = 1;
      while (release + 1 < limit && resonant_frequency(molecule, release) < omega) ++release;
      centrifuge_reach = std::max(centrifuge_reach, release + 4);
    }
  }
  if (total_strength > 0.0) n += static_cast<int>(std::ceil(3.0 * total_strength)) + 2;
  n = std::max(n, centrifuge_reach);
  return n;
}

}  // namespace

ValidationReport validate_config(const std::filesystem::path& path, const MoleculeDatabase* db) {
  ValidationReport report;
  RunConfig config;
  try {
    config = load_run_config(path.string());
  } catch (const std::exception& e) {
    report.errors.push_back(e.what());
    return report;
  }
  if (!db) {
    report.errors.push_back("molecule database unavailable");
    return report;
  }
  const int n_max = config.propagator.n_max;
  for (const auto& name : config.molecules) {
    if (!db->contains(name)) {
      report.errors.push_back("unknown molecule '" + name + "'");
      continue;
    }
    const MoleculeSpec& molecule = db->get(name);
    FieldProgram program;
    try {
      program = build_program(config, molecule);
    } catch (const std::exception& e) {
      report.errors.push_back(name + ": " + e.what());
      continue;
    }
    const GuardReport guard = program.check(molecule);
    for (const auto& w : guard.warnings) report.warnings.push_back(name + ": " + w);
    for (const auto& v : guard.violations) report.violations.push_back(name + ": " + v);
    if (config.initial == InitialKind::thermal) {
      try {
        thermal_populations(molecule, config.temperature, n_max);
      } catch (const TruncationError& e) {
        report.violations.push_back(name + ": truncation: thermal distribution needs n_max >= " +
                                    std::to_string(e.required_n_max()) + " (configured " +
                                    std::to_string(n_max) + ")");
      }
    } else {
      try {
        initial_state(config, molecule);
      } catch (const std::exception& e) {
        report.errors.push_back(name + ": " + e.what());
      }
    }
    const int reach = estimate_reach(config, molecule, program);
    if (reach > n_max - 2) {
      report.warnings.push_back(name + ": truncation: estimated populated range reaches N=" +
                                std::to_string(reach) + ", n_max is " + std::to_string(n_max));
    }
  }
  return report;
}

// ---------------------------------------------------------------------------
// Commands

namespace {

std::string one_line(std::string text) {
  std::replace(text.begin(), text.end(), '\n', ' ');
  return text;
}

struct LoadedConfig {
  RunConfig config;
  Provenance provenance;
};

LoadedConfig load(const CliOptions& options) {
  LoadedConfig out;
  std::string text;
  out.config = load_run_config(options.config.string(), &text);
  if (options.seed) out.config.seed = *options.seed;
  out.provenance.seed = out.config.seed;
  out.provenance.config_sha256 = sha256_hex(text + "\nseed=" + std::to_string(out.config.seed));
  return out;
}

RunContext make_context(const CliOptions& options, std::uint64_t seed, std::ostream& err) {
  RunContext context;
  context.seed = seed;
  context.jobs = options.jobs;
  if (!options.quiet) context.log = [&err](const std::string& m) { err << m << '\n'; };
  return context;
}

int write_all(const std::vector<OutputData>& outputs, const CliOptions& options,
              const Provenance& provenance, std::ostream& err) {
  for (const auto& o : outputs) {
    const auto files = write_output(o, provenance, options.out_dir, options.format);
    if (!options.quiet) {
      for (const auto& f : files) err << "wrote " << f.string() << '\n';
    }
  }
  return 0;
}

}  // namespace

int command_simulate(const CliOptions& options, std::ostream& err) {
  const auto loaded = load(options);
  const auto db = MoleculeDatabase::load(default_molecule_database_path());
  const auto outputs =
      simulate_outputs(loaded.config, db, make_context(options, loaded.provenance.seed, err));
  return write_all(outputs, options, loaded.provenance, err);
}

int command_scan(const CliOptions& options, const std::string& parameter,
                 const std::vector<double>& values, std::ostream& err) {
  const ScanParameter p = parse_scan_parameter(parameter);
  const auto loaded = load(options);
  const auto db = MoleculeDatabase::load(default_molecule_database_path());
  const auto outputs =
      scan_outputs(loaded.config, db, p, values, make_context(options, loaded.provenance.seed, err));
  return write_all(outputs, options, loaded.provenance, err);
}

int command_validate(const CliOptions& options, std::ostream& out, std::ostream&) {
  std::optional<MoleculeDatabase> db;
  ValidationReport report;
  try {
    db = MoleculeDatabase::load(default_molecule_database_path());
  } catch (const std::exception& e) {
    report.errors.push_back(std::string("molecule database: ") + e.what());
  }
  const ValidationReport r = validate_config(options.config, db ? &*db : nullptr);
  report.errors.insert(report.errors.end(), r.errors.begin(), r.errors.end());
  report.violations = r.violations;
  report.warnings = r.warnings;
  for (const auto& e : report.errors) out << "error: " << one_line(e) << '\n';
  for (const auto& v : report.violations) out << "violation: " << one_line(v) << '\n';
  for (const auto& w : report.warnings) out << "warning: " << one_line(w) << '\n';
  out << "summary: " << report.errors.size() << " errors, " << report.violations.size()
      << " violations, " << report.warnings.size() << " warnings\n";
  return 0;
}

int run_guarded(const std::function<int()>& body, std::ostream& err) {
  try {
    return body();
  } catch (const ConfigError& e) {
    err << "error[config]: " << one_line(e.what()) << '\n';
    return kExitConfig;
  } catch (const NumericalGuardError& e) {
    err << "error[numerical]: " << one_line(e.what()) << '\n';
    return kExitNumerical;
  } catch (const IoError& e) {
    err << "error[io]: " << one_line(e.what()) << '\n';
    return kExitIo;
  } catch (const std::exception& e) {
    err << "error[internal]: " << one_line(e.what()) << '\n';
    return 1;
  }
}

}  // namespace superrotor
