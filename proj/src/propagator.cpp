#include "superrotor/propagator.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <functional>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <omp.h>

#include "superrotor/error.hpp"
#include "superrotor/units.hpp"

namespace superrotor {

void PropagatorSettings::validate() const {
  if (n_max < 2) throw ConfigError("propagator: n_max must be >= 2");
  if (!(free_sample_step > 0.0)) throw ConfigError("propagator: free_sample_step must be > 0");
  if (!(driven_sample_step > 0.0)) throw ConfigError("propagator: driven_sample_step must be > 0");
  if (!(steps_per_period >= 1.0)) throw ConfigError("propagator: steps_per_period must be >= 1");
  if (dt && !(*dt > 0.0)) throw ConfigError("propagator: dt must be > 0");
  if (!(truncation_threshold > 0.0)) throw ConfigError("propagator: truncation_threshold must be > 0");
  if (window_margin < 2) throw ConfigError("propagator: window_margin must be >= 2");
}

namespace {

// Dense eigendecomposition is used for kicks on blocks up to this size,
// a scaled Taylor series above it.
constexpr int kEigenBlockLimit = 700;

struct BlockOperator {
  std::vector<int> indices;  // ascending global indices, hence ascending N
  std::vector<int> n;
  std::vector<int> m;
  std::vector<int> row_ptr;
  std::vector<int> cols;
  std::vector<double> vals;

  mutable std::once_flag eigen_once;
  mutable Eigen::MatrixXd vectors;
  mutable Eigen::VectorXd values;

  int size() const { return static_cast<int>(indices.size()); }

  int rows_up_to(int n_limit) const {
    return static_cast<int>(std::upper_bound(n.begin(), n.end(), n_limit) - n.begin());
  }

  void ensure_eigen() const {
    std::call_once(eigen_once, [this] {
      Eigen::MatrixXd dense = Eigen::MatrixXd::Zero(size(), size());
      for (int r = 0; r < size(); ++r) {
        for (int k = row_ptr[r]; k < row_ptr[r + 1]; ++k) dense(r, cols[k]) = vals[k];
      }
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(dense);
      if (solver.info() != Eigen::Success) {
        throw NumericalGuardError("kick: eigendecomposition failed");
      }
      vectors = solver.eigenvectors();
      values = solver.eigenvalues();
    });
  }
};

struct OperatorSet {
  int n_max = 0;
  std::vector<std::unique_ptr<BlockOperator>> blocks;
  std::vector<int> block_of;
};

std::shared_ptr<const OperatorSet> build_operator_set(int n_max, bool lab_z) {
  const BasisIndex basis(n_max);
  const auto op = lab_z ? cos2_lab_z_real(n_max) : cos2_lab_x_real(n_max);
  auto set = std::make_shared<OperatorSet>();
  set->n_max = n_max;
  set->block_of.assign(basis.size(), -1);
  for (auto& idx : coupled_blocks(basis, op)) {
    auto block = std::make_unique<BlockOperator>();
    const int b = static_cast<int>(set->blocks.size());
    std::vector<int> local(basis.size(), -1);
    for (int j = 0; j < static_cast<int>(idx.size()); ++j) {
      local[idx[j]] = j;
      set->block_of[idx[j]] = b;
      block->n.push_back(basis.n_of(idx[j]));
      block->m.push_back(basis.m_of(idx[j]));
    }
    block->row_ptr.push_back(0);
    for (int g : idx) {
      for (Eigen::SparseMatrix<double, Eigen::RowMajor>::InnerIterator it(op, g); it; ++it) {
        block->cols.push_back(local[it.col()]);
        block->vals.push_back(it.value());
      }
      block->row_ptr.push_back(static_cast<int>(block->cols.size()));
    }
    block->indices = std::move(idx);
    set->blocks.push_back(std::move(block));
  }
  return set;
}

std::shared_ptr<const OperatorSet> operator_set(int n_max, bool lab_z) {
  static std::mutex mutex;
  static std::map<std::pair<int, bool>, std::shared_ptr<const OperatorSet>> cache;
  std::lock_guard<std::mutex> lock(mutex);
  auto& slot = cache[{n_max, lab_z}];
  if (!slot) slot = build_operator_set(n_max, lab_z);
  return slot;
}

std::vector<int> supported_blocks(const OperatorSet& set, const Eigen::VectorXcd& c) {
  std::vector<char> used(set.blocks.size(), 0);
  for (Eigen::Index i = 0; i < c.size(); ++i) {
    if (c[i] != Complex(0.0, 0.0)) used[set.block_of[i]] = 1;
  }
  std::vector<int> out;
  for (std::size_t b = 0; b < used.size(); ++b) {
    if (used[b]) out.push_back(static_cast<int>(b));
  }
  return out;
}

// out = (O - 1/2) in over the first `rows` local states; entries of `in` at or
// beyond `rows` must be zero.
void shifted_multiply(const BlockOperator& op, int rows, const Complex* in, Complex* out) {
  const int* ptr = op.row_ptr.data();
  const int* cols = op.cols.data();
  const double* vals = op.vals.data();
  for (int r = 0; r < rows; ++r) {
    double re = -0.5 * in[r].real();
    double im = -0.5 * in[r].imag();
    for (int k = ptr[r]; k < ptr[r + 1]; ++k) {
      const Complex v = in[cols[k]];
      re += vals[k] * v.real();
      im += vals[k] * v.imag();
    }
    out[r] = Complex(re, im);
  }
}

// Number of Taylor terms for exp(i h (O - 1/2)), |O - 1/2| <= 1/2, to reach 1e-17.
int taylor_order(double h) {
  const double x = 0.5 * std::abs(h);
  double term = 1.0;
  int k = 0;
  while (term > 1e-17 && k < 60) {
    ++k;
    term *= x / k;
  }
  return k;
}

// Scratch vectors sized to the whole block; entries past the active rows stay zero.
struct TaylorWork {
  std::vector<Complex> term;
  std::vector<Complex> next;
  int rows = -1;

  void prepare(int size, int active) {
    if (static_cast<int>(term.size()) != size) {
      term.assign(size, Complex(0.0, 0.0));
      next.assign(size, Complex(0.0, 0.0));
    } else if (active < rows) {
      std::fill(term.begin() + active, term.end(), Complex(0.0, 0.0));
      std::fill(next.begin() + active, next.end(), Complex(0.0, 0.0));
    }
    rows = active;
  }
};

// x <- exp(i a O) x on the first `rows` states, by Taylor series of exp(i a (O - 1/2))
// with substeps keeping |a|/2 per substep below 1/2.
void taylor_exponential(const BlockOperator& op, int rows, double a, Complex* x, TaylorWork& work) {
  if (a == 0.0 || rows == 0) return;
  const int substeps = std::max(1, static_cast<int>(std::ceil(std::abs(a))));
  const double h = a / substeps;
  const int order = taylor_order(h);
  work.prepare(op.size(), rows);
  Complex* term = work.term.data();
  Complex* next = work.next.data();
  const Complex global = std::polar(1.0, 0.5 * h);
  for (int s = 0; s < substeps; ++s) {
    std::copy(x, x + rows, term);
    for (int k = 1; k <= order; ++k) {
      shifted_multiply(op, rows, term, next);
      const double f = h / k;
      for (int r = 0; r < rows; ++r) {
        term[r] = Complex(-f * next[r].imag(), f * next[r].real());
        x[r] += term[r];
      }
    }
    for (int r = 0; r < rows; ++r) x[r] *= global;
  }
}

void kick_block(const BlockOperator& op, double strength, Eigen::VectorXcd& local) {
  const int n = op.size();
  if (n <= kEigenBlockLimit) {
    op.ensure_eigen();
    Eigen::MatrixXd parts(n, 2);
    parts.col(0) = local.real();
    parts.col(1) = local.imag();
    const Eigen::MatrixXd proj = op.vectors.transpose() * parts;
    Eigen::MatrixXd rotated(n, 2);
    for (int k = 0; k < n; ++k) {
      const Complex z = std::polar(1.0, strength * op.values[k]) * Complex(proj(k, 0), proj(k, 1));
      rotated(k, 0) = z.real();
      rotated(k, 1) = z.imag();
    }
    const Eigen::MatrixXd back = op.vectors * rotated;
    for (int k = 0; k < n; ++k) local[k] = Complex(back(k, 0), back(k, 1));
    return;
  }
  TaylorWork work;
  taylor_exponential(op, n, strength, local.data(), work);
}

double omega_of(const MoleculeSpec& molecule, int n) {
  return units::wavenumber_to_angular(energy(molecule, n));
}

}  // namespace

double top_shell_population(const Wavefunction& psi) {
  const int n_max = psi.n_max();
  double p = 0.0;
  for (int i = 0; i < psi.basis.size(); ++i) {
    if (psi.basis.n_of(i) >= n_max - 1) p += std::norm(psi.coefficients[i]);
  }
  return p;
}

namespace {

void truncation_guard(const Wavefunction& psi, double threshold, const char* where) {
  const double top = top_shell_population(psi);
  if (top > threshold) {
    std::ostringstream os;
    os << where << ": population " << top << " in the top two shells of N_max=" << psi.n_max()
       << " exceeds " << threshold;
    throw TruncationError(os.str(), psi.n_max() + 10);
  }
}

}  // namespace

Wavefunction apply_kick(const Wavefunction& psi, double strength, const Polarization& polarization,
                        double truncation_threshold) {
  if (!(strength >= 0.0)) throw std::invalid_argument("apply_kick: strength must be >= 0");
  if (psi.n_max() < 2) throw std::invalid_argument("apply_kick: n_max must be >= 2");
  Wavefunction out = psi;
  if (strength == 0.0) return out;
  const auto set = operator_set(psi.n_max(), polarization.lab_z);
  for (int b : supported_blocks(*set, psi.coefficients)) {
    const BlockOperator& op = *set->blocks[b];
    Eigen::VectorXcd local(op.size());
    for (int j = 0; j < op.size(); ++j) {
      local[j] = psi.coefficients[op.indices[j]];
      if (!polarization.lab_z) local[j] *= std::polar(1.0, polarization.angle * op.m[j]);
    }
    kick_block(op, strength, local);
    for (int j = 0; j < op.size(); ++j) {
      Complex v = local[j];
      if (!polarization.lab_z) v *= std::polar(1.0, -polarization.angle * op.m[j]);
      out.coefficients[op.indices[j]] = v;
    }
  }
  truncation_guard(out, truncation_threshold, "kick");
  return out;
}

Wavefunction propagate_free(const Wavefunction& psi, const MoleculeSpec& molecule, double dt) {
  if (!(dt >= 0.0)) throw std::invalid_argument("propagate_free: dt must be >= 0");
  Wavefunction out = psi;
  if (dt == 0.0) return out;
  for (int n = 0; n <= psi.n_max(); ++n) {
    const Complex phase = std::polar(1.0, -std::fmod(omega_of(molecule, n) * dt, 2.0 * units::pi));
    const int first = psi.basis.index(n, -n);
    for (int k = 0; k <= 2 * n; ++k) out.coefficients[first + k] *= phase;
  }
  return out;
}

Record make_record(const Wavefunction& psi, double time) {
  Record r;
  r.time = time;
  const int n_max = psi.n_max();
  r.populations.assign(n_max + 1, 0.0);
  r.jz_by_n.assign(n_max + 1, 0.0);
  for (int i = 0; i < psi.basis.size(); ++i) {
    const double p = std::norm(psi.coefficients[i]);
    r.populations[psi.basis.n_of(i)] += p;
    r.jz_by_n[psi.basis.n_of(i)] += p * psi.basis.m_of(i);
  }
  for (double j : r.jz_by_n) r.jz += j;
  for (int k = 0; k < 3; ++k) {
    r.coherences[k].assign(std::max(0, n_max - 1), Complex(0.0, 0.0));
    for (int n = 0; n + 2 <= n_max; ++n) r.coherences[k][n] = coherence(psi, n, 2 * k - 2);
  }
  return r;
}

Record advance_record(const Record& record, const MoleculeSpec& molecule, double dt) {
  Record out = record;
  out.time = record.time + dt;
  if (dt == 0.0) return out;
  const int count = static_cast<int>(record.coherences[0].size());
  for (int n = 0; n < count; ++n) {
    const double w = omega_of(molecule, n + 2) - omega_of(molecule, n);
    const Complex phase = std::polar(1.0, std::fmod(w * dt, 2.0 * units::pi));
    for (auto& c : out.coherences) c[n] *= phase;
  }
  return out;
}

// ---------------------------------------------------------------------------
// Trajectory

namespace {
constexpr double kTimeTolerance = 1e-9;
}

void Trajectory::begin(const Wavefunction& psi, double t, double free_sample_step) {
  start_ = end_ = t;
  free_step_ = free_sample_step;
  snapshots_.clear();
  free_.clear();
  driven_.clear();
  snapshots_.push_back({t, psi});
  final_ = psi;
}

void Trajectory::add_snapshot(const Wavefunction& psi, double t) {
  if (!snapshots_.empty() && std::abs(snapshots_.back().time - t) < kTimeTolerance) {
    snapshots_.back().psi = psi;
    return;
  }
  if (!snapshots_.empty() && t < snapshots_.back().time) {
    throw std::logic_error("trajectory: snapshot times must increase");
  }
  snapshots_.push_back({t, psi});
}

void Trajectory::add_free(const Wavefunction& psi_begin, double t_begin, double t_end,
                          bool keep_state) {
  FreeInterval f;
  f.begin = t_begin;
  f.end = t_end;
  f.base = make_record(psi_begin, t_begin);
  if (keep_state) f.state = psi_begin;
  free_.push_back(std::move(f));
}

void Trajectory::add_driven_record(Record record) {
  if (!driven_.empty() && std::abs(driven_.back().time - record.time) < kTimeTolerance) {
    driven_.back() = std::move(record);
    return;
  }
  driven_.push_back(std::move(record));
}

void Trajectory::finish(const Wavefunction& psi, double t, SnapshotPolicy policy) {
  end_ = t;
  final_ = psi;
  final_record_ = make_record(psi, t);
  if (policy == SnapshotPolicy::boundaries) {
    add_snapshot(psi, t);
    return;
  }
  if (policy == SnapshotPolicy::none) {
    for (auto& f : free_) f.state.reset();
    snapshots_.clear();
    final_ = Wavefunction(0);
    return;
  }
  // Keep the states of the trailing run of free intervals only.
  double trailing_begin = t;
  for (auto it = free_.rbegin(); it != free_.rend(); ++it) {
    if (std::abs(it->end - trailing_begin) > kTimeTolerance) break;
    trailing_begin = it->begin;
  }
  for (auto& f : free_) {
    if (f.begin < trailing_begin - kTimeTolerance) f.state.reset();
  }
  snapshots_.clear();
}

const Wavefunction& Trajectory::final_state() const {
  if (final_.n_max() != n_max_) throw std::logic_error("trajectory: final state was not retained");
  return final_;
}

Wavefunction Trajectory::state_at(double t) const {
  for (const auto& f : free_) {
    if (t >= f.begin - kTimeTolerance && t < f.end - kTimeTolerance && f.state) {
      return propagate_free(*f.state, molecule_, std::max(0.0, t - f.begin));
    }
  }
  for (const auto& s : snapshots_) {
    if (std::abs(s.time - t) < kTimeTolerance) return s.psi;
  }
  if (std::abs(t - end_) < kTimeTolerance) return final_state();
  std::ostringstream os;
  os << "trajectory: no state available at t=" << t << " ps";
  throw std::out_of_range(os.str());
}

Record Trajectory::record_at(double t) const {
  for (const auto& f : free_) {
    if (t >= f.begin - kTimeTolerance && t < f.end - kTimeTolerance) {
      return advance_record(f.base, molecule_, std::max(0.0, t - f.begin));
    }
  }
  for (const auto& r : driven_) {
    if (std::abs(r.time - t) < kTimeTolerance) return r;
  }
  if (std::abs(t - end_) < kTimeTolerance) return final_record_;
  std::ostringstream os;
  os << "trajectory: no record available at t=" << t << " ps";
  throw std::out_of_range(os.str());
}

bool Trajectory::covers(double t) const {
  for (const auto& f : free_) {
    if (t >= f.begin - kTimeTolerance && t < f.end - kTimeTolerance) return true;
  }
  for (const auto& r : driven_) {
    if (std::abs(r.time - t) < kTimeTolerance) return true;
  }
  return std::abs(t - end_) < kTimeTolerance;
}

std::vector<double> Trajectory::sample_times() const {
  std::vector<double> times;
  for (const auto& f : free_) {
    const auto count = static_cast<long>(std::ceil((f.end - f.begin) / free_step_ - 1e-9));
    for (long k = 0; k < count; ++k) times.push_back(f.begin + k * free_step_);
  }
  for (const auto& r : driven_) times.push_back(r.time);
  times.push_back(end_);
  std::sort(times.begin(), times.end());
  std::vector<double> out;
  for (double t : times) {
    if (out.empty() || t - out.back() > kTimeTolerance) out.push_back(t);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Continuous drive

namespace {

struct DriveModel {
  bool lab_z = true;
  double duration = 0.0;
  std::function<double(double)> depth;  // U(t), rad/ps
  std::function<double(double)> angle;  // frame angle, rad (in-plane only)
  double step_limit = 0.0;
};

struct BlockState {
  const BlockOperator* op = nullptr;
  Eigen::VectorXcd x;  // rotating-frame amplitudes
  std::vector<double> omega;
  int rows = 0;
};

void set_window(BlockState& b, int n_max, int margin) {
  int highest = -1;
  for (int j = 0; j < b.op->size(); ++j) {
    if (std::norm(b.x[j]) > 1e-28) highest = std::max(highest, b.op->n[j]);
  }
  b.rows = highest < 0 ? 0 : b.op->rows_up_to(std::min(n_max, highest + margin));
}

// Full lab-frame wavefunction from rotating-frame block amplitudes.
Wavefunction lab_state(const std::vector<BlockState>& blocks, int n_max, bool lab_z, double theta) {
  Wavefunction psi(n_max);
  for (const auto& b : blocks) {
    for (int j = 0; j < b.op->size(); ++j) {
      Complex v = b.x[j];
      if (!lab_z && b.op->m[j] != 0) v *= std::polar(1.0, -theta * b.op->m[j]);
      psi.coefficients[b.op->indices[j]] = v;
    }
  }
  return psi;
}

using SampleCallback = std::function<void(double t_local, const Wavefunction& lab)>;

Wavefunction drive_core(const Wavefunction& psi, const MoleculeSpec& molecule,
                        const DriveModel& model, const PropagatorSettings& settings, double h_max,
                        const SampleCallback& on_sample, long* steps_out) {
  const int n_max = psi.n_max();
  const auto set = operator_set(n_max, model.lab_z);
  const double theta_start = model.lab_z ? 0.0 : model.angle(0.0);

  std::vector<BlockState> blocks;
  for (int b : supported_blocks(*set, psi.coefficients)) {
    BlockState s;
    s.op = set->blocks[b].get();
    s.x.resize(s.op->size());
    s.omega.resize(s.op->size());
    for (int j = 0; j < s.op->size(); ++j) {
      s.x[j] = psi.coefficients[s.op->indices[j]];
      if (!model.lab_z) s.x[j] *= std::polar(1.0, theta_start * s.op->m[j]);
      s.omega[j] = omega_of(molecule, s.op->n[j]);
    }
    blocks.push_back(std::move(s));
  }

  if (on_sample) on_sample(0.0, psi);

  std::vector<Complex> m_phase(2 * n_max + 1);
  std::vector<TaylorWork> work(blocks.size());
  long steps = 0;
  const double sample = settings.driven_sample_step;
  const auto intervals = static_cast<long>(std::ceil(model.duration / sample - 1e-9));

  // Diagonal rotating-frame evolution from ta to tb:
  // exp(-i omega_N (tb - ta)) exp(i M [Theta(tb) - Theta(ta)]).
  std::vector<std::vector<Complex>> free_phase(blocks.size());
  double phase_span = -1.0;
  auto apply_free = [&](double ta, double tb) {
    const double span = tb - ta;
    if (span != phase_span) {
      for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
        free_phase[bi].resize(blocks[bi].op->size());
        for (int j = 0; j < blocks[bi].op->size(); ++j) {
          free_phase[bi][j] = std::polar(1.0, -std::fmod(span * blocks[bi].omega[j], 2.0 * units::pi));
        }
      }
      phase_span = span;
    }
    bool rotate = false;
    if (!model.lab_z) {
      const double d_theta = model.angle(tb) - model.angle(ta);
      if (d_theta != 0.0) {
        rotate = true;
        const Complex z = std::polar(1.0, d_theta);
        m_phase[n_max] = 1.0;
        for (int mm = 1; mm <= n_max; ++mm) {
          m_phase[n_max + mm] = m_phase[n_max + mm - 1] * z;
          m_phase[n_max - mm] = std::conj(m_phase[n_max + mm]);
        }
      }
    }
    for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
      auto& b = blocks[bi];
      const Complex* f = free_phase[bi].data();
      if (rotate) {
        for (int j = 0; j < b.rows; ++j) b.x[j] *= f[j] * m_phase[n_max + b.op->m[j]];
      } else {
        for (int j = 0; j < b.rows; ++j) b.x[j] *= f[j];
      }
    }
  };

  // Strang splitting with the diagonal halves of neighbouring steps fused.
  double t = 0.0;
  for (long k = 0; k < intervals; ++k) {
    const double t_end = std::min(model.duration, (k + 1) * sample);
    const auto n_steps = std::max(1L, static_cast<long>(std::ceil((t_end - t) / h_max - 1e-9)));
    const double h = (t_end - t) / n_steps;
    for (auto& b : blocks) set_window(b, n_max, settings.window_margin);
    apply_free(t, t + 0.5 * h);
    for (long s = 0; s < n_steps; ++s) {
      const double tm = t + (s + 0.5) * h;
      const double u = model.depth(tm);
      if (u != 0.0) {
        for (std::size_t bi = 0; bi < blocks.size(); ++bi) {
          taylor_exponential(*blocks[bi].op, blocks[bi].rows, u * h, blocks[bi].x.data(), work[bi]);
        }
      }
      apply_free(tm, s + 1 < n_steps ? tm + h : t_end);
      ++steps;
    }
    t = t_end;
    if (on_sample) on_sample(t, lab_state(blocks, n_max, model.lab_z, model.lab_z ? 0.0 : model.angle(t)));
  }
  if (steps_out) *steps_out = steps;
  const double theta = model.lab_z ? 0.0 : model.angle(model.duration);
  Wavefunction out = lab_state(blocks, n_max, model.lab_z, theta);
  // amplitudes outside the supported blocks stay exactly zero
  return out;
}

double resolve_step(double rule, const PropagatorSettings& settings, const char* where) {
  if (!settings.dt) return rule;
  if (*settings.dt > rule * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "step_size: " << where << " dt=" << *settings.dt << " ps exceeds the limit " << rule
       << " ps";
    throw NumericalGuardError(os.str());
  }
  return *settings.dt;
}

Wavefunction drive(const Wavefunction& psi, const MoleculeSpec& molecule, const DriveModel& model,
                   const PropagatorSettings& settings, double t0, Trajectory* traj,
                   DriveReport* report, const char* where) {
  settings.validate();
  if (psi.n_max() != settings.n_max) {
    throw std::invalid_argument("drive: wavefunction n_max differs from settings");
  }
  const double h = resolve_step(model.step_limit, settings, where);
  SampleCallback callback;
  if (traj) {
    callback = [&](double t_local, const Wavefunction& lab) {
      traj->add_driven_record(make_record(lab, t0 + t_local));
      if (settings.store_driven_snapshots) traj->add_snapshot(lab, t0 + t_local);
    };
  }
  long steps = 0;
  Wavefunction out = drive_core(psi, molecule, model, settings, h, callback, &steps);
  DriveReport r;
  r.dt = h;
  r.steps = steps;
  r.norm_drift = std::abs(out.norm_squared() - psi.norm_squared());
  if (settings.richardson_check) {
    const Wavefunction fine = drive_core(psi, molecule, model, settings, 0.5 * h, {}, nullptr);
    r.richardson_overlap = overlap_magnitude(out, fine);
    if (1.0 - r.richardson_overlap > settings.richardson_tolerance) {
      std::ostringstream os;
      os << "richardson: " << where << " overlap of dt and dt/2 runs is " << r.richardson_overlap
         << ", below 1 - " << settings.richardson_tolerance;
      throw NumericalGuardError(os.str());
    }
  }
  if (report) *report = r;
  truncation_guard(out, settings.truncation_threshold, where);
  return out;
}

}  // namespace

double centrifuge_step_limit(const MoleculeSpec& molecule, const CentrifugeSpec& cfg,
                             double steps_per_period) {
  const double omega_max = cfg.terminal_frequency();
  const double u0 = units::trap_depth_angular(molecule.delta_alpha, cfg.peak_intensity);
  const double omega_trap = 2.0 * std::sqrt(u0 * units::wavenumber_to_angular(molecule.b));
  double limit = std::numeric_limits<double>::infinity();
  if (omega_max > 0.0) limit = std::min(limit, 1.0 / (steps_per_period * omega_max));
  if (omega_trap > 0.0) limit = std::min(limit, 1.0 / (steps_per_period * omega_trap));
  return limit;
}

Wavefunction propagate_centrifuge(const Wavefunction& psi, const MoleculeSpec& molecule,
                                  const CentrifugeSpec& cfg, const PropagatorSettings& settings,
                                  double t0, Trajectory* traj, DriveReport* report) {
  cfg.validate();
  if (!cfg.theta0) throw ConfigError("centrifuge: initial orientation is not realized");
  DriveModel model;
  model.lab_z = false;
  model.duration = cfg.duration;
  const double u0 = units::trap_depth_angular(molecule.delta_alpha, cfg.peak_intensity);
  model.depth = [&cfg, u0](double t) { return u0 * cfg.envelope(t); };
  const double theta0 = *cfg.theta0;
  model.angle = [&cfg, theta0](double t) {
    return centrifuge_angle(cfg, theta0, std::clamp(t, 0.0, cfg.duration)).angle;
  };
  model.step_limit = std::min(centrifuge_step_limit(molecule, cfg, settings.steps_per_period),
                              settings.driven_sample_step);
  return drive(psi, molecule, model, settings, t0, traj, report, "centrifuge");
}

Wavefunction propagate_pulse(const Wavefunction& psi, const MoleculeSpec& molecule,
                             const PulseSegment& pulse, const PropagatorSettings& settings,
                             double t0, Trajectory* traj, DriveReport* report) {
  pulse.pulse.validate();
  if (!(pulse.window > 0.0)) throw ConfigError("pulse: window must be > 0");
  PulseSpec centered = pulse.pulse;
  centered.center = 0.5 * pulse.window;
  DriveModel model;
  model.lab_z = centered.polarization.lab_z;
  model.duration = pulse.window;
  const double scale = pulse.calibration * units::trap_depth_angular(molecule.delta_alpha, 1.0);
  model.depth = [centered, scale](double t) { return scale * centered.intensity(t); };
  const double angle = centered.polarization.angle;
  model.angle = [angle](double) { return angle; };
  const double u0 = scale * centered.peak_intensity;
  const double omega_trap = 2.0 * std::sqrt(u0 * units::wavenumber_to_angular(molecule.b));
  double limit = std::min(centered.fwhm_fs * 1e-3 / settings.steps_per_period,
                          settings.driven_sample_step);
  if (omega_trap > 0.0) limit = std::min(limit, 1.0 / (settings.steps_per_period * omega_trap));
  model.step_limit = limit;
  return drive(psi, molecule, model, settings, t0, traj, report, "pulse");
}

// ---------------------------------------------------------------------------
// Programs and ensembles

Trajectory run_program(const Wavefunction& initial, const FieldProgram& program,
                       const MoleculeSpec& molecule, const PropagatorSettings& settings) {
  settings.validate();
  if (initial.n_max() != settings.n_max) {
    throw ConfigError("run_program: initial state n_max differs from the configured n_max");
  }
  if (!program.is_realized()) {
    throw ConfigError("run_program: program has unrealized random centrifuge orientations");
  }
  const GuardReport guard = program.check(molecule);
  if (!guard.ok()) throw ConfigError(guard.violations.front());

  Trajectory traj(molecule, settings.n_max);
  traj.begin(initial, 0.0, settings.free_sample_step);
  Wavefunction psi = initial;
  double t = 0.0;
  for (const auto& segment : program.segments) {
    if (const auto* k = std::get_if<KickSegment>(&segment)) {
      psi = apply_kick(psi, k->strength, k->polarization, settings.truncation_threshold);
      traj.add_snapshot(psi, t);
    } else if (const auto* f = std::get_if<FreeSegment>(&segment)) {
      if (f->duration <= 0.0) continue;
      traj.add_free(psi, t, t + f->duration, true);
      psi = propagate_free(psi, molecule, f->duration);
      t += f->duration;
      traj.add_snapshot(psi, t);
    } else if (const auto* p = std::get_if<PulseSegment>(&segment)) {
      psi = propagate_pulse(psi, molecule, *p, settings, t, &traj);
      t += p->window;
      traj.add_snapshot(psi, t);
    } else if (const auto* c = std::get_if<CentrifugeSegment>(&segment)) {
      psi = propagate_centrifuge(psi, molecule, c->spec, settings, t, &traj);
      t += c->spec.duration;
      traj.add_snapshot(psi, t);
    }
  }
  traj.finish(psi, t, settings.snapshots);
  return traj;
}

EnsembleResult EnsembleResult::single(Trajectory trajectory) {
  EnsembleResult r;
  r.members.push_back({0, 0, 1.0, std::move(trajectory)});
  return r;
}

double EnsembleResult::total_weight() const {
  double w = 0.0;
  for (const auto& m : members) w += m.weight;
  return w;
}

Record EnsembleResult::record_at(double t) const {
  if (members.empty()) throw std::logic_error("ensemble: no members");
  std::vector<Record> parts(members.size());
#pragma omp parallel for schedule(dynamic)
  for (std::size_t i = 0; i < members.size(); ++i) parts[i] = members[i].trajectory.record_at(t);
  const double total = total_weight();
  Record out = parts[0];
  out.jz = 0.0;
  std::fill(out.populations.begin(), out.populations.end(), 0.0);
  std::fill(out.jz_by_n.begin(), out.jz_by_n.end(), 0.0);
  for (auto& c : out.coherences) std::fill(c.begin(), c.end(), Complex(0.0, 0.0));
  for (std::size_t i = 0; i < members.size(); ++i) {
    const double w = members[i].weight / total;
    const Record& r = parts[i];
    out.jz += w * r.jz;
    for (std::size_t n = 0; n < out.populations.size(); ++n) {
      out.populations[n] += w * r.populations[n];
      out.jz_by_n[n] += w * r.jz_by_n[n];
    }
    for (int k = 0; k < 3; ++k) {
      for (std::size_t n = 0; n < out.coherences[k].size(); ++n) {
        out.coherences[k][n] += w * r.coherences[k][n];
      }
    }
  }
  return out;
}

EnsembleResult run_ensemble(const ThermalWeights& weights, const FieldProgram& program,
                            const MoleculeSpec& molecule, const PropagatorSettings& settings,
                            const EnsembleOptions& options) {
  settings.validate();
  if (weights.n_max > settings.n_max) {
    throw ConfigError("run_ensemble: thermal N_max exceeds the propagation N_max");
  }
  const FieldProgram realized = program.realize(options.seed);
  std::vector<std::pair<int, int>> states;
  std::vector<double> state_weights;
  const double cutoff = kNegligibleShellWeight * weights.total();
  for (int n = 0; n <= weights.n_max; ++n) {
    if (weights.per_state[n] <= 0.0 || weights.shell(n) < cutoff) continue;
    for (int m = -n; m <= n; ++m) {
      states.emplace_back(n, m);
      state_weights.push_back(weights.per_state[n]);
    }
  }
  if (states.empty()) throw ConfigError("run_ensemble: no populated initial states");

  std::vector<std::optional<Trajectory>> trajectories(states.size());
  std::vector<std::exception_ptr> errors(states.size());
  const int jobs = options.jobs > 0 ? options.jobs : omp_get_max_threads();
#pragma omp parallel for schedule(dynamic) num_threads(jobs)
  for (std::size_t i = 0; i < states.size(); ++i) {
    try {
      const auto initial = Wavefunction::basis_state(settings.n_max, states[i].first, states[i].second);
      trajectories[i].emplace(run_program(initial, realized, molecule, settings));
    } catch (...) {
      errors[i] = std::current_exception();
    }
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  EnsembleResult result;
  result.members.reserve(states.size());
  for (std::size_t i = 0; i < states.size(); ++i) {
    result.members.push_back({states[i].first, states[i].second, state_weights[i],
                              std::move(*trajectories[i])});
  }
  return result;
}

}  // namespace superrotor
