#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <atomic>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <thread>
#include <vector>

#include "qstforge/dynamics.hpp"
#include "qstforge/hamiltonian.hpp"
#include "qstforge/rng.hpp"
#include "qstforge/sparse.hpp"

namespace qstforge {

enum class ScheduleShape { geometric, linear };
enum class MoveKind { local, global };

// Annealing controls.  Temperatures are dimensionless (the cost is an
// infidelity in [0,1]); bounds and move scale are in MHz.
struct AnnealSchedule {
  double t_high = 0.1;
  double t_low = 1e-5;
  long steps = 200000;
  ScheduleShape shape = ScheduleShape::geometric;
  int replicas = 1;
  std::uint64_t seed = 1;
  double j_min_mhz = -10.0;
  double j_max_mhz = -0.3;
  double move_sigma0_mhz = 0.5;
  double target_accept = 0.3;

  void validate() const {
    if (!(t_high > t_low) || !(t_low > 0.0))
      throw std::invalid_argument("schedule requires t_high > t_low > 0");
    if (steps < 1) throw std::invalid_argument("schedule requires steps >= 1");
    if (replicas < 1) throw std::invalid_argument("schedule requires replicas >= 1");
    if (!(j_min_mhz < j_max_mhz)) throw std::invalid_argument("schedule requires j_min < j_max");
    if (!(move_sigma0_mhz > 0.0)) throw std::invalid_argument("move sigma must be positive");
    if (!(target_accept > 0.0 && target_accept < 1.0))
      throw std::invalid_argument("target acceptance must lie in (0,1)");
  }

  double temperature(long step) const {
    if (steps <= 1) return t_high;
    const double frac = static_cast<double>(step) / static_cast<double>(steps - 1);
    if (shape == ScheduleShape::linear) return t_high + (t_low - t_high) * frac;
    return t_high * std::pow(t_low / t_high, frac);
  }
};

struct TracePoint {
  long step;
  double temperature;
  double current_infidelity;
  double best_infidelity;
  double accept_ratio;
};

struct AnnealRun {
  int replica_index = 0;
  CouplingConfig best_couplings;
  double best_infidelity = 1.0;
  long accepted = 0;
  long proposed = 0;
  std::vector<TracePoint> trace;
};

struct AnnealResult {
  AnnealSchedule schedule;
  std::vector<AnnealRun> replicas;
  int best_index = 0;

  const AnnealRun& best() const { return replicas.at(static_cast<std::size_t>(best_index)); }
  double best_fidelity() const { return std::sqrt(std::max(0.0, 1.0 - best().best_infidelity)); }
};

// F~ = 1 - |<target|psi(t_qst)>|^2, rebuilding the Hamiltonian for the
// candidate couplings and evolving once.
inline double infidelity(const LatticeSpec& spec, const CouplingConfig& config,
                         std::shared_ptr<const FockBasis> basis, const StateVector& psi0,
                         const StateVector& target, double t_qst_ns) {
  auto h = build_hamiltonian(spec, config, std::move(basis));
  return 1.0 - transfer_population(h, psi0, target, t_qst_ns);
}

// Metropolis rule for the cost p ~ exp(-F~/T): downhill moves always pass,
// uphill ones with probability exp(-delta/T).
inline bool metropolis_accept(double delta_infidelity, double temperature, RngStream& rng) {
  if (!(temperature > 0.0)) throw std::invalid_argument("temperature must be positive");
  if (delta_infidelity <= 0.0) return true;
  return rng.uniform() < std::exp(-delta_infidelity / temperature);
}

namespace detail {

inline double clip(double v, double lo, double hi) { return std::min(hi, std::max(lo, v)); }

inline void set_group(CouplingConfig& config, const std::vector<std::size_t>& group, double v) {
  for (std::size_t b : group) config.set_value(b, v);
}

inline void propose_into(CouplingConfig& next, const CouplingConfig& current,
                         const std::vector<std::vector<std::size_t>>& groups, RngStream& rng,
                         double sigma_mhz, MoveKind kind, double j_min_mhz, double j_max_mhz) {
  if (!(sigma_mhz > 0.0)) throw std::invalid_argument("move sigma must be positive");
  if (groups.empty()) throw std::invalid_argument("no free parameters to move");
  next = current;
  if (kind == MoveKind::local) {
    const auto& group = groups[static_cast<std::size_t>(rng.uniform_index(groups.size()))];
    const double v = clip(current.value(group[0]) + rng.gaussian(0.0, sigma_mhz),
                          j_min_mhz, j_max_mhz);
    set_group(next, group, v);
  } else {
    const double j_ref = 0.5 * (std::abs(j_min_mhz) + std::abs(j_max_mhz));
    const double eps = rng.gaussian(0.0, sigma_mhz / j_ref);
    for (const auto& group : groups) {
      const double v = clip(current.value(group[0]) * (1.0 + eps), j_min_mhz, j_max_mhz);
      set_group(next, group, v);
    }
  }
}

}  // namespace detail

// One Monte Carlo proposal.  LOCAL perturbs a single parameter group by
// Gaussian noise of width sigma; GLOBAL rescales every free group by a
// common factor (1+eps).  Results are clipped into [j_min, j_max]; fixed
// bonds and cross couplings are never touched.
inline CouplingConfig propose_move(const LatticeSpec& spec, const CouplingConfig& current,
                                   RngStream& rng, double sigma_mhz, MoveKind kind,
                                   double j_min_mhz, double j_max_mhz) {
  const auto groups = free_parameter_groups(spec, current.symmetry());
  CouplingConfig next = current;
  detail::propose_into(next, current, groups, rng, sigma_mhz, kind, j_min_mhz, j_max_mhz);
  return next;
}

namespace detail {

// Fidelity evaluator for the annealing loop.  Small subspaces use a dense
// eigendecomposition; larger ones switch to the Chebyshev propagator acting
// on the initial vector, which only costs sparse matvecs.
class TransferEvaluator {
 public:
  TransferEvaluator(const LatticeSpec& spec, std::shared_ptr<const FockBasis> basis,
                    StateVector psi0, StateVector target, double t_qst_ns)
      : spec_(spec),
        basis_(std::move(basis)),
        psi0_(std::move(psi0)),
        target_(std::move(target)),
        t_ns_(t_qst_ns),
        pattern_(qstforge::detail::hop_pattern(spec, *basis_)),
        dense_(basis_->dim() <= kDenseLimit) {
    if (!psi0_.basis->compatible(*basis_) || !target_.basis->compatible(*basis_))
      throw std::invalid_argument("states do not match annealing basis");
    if (dense_) {
      h_ = Eigen::MatrixXd::Zero(basis_->dim(), basis_->dim());
    } else {
      sparse_pattern_.reserve(pattern_.size());
      for (const auto& [n, m, b] : pattern_) sparse_pattern_.push_back({n, m});
      sparse_values_.resize(pattern_.size());
    }
  }

  double fidelity_sq(const CouplingConfig& config) {
    return dense_ ? dense_eval(config) : sparse_eval(config);
  }

 private:
  static constexpr int kDenseLimit = 200;

  double dense_eval(const CouplingConfig& config) {
    h_.setZero();
    for (const auto& [n, m, b] : pattern_) {
      const double w = config.value(static_cast<std::size_t>(b)) * mhz_to_rad_ns;
      h_(n, m) += w;
      h_(m, n) += w;
    }
    solver_.compute(h_);
    if (solver_.info() != Eigen::Success)
      throw std::runtime_error("symmetric eigensolver failed during annealing");
    const auto& vecs = solver_.eigenvectors();
    const auto& vals = solver_.eigenvalues();
    const Eigen::VectorXcd w0 = vecs.transpose() * psi0_.amplitudes;
    const Eigen::VectorXcd wt = vecs.transpose() * target_.amplitudes;
    Complex acc = 0.0;
    for (Eigen::Index k = 0; k < vals.size(); ++k)
      acc += std::conj(wt(k)) * w0(k) * std::polar(1.0, -vals(k) * t_ns_);
    return std::norm(acc);
  }

  double sparse_eval(const CouplingConfig& config) {
    for (std::size_t k = 0; k < pattern_.size(); ++k)
      sparse_values_[k] = config.value(static_cast<std::size_t>(pattern_[k][2])) * mhz_to_rad_ns;
    SparseSym h(basis_->dim(), sparse_pattern_, sparse_values_);
    const Eigen::VectorXcd psi_t = chebyshev_evolve(h, psi0_.amplitudes, t_ns_);
    return std::norm(target_.amplitudes.dot(psi_t));
  }

  const LatticeSpec& spec_;
  std::shared_ptr<const FockBasis> basis_;
  StateVector psi0_;
  StateVector target_;
  double t_ns_;
  std::vector<std::array<int, 3>> pattern_;
  bool dense_;
  Eigen::MatrixXd h_;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver_;
  std::vector<std::array<int, 2>> sparse_pattern_;
  std::vector<double> sparse_values_;
};

inline AnnealRun run_replica(const LatticeSpec& spec, const CouplingConfig& base,
                             std::shared_ptr<const FockBasis> basis, const StateVector& psi0,
                             const StateVector& target, double t_qst_ns,
                             const AnnealSchedule& schedule, int replica,
                             const std::vector<std::vector<std::size_t>>& groups) {
  RngStream rng = derive_stream(schedule.seed, "anneal-replica",
                                static_cast<std::uint64_t>(replica));
  TransferEvaluator eval(spec, basis, psi0, target, t_qst_ns);

  CouplingConfig current = base;
  for (const auto& group : groups)
    set_group(current, group, rng.uniform(schedule.j_min_mhz, schedule.j_max_mhz));
  double current_cost = 1.0 - eval.fidelity_sq(current);

  AnnealRun run;
  run.replica_index = replica;
  run.best_couplings = current;
  run.best_infidelity = current_cost;

  const long trace_stride = std::max<long>(1, schedule.steps / 256);
  const long window = 100;
  double sigma = schedule.move_sigma0_mhz;
  const double span = schedule.j_max_mhz - schedule.j_min_mhz;
  long window_accepted = 0;
  long window_proposed = 0;
  double recent_ratio = 0.0;

  CouplingConfig candidate = current;
  for (long step = 0; step < schedule.steps; ++step) {
    const double temperature = schedule.temperature(step);
    const MoveKind kind = ((step + 1) % 50 == 0) ? MoveKind::global : MoveKind::local;
    propose_into(candidate, current, groups, rng, sigma, kind, schedule.j_min_mhz,
                 schedule.j_max_mhz);
    const double cost = 1.0 - eval.fidelity_sq(candidate);
    ++run.proposed;
    ++window_proposed;
    if (metropolis_accept(cost - current_cost, temperature, rng)) {
      std::swap(current, candidate);
      current_cost = cost;
      ++run.accepted;
      ++window_accepted;
      if (cost < run.best_infidelity) {
        run.best_infidelity = cost;
        run.best_couplings = current;
      }
    }
    if (window_proposed == window) {
      recent_ratio = static_cast<double>(window_accepted) / window;
      sigma *= (recent_ratio > schedule.target_accept) ? 1.1 : 1.0 / 1.1;
      sigma = clip(sigma, 1e-4, span);
      window_accepted = 0;
      window_proposed = 0;
    }
    if (step % trace_stride == 0 || step == schedule.steps - 1)
      run.trace.push_back({step, temperature, current_cost, run.best_infidelity, recent_ratio});
  }
  return run;
}

}  // namespace detail

// Runs `schedule.replicas` independent annealing chains, each with its own
// RNG stream derived from (seed, replica index), and returns all of them with
// the winner marked (smallest best infidelity, ties by replica index).  The
// base config supplies values for fixed bonds and cross couplings; every free
// parameter group is drawn uniformly in [j_min, j_max] per replica.
inline AnnealResult run_annealing(const LatticeSpec& spec, const CouplingConfig& base,
                                  std::shared_ptr<const FockBasis> basis, const StateVector& psi0,
                                  const StateVector& target, double t_qst_ns,
                                  const AnnealSchedule& schedule, int n_threads = 1) {
  schedule.validate();
  const auto groups = free_parameter_groups(spec, base.symmetry());
  if (groups.empty()) throw std::invalid_argument("annealing requires at least one free parameter");

  AnnealResult result;
  result.schedule = schedule;
  result.replicas.resize(static_cast<std::size_t>(schedule.replicas));

  auto work = [&](int replica) {
    result.replicas[static_cast<std::size_t>(replica)] = detail::run_replica(
        spec, base, basis, psi0, target, t_qst_ns, schedule, replica, groups);
  };

  const int workers = std::max(1, std::min(n_threads, schedule.replicas));
  if (workers == 1) {
    for (int r = 0; r < schedule.replicas; ++r) work(r);
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    pool.reserve(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&] {
        for (int r = next.fetch_add(1); r < schedule.replicas; r = next.fetch_add(1)) work(r);
      });
    for (auto& th : pool) th.join();
  }

  result.best_index = 0;
  for (int r = 1; r < schedule.replicas; ++r)
    if (result.replicas[static_cast<std::size_t>(r)].best_infidelity <
        result.replicas[static_cast<std::size_t>(result.best_index)].best_infidelity)
      result.best_index = r;
  return result;
}

}  // namespace qstforge
