// Acceptance suite: one pass/fail line per criterion, nonzero exit when any
// gated criterion fails.  Options:
//   --criterion N   run a single criterion (repeatable)
//   --extended      also run the long 6x6 two-excitation benchmark
//   --budget-minutes M   wall-clock budget for the extended benchmark
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <map>
#include <numbers>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "qstforge/anneal.hpp"
#include "qstforge/chaos.hpp"
#include "qstforge/dynamics.hpp"
#include "qstforge/robustness.hpp"

using namespace qstforge;
using Clock = std::chrono::steady_clock;

namespace {

constexpr double kTQst3x3 = 125.0;  // tJ = pi/2 at J/2pi = 2 MHz
constexpr double kTQst6x6 = 250.0;  // tJ = pi/2 at J/2pi = 1 MHz

struct Outcome {
  bool pass;
  std::string detail;
};

struct Solution {
  LatticeSpec lattice;
  CouplingConfig couplings;
  std::shared_ptr<const FockBasis> basis;
  StateVector psi0;
  StateVector target;
  double t_qst_ns;
  double fidelity;
};

LatticeSpec lattice_with_defect(int n, bool mirror_defect = false) {
  auto spec = build_grid(n, n, true);
  if (n == 3) {
    spec.add_defect({3, 2}, {3, 3}, 0.3);
    if (mirror_defect) spec.add_defect({1, 1}, {1, 2}, 0.3);
  } else {
    spec.add_defect({6, 3}, {6, 4}, 0.3);
    if (mirror_defect) spec.add_defect({1, 3}, {1, 4}, 0.3);
  }
  return spec;
}

AnnealSchedule gated_schedule(long steps, int replicas, std::uint64_t seed) {
  AnnealSchedule sched;
  sched.steps = steps;
  sched.replicas = replicas;
  sched.seed = seed;
  sched.j_min_mhz = -10.0;
  sched.j_max_mhz = -0.3;
  return sched;
}

int hardware_threads() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// Lazily computed optimized solutions shared between criteria 4-6 and 10.
std::map<int, Solution> g_solutions;

const Solution& optimized_solution(int criterion) {
  auto it = g_solutions.find(criterion);
  if (it != g_solutions.end()) return it->second;

  Solution sol{build_grid(2, 1, false), CouplingConfig{}, nullptr,
               StateVector{}, StateVector{}, 0.0, 0.0};
  if (criterion == 4) {
    sol.lattice = lattice_with_defect(3);
    sol.basis = build_basis(9, 1);
    sol.psi0 = basis_state(sol.basis, Occupation::single(0));
    sol.target = basis_state(sol.basis, Occupation::single(8));
    sol.t_qst_ns = kTQst3x3;
  } else if (criterion == 5) {
    sol.lattice = lattice_with_defect(6);
    sol.basis = build_basis(36, 1);
    sol.psi0 = basis_state(sol.basis, Occupation::single(0));
    sol.target = basis_state(sol.basis, Occupation::single(35));
    sol.t_qst_ns = kTQst6x6;
  } else {
    sol.lattice = lattice_with_defect(3);
    sol.basis = build_basis(9, 2);
    sol.psi0 = basis_state(sol.basis, Occupation::pair(0, 1));
    sol.target = basis_state(sol.basis, Occupation::pair(7, 8));
    sol.t_qst_ns = kTQst3x3;
  }
  CouplingConfig base(sol.lattice, CouplingSymmetry::inversion);
  set_cross_couplings(sol.lattice, base, 0.45);
  const AnnealSchedule sched = criterion == 4   ? gated_schedule(200000, 5, 10004)
                               : criterion == 5 ? gated_schedule(200000, 5, 10005)
                                                : gated_schedule(60000, 40, 10006);
  const AnnealResult result = run_annealing(sol.lattice, base, sol.basis, sol.psi0, sol.target,
                                            sol.t_qst_ns, sched, hardware_threads());
  sol.couplings = result.best().best_couplings;
  sol.fidelity = result.best_fidelity();
  return g_solutions.emplace(criterion, std::move(sol)).first->second;
}

char buffer[512];

template <typename... Args>
std::string fmt(const char* format, Args... args) {
  std::snprintf(buffer, sizeof(buffer), format, args...);
  return buffer;
}

// ---- criteria ----

Outcome criterion_1() {
  auto spec = build_grid(6, 1, false);
  CouplingConfig config(spec, CouplingSymmetry::free);
  const auto js = standard_protocol(6, -2.0);
  for (std::size_t b = 0; b < spec.bonds().size(); ++b)
    config.set_value(b, js[static_cast<std::size_t>(spec.bonds()[b].a.x) - 1]);
  auto basis = build_basis(6, 1);
  auto h = build_hamiltonian(spec, config, basis);
  const double f = transfer_fidelity(h, basis_state(basis, Occupation::single(0)),
                                     basis_state(basis, Occupation::single(5)), kTQst3x3);
  return {std::abs(f - 1.0) <= 1e-8,
          fmt("1D N=6 standard protocol: |F-1| = %.3e at t = 125 ns (tol 1e-8)",
              std::abs(f - 1.0))};
}

Outcome criterion_2() {
  auto spec = build_grid(6, 6, false);
  auto basis = build_basis(36, 1);
  auto h = build_hamiltonian(spec, product_protocol(spec, -2.0), basis);
  const double f = transfer_fidelity(h, basis_state(basis, Occupation::single(0)),
                                     basis_state(basis, Occupation::single(35)), kTQst3x3);
  return {std::abs(f - 1.0) <= 1e-8,
          fmt("6x6 product protocol: |F-1| = %.3e at tJ = pi/2 (tol 1e-8)", std::abs(f - 1.0))};
}

Outcome criterion_3() {
  auto spec = lattice_with_defect(3);
  CouplingConfig config(spec, CouplingSymmetry::free);
  for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
    const Bond& bond = spec.bonds()[b];
    if (bond.fixed) continue;
    config.set_value(b, bond.kind == BondKind::cross ? 0.45 : -2.0 * std::numbers::sqrt2);
  }
  auto basis = build_basis(9, 1);
  auto h = build_hamiltonian(spec, config, basis);
  const double pop = transfer_population(h, basis_state(basis, Occupation::single(0)),
                                         basis_state(basis, Occupation::single(8)), kTQst3x3);
  return {pop < 0.5,
          fmt("broken 3x3 protocol: target population %.4f at tJ = pi/2 (require < 0.5)", pop)};
}

Outcome anneal_criterion(int criterion, double threshold) {
  const Solution& sol = optimized_solution(criterion);
  return {sol.fidelity >= threshold,
          fmt("best transfer fidelity %.4f (require >= %.2f)", sol.fidelity, threshold)};
}

Outcome criterion_7() {
  // Random ensemble: 6x6 two-excitation draws with exact inversion symmetry
  // (defect and its mirror both pinned) so the parity sectors resolve.
  auto random_lattice = lattice_with_defect(6, true);
  CouplingConfig random_base(random_lattice, CouplingSymmetry::inversion);
  set_cross_couplings(random_lattice, random_base, 0.45);
  auto basis6 = build_basis(36, 2);
  auto sectors6 = parity_sectors(*basis6, random_lattice);
  GapRatioStats random_pool;
  for (int i = 0; i < 40; ++i) {
    RngStream rng = derive_stream(99, "chaos-random", static_cast<std::uint64_t>(i));
    auto config = random_coupling_config(random_lattice, random_base, -10.0, -0.1, rng);
    auto h = build_hamiltonian(random_lattice, config, basis6);
    auto stats = gap_ratios(h, sectors6);
    random_pool.ratios.insert(random_pool.ratios.end(), stats.combined.ratios.begin(),
                              stats.combined.ratios.end());
  }
  detail::finalize_stats(random_pool);
  const double goe_target = 0.5307;
  const bool random_ok = std::abs(random_pool.mean_r - goe_target) <= 0.02;

  // Optimized ensemble: 3x3 two-excitation solutions with F > 0.93 (the
  // criterion's sanctioned desk-scale substitute), same symmetric-defect
  // treatment, annealed at reduced budget for solution diversity.
  auto opt_lattice = lattice_with_defect(3, true);
  CouplingConfig opt_base(opt_lattice, CouplingSymmetry::inversion);
  set_cross_couplings(opt_lattice, opt_base, 0.45);
  auto basis3 = build_basis(9, 2);
  auto sectors3 = parity_sectors(*basis3, opt_lattice);
  auto psi0 = basis_state(basis3, Occupation::pair(0, 1));
  auto target = basis_state(basis3, Occupation::pair(7, 8));
  GapRatioStats opt_pool;
  int kept = 0;
  int tried = 0;
  while (kept < 40 && tried < 400) {
    AnnealSchedule sched;
    sched.steps = 12000;
    sched.replicas = 1;
    sched.seed = 5000 + static_cast<std::uint64_t>(tried++);
    sched.j_min_mhz = -10.0;
    sched.j_max_mhz = -0.1;
    auto result = run_annealing(opt_lattice, opt_base, basis3, psi0, target, kTQst3x3, sched);
    if (result.best_fidelity() <= 0.93) continue;
    ++kept;
    auto h = build_hamiltonian(opt_lattice, result.best().best_couplings, basis3);
    auto stats = gap_ratios(h, sectors3);
    opt_pool.ratios.insert(opt_pool.ratios.end(), stats.combined.ratios.begin(),
                           stats.combined.ratios.end());
  }
  detail::finalize_stats(opt_pool);
  const double poisson_target = 2.0 * std::log(2.0) - 1.0;
  const bool opt_ok = kept == 40 && std::abs(opt_pool.mean_r - poisson_target) <= 0.03;

  return {random_ok && opt_ok,
          fmt("random mean r = %.4f (target %.4f +- 0.02); optimized mean r = %.4f "
              "(target %.4f +- 0.03, %d/40 solutions with F > 0.93)",
              random_pool.mean_r, goe_target, opt_pool.mean_r, poisson_target, kept)};
}

Outcome criterion_8() {
  auto spec = build_grid(6, 6, true);
  auto sectors = parity_sectors(*build_basis(36, 2), spec);
  const bool ok = sectors.dim_even() == 324 && sectors.dim_odd() == 306;
  return {ok, fmt("6x6 two-excitation parity split = (%d, %d) (require (324, 306))",
                  sectors.dim_even(), sectors.dim_odd())};
}

Outcome criterion_9() {
  auto l6 = build_grid(6, 6, true);
  auto b6 = build_basis(36, 2);
  const double d6 = fock_distance(*b6, l6, b6->index_of(Occupation::pair(34, 35)),
                                  Occupation::pair(0, 1));
  auto l3 = build_grid(3, 3, true);
  auto b3 = build_basis(9, 2);
  const double d3 = fock_distance(*b3, l3, b3->index_of(Occupation::pair(7, 8)),
                                  Occupation::pair(0, 1));
  const double mean3 = mean_distance(*b3, l3, Occupation::pair(0, 1));
  const bool ok = d6 == 8.5 && d3 == 2.5 && std::abs(mean3 - 1.33) <= 0.01;
  return {ok, fmt("d(Q1Q2->Q35Q36) = %.1f, d(Q1Q2->Q8Q9) = %.1f, 3x3 mean = %.4f "
                  "(require 8.5, 2.5, 1.33 +- 0.01)",
                  d6, d3, mean3)};
}

Outcome criterion_10() {
  bool ok = true;
  std::string detail;
  for (int criterion : {4, 5, 6}) {
    const Solution& sol = optimized_solution(criterion);
    auto h = build_hamiltonian(sol.lattice, sol.couplings, sol.basis);
    const QslReport report = qsl_report(h, sol.psi0);
    const bool mt_time = report.t_de_finite() && sol.t_qst_ns >= report.t_de_ns;

    std::vector<double> times;
    for (int k = 0; k <= 200; ++k)
      times.push_back(sol.t_qst_ns * static_cast<double>(k) / 200.0);
    bool curve_ok = true;
    for (const auto& sample : qsl_bounds_curve(h, sol.psi0, times))
      if (sample.overlap < sample.mt_bound - 1e-9) curve_ok = false;

    ok = ok && mt_time && curve_ok;
    detail += fmt("[c%d: t_qst %.0f >= t_dE %.1f %s, MT curve %s] ", criterion, sol.t_qst_ns,
                  report.t_de_ns, mt_time ? "ok" : "VIOLATED", curve_ok ? "ok" : "VIOLATED");
  }
  return {ok, detail + "(tol 1e-9)"};
}

Outcome criterion_11() {
  auto res = thermal_sweep({{2, 2}, {2, 3}, {3, 3}, {3, 4}},
                           ThermalProtocol::single_excitation, {0.005}, 25, 4242);
  const double extrapolated = res.extrapolated[0];
  const double at_3x3 = res.infidelity_mean[0][2];
  const bool ok = extrapolated >= 0.07 && extrapolated <= 0.13 && at_3x3 >= 0.015 &&
                  at_3x3 <= 0.045;
  return {ok, fmt("gamma = 0.5%%: extrapolated 36-site infidelity %.4f (require [0.07, 0.13]); "
                  "3x3 infidelity %.4f (require [0.015, 0.045])",
                  extrapolated, at_3x3)};
}

Outcome criterion_12() {
  RngStream rng(2024, "acceptance-properties", 0);
  std::string failures;

  // Unitarity, composition, sign flip on random configurations.
  for (int trial = 0; trial < 4; ++trial) {
    auto spec = build_grid(3, 3, true);
    CouplingConfig config(spec, CouplingSymmetry::free);
    for (std::size_t b = 0; b < spec.bonds().size(); ++b) config.set_value(b, rng.uniform(-8, -0.3));
    auto basis = build_basis(9, 2);
    auto h = build_hamiltonian(spec, config, basis);
    Eigen::VectorXcd amp(basis->dim());
    for (int k = 0; k < basis->dim(); ++k) amp(k) = Complex(rng.gaussian(), rng.gaussian());
    amp /= amp.norm();
    StateVector psi{basis, amp};
    const double t1 = rng.uniform(0, 200), t2 = rng.uniform(0, 200);
    if (std::abs(evolve(h, psi, t1).norm() - 1.0) > 1e-10) failures += "unitarity ";
    const auto once = evolve(h, psi, t1 + t2).amplitudes;
    const auto twice = evolve(h, evolve(h, psi, t1), t2).amplitudes;
    if ((once - twice).norm() > 1e-10) failures += "composition ";

    CouplingConfig flipped = config;
    for (std::size_t b = 0; b < spec.bonds().size(); ++b) flipped.set_value(b, -config.value(b));
    auto hf = build_hamiltonian(spec, flipped, basis);
    auto a = basis_state(basis, Occupation::pair(0, 1));
    auto bstate = basis_state(basis, Occupation::pair(7, 8));
    if (std::abs(transfer_fidelity(h, a, bstate, t1) - transfer_fidelity(hf, a, bstate, t1)) >
        1e-10)
      failures += "sign-flip ";
  }

  // Parity commutation for an inversion-symmetric configuration.
  {
    auto spec = build_grid(4, 3, true);
    CouplingConfig config(spec, CouplingSymmetry::inversion);
    set_cross_couplings(spec, config, 0.45);
    for (const auto& group : free_parameter_groups(spec, CouplingSymmetry::inversion)) {
      const double v = rng.uniform(-8, -0.3);
      for (std::size_t b : group) config.set_value(b, v);
    }
    auto basis = build_basis(12, 2);
    auto h = build_hamiltonian(spec, config, basis);
    const auto perm = spec.inversion_map();
    Eigen::MatrixXd p = Eigen::MatrixXd::Zero(h.dim(), h.dim());
    for (int n = 0; n < h.dim(); ++n)
      p(basis->index_of(invert_occupation(basis->state(n), perm)), n) = 1.0;
    if ((h.matrix() * p - p * h.matrix()).cwiseAbs().maxCoeff() > 1e-12)
      failures += "parity-commutation ";
  }

  // RK4 vs eigendecomposition on random 4-6 site instances.
  for (int sites : {4, 6}) {
    auto spec = build_grid(sites == 4 ? 2 : 3, 2, true);
    CouplingConfig config(spec, CouplingSymmetry::free);
    for (std::size_t b = 0; b < spec.bonds().size(); ++b) config.set_value(b, rng.uniform(-8, -0.3));
    auto basis = build_basis(sites, 1);
    auto h = build_hamiltonian(spec, config, basis);
    Eigen::VectorXcd psi = Eigen::VectorXcd::Zero(sites);
    psi(0) = 1.0;
    Eigen::VectorXcd rk = psi;
    const double t = 30.0;
    const int steps = 30000;
    const Complex mi(0.0, -1.0);
    const double dt = t / steps;
    for (int s = 0; s < steps; ++s) {
      const Eigen::VectorXcd k1 = mi * (h.matrix() * rk);
      const Eigen::VectorXcd k2 = mi * (h.matrix() * (rk + 0.5 * dt * k1));
      const Eigen::VectorXcd k3 = mi * (h.matrix() * (rk + 0.5 * dt * k2));
      const Eigen::VectorXcd k4 = mi * (h.matrix() * (rk + dt * k3));
      rk += dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    }
    if ((evolve(h, {basis, psi}, t).amplitudes - rk).norm() > 1e-8) failures += "rk4 ";
  }

  // Metropolis acceptance statistics: p = 1/2 at delta = T ln 2, 3 sigma.
  {
    const double temperature = 0.03;
    const int trials = 100000;
    int accepted = 0;
    for (int k = 0; k < trials; ++k)
      if (metropolis_accept(temperature * std::log(2.0), temperature, rng)) ++accepted;
    const double p = static_cast<double>(accepted) / trials;
    if (std::abs(p - 0.5) > 3.0 * std::sqrt(0.25 / trials)) failures += "metropolis ";
  }

  if (failures.empty())
    return {true,
            "unitarity, composition, parity commutation, sign flip, RK4 agreement, "
            "Metropolis statistics all hold"};
  return {false, "violated: " + failures};
}

// Extended, non-gating: 6x6 two-excitation annealing under a wall budget.
void extended_benchmark(double budget_minutes) {
  std::printf("extended  6x6 two-excitation anneal, %.0f min budget\n", budget_minutes);
  auto spec = lattice_with_defect(6);
  CouplingConfig base(spec, CouplingSymmetry::inversion);
  set_cross_couplings(spec, base, 0.45);
  auto basis = build_basis(36, 2);
  auto psi0 = basis_state(basis, Occupation::pair(0, 1));
  auto target = basis_state(basis, Occupation::pair(34, 35));

  const auto t0 = Clock::now();
  double best = 1.0;
  int replica = 0;
  while (std::chrono::duration<double>(Clock::now() - t0).count() < budget_minutes * 60.0) {
    // Deep chains pay off here: the 630-dimensional landscape needs a few
    // hundred thousand steps per replica before the schedule freezes.
    AnnealSchedule sched = gated_schedule(500000, 1, 20000 + static_cast<std::uint64_t>(replica));
    auto result = run_annealing(spec, base, basis, psi0, target, kTQst6x6, sched);
    best = std::min(best, result.best().best_infidelity);
    std::printf("  replica %2d: F = %.4f (best so far %.4f, %.1f min elapsed)\n", replica,
                result.best_fidelity(), std::sqrt(1.0 - best),
                std::chrono::duration<double>(Clock::now() - t0).count() / 60.0);
    std::fflush(stdout);
    ++replica;
  }
  const double fidelity = std::sqrt(1.0 - best);
  std::printf("extended  best fidelity %.4f over %d replicas (expected >= 0.88, non-gating)\n",
              fidelity, replica);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> selected;
  bool extended = false;
  double budget_minutes = 360.0;
  for (int a = 1; a < argc; ++a) {
    if (std::strcmp(argv[a], "--criterion") == 0 && a + 1 < argc) {
      selected.insert(std::atoi(argv[++a]));
    } else if (std::strcmp(argv[a], "--extended") == 0) {
      extended = true;
    } else if (std::strcmp(argv[a], "--budget-minutes") == 0 && a + 1 < argc) {
      budget_minutes = std::atof(argv[++a]);
    } else {
      std::fprintf(stderr, "usage: acceptance [--criterion N]... [--extended] "
                           "[--budget-minutes M]\n");
      return 64;
    }
  }

  const std::vector<std::pair<int, std::function<Outcome()>>> criteria = {
      {1, criterion_1},
      {2, criterion_2},
      {3, criterion_3},
      {4, [] { return anneal_criterion(4, 0.98); }},
      {5, [] { return anneal_criterion(5, 0.98); }},
      {6, [] { return anneal_criterion(6, 0.91); }},
      {7, criterion_7},
      {8, criterion_8},
      {9, criterion_9},
      {10, criterion_10},
      {11, criterion_11},
      {12, criterion_12},
  };

  int failures = 0;
  for (const auto& [number, run] : criteria) {
    if (!selected.empty() && !selected.count(number)) continue;
    const auto t0 = Clock::now();
    Outcome outcome{false, "exception"};
    try {
      outcome = run();
    } catch (const std::exception& e) {
      outcome.detail = std::string("exception: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    std::printf("criterion %2d %s  %s  [%.1f s]\n", number, outcome.pass ? "PASS" : "FAIL",
                outcome.detail.c_str(), secs);
    std::fflush(stdout);
    if (!outcome.pass) ++failures;
  }

  if (extended) extended_benchmark(budget_minutes);

  if (failures > 0) std::printf("%d criterion(s) failed\n", failures);
  return failures;
}
