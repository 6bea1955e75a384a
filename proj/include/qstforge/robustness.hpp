#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <memory>
#include <optional>
#include <stdexcept>
#include <vector>

#include "qstforge/anneal.hpp"
#include "qstforge/dynamics.hpp"
#include "qstforge/hamiltonian.hpp"
#include "qstforge/rng.hpp"
#include "qstforge/sparse.hpp"

namespace qstforge {

// Thrown when a request exceeds the full-Hilbert-space budget (2^n states).
struct resource_limit_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline constexpr int kMaxFullSpaceSites = 14;

enum class NoiseKind { coupling, frequency };

struct NoiseSweepResult {
  NoiseKind kind = NoiseKind::coupling;
  int n_instances = 0;
  double clean_fidelity = 0.0;
  std::vector<double> sigmas;
  std::vector<double> relative_mean;
  std::vector<double> relative_stderr;
};

namespace detail {

inline double noisy_fidelity(const LatticeSpec& spec, const CouplingConfig& couplings,
                             std::shared_ptr<const FockBasis> basis, const StateVector& psi0,
                             const StateVector& target, double t_qst_ns, NoiseKind kind,
                             double sigma, RngStream& rng) {
  if (kind == NoiseKind::coupling) {
    CouplingConfig noisy = couplings;
    for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
      const Bond& bond = spec.bonds()[b];
      if (bond.kind == BondKind::cross || bond.fixed) continue;
      noisy.set_value(b, couplings.value(b) * (1.0 + rng.gaussian(0.0, sigma)));
    }
    auto h = build_hamiltonian(spec, noisy, basis);
    return transfer_fidelity(h, psi0, target, t_qst_ns);
  }
  // Frequency noise: site detunings (MHz) enter as diagonal terms, one delta
  // per occupied site of each Fock state.
  Eigen::MatrixXd matrix = subspace_matrix(spec, couplings, *basis);
  std::vector<double> delta(static_cast<std::size_t>(spec.n_sites()));
  for (auto& d : delta) d = rng.gaussian(0.0, sigma) * mhz_to_rad_ns;
  for (int n = 0; n < basis->dim(); ++n) {
    const Occupation& occ = basis->state(n);
    double shift = 0.0;
    for (int l = 0; l < occ.count; ++l) shift += delta[static_cast<std::size_t>(occ.sites[l])];
    matrix(n, n) += shift;
  }
  SubspaceHamiltonian h(basis, std::move(matrix));
  return transfer_fidelity(h, psi0, target, t_qst_ns);
}

inline NoiseSweepResult noise_sweep(const LatticeSpec& spec, const CouplingConfig& couplings,
                                    std::shared_ptr<const FockBasis> basis,
                                    const StateVector& psi0, const StateVector& target,
                                    double t_qst_ns, NoiseKind kind,
                                    const std::vector<double>& sigmas, int n_instances,
                                    std::uint64_t seed) {
  if (n_instances < 1) throw std::invalid_argument("noise sweep needs n_instances >= 1");
  for (double s : sigmas)
    if (s < 0.0) throw std::invalid_argument("noise standard deviation must be >= 0");

  NoiseSweepResult result;
  result.kind = kind;
  result.n_instances = n_instances;
  result.sigmas = sigmas;
  {
    auto h = build_hamiltonian(spec, couplings, basis);
    result.clean_fidelity = transfer_fidelity(h, psi0, target, t_qst_ns);
  }
  const char* tag = kind == NoiseKind::coupling ? "coupling-noise" : "frequency-noise";
  std::vector<double> fs(static_cast<std::size_t>(n_instances));
  for (std::size_t s = 0; s < sigmas.size(); ++s) {
    for (int k = 0; k < n_instances; ++k) {
      RngStream rng = derive_stream(seed, tag,
                                    static_cast<std::uint64_t>(s) * 1000003ULL +
                                        static_cast<std::uint64_t>(k));
      fs[static_cast<std::size_t>(k)] =
          noisy_fidelity(spec, couplings, basis, psi0, target, t_qst_ns, kind, sigmas[s], rng);
    }
    // Offset-based moments: identical samples (the sigma = 0 path) yield the
    // clean fidelity and zero spread exactly.
    double acc = 0.0;
    for (double f : fs) acc += f - fs[0];
    const double mean = fs[0] + acc / n_instances;
    double var = 0.0;
    for (double f : fs) var += (f - mean) * (f - mean);
    var /= n_instances;
    result.relative_mean.push_back(mean / result.clean_fidelity);
    result.relative_stderr.push_back(std::sqrt(var / n_instances) / result.clean_fidelity);
  }
  return result;
}

}  // namespace detail

// Relative QST fidelity after multiplicative Gaussian noise on the free NN
// couplings, {(1+delta_ij) J_ij}; cross bonds and pinned defects unchanged.
inline NoiseSweepResult coupling_noise_sweep(const LatticeSpec& spec,
                                             const CouplingConfig& couplings,
                                             std::shared_ptr<const FockBasis> basis,
                                             const StateVector& psi0, const StateVector& target,
                                             double t_qst_ns, const std::vector<double>& sigmas,
                                             int n_instances, std::uint64_t seed) {
  return detail::noise_sweep(spec, couplings, std::move(basis), psi0, target, t_qst_ns,
                             NoiseKind::coupling, sigmas, n_instances, seed);
}

// Relative QST fidelity after additive Gaussian detuning (MHz) of each qubit
// frequency.
inline NoiseSweepResult frequency_noise_sweep(const LatticeSpec& spec,
                                              const CouplingConfig& couplings,
                                              std::shared_ptr<const FockBasis> basis,
                                              const StateVector& psi0, const StateVector& target,
                                              double t_qst_ns, const std::vector<double>& sigmas,
                                              int n_instances, std::uint64_t seed) {
  return detail::noise_sweep(spec, couplings, std::move(basis), psi0, target, t_qst_ns,
                             NoiseKind::frequency, sigmas, n_instances, seed);
}

// ---- Full Hilbert space (thermal-population studies) ----

inline void check_full_space(int n_sites) {
  if (n_sites > kMaxFullSpaceSites)
    throw resource_limit_error("full Hilbert space limited to " +
                               std::to_string(kMaxFullSpaceSites) + " sites");
}

// XY Hamiltonian on the full 2^n space as a sparse matrix (rad/ns).
inline SparseSym full_space_hamiltonian(const LatticeSpec& spec, const CouplingConfig& config) {
  check_full_space(spec.n_sites());
  if (config.size() != spec.bonds().size())
    throw std::invalid_argument("coupling config does not cover the lattice bond set");
  const int n = spec.n_sites();
  const std::size_t dim = std::size_t{1} << n;
  std::vector<std::array<int, 2>> pattern;
  std::vector<double> values;
  for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
    const double w = config.value(b) * mhz_to_rad_ns;
    if (w == 0.0) continue;
    const int i = spec.site_index(spec.bonds()[b].a);
    const int j = spec.site_index(spec.bonds()[b].b);
    for (std::size_t s = 0; s < dim; ++s) {
      const bool occ_i = (s >> i) & 1U;
      const bool occ_j = (s >> j) & 1U;
      if (occ_i == occ_j) continue;
      const std::size_t sp = s ^ (std::size_t{1} << i) ^ (std::size_t{1} << j);
      if (s < sp) {
        pattern.push_back({static_cast<int>(s), static_cast<int>(sp)});
        values.push_back(w);
      }
    }
  }
  return SparseSym(static_cast<int>(dim), pattern, values);
}

inline std::size_t occupation_mask(const LatticeSpec& spec, const Occupation& occ) {
  std::size_t mask = 0;
  for (int l = 0; l < occ.count; ++l) mask |= std::size_t{1} << occ.sites[l];
  return mask;
}

// Product state with residual thermal population gamma: each qubit expected
// in |0> becomes sqrt(1-g_i)|0> + e^{i theta} sqrt(g_i)|1> with per-site
// g_i ~ N(gamma, 0.2 gamma) clipped to [0,1] and theta uniform; qubits in
// `excited_mask` get the amplitude-swapped form.
inline Eigen::VectorXcd thermal_product_state(int n_sites, std::size_t excited_mask, double gamma,
                                              RngStream& rng) {
  check_full_space(n_sites);
  if (gamma < 0.0 || gamma > 1.0) throw std::invalid_argument("gamma must lie in [0,1]");
  Eigen::VectorXcd state = Eigen::VectorXcd::Zero(std::int64_t{1} << n_sites);
  state(0) = 1.0;
  std::size_t dim = 1;
  for (int i = 0; i < n_sites; ++i) {
    const double g = std::clamp(rng.gaussian(gamma, 0.2 * gamma), 0.0, 1.0);
    const double theta = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const bool excited = (excited_mask >> i) & 1U;
    // The random phase rides on the thermally flipped component, so gamma=0
    // reproduces the computational basis state exactly.
    Complex a0, a1;
    if (!excited) {
      a0 = std::sqrt(1.0 - g);
      a1 = std::polar(std::sqrt(g), theta);
    } else {
      a0 = std::polar(std::sqrt(g), theta);
      a1 = std::sqrt(1.0 - g);
    }
    for (std::size_t s = 0; s < dim; ++s) {
      const Complex amp = state(static_cast<std::int64_t>(s));
      state(static_cast<std::int64_t>(s)) = amp * a0;
      state(static_cast<std::int64_t>(s | (std::size_t{1} << i))) = amp * a1;
    }
    dim <<= 1;
  }
  return state;
}

// Ideal Bell preparation on qubits (0,1): a unitary taking |00> to
// (|1_q0> - |1_q1>)/sqrt(2), extended orthonormally so thermal contamination
// of the input pair propagates into the prepared state.
inline void apply_bell_preparation(Eigen::VectorXcd& state) {
  if (state.size() < 4) throw std::invalid_argument("bell preparation needs >= 2 qubits");
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  for (std::int64_t base = 0; base < state.size(); base += 4) {
    const Complex v00 = state(base + 0);
    const Complex v01 = state(base + 1);  // qubit0 excited
    const Complex v10 = state(base + 2);  // qubit1 excited
    const Complex v11 = state(base + 3);
    state(base + 0) = inv_sqrt2 * (v10 + v11);
    state(base + 1) = inv_sqrt2 * (v00 + v01);
    state(base + 2) = inv_sqrt2 * (-v00 + v01);
    state(base + 3) = inv_sqrt2 * (-v10 + v11);
  }
}

enum class ThermalProtocol { single_excitation, bell, two_excitation };

struct ThermalSweepResult {
  ThermalProtocol protocol = ThermalProtocol::single_excitation;
  std::vector<std::pair<int, int>> sizes;
  std::vector<int> site_counts;
  std::vector<double> gammas;
  // infidelity[g][s] = (F_clean - F_gamma)/F_clean for gamma g, size s
  std::vector<std::vector<double>> infidelity_mean;
  std::vector<std::vector<double>> infidelity_std;
  std::vector<std::vector<double>> fit_coefficients;  // per gamma, ascending powers
  std::vector<double> extrapolated;                   // per gamma, at extrapolate_sites
  int extrapolate_sites = 36;
};

namespace detail {

// Least-squares polynomial fit, coefficients in ascending powers.
inline std::vector<double> polyfit(const std::vector<double>& xs, const std::vector<double>& ys,
                                   int degree) {
  const auto n = static_cast<Eigen::Index>(xs.size());
  Eigen::MatrixXd vand(n, degree + 1);
  Eigen::VectorXd rhs(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double p = 1.0;
    for (int d = 0; d <= degree; ++d) {
      vand(i, d) = p;
      p *= xs[static_cast<std::size_t>(i)];
    }
    rhs(i) = ys[static_cast<std::size_t>(i)];
  }
  Eigen::VectorXd coef = vand.colPivHouseholderQr().solve(rhs);
  return std::vector<double>(coef.data(), coef.data() + coef.size());
}

inline double polyval(const std::vector<double>& coef, double x) {
  double acc = 0.0;
  double p = 1.0;
  for (double c : coef) {
    acc += c * p;
    p *= x;
  }
  return acc;
}

struct ThermalCase {
  LatticeSpec lattice;
  CouplingConfig couplings;
  std::size_t initial_mask = 0;
  // Target amplitudes in the full space: list of (mask, weight).
  std::vector<std::pair<std::size_t, Complex>> target;
  bool bell = false;
};

inline ThermalCase make_thermal_case(int n1, int n2, ThermalProtocol protocol, double j_mhz,
                                     const AnnealSchedule& anneal_schedule,
                                     std::uint64_t anneal_seed) {
  // Ideal lattice without cross couplings or defects.
  ThermalCase tc{build_grid(n1, n2, false), CouplingConfig{}, 0, {}, false};
  const LatticeSpec& l = tc.lattice;
  tc.couplings = product_protocol(l, j_mhz);

  const int q1 = l.site_index({1, 1});
  const int q2 = l.site_index({2, 1});
  const int q1m = l.site_index(l.inverted({1, 1}));
  const int q2m = l.site_index(l.inverted({2, 1}));
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;

  switch (protocol) {
    case ThermalProtocol::single_excitation:
      tc.initial_mask = std::size_t{1} << q1;
      tc.target = {{std::size_t{1} << q1m, 1.0}};
      break;
    case ThermalProtocol::bell:
      tc.initial_mask = 0;  // prepared by the Bell circuit
      tc.bell = true;
      tc.target = {{std::size_t{1} << q1m, inv_sqrt2}, {std::size_t{1} << q2m, -inv_sqrt2}};
      break;
    case ThermalProtocol::two_excitation: {
      tc.initial_mask = (std::size_t{1} << q1) | (std::size_t{1} << q2);
      tc.target = {{(std::size_t{1} << q1m) | (std::size_t{1} << q2m), 1.0}};
      // The product protocol is not optimal for two excitations; couplings
      // come from a short annealing run in the two-excitation subspace.
      auto basis = build_basis(l.n_sites(), 2);
      auto psi0 = basis_state(basis, Occupation::pair(std::min(q1, q2), std::max(q1, q2)));
      auto target = basis_state(basis, Occupation::pair(std::min(q1m, q2m), std::max(q1m, q2m)));
      AnnealSchedule sched = anneal_schedule;
      sched.seed = anneal_seed;
      const double t_qst = 0.5 * std::numbers::pi / (std::abs(j_mhz) * mhz_to_rad_ns);
      CouplingConfig base(l, CouplingSymmetry::inversion);
      auto result = run_annealing(l, base, basis, psi0, target, t_qst, sched);
      tc.couplings = result.best().best_couplings;
      break;
    }
  }
  return tc;
}

inline double thermal_transfer_fidelity(const ThermalCase& tc, const SparseSym& h,
                                         double t_qst_ns, double gamma, RngStream& rng) {
  Eigen::VectorXcd psi =
      thermal_product_state(tc.lattice.n_sites(), tc.bell ? 0 : tc.initial_mask, gamma, rng);
  if (tc.bell) apply_bell_preparation(psi);
  const Eigen::VectorXcd psi_t = chebyshev_evolve(h, psi, t_qst_ns);
  Complex overlap = 0.0;
  for (const auto& [mask, weight] : tc.target)
    overlap += std::conj(weight) * psi_t(static_cast<std::int64_t>(mask));
  return std::abs(overlap);
}

}  // namespace detail

// Thermal-population infidelity across a ladder of system sizes with a
// polynomial size fit and extrapolation.  Fidelity is the magnitude of the
// overlap with the full-space target state, and the per-gamma infidelity is
// (F_clean - F_gamma)/F_clean.  Single-excitation and Bell transfers use a
// linear fit in the site count, two-excitation a quadratic one.
inline ThermalSweepResult thermal_sweep(const std::vector<std::pair<int, int>>& sizes,
                                        ThermalProtocol protocol,
                                        const std::vector<double>& gammas, int n_realizations,
                                        std::uint64_t seed, double j_mhz = -2.0,
                                        int extrapolate_sites = 36,
                                        std::optional<AnnealSchedule> two_exc_schedule = {}) {
  if (sizes.empty()) throw std::invalid_argument("thermal sweep needs at least one size");
  if (n_realizations < 1) throw std::invalid_argument("thermal sweep needs realizations >= 1");
  if (!two_exc_schedule) {
    two_exc_schedule.emplace();
    two_exc_schedule->steps = 20000;  // desk-scale default for the per-size anneal
    two_exc_schedule->replicas = 3;
  }

  ThermalSweepResult result;
  result.protocol = protocol;
  result.sizes = sizes;
  result.gammas = gammas;
  result.extrapolate_sites = extrapolate_sites;
  result.infidelity_mean.assign(gammas.size(), {});
  result.infidelity_std.assign(gammas.size(), {});

  const double t_qst = 0.5 * std::numbers::pi / (std::abs(j_mhz) * mhz_to_rad_ns);

  for (std::size_t si = 0; si < sizes.size(); ++si) {
    const auto [n1, n2] = sizes[si];
    check_full_space(n1 * n2);
    auto tc = detail::make_thermal_case(n1, n2, protocol, j_mhz, *two_exc_schedule,
                                        seed + 17 * si);
    result.site_counts.push_back(n1 * n2);
    const SparseSym h = full_space_hamiltonian(tc.lattice, tc.couplings);

    // Clean reference: gamma = 0 is deterministic.
    RngStream clean_rng = derive_stream(seed, "thermal-clean", si);
    const double f_clean = detail::thermal_transfer_fidelity(tc, h, t_qst, 0.0, clean_rng);

    for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
      double sum = 0.0;
      double sum2 = 0.0;
      for (int k = 0; k < n_realizations; ++k) {
        RngStream rng = derive_stream(seed, "thermal-instance",
                                      (si * gammas.size() + gi) * 1000003ULL +
                                          static_cast<std::uint64_t>(k));
        const double f = detail::thermal_transfer_fidelity(tc, h, t_qst, gammas[gi], rng);
        const double infid = (f_clean - f) / f_clean;
        sum += infid;
        sum2 += infid * infid;
      }
      const double mean = sum / n_realizations;
      result.infidelity_mean[gi].push_back(mean);
      result.infidelity_std[gi].push_back(
          std::sqrt(std::max(0.0, sum2 / n_realizations - mean * mean)));
    }
  }

  const int degree = protocol == ThermalProtocol::two_excitation ? 2 : 1;
  std::vector<double> xs(result.site_counts.begin(), result.site_counts.end());
  for (std::size_t gi = 0; gi < gammas.size(); ++gi) {
    auto coef = detail::polyfit(xs, result.infidelity_mean[gi], degree);
    result.extrapolated.push_back(detail::polyval(coef, extrapolate_sites));
    result.fit_coefficients.push_back(std::move(coef));
  }
  return result;
}

}  // namespace qstforge
