#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <complex>
#include <limits>
#include <memory>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "qstforge/hamiltonian.hpp"

namespace qstforge {

using Complex = std::complex<double>;

struct StateVector {
  std::shared_ptr<const FockBasis> basis;
  Eigen::VectorXcd amplitudes;

  double norm() const { return amplitudes.norm(); }
};

inline StateVector basis_state(std::shared_ptr<const FockBasis> basis, const Occupation& occ) {
  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(basis->dim());
  amp(basis->index_of(occ)) = 1.0;
  return {std::move(basis), std::move(amp)};
}

// (|1_a> - |1_b>)/sqrt(2) over the single-excitation basis; the singlet-type
// Bell pair lives entirely in this sector.
inline StateVector bell_state(const LatticeSpec& spec, std::shared_ptr<const FockBasis> basis,
                              Site q_a, Site q_b) {
  if (basis->n_excitations() != 1)
    throw std::invalid_argument("bell states require the single-excitation basis");
  if (q_a == q_b) throw std::invalid_argument("bell sites must differ");
  Eigen::VectorXcd amp = Eigen::VectorXcd::Zero(basis->dim());
  const double inv_sqrt2 = 1.0 / std::numbers::sqrt2;
  amp(basis->index_of(Occupation::single(spec.site_index(q_a)))) = inv_sqrt2;
  amp(basis->index_of(Occupation::single(spec.site_index(q_b)))) = -inv_sqrt2;
  return {std::move(basis), std::move(amp)};
}

namespace detail {

inline void check_state(const SubspaceHamiltonian& h, const StateVector& psi) {
  if (!psi.basis || !psi.basis->compatible(h.basis()))
    throw std::invalid_argument("state basis does not match Hamiltonian");
}

}  // namespace detail

// psi(t) = V exp(-i Lambda t) V^T psi0 from the cached eigendecomposition.
inline StateVector evolve(const SubspaceHamiltonian& h, const StateVector& psi0, double t_ns) {
  detail::check_state(h, psi0);
  const Eigen::VectorXcd w = h.eigenvectors().transpose() * psi0.amplitudes;
  Eigen::VectorXcd phased(w.size());
  for (Eigen::Index k = 0; k < w.size(); ++k)
    phased(k) = w(k) * std::polar(1.0, -h.eigenvalues()(k) * t_ns);
  return {psi0.basis, h.eigenvectors() * phased};
}

inline Complex transfer_amplitude(const SubspaceHamiltonian& h, const StateVector& psi0,
                                  const StateVector& target, double t_ns) {
  detail::check_state(h, psi0);
  detail::check_state(h, target);
  const Eigen::VectorXcd w0 = h.eigenvectors().transpose() * psi0.amplitudes;
  const Eigen::VectorXcd wt = h.eigenvectors().transpose() * target.amplitudes;
  Complex acc = 0.0;
  for (Eigen::Index k = 0; k < w0.size(); ++k)
    acc += std::conj(wt(k)) * w0(k) * std::polar(1.0, -h.eigenvalues()(k) * t_ns);
  return acc;
}

// F(t) = |<target| exp(-iHt) |psi0>|.  The squared value is the target-state
// population; the annealer minimizes 1 - F^2.
inline double transfer_fidelity(const SubspaceHamiltonian& h, const StateVector& psi0,
                                const StateVector& target, double t_ns) {
  return std::abs(transfer_amplitude(h, psi0, target, t_ns));
}

inline double transfer_population(const SubspaceHamiltonian& h, const StateVector& psi0,
                                  const StateVector& target, double t_ns) {
  return std::norm(transfer_amplitude(h, psi0, target, t_ns));
}

namespace detail {

// Spin-S ladder matrices in the basis k = 1..N, m = S-(k-1), S = (N-1)/2.
inline Eigen::MatrixXcd spin_matrix(int n, char axis) {
  const double s = 0.5 * (n - 1);
  Eigen::MatrixXcd mat = Eigen::MatrixXcd::Zero(n, n);
  if (axis == 'z') {
    for (int k = 0; k < n; ++k) mat(k, k) = s - k;
    return mat;
  }
  for (int k = 0; k + 1 < n; ++k) {
    const double m_lower = s - (k + 1);
    const double elem = 0.5 * std::sqrt(s * (s + 1) - m_lower * (m_lower + 1));
    if (axis == 'x') {
      mat(k, k + 1) = elem;
      mat(k + 1, k) = elem;
    } else {  // y
      mat(k, k + 1) = Complex(0.0, -elem);
      mat(k + 1, k) = Complex(0.0, +elem);
    }
  }
  return mat;
}

}  // namespace detail

// Expectation values of the two collective spins for a single-excitation
// state on an n1 x n2 grid, ordered (S1x, S1y, S1z, S2x, S2y, S2z).  With the
// row-major amplitude layout, spin 1 is the Kronecker factor acting on the
// row (y) index and spin 2 the factor acting on the column (x) index.
inline std::array<double, 6> spin_trajectory(const StateVector& psi, const LatticeSpec& spec) {
  if (!psi.basis || psi.basis->n_excitations() != 1)
    throw std::invalid_argument("spin trajectory requires a single-excitation state");
  if (psi.basis->n_sites() != spec.n_sites())
    throw std::invalid_argument("state does not match lattice size");
  const int n1 = spec.n1();
  const int n2 = spec.n2();
  std::array<double, 6> out{};
  const char axes[3] = {'x', 'y', 'z'};
  for (int a = 0; a < 3; ++a) {
    const Eigen::MatrixXcd s1 = detail::spin_matrix(n2, axes[a]);
    const Eigen::MatrixXcd s2 = detail::spin_matrix(n1, axes[a]);
    Complex acc1 = 0.0;
    Complex acc2 = 0.0;
    for (int y = 0; y < n2; ++y)
      for (int x = 0; x < n1; ++x) {
        const Complex amp = psi.amplitudes(y * n1 + x);
        for (int yp = 0; yp < n2; ++yp)
          acc1 += std::conj(psi.amplitudes(yp * n1 + x)) * s1(yp, y) * amp;
        for (int xp = 0; xp < n1; ++xp)
          acc2 += std::conj(psi.amplitudes(y * n1 + xp)) * s2(xp, x) * amp;
      }
    out[static_cast<std::size_t>(a)] = acc1.real();
    out[static_cast<std::size_t>(a) + 3] = acc2.real();
  }
  return out;
}

// Quantum-speed-limit summary for an initial state: the minimal
// orthogonalization times t_dE = pi/(2 dE) and t_E = pi/(2 (E - Eg)) with
// energies in rad/ns (hbar = 1), infinite for stationary or ground-level
// inputs.
struct QslReport {
  double mean_energy_gap = 0.0;    // E - Eg, rad/ns
  double energy_uncertainty = 0.0; // dE, rad/ns
  double t_de_ns = std::numeric_limits<double>::infinity();
  double t_e_ns = std::numeric_limits<double>::infinity();

  bool t_de_finite() const { return std::isfinite(t_de_ns); }
  bool t_e_finite() const { return std::isfinite(t_e_ns); }
};

inline QslReport qsl_report(const SubspaceHamiltonian& h, const StateVector& psi0) {
  detail::check_state(h, psi0);
  const Eigen::VectorXcd hpsi = h.matrix() * psi0.amplitudes;
  const double e = std::real(psi0.amplitudes.dot(hpsi));
  const double e2 = hpsi.squaredNorm();
  const double var = std::max(0.0, e2 - e * e);
  // Stationary or ground-level inputs leave rounding residue in the moments
  // (of order sqrt(machine eps) times the spectral scale); anything below
  // that noise floor counts as zero.
  const double scale = std::max(std::abs(h.eigenvalues()(0)),
                                std::abs(h.eigenvalues()(h.dim() - 1)));
  const double floor = 1e-6 * scale;
  QslReport report;
  report.energy_uncertainty = std::sqrt(var) > floor ? std::sqrt(var) : 0.0;
  const double gap = e - h.ground_energy();
  report.mean_energy_gap = gap > floor ? gap : 0.0;
  const double half_pi = 0.5 * std::numbers::pi;
  if (report.energy_uncertainty > 0.0) report.t_de_ns = half_pi / report.energy_uncertainty;
  if (report.mean_energy_gap > 0.0) report.t_e_ns = half_pi / report.mean_energy_gap;
  return report;
}

struct QslSample {
  double t_ns;
  double overlap;   // |<psi0|psi(t)>|
  double mt_bound;  // cos(dE t) up to its first zero, then 0
  double ml_bound;  // cos(sqrt(pi (E-Eg) t / 2)) with the same clamping
};

inline std::vector<QslSample> qsl_bounds_curve(const SubspaceHamiltonian& h,
                                               const StateVector& psi0,
                                               const std::vector<double>& times_ns) {
  const QslReport report = qsl_report(h, psi0);
  const double half_pi = 0.5 * std::numbers::pi;
  std::vector<QslSample> samples;
  samples.reserve(times_ns.size());
  for (double t : times_ns) {
    QslSample s{};
    s.t_ns = t;
    s.overlap = std::abs(transfer_amplitude(h, psi0, psi0, t));
    const double mt_arg = report.energy_uncertainty * t;
    s.mt_bound = mt_arg < half_pi ? std::cos(mt_arg) : 0.0;
    const double ml_arg = std::sqrt(std::max(0.0, half_pi * report.mean_energy_gap * t));
    s.ml_bound = ml_arg < half_pi ? std::cos(ml_arg) : 0.0;
    samples.push_back(s);
  }
  return samples;
}

}  // namespace qstforge
