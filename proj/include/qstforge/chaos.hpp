#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "qstforge/dynamics.hpp"
#include "qstforge/fock.hpp"
#include "qstforge/hamiltonian.hpp"
#include "qstforge/rng.hpp"

namespace qstforge {

enum class SpectrumSector { even, odd, combined };
enum class SurmiseKind { goe, poisson };

inline constexpr int kRatioHistogramBins = 20;

// Adjacent-gap ratio statistics r = min(s_k, s_{k+1})/max(s_k, s_{k+1})
// for one symmetry sector (or the sector-pooled set).
struct GapRatioStats {
  SpectrumSector sector = SpectrumSector::combined;
  std::vector<double> ratios;
  std::array<long, kRatioHistogramBins> histogram{};
  double mean_r = 0.0;
  long degenerate_pairs = 0;  // exact zero gaps encountered

  std::size_t count() const { return ratios.size(); }
};

struct SectorGapRatios {
  GapRatioStats even;
  GapRatioStats odd;
  GapRatioStats combined;
};

namespace detail {

inline void finalize_stats(GapRatioStats& stats) {
  double acc = 0.0;
  stats.histogram.fill(0);
  for (double r : stats.ratios) {
    acc += r;
    int bin = std::min(kRatioHistogramBins - 1,
                       static_cast<int>(r * kRatioHistogramBins));
    ++stats.histogram[static_cast<std::size_t>(bin)];
  }
  stats.mean_r = stats.ratios.empty() ? 0.0 : acc / static_cast<double>(stats.ratios.size());
}

}  // namespace detail

// Gap ratios of an ascending spectrum.  Exact degeneracies are measure-zero
// for random couplings; when they do occur, two zero gaps give r = 1 and a
// single zero gap gives r = 0.
inline GapRatioStats gap_ratios_from_spectrum(const Eigen::VectorXd& eigenvalues,
                                              SpectrumSector sector = SpectrumSector::combined) {
  GapRatioStats stats;
  stats.sector = sector;
  const Eigen::Index n = eigenvalues.size();
  for (Eigen::Index k = 0; k + 2 < n; ++k) {
    const double s1 = eigenvalues(k + 1) - eigenvalues(k);
    const double s2 = eigenvalues(k + 2) - eigenvalues(k + 1);
    double r;
    if (s1 == 0.0 && s2 == 0.0) {
      r = 1.0;
      ++stats.degenerate_pairs;
    } else if (s1 == 0.0 || s2 == 0.0) {
      r = 0.0;
      ++stats.degenerate_pairs;
    } else {
      r = std::min(s1, s2) / std::max(s1, s2);
    }
    stats.ratios.push_back(r);
  }
  detail::finalize_stats(stats);
  return stats;
}

namespace detail {

// Inversion permutation at the Fock-state level, reconstructed from the
// sector combinations.
inline std::vector<int> state_permutation(const ParitySectors& sectors, int dim) {
  std::vector<int> perm(static_cast<std::size_t>(dim), -1);
  for (const auto& combo : sectors.even) {
    perm[static_cast<std::size_t>(combo.state)] = combo.partner;
    perm[static_cast<std::size_t>(combo.partner)] = combo.state;
  }
  return perm;
}

inline bool commutes_with_parity(const Eigen::MatrixXd& h, const std::vector<int>& perm,
                                 double tol) {
  const Eigen::Index n = h.rows();
  double scale = 1e-30;
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) scale = std::max(scale, std::abs(h(i, j)));
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto pi = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(i)]);
      const auto pj = static_cast<Eigen::Index>(perm[static_cast<std::size_t>(j)]);
      if (std::abs(h(i, j) - h(pi, pj)) > tol * scale) return false;
    }
  return true;
}

inline Eigen::MatrixXd sector_block(const Eigen::MatrixXd& h,
                                    const std::vector<ParityCombo>& combos) {
  const auto n = static_cast<Eigen::Index>(combos.size());
  Eigen::MatrixXd block(n, n);
  for (Eigen::Index k = 0; k < n; ++k)
    for (Eigen::Index l = 0; l < n; ++l) {
      const auto& a = combos[static_cast<std::size_t>(k)];
      const auto& b = combos[static_cast<std::size_t>(l)];
      const double wa = a.invariant() ? 1.0 : 1.0 / std::numbers::sqrt2;
      const double wb = b.invariant() ? 1.0 : 1.0 / std::numbers::sqrt2;
      double acc = h(a.state, b.state);
      if (!b.invariant()) acc += b.sign * h(a.state, b.partner);
      if (!a.invariant()) {
        acc += a.sign * h(a.partner, b.state);
        if (!b.invariant()) acc += a.sign * b.sign * h(a.partner, b.partner);
      }
      block(k, l) = wa * wb * acc;
    }
  return block;
}

}  // namespace detail

// Independent spectra of the two parity blocks.  Throws when the matrix does
// not in fact commute with the inversion permutation: pooling unresolved
// sectors corrupts the gap statistics.
struct SectorSpectra {
  Eigen::VectorXd even;
  Eigen::VectorXd odd;
};

inline SectorSpectra sector_spectra(const SubspaceHamiltonian& h, const ParitySectors& sectors) {
  const auto perm = detail::state_permutation(sectors, h.dim());
  if (!detail::commutes_with_parity(h.matrix(), perm, 1e-12))
    throw std::invalid_argument("Hamiltonian does not respect the inversion symmetry");
  SectorSpectra spectra;
  for (int side = 0; side < 2; ++side) {
    const auto& combos = side == 0 ? sectors.even : sectors.odd;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        detail::sector_block(h.matrix(), combos), Eigen::EigenvaluesOnly);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("sector eigensolver failed to converge");
    (side == 0 ? spectra.even : spectra.odd) = solver.eigenvalues();
  }
  return spectra;
}

// Sector-resolved gap-ratio statistics; COMBINED pools the per-sector ratio
// samples (it never mixes eigenvalues across sectors).
inline SectorGapRatios gap_ratios(const SubspaceHamiltonian& h, const ParitySectors& sectors) {
  const SectorSpectra spectra = sector_spectra(h, sectors);
  SectorGapRatios out;
  out.even = gap_ratios_from_spectrum(spectra.even, SpectrumSector::even);
  out.odd = gap_ratios_from_spectrum(spectra.odd, SpectrumSector::odd);
  out.combined.sector = SpectrumSector::combined;
  out.combined.ratios = out.even.ratios;
  out.combined.ratios.insert(out.combined.ratios.end(), out.odd.ratios.begin(),
                             out.odd.ratios.end());
  out.combined.degenerate_pairs = out.even.degenerate_pairs + out.odd.degenerate_pairs;
  detail::finalize_stats(out.combined);
  return out;
}

// Normalized surmises for the folded ratio r = min/max on [0,1].
inline double surmise_pdf(double r, SurmiseKind kind) {
  if (r < 0.0 || r > 1.0) throw std::invalid_argument("gap ratio must lie in [0,1]");
  if (kind == SurmiseKind::goe) {
    const double q = 1.0 + r + r * r;
    return (27.0 / 4.0) * (r + r * r) / (q * q * std::sqrt(q));
  }
  const double q = 1.0 + r;
  return 2.0 / (q * q);
}

namespace detail {

inline double simpson(double a, double b, int panels, SurmiseKind kind, bool weighted) {
  double acc = 0.0;
  const double h = (b - a) / panels;
  auto f = [&](double r) { return weighted ? r * surmise_pdf(r, kind) : surmise_pdf(r, kind); };
  for (int i = 0; i < panels; ++i) {
    const double x0 = a + i * h;
    acc += (f(x0) + 4.0 * f(x0 + 0.5 * h) + f(x0 + h)) * h / 6.0;
  }
  return acc;
}

}  // namespace detail

// <r> of a surmise by quadrature.
inline double surmise_mean(SurmiseKind kind) {
  return detail::simpson(0.0, 1.0, 4000, kind, true);
}

// Total-variation distances between the empirical 20-bin histogram and each
// surmise; the smaller distance labels the ensemble.
struct EnsembleDistances {
  double to_goe;
  double to_poisson;
};

inline EnsembleDistances classify_ensemble(const GapRatioStats& stats) {
  if (stats.count() < 100)
    throw std::invalid_argument("insufficient samples for ensemble classification (need >= 100)");
  EnsembleDistances out{0.0, 0.0};
  const double total = static_cast<double>(stats.count());
  for (int b = 0; b < kRatioHistogramBins; ++b) {
    const double lo = static_cast<double>(b) / kRatioHistogramBins;
    const double hi = static_cast<double>(b + 1) / kRatioHistogramBins;
    const double emp = static_cast<double>(stats.histogram[static_cast<std::size_t>(b)]) / total;
    out.to_goe += std::abs(emp - detail::simpson(lo, hi, 64, SurmiseKind::goe, false));
    out.to_poisson += std::abs(emp - detail::simpson(lo, hi, 64, SurmiseKind::poisson, false));
  }
  out.to_goe *= 0.5;
  out.to_poisson *= 0.5;
  return out;
}

// Per-eigenstate participation ratio over one sector's combination basis.
inline std::vector<double> participation_from_vectors(const Eigen::MatrixXd& eigenvectors) {
  std::vector<double> pr(static_cast<std::size_t>(eigenvectors.cols()));
  for (Eigen::Index a = 0; a < eigenvectors.cols(); ++a) {
    double sum4 = 0.0;
    for (Eigen::Index n = 0; n < eigenvectors.rows(); ++n) {
      const double c2 = eigenvectors(n, a) * eigenvectors(n, a);
      sum4 += c2 * c2;
    }
    pr[static_cast<std::size_t>(a)] = 1.0 / sum4;
  }
  return pr;
}

// GOE expectation for the participation ratio at sector dimension d.
inline double goe_participation_reference(int d) { return (d + 2.0) / 3.0; }

struct SectorParticipation {
  std::vector<double> even;
  std::vector<double> odd;
  double goe_even;
  double goe_odd;
};

inline SectorParticipation participation_ratios(const SubspaceHamiltonian& h,
                                                const ParitySectors& sectors) {
  const auto perm = detail::state_permutation(sectors, h.dim());
  if (!detail::commutes_with_parity(h.matrix(), perm, 1e-12))
    throw std::invalid_argument("Hamiltonian does not respect the inversion symmetry");
  SectorParticipation out;
  for (int side = 0; side < 2; ++side) {
    const auto& combos = side == 0 ? sectors.even : sectors.odd;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(
        detail::sector_block(h.matrix(), combos));
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("sector eigensolver failed to converge");
    auto pr = participation_from_vectors(solver.eigenvectors());
    if (side == 0) {
      out.even = std::move(pr);
      out.goe_even = goe_participation_reference(static_cast<int>(combos.size()));
    } else {
      out.odd = std::move(pr);
      out.goe_odd = goe_participation_reference(static_cast<int>(combos.size()));
    }
  }
  return out;
}

// Fock-space transport of a two-excitation wave packet: the mean distance
// <d(t)> = sum_n d(0,n) |<n|psi(t)>|^2 and the rms spread
// sigma(t) = sqrt(sum_n d^2 |<n|psi(t)>|^2), with distances measured from
// the initial occupation.
struct TransportSeries {
  std::vector<double> times_ns;
  std::vector<double> mean_distance;
  std::vector<double> rms_spread;
  double reference_mean = 0.0;  // basis-averaged distance (long-time ergodic value)
  double max_distance = 0.0;
};

inline TransportSeries transport_series(const SubspaceHamiltonian& h, const StateVector& psi0,
                                        const LatticeSpec& spec,
                                        const std::vector<double>& times_ns) {
  if (!psi0.basis || psi0.basis->n_excitations() != 2)
    throw std::invalid_argument("transport series requires a two-excitation state");
  Eigen::Index support = -1;
  for (Eigen::Index n = 0; n < psi0.amplitudes.size(); ++n)
    if (std::norm(psi0.amplitudes(n)) > 1.0 - 1e-9) support = n;
  if (support < 0)
    throw std::invalid_argument("transport reference must be a single Fock state");
  const Occupation reference = psi0.basis->state(static_cast<int>(support));

  const FockBasis& basis = *psi0.basis;
  std::vector<double> dist(static_cast<std::size_t>(basis.dim()));
  TransportSeries series;
  for (int n = 0; n < basis.dim(); ++n) {
    dist[static_cast<std::size_t>(n)] = fock_distance(basis, spec, n, reference);
    series.reference_mean += dist[static_cast<std::size_t>(n)];
    series.max_distance = std::max(series.max_distance, dist[static_cast<std::size_t>(n)]);
  }
  series.reference_mean /= basis.dim();

  for (double t : times_ns) {
    const StateVector psi_t = evolve(h, psi0, t);
    double mean = 0.0;
    double second = 0.0;
    for (int n = 0; n < basis.dim(); ++n) {
      const double w = std::norm(psi_t.amplitudes(n));
      mean += dist[static_cast<std::size_t>(n)] * w;
      second += dist[static_cast<std::size_t>(n)] * dist[static_cast<std::size_t>(n)] * w;
    }
    series.times_ns.push_back(t);
    series.mean_distance.push_back(mean);
    series.rms_spread.push_back(std::sqrt(std::max(0.0, second)));
  }
  return series;
}

// Least-squares exponent of sigma(t) ~ t^alpha over a time window; the
// paper-style spreading diagnostic, reported without an acceptance gate.
inline double fit_spread_exponent(const TransportSeries& series, double t_lo, double t_hi) {
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  long n = 0;
  for (std::size_t k = 0; k < series.times_ns.size(); ++k) {
    const double t = series.times_ns[k];
    const double s = series.rms_spread[k];
    if (t < t_lo || t > t_hi || t <= 0.0 || s <= 0.0) continue;
    const double x = std::log(t);
    const double y = std::log(s);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
    ++n;
  }
  if (n < 2) throw std::invalid_argument("spread exponent fit needs at least two samples");
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// Uniform i.i.d. draw of every free parameter group in [j_min, j_max]; fixed
// bonds and cross couplings keep the base values.
inline CouplingConfig random_coupling_config(const LatticeSpec& spec, const CouplingConfig& base,
                                             double j_min_mhz, double j_max_mhz, RngStream& rng) {
  CouplingConfig config = base;
  for (const auto& group : free_parameter_groups(spec, base.symmetry())) {
    const double v = rng.uniform(j_min_mhz, j_max_mhz);
    for (std::size_t b : group) config.set_value(b, v);
  }
  return config;
}

}  // namespace qstforge
