#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>
#include <vector>

#include "qstforge/fock.hpp"
#include "qstforge/lattice.hpp"
#include "qstforge/units.hpp"

namespace qstforge {

enum class CouplingSymmetry { free, inversion };

// Assignment of a signed J/2pi value (MHz) to every bond of a lattice.
// Fixed bonds always carry their pinned value; under inversion symmetry the
// mirror-paired free NN bonds move as one parameter.
class CouplingConfig {
 public:
  CouplingConfig() = default;

  CouplingConfig(const LatticeSpec& spec, CouplingSymmetry symmetry)
      : symmetry_(symmetry), values_(spec.bonds().size(), 0.0) {
    for (std::size_t b = 0; b < values_.size(); ++b)
      if (spec.bonds()[b].fixed) values_[b] = *spec.bonds()[b].fixed;
  }

  CouplingSymmetry symmetry() const { return symmetry_; }
  std::size_t size() const { return values_.size(); }
  double value(std::size_t bond) const { return values_.at(bond); }
  const std::vector<double>& values() const { return values_; }

  void set_value(std::size_t bond, double mhz) { values_.at(bond) = mhz; }

  friend bool operator==(const CouplingConfig&, const CouplingConfig&) = default;

 private:
  CouplingSymmetry symmetry_ = CouplingSymmetry::free;
  std::vector<double> values_;
};

// Optimizable parameters: the non-fixed NN bonds, grouped into inversion
// orbits when the symmetry is enforced.  A free bond whose mirror is pinned
// remains a singleton group, so a 6x6 lattice with one defective coupler
// still exposes 30 parameters (15 per direction).
inline std::vector<std::vector<std::size_t>> free_parameter_groups(const LatticeSpec& spec,
                                                                   CouplingSymmetry symmetry) {
  const auto& bonds = spec.bonds();
  std::vector<std::vector<std::size_t>> groups;
  std::vector<bool> seen(bonds.size(), false);
  for (std::size_t b = 0; b < bonds.size(); ++b) {
    if (seen[b] || bonds[b].fixed || bonds[b].kind == BondKind::cross) continue;
    seen[b] = true;
    std::vector<std::size_t> group{b};
    if (symmetry == CouplingSymmetry::inversion) {
      const std::size_t mb = spec.mirror_bond_index(b);
      if (mb != b && !seen[mb] && !bonds[mb].fixed) {
        seen[mb] = true;
        group.push_back(mb);
      }
    }
    groups.push_back(std::move(group));
  }
  return groups;
}

inline void validate_couplings(const LatticeSpec& spec, const CouplingConfig& config) {
  if (config.size() != spec.bonds().size())
    throw std::invalid_argument("coupling config does not cover the lattice bond set");
  for (std::size_t b = 0; b < config.size(); ++b) {
    const auto& bond = spec.bonds()[b];
    if (bond.fixed && config.value(b) != *bond.fixed)
      throw std::invalid_argument("fixed bond does not carry its pinned value");
  }
  if (config.symmetry() == CouplingSymmetry::inversion) {
    for (std::size_t b = 0; b < config.size(); ++b) {
      const auto& bond = spec.bonds()[b];
      if (bond.fixed || bond.kind == BondKind::cross) continue;
      const std::size_t mb = spec.mirror_bond_index(b);
      if (!spec.bonds()[mb].fixed && config.value(b) != config.value(mb))
        throw std::invalid_argument("inversion symmetry violated by coupling values");
    }
  }
}

// Chain couplings J*sqrt(k(n-k)), k = 1..n-1; the sign of J is preserved.
inline std::vector<double> standard_protocol(int n, double j_mhz) {
  if (n < 2) throw std::invalid_argument("standard protocol needs at least two sites");
  if (j_mhz == 0.0) throw std::invalid_argument("coupling scale must be nonzero");
  std::vector<double> couplings(static_cast<std::size_t>(n) - 1);
  for (int k = 1; k < n; ++k)
    couplings[static_cast<std::size_t>(k) - 1] = j_mhz * std::sqrt(double(k) * double(n - k));
  return couplings;
}

// 2D product protocol: every row carries standard_protocol(n1, J) on its
// NN_X bonds, every column standard_protocol(n2, J) on its NN_Y bonds, and
// cross bonds are zero.  Pinned bonds keep their fixed values.
inline CouplingConfig product_protocol(const LatticeSpec& spec, double j_mhz,
                                       CouplingSymmetry symmetry = CouplingSymmetry::inversion) {
  if (spec.n1() < 2 || spec.n2() < 2)
    throw std::invalid_argument("product protocol needs n1, n2 >= 2");
  const auto jx = standard_protocol(spec.n1(), j_mhz);
  const auto jy = standard_protocol(spec.n2(), j_mhz);
  CouplingConfig config(spec, symmetry);
  for (std::size_t b = 0; b < spec.bonds().size(); ++b) {
    const Bond& bond = spec.bonds()[b];
    if (bond.fixed) continue;
    switch (bond.kind) {
      case BondKind::nn_x:
        config.set_value(b, jx[static_cast<std::size_t>(bond.a.x) - 1]);
        break;
      case BondKind::nn_y:
        config.set_value(b, jy[static_cast<std::size_t>(bond.a.y) - 1]);
        break;
      case BondKind::cross:
        config.set_value(b, 0.0);
        break;
    }
  }
  return config;
}

// Assigns one value (MHz) to all non-fixed cross bonds.
inline void set_cross_couplings(const LatticeSpec& spec, CouplingConfig& config, double mhz) {
  for (std::size_t b = 0; b < spec.bonds().size(); ++b)
    if (spec.bonds()[b].kind == BondKind::cross && !spec.bonds()[b].fixed)
      config.set_value(b, mhz);
}

namespace detail {

// Nonzero pattern of the subspace Hamiltonian: (row, col, bond) triples with
// row < col.  A two-excitation state couples to another iff they share one
// occupied site and the remaining excitation hops across the bond; the
// hardcore constraint is enforced by the basis itself.
inline std::vector<std::array<int, 3>> hop_pattern(const LatticeSpec& spec,
                                                   const FockBasis& basis) {
  std::vector<std::array<int, 3>> entries;
  const auto& bonds = spec.bonds();
  for (int n = 0; n < basis.dim(); ++n) {
    const Occupation& occ = basis.state(n);
    for (std::size_t b = 0; b < bonds.size(); ++b) {
      const int i = spec.site_index(bonds[b].a);
      const int j = spec.site_index(bonds[b].b);
      for (int l = 0; l < occ.count; ++l) {
        const int from = occ.sites[l];
        int to = -1;
        if (from == i) to = j;
        else if (from == j) to = i;
        if (to < 0) continue;
        if (occ.count == 2 && occ.sites[1 - l] == to) continue;  // hardcore blocked
        Occupation moved = occ.count == 1 ? Occupation::single(to)
                                          : Occupation::pair(occ.sites[1 - l], to);
        const int m = basis.index_of(moved);
        if (n < m) entries.push_back({n, m, static_cast<int>(b)});
      }
    }
  }
  return entries;
}

}  // namespace detail

// Dense real-symmetric excitation-subspace Hamiltonian in rad/ns with an
// eagerly cached eigendecomposition (eigenvalues ascending).
class SubspaceHamiltonian {
 public:
  SubspaceHamiltonian(std::shared_ptr<const FockBasis> basis, Eigen::MatrixXd matrix)
      : basis_(std::move(basis)), matrix_(std::move(matrix)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(matrix_);
    if (solver.info() != Eigen::Success)
      throw std::runtime_error("symmetric eigensolver failed to converge");
    eigenvalues_ = solver.eigenvalues();
    eigenvectors_ = solver.eigenvectors();
  }

  const FockBasis& basis() const { return *basis_; }
  std::shared_ptr<const FockBasis> basis_ptr() const { return basis_; }
  int dim() const { return static_cast<int>(matrix_.rows()); }
  const Eigen::MatrixXd& matrix() const { return matrix_; }
  const Eigen::VectorXd& eigenvalues() const { return eigenvalues_; }
  const Eigen::MatrixXd& eigenvectors() const { return eigenvectors_; }
  double ground_energy() const { return eigenvalues_(0); }

 private:
  std::shared_ptr<const FockBasis> basis_;
  Eigen::MatrixXd matrix_;
  Eigen::VectorXd eigenvalues_;
  Eigen::MatrixXd eigenvectors_;
};

inline Eigen::MatrixXd subspace_matrix(const LatticeSpec& spec, const CouplingConfig& config,
                                       const FockBasis& basis) {
  if (config.size() != spec.bonds().size())
    throw std::invalid_argument("coupling config does not cover the lattice bond set");
  if (basis.n_sites() != spec.n_sites())
    throw std::invalid_argument("basis site count does not match lattice");
  Eigen::MatrixXd h = Eigen::MatrixXd::Zero(basis.dim(), basis.dim());
  for (const auto& [n, m, b] : detail::hop_pattern(spec, basis)) {
    const double w = config.value(static_cast<std::size_t>(b)) * mhz_to_rad_ns;
    h(n, m) += w;
    h(m, n) += w;
  }
  return h;
}

inline SubspaceHamiltonian build_hamiltonian(const LatticeSpec& spec,
                                             const CouplingConfig& config,
                                             std::shared_ptr<const FockBasis> basis) {
  return SubspaceHamiltonian(basis, subspace_matrix(spec, config, *basis));
}

// Analytic single-excitation spectrum of the mapped model with product
// protocol and no cross couplings: {2J(m1+m2)} over the two spin projection
// ladders.  Returned ascending, in rad/ns for J given in MHz.
inline std::vector<double> large_spin_spectrum(int n1, int n2, double j_mhz) {
  if (n1 < 1 || n2 < 1) throw std::invalid_argument("spin ladder needs n1, n2 >= 1");
  const double j = j_mhz * mhz_to_rad_ns;
  std::vector<double> values;
  values.reserve(static_cast<std::size_t>(n1) * n2);
  for (int k1 = 0; k1 < n1; ++k1)
    for (int k2 = 0; k2 < n2; ++k2) {
      const double m1 = 0.5 * (n1 - 1) - k1;
      const double m2 = 0.5 * (n2 - 1) - k2;
      values.push_back(2.0 * j * (m1 + m2));
    }
  std::sort(values.begin(), values.end());
  return values;
}

}  // namespace qstforge
