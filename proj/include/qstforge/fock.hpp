#pragma once

#include <algorithm>
#include <array>
#include <cstdint>
#include <memory>
#include <stdexcept>
#include <vector>

#include "qstforge/lattice.hpp"

namespace qstforge {

// Occupied-site indices of one Fock state, sorted ascending.  Single
// excitation states use only the first slot.
struct Occupation {
  std::array<int, 2> sites{-1, -1};
  int count = 0;

  static Occupation single(int i) { return {{i, -1}, 1}; }
  static Occupation pair(int i, int j) {
    if (i == j) throw std::invalid_argument("occupation sites must differ");
    if (i > j) std::swap(i, j);
    return {{i, j}, 2};
  }

  friend bool operator==(const Occupation&, const Occupation&) = default;
};

// Ordered enumeration of the n-excitation subspace of hardcore bosons on
// n_sites orbitals.  States are listed in lexicographic order of their
// sorted site tuples, so indexing is deterministic across runs.
class FockBasis {
 public:
  FockBasis(int n_sites, int n_excitations) : n_sites_(n_sites), n_exc_(n_excitations) {
    if (n_excitations != 1 && n_excitations != 2)
      throw std::invalid_argument("only 1- and 2-excitation bases are supported");
    if (n_sites < n_excitations)
      throw std::invalid_argument("need at least as many sites as excitations");
    if (n_exc_ == 1) {
      states_.reserve(n_sites_);
      for (int i = 0; i < n_sites_; ++i) states_.push_back(Occupation::single(i));
    } else {
      states_.reserve(static_cast<std::size_t>(n_sites_) * (n_sites_ - 1) / 2);
      for (int i = 0; i < n_sites_; ++i)
        for (int j = i + 1; j < n_sites_; ++j) states_.push_back(Occupation::pair(i, j));
    }
  }

  int n_sites() const { return n_sites_; }
  int n_excitations() const { return n_exc_; }
  int dim() const { return static_cast<int>(states_.size()); }
  const std::vector<Occupation>& states() const { return states_; }
  const Occupation& state(int k) const { return states_.at(static_cast<std::size_t>(k)); }

  int index_of(const Occupation& occ) const {
    if (occ.count != n_exc_) throw std::invalid_argument("occupation has wrong excitation count");
    if (n_exc_ == 1) {
      check_site(occ.sites[0]);
      return occ.sites[0];
    }
    const int i = occ.sites[0];
    const int j = occ.sites[1];
    check_site(i);
    check_site(j);
    // Lexicographic rank of the pair (i<j).
    const std::int64_t before_i =
        static_cast<std::int64_t>(i) * n_sites_ - static_cast<std::int64_t>(i) * (i + 1) / 2;
    return static_cast<int>(before_i + (j - i - 1));
  }

  bool compatible(const FockBasis& other) const {
    return n_sites_ == other.n_sites_ && n_exc_ == other.n_exc_;
  }

 private:
  void check_site(int s) const {
    if (s < 0 || s >= n_sites_) throw std::invalid_argument("site index out of range");
  }

  int n_sites_;
  int n_exc_;
  std::vector<Occupation> states_;
};

inline std::shared_ptr<const FockBasis> build_basis(int n_sites, int n_excitations) {
  return std::make_shared<const FockBasis>(n_sites, n_excitations);
}

// L1 metric between two-excitation Fock states, averaged over the four
// pairings of indistinguishable excitations.  The -1/2 offset is calibrated
// so that an adjacent reference pair has zero self-distance; arbitrary
// references are accepted but then d(ref,ref) > 0.
inline double fock_distance(const FockBasis& basis, const LatticeSpec& spec, int state_index,
                            const Occupation& reference) {
  if (basis.n_excitations() != 2 || reference.count != 2)
    throw std::invalid_argument("fock_distance is defined for two-excitation states");
  const Occupation& occ = basis.state(state_index);
  const Site r0 = spec.site_at(reference.sites[0]);
  const Site r1 = spec.site_at(reference.sites[1]);
  double sum = 0.0;
  for (int l = 0; l < 2; ++l) {
    const Site p = spec.site_at(occ.sites[l]);
    sum += std::abs(p.x - r0.x) + std::abs(p.y - r0.y);
    sum += std::abs(p.x - r1.x) + std::abs(p.y - r1.y);
  }
  return 0.25 * sum - 0.5;
}

inline double mean_distance(const FockBasis& basis, const LatticeSpec& spec,
                            const Occupation& reference) {
  double acc = 0.0;
  for (int n = 0; n < basis.dim(); ++n) acc += fock_distance(basis, spec, n, reference);
  return acc / basis.dim();
}

// One symmetric/antisymmetric combination: (|n> + sign * |Pn>)/sqrt(2), or a
// bare inversion-invariant state when partner == state.
struct ParityCombo {
  int state;
  int partner;
  double sign;  // +1 even, -1 odd

  bool invariant() const { return state == partner; }
};

// Inversion-parity resolution of a Fock basis.  The combinations define an
// orthogonal change of basis that block-diagonalizes any Hamiltonian
// commuting with the inversion permutation; invariant Fock states sit in the
// even sector.
struct ParitySectors {
  std::vector<ParityCombo> even;
  std::vector<ParityCombo> odd;

  int dim_even() const { return static_cast<int>(even.size()); }
  int dim_odd() const { return static_cast<int>(odd.size()); }
};

// Image of a Fock state under the inversion permutation of sites.
inline Occupation invert_occupation(const Occupation& occ, const std::vector<int>& site_perm) {
  if (occ.count == 1) return Occupation::single(site_perm[occ.sites[0]]);
  return Occupation::pair(site_perm[occ.sites[0]], site_perm[occ.sites[1]]);
}

inline ParitySectors parity_sectors(const FockBasis& basis, const LatticeSpec& spec) {
  const auto perm = spec.inversion_map();
  ParitySectors sectors;
  for (int n = 0; n < basis.dim(); ++n) {
    const int pn = basis.index_of(invert_occupation(basis.state(n), perm));
    if (pn == n) {
      sectors.even.push_back({n, n, +1.0});
    } else if (n < pn) {
      sectors.even.push_back({n, pn, +1.0});
      sectors.odd.push_back({n, pn, -1.0});
    }
  }
  return sectors;
}

}  // namespace qstforge
