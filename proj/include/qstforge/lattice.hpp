#pragma once

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace qstforge {

// 1-based grid coordinates; Q1 sits at (1,1) and the linear index runs
// row-major, so Q_k = ((k-1) % n1 + 1, (k-1) / n1 + 1).
struct Site {
  int x = 0;
  int y = 0;

  friend bool operator==(const Site&, const Site&) = default;
  friend auto operator<=>(const Site&, const Site&) = default;
};

enum class BondKind { nn_x, nn_y, cross };

// A coupler between two qubits.  `fixed` holds a pinned J/2pi value in MHz
// for bonds excluded from optimization (device defects, calibrated cross
// couplings); the stored order always satisfies index(a) < index(b).
struct Bond {
  Site a;
  Site b;
  BondKind kind = BondKind::nn_x;
  std::optional<double> fixed;
};

// Rectangular qubit network: nearest-neighbor bonds along both axes and,
// optionally, the two diagonals of every unit plaquette.  Immutable after
// construction apart from defect pinning; safe to share across threads.
class LatticeSpec {
 public:
  static LatticeSpec grid(int n1, int n2, bool cross) {
    if (n1 < 1 || n2 < 1) throw std::invalid_argument("lattice dimensions must be >= 1");
    LatticeSpec spec;
    spec.n1_ = n1;
    spec.n2_ = n2;
    spec.cross_ = cross;
    for (int y = 1; y <= n2; ++y)
      for (int x = 1; x < n1; ++x)
        spec.push_bond({{x, y}, {x + 1, y}, BondKind::nn_x, std::nullopt});
    for (int y = 1; y < n2; ++y)
      for (int x = 1; x <= n1; ++x)
        spec.push_bond({{x, y}, {x, y + 1}, BondKind::nn_y, std::nullopt});
    if (cross) {
      for (int y = 1; y < n2; ++y)
        for (int x = 1; x < n1; ++x) {
          spec.push_bond({{x, y}, {x + 1, y + 1}, BondKind::cross, std::nullopt});
          spec.push_bond({{x + 1, y}, {x, y + 1}, BondKind::cross, std::nullopt});
        }
    }
    return spec;
  }

  int n1() const { return n1_; }
  int n2() const { return n2_; }
  bool has_cross() const { return cross_; }
  int n_sites() const { return n1_ * n2_; }

  int site_index(Site s) const {
    if (s.x < 1 || s.x > n1_ || s.y < 1 || s.y > n2_)
      throw std::invalid_argument("site outside lattice");
    return (s.y - 1) * n1_ + s.x - 1;
  }

  Site site_at(int index) const {
    if (index < 0 || index >= n_sites()) throw std::invalid_argument("site index out of range");
    return {index % n1_ + 1, index / n1_ + 1};
  }

  const std::vector<Bond>& bonds() const { return bonds_; }

  std::optional<std::size_t> find_bond(Site a, Site b) const {
    auto it = index_.find(key(a, b));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t bond_index(Site a, Site b) const {
    auto idx = find_bond(a, b);
    if (!idx) throw std::out_of_range("bond not in lattice");
    return *idx;
  }

  // Pins a coupling to a fixed value (MHz), removing it from optimization.
  void add_defect(Site a, Site b, double value_mhz) {
    bonds_[bond_index(a, b)].fixed = value_mhz;
  }

  int count(BondKind kind) const {
    int n = 0;
    for (const auto& bond : bonds_)
      if (bond.kind == kind) ++n;
    return n;
  }

  Site inverted(Site s) const { return {n1_ + 1 - s.x, n2_ + 1 - s.y}; }

  // Site permutation of the inversion (x,y) -> (N1+1-x, N2+1-y); an
  // involution that maps the bond set onto itself.
  std::vector<int> inversion_map() const {
    std::vector<int> perm(n_sites());
    for (int i = 0; i < n_sites(); ++i) perm[i] = site_index(inverted(site_at(i)));
    return perm;
  }

  Bond mirror_bond(const Bond& bond) const {
    return bonds_[mirror_bond_index(bond_index(bond.a, bond.b))];
  }

  std::size_t mirror_bond_index(std::size_t bond) const {
    if (bond >= bonds_.size()) throw std::out_of_range("bond index out of range");
    const Bond& bd = bonds_[bond];
    return bond_index(inverted(bd.a), inverted(bd.b));
  }

 private:
  std::pair<int, int> key(Site a, Site b) const {
    int ia = site_index(a);
    int ib = site_index(b);
    if (ia > ib) std::swap(ia, ib);
    return {ia, ib};
  }

  void push_bond(Bond bond) {
    if (site_index(bond.a) > site_index(bond.b)) std::swap(bond.a, bond.b);
    index_[key(bond.a, bond.b)] = bonds_.size();
    bonds_.push_back(bond);
  }

  int n1_ = 1;
  int n2_ = 1;
  bool cross_ = false;
  std::vector<Bond> bonds_;
  std::map<std::pair<int, int>, std::size_t> index_;
};

inline LatticeSpec build_grid(int n1, int n2, bool cross) {
  return LatticeSpec::grid(n1, n2, cross);
}

}  // namespace qstforge
