#pragma once

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <complex>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace qstforge {

// Real-symmetric sparse matrix in CSR form, both triangles stored.
class SparseSym {
 public:
  SparseSym() = default;

  // Entries may repeat (values accumulate) and only need the upper triangle;
  // the transpose image is added automatically for off-diagonal entries.
  SparseSym(int dim, const std::vector<std::array<int, 2>>& pattern,
            const std::vector<double>& values)
      : dim_(dim) {
    if (pattern.size() != values.size())
      throw std::invalid_argument("pattern/value size mismatch");
    std::vector<int> counts(static_cast<std::size_t>(dim) + 1, 0);
    for (std::size_t k = 0; k < pattern.size(); ++k) {
      ++counts[static_cast<std::size_t>(pattern[k][0]) + 1];
      if (pattern[k][0] != pattern[k][1]) ++counts[static_cast<std::size_t>(pattern[k][1]) + 1];
    }
    for (std::size_t r = 1; r < counts.size(); ++r) counts[r] += counts[r - 1];
    row_ptr_ = counts;
    cols_.resize(static_cast<std::size_t>(row_ptr_.back()));
    vals_.resize(cols_.size());
    std::vector<int> cursor(row_ptr_.begin(), row_ptr_.end() - 1);
    for (std::size_t k = 0; k < pattern.size(); ++k) {
      const int i = pattern[k][0];
      const int j = pattern[k][1];
      put(cursor, i, j, values[k]);
      if (i != j) put(cursor, j, i, values[k]);
    }
  }

  int dim() const { return dim_; }
  std::size_t nnz() const { return vals_.size(); }

  void multiply(const Eigen::VectorXcd& x, Eigen::VectorXcd& y) const {
    for (int r = 0; r < dim_; ++r) {
      std::complex<double> acc = 0.0;
      for (int k = row_ptr_[static_cast<std::size_t>(r)];
           k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k)
        acc += vals_[static_cast<std::size_t>(k)] * x(cols_[static_cast<std::size_t>(k)]);
      y(r) = acc;
    }
  }

  Eigen::MatrixXd dense() const {
    Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim_, dim_);
    for (int r = 0; r < dim_; ++r)
      for (int k = row_ptr_[static_cast<std::size_t>(r)];
           k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k)
        m(r, cols_[static_cast<std::size_t>(k)]) += vals_[static_cast<std::size_t>(k)];
    return m;
  }

  // Gershgorin enclosure of the spectrum.
  std::pair<double, double> spectral_bounds() const {
    double lo = 0.0;
    double hi = 0.0;
    for (int r = 0; r < dim_; ++r) {
      double center = 0.0;
      double radius = 0.0;
      for (int k = row_ptr_[static_cast<std::size_t>(r)];
           k < row_ptr_[static_cast<std::size_t>(r) + 1]; ++k) {
        if (cols_[static_cast<std::size_t>(k)] == r)
          center += vals_[static_cast<std::size_t>(k)];
        else
          radius += std::abs(vals_[static_cast<std::size_t>(k)]);
      }
      lo = std::min(lo, center - radius);
      hi = std::max(hi, center + radius);
    }
    return {lo, hi};
  }

 private:
  void put(std::vector<int>& cursor, int i, int j, double v) {
    const std::size_t slot = static_cast<std::size_t>(cursor[static_cast<std::size_t>(i)]++);
    cols_[slot] = j;
    vals_[slot] = v;
  }

  int dim_ = 0;
  std::vector<int> row_ptr_;
  std::vector<int> cols_;
  std::vector<double> vals_;
};

// exp(-iHt) psi via a Chebyshev expansion of the phase factor on the
// Gershgorin-rescaled spectrum.  Truncation keeps Bessel coefficients down
// to `tol` relative weight; the contract used throughout is relative error
// <= 1e-8 against dense eigendecomposition.
inline Eigen::VectorXcd chebyshev_evolve(const SparseSym& h, const Eigen::VectorXcd& psi,
                                         double t_ns, double tol = 1e-12) {
  if (psi.size() != h.dim()) throw std::invalid_argument("state dimension mismatch");
  const auto [lo, hi] = h.spectral_bounds();
  const double center = 0.5 * (hi + lo);
  const double half = 0.5 * (hi - lo);
  const std::complex<double> phase = std::polar(1.0, -center * t_ns);
  const double z = half * std::abs(t_ns);
  if (z < 1e-14) return phase * psi;

  // Coefficient magnitudes |J_k(z)| fall off super-exponentially past k ~ z.
  const int k_max = static_cast<int>(z + 60.0 * std::cbrt(z + 1.0) + 40.0);
  std::vector<double> bessel(static_cast<std::size_t>(k_max) + 1);
  for (int k = 0; k <= k_max; ++k) bessel[static_cast<std::size_t>(k)] = std::cyl_bessel_j(k, z);
  int m = k_max;
  while (m > 1 && std::abs(bessel[static_cast<std::size_t>(m)]) < tol &&
         std::abs(bessel[static_cast<std::size_t>(m) - 1]) < tol)
    --m;

  const std::complex<double> unit_i(0.0, 1.0);
  const double sign_t = t_ns >= 0.0 ? 1.0 : -1.0;
  // T_k recurrence on the rescaled operator Ht = (H - c)/half.
  Eigen::VectorXcd t_prev = psi;
  Eigen::VectorXcd t_curr(psi.size());
  Eigen::VectorXcd scratch(psi.size());
  h.multiply(psi, scratch);
  t_curr = (scratch - center * psi) / half;
  Eigen::VectorXcd acc = bessel[0] * t_prev;
  std::complex<double> ck = 1.0;
  for (int k = 1; k <= m; ++k) {
    ck *= -unit_i * sign_t;
    acc += 2.0 * ck * bessel[static_cast<std::size_t>(k)] * t_curr;
    if (k == m) break;
    h.multiply(t_curr, scratch);
    scratch = 2.0 * (scratch - center * t_curr) / half - t_prev;
    t_prev.swap(t_curr);
    t_curr.swap(scratch);
  }
  return phase * acc;
}

}  // namespace qstforge
