#ifndef UNISCATTER_BANDED_HPP
#define UNISCATTER_BANDED_HPP

#include "uniscatter/common.hpp"

namespace uniscatter {

// Entry outside the band proper; used for the cyclic wrap corners.
struct WrapEntry {
  Index row = 0;
  Index col = 0;
  cplx value{0.0, 0.0};
};

// Scalar banded matrix in LAPACK-style storage, plus an explicit list of
// wrap entries (top-right / bottom-left corners from cyclic boundary
// conditions).  band(ku + i - j, j) = A(i, j) for -ku <= i - j <= kl.
struct BandedMatrix {
  Index n = 0;
  Index kl = 0;
  Index ku = 0;
  Mat band;                      // (kl + ku + 1) x n
  std::vector<WrapEntry> wrap;   // entries with |i - j| > band offsets

  BandedMatrix() = default;
  BandedMatrix(Index n_, Index kl_, Index ku_)
      : n(n_), kl(kl_), ku(ku_), band(Mat::Zero(kl_ + ku_ + 1, n_)) {}

  bool in_band(Index i, Index j) const {
    Index d = i - j;
    return d >= -ku && d <= kl;
  }
  cplx get(Index i, Index j) const {
    if (in_band(i, j)) return band(ku + i - j, j);
    for (const auto& w : wrap)
      if (w.row == i && w.col == j) return w.value;
    return cplx(0.0, 0.0);
  }
  void set(Index i, Index j, cplx v) {
    if (in_band(i, j)) {
      band(ku + i - j, j) = v;
      return;
    }
    for (auto& w : wrap) {
      if (w.row == i && w.col == j) {
        w.value = v;
        return;
      }
    }
    wrap.push_back({i, j, v});
  }
  void add(Index i, Index j, cplx v) { set(i, j, get(i, j) + v); }

  double max_abs() const;
  double squared_frobenius() const;

  Vec apply(const Vec& x, bool adjoint = false) const;
  Mat to_dense() const;

  BandedMatrix adjoint() const;

  // A <- A + c * B (band widths grow to the union).
  static BandedMatrix sum(const BandedMatrix& a, cplx ca, const BandedMatrix& b, cplx cb);

  // diag(d) * A  and  A * diag(d); d given as a flat vector of length n.
  BandedMatrix scaled_rows(const Vec& d) const;
  BandedMatrix scaled_cols(const Vec& d) const;

  // Drop the wrap entries (open-boundary restriction of a cyclic operator).
  BandedMatrix without_wrap() const {
    BandedMatrix r = *this;
    r.wrap.clear();
    return r;
  }
};

// LU factorization of a BandedMatrix with partial pivoting.  Cyclic wrap
// entries are handled with a bordered (Schur-complement) split: the leading
// (n - m) x (n - m) block is purely banded, the trailing m rows/columns are
// dense, with m just large enough to cover every wrap entry.
class BandedLU {
 public:
  // rel_pivot_tol: a pivot below rel_pivot_tol * max|A| raises
  // SingularFactorizationError carrying the failing pivot magnitude.
  explicit BandedLU(const BandedMatrix& A, double rel_pivot_tol = 1e-14);

  // Solves A x = b (adjoint = false) or A^* x = b (adjoint = true).
  Vec solve(const Vec& b, bool adjoint = false) const;

  Index size() const { return n_; }

 private:
  Index n_ = 0, n1_ = 0, m_ = 0;
  Index kl_ = 0, ku_ = 0;
  Mat fact_;                 // (2*kl + ku + 1) x n1 working band with fill
  std::vector<Index> piv_;   // pivot row chosen at each step
  Mat X_;                    // n1 x m = A11^{-1} A12
  Mat A12_, A21_, A22_;      // borders
  Eigen::PartialPivLU<Mat> schur_;   // factorization of A22 - A21 X

  // band accessors into fact_: entry (i, j) stored at fact_(kl+ku+i-j, j),
  // valid for -(kl+ku) <= i - j <= kl.
  cplx& f(Index i, Index j) { return fact_(kl_ + ku_ + i - j, j); }
  cplx f(Index i, Index j) const { return fact_(kl_ + ku_ + i - j, j); }

  void factor_banded(double tol_abs);
  Vec solve_a11(const Vec& b) const;       // A11 x = b
  Vec solve_a11_adj(const Vec& b) const;   // A11^* x = b
};

}  // namespace uniscatter

#endif
