#include "uniscatter/banded.hpp"

#include <algorithm>
#include <cmath>

namespace uniscatter {

double BandedMatrix::max_abs() const {
  double m = 0.0;
  for (Index j = 0; j < n; ++j) {
    Index ilo = std::max<Index>(0, j - ku);
    Index ihi = std::min<Index>(n - 1, j + kl);
    for (Index i = ilo; i <= ihi; ++i) m = std::max(m, std::abs(band(ku + i - j, j)));
  }
  for (const auto& w : wrap) m = std::max(m, std::abs(w.value));
  return m;
}

double BandedMatrix::squared_frobenius() const {
  double s = 0.0;
  for (Index j = 0; j < n; ++j) {
    Index ilo = std::max<Index>(0, j - ku);
    Index ihi = std::min<Index>(n - 1, j + kl);
    for (Index i = ilo; i <= ihi; ++i) s += std::norm(band(ku + i - j, j));
  }
  for (const auto& w : wrap) s += std::norm(w.value);
  return s;
}

Vec BandedMatrix::apply(const Vec& x, bool adjoint) const {
  if (x.size() != n) throw DimensionMismatchError(n, x.size());
  Vec y = Vec::Zero(n);
  if (!adjoint) {
    for (Index j = 0; j < n; ++j) {
      const cplx xj = x[j];
      if (xj == cplx(0.0, 0.0)) continue;
      Index ilo = std::max<Index>(0, j - ku);
      Index ihi = std::min<Index>(n - 1, j + kl);
      for (Index i = ilo; i <= ihi; ++i) y[i] += band(ku + i - j, j) * xj;
    }
    for (const auto& w : wrap) y[w.row] += w.value * x[w.col];
  } else {
    for (Index j = 0; j < n; ++j) {
      Index ilo = std::max<Index>(0, j - ku);
      Index ihi = std::min<Index>(n - 1, j + kl);
      cplx acc(0.0, 0.0);
      for (Index i = ilo; i <= ihi; ++i) acc += std::conj(band(ku + i - j, j)) * x[i];
      y[j] += acc;
    }
    for (const auto& w : wrap) y[w.col] += std::conj(w.value) * x[w.row];
  }
  return y;
}

Mat BandedMatrix::to_dense() const {
  Mat d = Mat::Zero(n, n);
  for (Index j = 0; j < n; ++j) {
    Index ilo = std::max<Index>(0, j - ku);
    Index ihi = std::min<Index>(n - 1, j + kl);
    for (Index i = ilo; i <= ihi; ++i) d(i, j) = band(ku + i - j, j);
  }
  for (const auto& w : wrap) d(w.row, w.col) += w.value;
  return d;
}

BandedMatrix BandedMatrix::adjoint() const {
  BandedMatrix r(n, ku, kl);
  for (Index j = 0; j < n; ++j) {
    Index ilo = std::max<Index>(0, j - ku);
    Index ihi = std::min<Index>(n - 1, j + kl);
    for (Index i = ilo; i <= ihi; ++i) r.band(r.ku + j - i, i) = std::conj(band(ku + i - j, j));
  }
  r.wrap.reserve(wrap.size());
  for (const auto& w : wrap) r.wrap.push_back({w.col, w.row, std::conj(w.value)});
  return r;
}

BandedMatrix BandedMatrix::sum(const BandedMatrix& a, cplx ca, const BandedMatrix& b, cplx cb) {
  if (a.n != b.n) throw DimensionMismatchError(a.n, b.n);
  BandedMatrix r(a.n, std::max(a.kl, b.kl), std::max(a.ku, b.ku));
  for (Index j = 0; j < a.n; ++j) {
    Index ilo = std::max<Index>(0, j - a.ku);
    Index ihi = std::min<Index>(a.n - 1, j + a.kl);
    for (Index i = ilo; i <= ihi; ++i) r.band(r.ku + i - j, j) += ca * a.band(a.ku + i - j, j);
    ilo = std::max<Index>(0, j - b.ku);
    ihi = std::min<Index>(b.n - 1, j + b.kl);
    for (Index i = ilo; i <= ihi; ++i) r.band(r.ku + i - j, j) += cb * b.band(b.ku + i - j, j);
  }
  for (const auto& w : a.wrap) r.add(w.row, w.col, ca * w.value);
  for (const auto& w : b.wrap) r.add(w.row, w.col, cb * w.value);
  return r;
}

BandedMatrix BandedMatrix::scaled_rows(const Vec& d) const {
  if (d.size() != n) throw DimensionMismatchError(n, d.size());
  BandedMatrix r = *this;
  for (Index j = 0; j < n; ++j) {
    Index ilo = std::max<Index>(0, j - ku);
    Index ihi = std::min<Index>(n - 1, j + kl);
    for (Index i = ilo; i <= ihi; ++i) r.band(ku + i - j, j) *= d[i];
  }
  for (auto& w : r.wrap) w.value *= d[w.row];
  return r;
}

BandedMatrix BandedMatrix::scaled_cols(const Vec& d) const {
  if (d.size() != n) throw DimensionMismatchError(n, d.size());
  BandedMatrix r = *this;
  for (Index j = 0; j < n; ++j) r.band.col(j) *= d[j];
  for (auto& w : r.wrap) w.value *= d[w.col];
  return r;
}

// ---------------------------------------------------------------------------
// BandedLU
// ---------------------------------------------------------------------------

BandedLU::BandedLU(const BandedMatrix& A, double rel_pivot_tol) {
  n_ = A.n;
  kl_ = A.kl;
  ku_ = A.ku;

  // Border size: smallest m so that every wrap entry lands in the trailing
  // m rows or columns, leaving the leading block purely banded.
  m_ = 0;
  for (const auto& w : A.wrap) m_ = std::max(m_, n_ - std::max(w.row, w.col));
  if (m_ > 0) m_ = std::max(m_, std::min<Index>(n_, std::max(kl_, ku_)));
  if (m_ >= n_)
    throw Error(ErrorCode::precondition, "banded factorization: wrap border covers whole matrix");
  n1_ = n_ - m_;

  const double scale = A.max_abs();
  const double tol_abs = rel_pivot_tol * (scale > 0.0 ? scale : 1.0);

  // Leading banded block with fill space: rows kl+ku..2kl+ku hold the band,
  // rows 0..kl-1 receive pivoting fill.
  fact_ = Mat::Zero(2 * kl_ + ku_ + 1, n1_);
  for (Index j = 0; j < n1_; ++j) {
    Index ilo = std::max<Index>(0, j - ku_);
    Index ihi = std::min<Index>(n1_ - 1, j + kl_);
    for (Index i = ilo; i <= ihi; ++i) f(i, j) = A.band(ku_ + i - j, j);
  }

  if (m_ > 0) {
    A12_ = Mat::Zero(n1_, m_);
    A21_ = Mat::Zero(m_, n1_);
    A22_ = Mat::Zero(m_, m_);
    auto put = [&](Index i, Index j, cplx v) {
      if (i < n1_ && j < n1_) return;  // handled by the banded block
      if (i < n1_)
        A12_(i, j - n1_) += v;
      else if (j < n1_)
        A21_(i - n1_, j) += v;
      else
        A22_(i - n1_, j - n1_) += v;
    };
    for (Index j = 0; j < n_; ++j) {
      Index ilo = std::max<Index>(0, j - ku_);
      Index ihi = std::min<Index>(n_ - 1, j + kl_);
      for (Index i = ilo; i <= ihi; ++i) {
        if (i >= n1_ || j >= n1_) put(i, j, A.band(ku_ + i - j, j));
      }
    }
    for (const auto& w : A.wrap) put(w.row, w.col, w.value);
  }

  factor_banded(tol_abs);

  if (m_ > 0) {
    X_.resize(n1_, m_);
    for (Index c = 0; c < m_; ++c) X_.col(c) = solve_a11(A12_.col(c));
    Mat S = A22_ - A21_ * X_;
    schur_.compute(S);
    double smin = S.cwiseAbs().maxCoeff();
    // Cheap singularity screen on the Schur factor.
    Mat U = schur_.matrixLU().triangularView<Eigen::Upper>();
    for (Index i = 0; i < m_; ++i) {
      double p = std::abs(U(i, i));
      if (p <= rel_pivot_tol * (smin > 0.0 ? smin : 1.0)) throw SingularFactorizationError(p);
    }
  }
}

void BandedLU::factor_banded(double tol_abs) {
  piv_.assign(n1_, 0);
  const Index width = kl_ + ku_;  // U bandwidth after pivoting
  for (Index j = 0; j < n1_; ++j) {
    // pivot search in column j, rows j..j+kl
    Index ihi = std::min<Index>(n1_ - 1, j + kl_);
    Index p = j;
    double best = std::abs(f(j, j));
    for (Index i = j + 1; i <= ihi; ++i) {
      double v = std::abs(f(i, j));
      if (v > best) {
        best = v;
        p = i;
      }
    }
    if (best <= tol_abs) throw SingularFactorizationError(best);
    piv_[j] = p;
    if (p != j) {
      Index chi = std::min<Index>(n1_ - 1, j + width);
      for (Index c = j; c <= chi; ++c) std::swap(f(j, c), f(p, c));
    }
    const cplx d = f(j, j);
    Index chi = std::min<Index>(n1_ - 1, j + width);
    for (Index i = j + 1; i <= ihi; ++i) {
      const cplx l = f(i, j) / d;
      f(i, j) = l;  // store multiplier
      if (l == cplx(0.0, 0.0)) continue;
      for (Index c = j + 1; c <= chi; ++c) f(i, c) -= l * f(j, c);
    }
  }
}

Vec BandedLU::solve_a11(const Vec& b) const {
  Vec x = b;
  const Index width = kl_ + ku_;
  // forward: apply pivots and L
  for (Index j = 0; j < n1_; ++j) {
    if (piv_[j] != j) std::swap(x[j], x[piv_[j]]);
    const cplx xj = x[j];
    if (xj == cplx(0.0, 0.0)) continue;
    Index ihi = std::min<Index>(n1_ - 1, j + kl_);
    for (Index i = j + 1; i <= ihi; ++i) x[i] -= f(i, j) * xj;
  }
  // backward: U x = y
  for (Index j = n1_ - 1; j >= 0; --j) {
    Index chi = std::min<Index>(n1_ - 1, j + width);
    cplx acc = x[j];
    for (Index c = j + 1; c <= chi; ++c) acc -= f(j, c) * x[c];
    x[j] = acc / f(j, j);
  }
  return x;
}

Vec BandedLU::solve_a11_adj(const Vec& b) const {
  // A11 = P^{-1} L U  =>  A11^* = U^* L^* P.  Solve U^* w = b (forward),
  // L^* v = w (backward), then undo the pivots in reverse.
  Vec x = b;
  const Index width = kl_ + ku_;
  for (Index j = 0; j < n1_; ++j) {
    Index clo = std::max<Index>(0, j - width);
    cplx acc = x[j];
    for (Index c = clo; c < j; ++c) acc -= std::conj(f(c, j)) * x[c];
    x[j] = acc / std::conj(f(j, j));
  }
  for (Index j = n1_ - 1; j >= 0; --j) {
    cplx acc = x[j];
    Index ihi = std::min<Index>(n1_ - 1, j + kl_);
    for (Index i = j + 1; i <= ihi; ++i) acc -= std::conj(f(i, j)) * x[i];
    x[j] = acc;
    if (piv_[j] != j) std::swap(x[j], x[piv_[j]]);
  }
  return x;
}

Vec BandedLU::solve(const Vec& b, bool adjoint) const {
  if (b.size() != n_) throw DimensionMismatchError(n_, b.size());
  if (m_ == 0) return adjoint ? solve_a11_adj(b) : solve_a11(b);

  Vec x(n_);
  if (!adjoint) {
    Vec t = solve_a11(b.head(n1_));
    Vec x2 = schur_.solve((b.tail(m_) - A21_ * t).eval());
    x.head(n1_) = t - X_ * x2;
    x.tail(m_) = x2;
  } else {
    Vec t = solve_a11_adj(b.head(n1_));
    Vec rhs2 = b.tail(m_) - A12_.adjoint() * t;
    Vec x2 = schur_.adjoint().solve(rhs2);
    x.head(n1_) = solve_a11_adj((b.head(n1_) - A21_.adjoint() * x2).eval());
    x.tail(m_) = x2;
  }
  return x;
}

}  // namespace uniscatter
