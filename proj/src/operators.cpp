#include "uniscatter/operators.hpp"

#include <algorithm>
#include <cmath>
#include <random>

namespace uniscatter {

std::string space_name(Space s) {
  switch (s) {
    case Space::H: return "H";
    case Space::H0: return "H0";
    default: return "generic";
  }
}

const char* WindowedOperator::structure_name() const {
  struct Namer {
    const char* operator()(const BandedMatrix&) const { return "block-banded"; }
    const char* operator()(const BlockDiagStorage&) const { return "block-diagonal"; }
    const char* operator()(const DiagStorage&) const { return "diagonal-weight"; }
    const char* operator()(const DenseStorage&) const { return "dense"; }
    const char* operator()(const DirectSumStorage&) const { return "direct-sum"; }
    const char* operator()(const HPairStorage&) const { return "row-pair"; }
    const char* operator()(const VPairStorage&) const { return "column-pair"; }
    const char* operator()(const PolyStorage&) const { return "polynomial"; }
  };
  return std::visit(Namer{}, storage_);
}

// ---------------------------------------------------------------------------
// apply
// ---------------------------------------------------------------------------

namespace {

Vec apply_impl(const WindowedOperator& A, const Vec& x, bool adjoint);

struct ApplyVisitor {
  const WindowedOperator& A;
  const Vec& x;
  bool adjoint;

  Vec operator()(const BandedMatrix& b) const { return b.apply(x, adjoint); }

  Vec operator()(const BlockDiagStorage& s) const {
    Vec y(x.size());
    const Index nsites = static_cast<Index>(s.blocks.size());
    for (Index k = 0; k < nsites; ++k) {
      const Mat2& B = s.blocks[k];
      Vec2 v(x[2 * k], x[2 * k + 1]);
      Vec2 w = adjoint ? Vec2(B.adjoint() * v) : Vec2(B * v);
      y[2 * k] = w[0];
      y[2 * k + 1] = w[1];
    }
    return y;
  }

  Vec operator()(const DiagStorage& s) const {
    return adjoint ? Vec(s.d.conjugate().cwiseProduct(x)) : Vec(s.d.cwiseProduct(x));
  }

  Vec operator()(const DenseStorage& s) const {
    return adjoint ? Vec(s.m.adjoint() * x) : Vec(s.m * x);
  }

  Vec operator()(const DirectSumStorage& s) const {
    const Index nl = adjoint ? s.left->dim_codomain() : s.left->dim_domain();
    const Index nr = adjoint ? s.right->dim_codomain() : s.right->dim_domain();
    Vec yl = apply_impl(*s.left, x.head(nl), adjoint);
    Vec yr = apply_impl(*s.right, x.tail(nr), adjoint);
    Vec y(yl.size() + yr.size());
    y << yl, yr;
    return y;
  }

  Vec operator()(const HPairStorage& s) const {
    if (!adjoint) {
      const Index nl = s.left->dim_domain();
      const Index nr = s.right->dim_domain();
      return apply_impl(*s.left, x.head(nl), false) + apply_impl(*s.right, x.tail(nr), false);
    }
    Vec yl = apply_impl(*s.left, x, true);
    Vec yr = apply_impl(*s.right, x, true);
    Vec y(yl.size() + yr.size());
    y << yl, yr;
    return y;
  }

  Vec operator()(const VPairStorage& s) const {
    if (!adjoint) {
      Vec yl = apply_impl(*s.left, x, false);
      Vec yr = apply_impl(*s.right, x, false);
      Vec y(yl.size() + yr.size());
      y << yl, yr;
      return y;
    }
    const Index nl = s.left->dim_codomain();
    const Index nr = s.right->dim_codomain();
    return apply_impl(*s.left, x.head(nl), true) + apply_impl(*s.right, x.tail(nr), true);
  }

  Vec operator()(const PolyStorage& s) const {
    // A = sum_p c_p B^p with B unitary, so A^* = sum_p conj(c_{-p}) B^p.
    const Index M = s.order;
    auto coeff = [&](Index p) -> cplx {
      return adjoint ? std::conj(s.coeff[M - p]) : s.coeff[M + p];
    };
    Vec y = coeff(0) * x;
    Vec fwd = x;
    Vec bwd = x;
    for (Index p = 1; p <= M; ++p) {
      fwd = apply_impl(*s.base, fwd, false);
      bwd = apply_impl(*s.base, bwd, true);
      y += coeff(p) * fwd + coeff(-p) * bwd;
    }
    return y;
  }
};

Vec apply_impl(const WindowedOperator& A, const Vec& x, bool adjoint) {
  return std::visit(ApplyVisitor{A, x, adjoint}, A.storage());
}

}  // namespace

Vec WindowedOperator::apply(const Vec& x, bool adjoint) const {
  const Index need = adjoint ? dim_codomain() : dim_domain();
  if (x.size() != need) throw DimensionMismatchError(need, x.size());
  return apply_impl(*this, x, adjoint);
}

Vec WindowedOperator::apply(const Vec& x, Space x_space, bool adjoint) const {
  const Space need = adjoint ? codomain() : domain();
  if (need != Space::Generic && x_space != Space::Generic && need != x_space)
    throw SpaceMismatchError("operator expects " + space_name(need) + ", state lives in " +
                             space_name(x_space));
  return apply(x, adjoint);
}

SpinorState apply(const WindowedOperator& A, const SpinorState& v, bool adjoint) {
  Vec y = A.apply(v.values, Space::H, adjoint);
  return SpinorState(v.window, std::move(y));
}

DirectSumState apply(const WindowedOperator& A, const DirectSumState& v, bool adjoint) {
  Vec y = A.apply(v.values, Space::H0, adjoint);
  return DirectSumState(v.window, std::move(y));
}

// ---------------------------------------------------------------------------
// factorization / solve
// ---------------------------------------------------------------------------

OperatorFactorization::OperatorFactorization(const WindowedOperator& A, double rel_pivot_tol) {
  if (!A.square() && A.dim_domain() != A.dim_codomain())
    throw Error(ErrorCode::precondition, "solve requires a square operator");
  op_keepalive_ = std::make_shared<WindowedOperator>(A);
  op_ = op_keepalive_.get();

  struct Builder {
    OperatorFactorization& self;
    double tol;
    void operator()(const BandedMatrix& b) { self.fact_.emplace<BandedLU>(b, tol); }
    void operator()(const DenseStorage& d) {
      Eigen::PartialPivLU<Mat> lu(d.m);
      Mat U = lu.matrixLU().triangularView<Eigen::Upper>();
      double scale = d.m.cwiseAbs().maxCoeff();
      for (Index i = 0; i < U.rows(); ++i) {
        double p = std::abs(U(i, i));
        if (p <= tol * (scale > 0.0 ? scale : 1.0)) throw SingularFactorizationError(p);
      }
      self.fact_ = std::move(lu);
    }
    void operator()(const DiagStorage& s) {
      double scale = s.d.cwiseAbs().maxCoeff();
      for (Index i = 0; i < s.d.size(); ++i) {
        double p = std::abs(s.d[i]);
        if (p <= tol * (scale > 0.0 ? scale : 1.0)) throw SingularFactorizationError(p);
      }
      self.fact_ = DiagInv{s.d.cwiseInverse()};
    }
    void operator()(const BlockDiagStorage& s) {
      BlockInv bi;
      bi.inv.reserve(s.blocks.size());
      for (const auto& B : s.blocks) {
        cplx det = B(0, 0) * B(1, 1) - B(0, 1) * B(1, 0);
        double scale = B.cwiseAbs().maxCoeff();
        if (std::abs(det) <= tol * scale * scale + 1e-300)
          throw SingularFactorizationError(std::abs(det));
        Mat2 inv;
        inv << B(1, 1), -B(0, 1), -B(1, 0), B(0, 0);
        bi.inv.push_back(inv / det);
      }
      self.fact_ = std::move(bi);
    }
    void operator()(const DirectSumStorage& s) {
      auto fl = std::make_shared<OperatorFactorization>(*s.left, tol);
      auto fr = std::make_shared<OperatorFactorization>(*s.right, tol);
      self.fact_ = std::make_pair(std::move(fl), std::move(fr));
    }
    void operator()(const HPairStorage&) {
      throw Error(ErrorCode::precondition, "row-pair operator is not square; no solve");
    }
    void operator()(const VPairStorage&) {
      throw Error(ErrorCode::precondition, "column-pair operator is not square; no solve");
    }
    void operator()(const PolyStorage&) {
      throw Error(ErrorCode::precondition, "polynomial filter operators do not support solve");
    }
  };
  std::visit(Builder{*this, rel_pivot_tol}, A.storage());
}

Vec OperatorFactorization::solve(const Vec& b, bool adjoint) const {
  if (b.size() != op_->dim_domain()) throw DimensionMismatchError(op_->dim_domain(), b.size());
  struct Solver {
    const OperatorFactorization& self;
    const Vec& b;
    bool adjoint;
    Vec operator()(const std::monostate&) const {
      throw Error(ErrorCode::internal, "empty factorization");
    }
    Vec operator()(const BandedLU& lu) const { return lu.solve(b, adjoint); }
    Vec operator()(const Eigen::PartialPivLU<Mat>& lu) const {
      return adjoint ? Vec(lu.adjoint().solve(b)) : Vec(lu.solve(b));
    }
    Vec operator()(const DiagInv& di) const {
      return adjoint ? Vec(di.d.conjugate().cwiseProduct(b)) : Vec(di.d.cwiseProduct(b));
    }
    Vec operator()(const BlockInv& bi) const {
      Vec y(b.size());
      for (Index k = 0; k < static_cast<Index>(bi.inv.size()); ++k) {
        Vec2 v(b[2 * k], b[2 * k + 1]);
        Vec2 w = adjoint ? Vec2(bi.inv[k].adjoint() * v) : Vec2(bi.inv[k] * v);
        y[2 * k] = w[0];
        y[2 * k + 1] = w[1];
      }
      return y;
    }
    Vec operator()(const std::pair<std::shared_ptr<OperatorFactorization>,
                                   std::shared_ptr<OperatorFactorization>>& p) const {
      const Index nl = p.first->op().dim_domain();
      Vec yl = p.first->solve(b.head(nl), adjoint);
      Vec yr = p.second->solve(b.tail(b.size() - nl), adjoint);
      Vec y(b.size());
      y << yl, yr;
      return y;
    }
  };
  return std::visit(Solver{*this, b, adjoint}, fact_);
}

SolveResult solve(const WindowedOperator& A, const Vec& b, bool adjoint) {
  OperatorFactorization f(A);
  SolveResult r;
  r.x = f.solve(b, adjoint);
  const double bn = b.norm();
  r.residual = bn > 0.0 ? (A.apply(r.x, adjoint) - b).norm() / bn : 0.0;
  return r;
}

SolveResult solve(const WindowedOperator& A, const SpinorState& b, bool adjoint) {
  return solve(A, b.values, adjoint);
}

// ---------------------------------------------------------------------------
// norms / dense
// ---------------------------------------------------------------------------

Vec deterministic_vector(Index n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  auto u01 = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  Vec v(n);
  for (Index i = 0; i < n; ++i) {
    // Box-Muller, fixed algorithm for cross-run determinism
    double r = std::sqrt(-2.0 * std::log(u01()));
    double t = two_pi * u01();
    v[i] = cplx(r * std::cos(t), r * std::sin(t));
  }
  return v;
}

Mat random_unitary(Index n, std::uint64_t seed) {
  Mat A(n, n);
  std::mt19937_64 rng(seed);
  auto u01 = [&rng]() {
    return (static_cast<double>(rng() >> 11) + 0.5) * (1.0 / 9007199254740992.0);
  };
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) {
      double r = std::sqrt(-2.0 * std::log(u01()));
      double t = two_pi * u01();
      A(i, j) = cplx(r * std::cos(t), r * std::sin(t));
    }
  Eigen::HouseholderQR<Mat> qr(A);
  Mat Q = qr.householderQ();
  Mat R = qr.matrixQR().triangularView<Eigen::Upper>();
  for (Index j = 0; j < n; ++j) {
    cplx d = R(j, j);
    Q.col(j) *= (d == cplx(0.0, 0.0)) ? cplx(1.0, 0.0) : d / std::abs(d);
  }
  return Q;
}

double op_norm(const WindowedOperator& A, const PowerIterOptions& opts) {
  const Index n = A.dim_domain();
  Vec v = deterministic_vector(n, opts.seed);
  double vn = v.norm();
  if (vn == 0.0) return 0.0;
  v /= vn;
  double sigma = 0.0;
  for (int it = 0; it < opts.max_iters; ++it) {
    Vec w = A.apply(v);
    double s = w.norm();
    if (s == 0.0) {
      if (it == 0) {
        // seed hit the kernel; reseed once
        v = deterministic_vector(n, opts.seed + 17);
        v /= v.norm();
        continue;
      }
      return 0.0;
    }
    Vec u = A.apply(w, true);
    double un = u.norm();
    if (un == 0.0) return s;
    v = u / un;
    if (std::fabs(s - sigma) <= opts.rel_tol * std::max(s, 1e-300)) return s;
    sigma = s;
  }
  throw NonConvergenceError("op_norm power iteration");
}

namespace {

struct HsVisitor {
  double operator()(const BandedMatrix& b) const { return b.squared_frobenius(); }
  double operator()(const BlockDiagStorage& s) const {
    double acc = 0.0;
    for (const auto& B : s.blocks) acc += B.squaredNorm();
    return acc;
  }
  double operator()(const DiagStorage& s) const { return s.d.squaredNorm(); }
  double operator()(const DenseStorage& s) const { return s.m.squaredNorm(); }
  double operator()(const DirectSumStorage& s) const {
    return std::visit(HsVisitor{}, s.left->storage()) + std::visit(HsVisitor{}, s.right->storage());
  }
  double operator()(const HPairStorage& s) const {
    return std::visit(HsVisitor{}, s.left->storage()) + std::visit(HsVisitor{}, s.right->storage());
  }
  double operator()(const VPairStorage& s) const {
    return std::visit(HsVisitor{}, s.left->storage()) + std::visit(HsVisitor{}, s.right->storage());
  }
  double operator()(const PolyStorage&) const {
    throw Error(ErrorCode::precondition, "hs_norm of polynomial filter not supported");
  }
};

}  // namespace

double hs_norm(const WindowedOperator& A) { return std::sqrt(std::visit(HsVisitor{}, A.storage())); }

Mat to_dense(const WindowedOperator& A) {
  struct DenseVisitor {
    const WindowedOperator& A;
    Mat operator()(const BandedMatrix& b) const { return b.to_dense(); }
    Mat operator()(const BlockDiagStorage& s) const {
      Mat d = Mat::Zero(A.dim_codomain(), A.dim_domain());
      for (Index k = 0; k < static_cast<Index>(s.blocks.size()); ++k)
        d.block<2, 2>(2 * k, 2 * k) = s.blocks[k];
      return d;
    }
    Mat operator()(const DiagStorage& s) const { return Mat(s.d.asDiagonal()); }
    Mat operator()(const DenseStorage& s) const { return s.m; }
    Mat operator()(const DirectSumStorage& s) const {
      Mat l = to_dense(*s.left);
      Mat r = to_dense(*s.right);
      Mat d = Mat::Zero(l.rows() + r.rows(), l.cols() + r.cols());
      d.topLeftCorner(l.rows(), l.cols()) = l;
      d.bottomRightCorner(r.rows(), r.cols()) = r;
      return d;
    }
    Mat operator()(const HPairStorage& s) const {
      Mat l = to_dense(*s.left);
      Mat r = to_dense(*s.right);
      Mat d(l.rows(), l.cols() + r.cols());
      d << l, r;
      return d;
    }
    Mat operator()(const VPairStorage& s) const {
      Mat l = to_dense(*s.left);
      Mat r = to_dense(*s.right);
      Mat d(l.rows() + r.rows(), l.cols());
      d << l, r;
      return d;
    }
    Mat operator()(const PolyStorage& s) const {
      Mat B = to_dense(*s.base);
      const Index n = B.rows();
      const Index M = s.order;
      Mat Badj = B.adjoint();
      Mat y = s.coeff[M] * Mat::Identity(n, n);
      Mat fwd = Mat::Identity(n, n);
      Mat bwd = Mat::Identity(n, n);
      for (Index p = 1; p <= M; ++p) {
        fwd = B * fwd;
        bwd = Badj * bwd;
        y += s.coeff[M + p] * fwd + s.coeff[M - p] * bwd;
      }
      return y;
    }
  };
  return std::visit(DenseVisitor{A}, A.storage());
}

WindowedOperator adjoint_of(const WindowedOperator& A) {
  struct AdjVisitor {
    const WindowedOperator& A;
    WindowedOperator operator()(const BandedMatrix& b) const {
      return WindowedOperator(b.adjoint(), A.codomain(), A.domain(), A.dim_codomain(),
                              A.dim_domain(), A.unitary_tagged());
    }
    WindowedOperator operator()(const BlockDiagStorage& s) const {
      BlockDiagStorage r;
      r.blocks.reserve(s.blocks.size());
      for (const auto& B : s.blocks) r.blocks.push_back(B.adjoint());
      return WindowedOperator(std::move(r), A.codomain(), A.domain(), A.dim_codomain(),
                              A.dim_domain(), A.unitary_tagged());
    }
    WindowedOperator operator()(const DiagStorage& s) const {
      return WindowedOperator(DiagStorage{s.d.conjugate()}, A.codomain(), A.domain(),
                              A.dim_codomain(), A.dim_domain(), A.unitary_tagged());
    }
    WindowedOperator operator()(const DenseStorage& s) const {
      return WindowedOperator(DenseStorage{s.m.adjoint()}, A.codomain(), A.domain(),
                              A.dim_codomain(), A.dim_domain(), A.unitary_tagged());
    }
    WindowedOperator operator()(const DirectSumStorage& s) const {
      return make_direct_sum(adjoint_of(*s.left), adjoint_of(*s.right));
    }
    WindowedOperator operator()(const HPairStorage& s) const {
      return make_vpair(adjoint_of(*s.left), adjoint_of(*s.right));
    }
    WindowedOperator operator()(const VPairStorage& s) const {
      return make_hpair(adjoint_of(*s.left), adjoint_of(*s.right));
    }
    WindowedOperator operator()(const PolyStorage& s) const {
      const Index M = s.order;
      Vec c(2 * M + 1);
      for (Index p = -M; p <= M; ++p) c[M + p] = std::conj(s.coeff[M - p]);
      PolyStorage r{s.base, std::move(c), M};
      return WindowedOperator(std::move(r), A.codomain(), A.domain(), A.dim_codomain(),
                              A.dim_domain(), A.unitary_tagged());
    }
  };
  return std::visit(AdjVisitor{A}, A.storage());
}

// ---------------------------------------------------------------------------
// builders
// ---------------------------------------------------------------------------

WindowedOperator make_identity(Space s, Index dim) {
  return WindowedOperator(DiagStorage{Vec::Ones(dim)}, s, s, dim, dim, true);
}

WindowedOperator make_scaled_identity(Space s, Index dim, cplx c) {
  return WindowedOperator(DiagStorage{Vec::Constant(dim, c)}, s, s, dim, dim,
                          std::abs(std::abs(c) - 1.0) < 1e-15);
}

WindowedOperator make_diag(Space s, Vec d) {
  const Index n = d.size();
  return WindowedOperator(DiagStorage{std::move(d)}, s, s, n, n, false);
}

WindowedOperator make_dense(Space s, Mat m, bool unitary) {
  const Index r = m.rows(), c = m.cols();
  return WindowedOperator(DenseStorage{std::move(m)}, s, s, c, r, unitary);
}

WindowedOperator make_dense(Space dom, Space cod, Mat m) {
  const Index r = m.rows(), c = m.cols();
  return WindowedOperator(DenseStorage{std::move(m)}, dom, cod, c, r, false);
}

WindowedOperator make_banded(Space s, BandedMatrix b, bool unitary) {
  const Index n = b.n;
  return WindowedOperator(std::move(b), s, s, n, n, unitary);
}

WindowedOperator make_block_diag(Space s, std::vector<Mat2> blocks, bool unitary) {
  const Index n = 2 * static_cast<Index>(blocks.size());
  return WindowedOperator(BlockDiagStorage{std::move(blocks)}, s, s, n, n, unitary);
}

WindowedOperator make_direct_sum(WindowedOperator left, WindowedOperator right) {
  bool uni = left.unitary_tagged() && right.unitary_tagged();
  Index dd = left.dim_domain() + right.dim_domain();
  Index dc = left.dim_codomain() + right.dim_codomain();
  DirectSumStorage s{std::make_shared<WindowedOperator>(std::move(left)),
                     std::make_shared<WindowedOperator>(std::move(right))};
  return WindowedOperator(std::move(s), Space::H0, Space::H0, dd, dc, uni);
}

WindowedOperator make_hpair(WindowedOperator left, WindowedOperator right) {
  if (left.dim_codomain() != right.dim_codomain())
    throw DimensionMismatchError(left.dim_codomain(), right.dim_codomain());
  Index dd = left.dim_domain() + right.dim_domain();
  Index dc = left.dim_codomain();
  HPairStorage s{std::make_shared<WindowedOperator>(std::move(left)),
                 std::make_shared<WindowedOperator>(std::move(right))};
  return WindowedOperator(std::move(s), Space::H0, Space::H, dd, dc, false);
}

WindowedOperator make_vpair(WindowedOperator left, WindowedOperator right) {
  if (left.dim_domain() != right.dim_domain())
    throw DimensionMismatchError(left.dim_domain(), right.dim_domain());
  Index dd = left.dim_domain();
  Index dc = left.dim_codomain() + right.dim_codomain();
  VPairStorage s{std::make_shared<WindowedOperator>(std::move(left)),
                 std::make_shared<WindowedOperator>(std::move(right))};
  return WindowedOperator(std::move(s), Space::H, Space::H0, dd, dc, false);
}

WindowedOperator make_poly(WindowedOperator base, Vec coeff, Index order) {
  if (coeff.size() != 2 * order + 1)
    throw DimensionMismatchError(2 * order + 1, coeff.size());
  Index d = base.dim_domain();
  Space sp = base.domain();
  PolyStorage s{std::make_shared<WindowedOperator>(std::move(base)), std::move(coeff), order};
  return WindowedOperator(std::move(s), sp, sp, d, d, false);
}

}  // namespace uniscatter
