#include "doctest.h"

#include <cmath>

#include "uniscatter/banded.hpp"
#include "uniscatter/common.hpp"
#include "uniscatter/operators.hpp"

using namespace uniscatter;

namespace {

// Cyclic shift on the window: (S psi)(x) = (psi0(x+1), psi1(x-1)).
BandedMatrix cyclic_shift(const LatticeWindow& w) {
  const Index L = w.half_width;
  BandedMatrix S(w.dim(), 2, 2);
  for (Index x = -L; x <= L; ++x) {
    Index xp = (x == L) ? -L : x + 1;
    Index xm = (x == -L) ? L : x - 1;
    S.set(w.flat(x, 0), w.flat(xp, 0), 1.0);
    S.set(w.flat(x, 1), w.flat(xm, 1), 1.0);
  }
  return S;
}

BandedMatrix random_banded(Index n, Index kl, Index ku, bool cyclic, std::uint64_t seed) {
  BandedMatrix A(n, kl, ku);
  Vec entries = deterministic_vector((kl + ku + 1) * n + 4 * (kl + ku), seed);
  Index t = 0;
  for (Index j = 0; j < n; ++j)
    for (Index i = std::max<Index>(0, j - ku); i <= std::min<Index>(n - 1, j + kl); ++i)
      A.set(i, j, entries[t++]);
  if (cyclic) {
    for (Index d = 1; d <= ku; ++d)
      for (Index i = 0; i < d; ++i) A.set(i, n - d + i, entries[t++]);
    for (Index d = 1; d <= kl; ++d)
      for (Index j = 0; j < d; ++j) A.set(n - d + j, j, entries[t++]);
  }
  return A;
}

BandedMatrix diagonally_dominant(BandedMatrix A) {
  double shift = 4.0 * std::max(1.0, A.max_abs());
  for (Index i = 0; i < A.n; ++i) A.add(i, i, cplx(shift, 0.0));
  return A;
}

}  // namespace

TEST_CASE("apply: identity returns the input") {
  LatticeWindow w(6);
  auto id = make_identity(Space::H, w.dim());
  SpinorState v(w, deterministic_vector(w.dim(), 1));
  auto y = apply(id, v);
  CHECK((y.values - v.values).norm() == doctest::Approx(0.0));
}

TEST_CASE("apply: shift moves a delta peak from x=0 to x=-1 in component 0") {
  LatticeWindow w(6);
  auto S = make_banded(Space::H, cyclic_shift(w), true);
  SpinorState peak(w);
  peak.at(0, 0) = 1.0;
  auto y = apply(S, peak);
  CHECK(std::abs(y.at(-1, 0) - cplx(1.0, 0.0)) < 1e-15);
  CHECK(y.values.norm() == doctest::Approx(1.0));
  Index nz = 0;
  for (Index i = 0; i < w.dim(); ++i)
    if (std::abs(y.values[i]) > 0) ++nz;
  CHECK(nz == 1);
}

TEST_CASE("apply: S* then S restores interior-supported states; dense oracle at L=8") {
  LatticeWindow w(8);
  auto S = make_banded(Space::H, cyclic_shift(w), true);
  SpinorState v(w);
  for (Index x = -4; x <= 4; ++x) {
    v.at(x, 0) = cplx(std::sin(0.4 * x), 0.2);
    v.at(x, 1) = cplx(0.1, std::cos(0.3 * x));
  }
  auto up = apply(S, v, true);
  auto back = apply(S, up, false);
  CHECK((back.values - v.values).norm() < 1e-14 * v.norm());

  Mat D = to_dense(S);
  CHECK((D.adjoint() * D - Mat::Identity(w.dim(), w.dim())).norm() < 1e-14);
}

TEST_CASE("solve: identity and scaled identity") {
  LatticeWindow w(5);
  Vec b = deterministic_vector(w.dim(), 2);
  auto id = make_identity(Space::H, w.dim());
  auto r = solve(id, b);
  CHECK((r.x - b).norm() == doctest::Approx(0.0));
  CHECK(r.residual == doctest::Approx(0.0));

  auto two = make_scaled_identity(Space::H, w.dim(), 2.0);
  auto r2 = solve(two, b);
  CHECK((r2.x - 0.5 * b).norm() < 1e-15 * b.norm());
}

TEST_CASE("solve: (1 - 0.5 S*) matches the truncated geometric series") {
  LatticeWindow w(24);
  BandedMatrix S = cyclic_shift(w);
  BandedMatrix Sadj = S.adjoint();
  BandedMatrix A = BandedMatrix::sum(
      BandedMatrix(w.dim(), 0, 0), 1.0, Sadj, -0.5);
  for (Index i = 0; i < w.dim(); ++i) A.add(i, i, 1.0);
  auto op = make_banded(Space::H, A);

  SpinorState peak(w);
  peak.at(0, 0) = 1.0;
  auto r = solve(op, peak.values);

  // sum_{n=0..20} (0.5 S*)^n delta
  Vec acc = peak.values;
  Vec term = peak.values;
  auto Sop = make_banded(Space::H, S, true);
  for (int n = 1; n <= 20; ++n) {
    term = 0.5 * Sop.apply(term, true);
    acc += term;
  }
  const double tail = std::pow(0.5, 21) / (1.0 - 0.5);
  CHECK((r.x - acc).norm() <= tail);
  CHECK(r.residual < 1e-12);
}

TEST_CASE("op_norm: identity, scaled identity, random unitary with SVD oracle") {
  auto id = make_identity(Space::Generic, 12);
  CHECK(op_norm(id) == doctest::Approx(1.0).epsilon(1e-12));
  auto three = make_scaled_identity(Space::Generic, 12, 3.0);
  CHECK(op_norm(three) == doctest::Approx(3.0).epsilon(1e-12));

  Mat U = random_unitary(8, 99);
  auto Uop = make_dense(Space::Generic, U, true);
  double nrm = op_norm(Uop);
  CHECK(std::fabs(nrm - 1.0) <= 1e-10);
  Eigen::JacobiSVD<Mat> svd(U);
  CHECK(std::fabs(nrm - svd.singularValues()(0)) <= 1e-10);
}

TEST_CASE("hs_norm: identity, truncated weight, full-lattice limit at s=1") {
  auto id = make_identity(Space::Generic, 9);
  CHECK(hs_norm(id) == doctest::Approx(3.0));

  LatticeWindow w(40);
  Vec d(w.dim());
  for (Index x = -40; x <= 40; ++x) {
    d[w.flat(x, 0)] = 1.0 / jbracket(double(x));
    d[w.flat(x, 1)] = 1.0 / jbracket(double(x));
  }
  auto wt = make_diag(Space::H, d);
  double expect = 0.0;
  for (Index x = -40; x <= 40; ++x) expect += 2.0 / (1.0 + double(x) * double(x));
  CHECK(hs_norm(wt) == doctest::Approx(std::sqrt(expect)).epsilon(1e-14));

  // full-lattice limit: partial sums, smallest terms first, with an
  // integral-bracket tail bound tighter than 1e-10
  const long M = 1000000;
  double sum = 0.0;
  for (long x = M; x >= 1; --x) sum += 1.0 / (1.0 + double(x) * double(x));
  sum = 1.0 + 2.0 * sum;
  const double tail_lo = 2.0 * (pi / 2 - std::atan(double(M) + 1.0));
  const double tail_hi = 2.0 * (pi / 2 - std::atan(double(M)));
  CHECK(tail_hi - tail_lo < 1e-11);
  const double full = sum + 0.5 * (tail_lo + tail_hi);
  const double closed = pi / std::tanh(pi);
  CHECK(std::fabs(full - closed) < 1e-10);
  CHECK(std::sqrt(2.0 * full) == doctest::Approx(2.5113137).epsilon(1e-7));
}

TEST_CASE("adjoint agrees with the dense conjugate-transpose oracle across structures") {
  LatticeWindow w(7);
  const Index n = w.dim();

  std::vector<WindowedOperator> ops;
  ops.push_back(make_banded(Space::H, random_banded(n, 2, 3, true, 11)));
  std::vector<Mat2> blocks;
  for (Index k = 0; k < w.site_count(); ++k) {
    Mat2 B;
    B << cplx(0.1 * k, 1), cplx(2, -0.05 * k), cplx(-1, 0.3), cplx(0.7, 0.7);
    blocks.push_back(B);
  }
  ops.push_back(make_block_diag(Space::H, blocks));
  ops.push_back(make_diag(Space::H, deterministic_vector(n, 12)));
  ops.push_back(make_dense(Space::H, random_unitary(n, 13)));
  ops.push_back(make_direct_sum(ops[0], ops[2]));
  ops.push_back(make_hpair(ops[1], ops[2]));
  ops.push_back(make_vpair(ops[0], ops[3]));
  {
    Vec coeff = deterministic_vector(7, 14);
    ops.push_back(make_poly(make_dense(Space::H, random_unitary(n, 15), true), coeff, 3));
  }

  for (const auto& A : ops) {
    Mat D = to_dense(A);
    Vec x = deterministic_vector(A.dim_codomain(), 21);
    Vec got = A.apply(x, true);
    Vec want = D.adjoint() * x;
    CHECK((got - want).lpNorm<Eigen::Infinity>() <= 1e-13 * (1.0 + want.lpNorm<Eigen::Infinity>()));

    WindowedOperator Aadj = adjoint_of(A);
    CHECK((to_dense(Aadj) - D.adjoint()).norm() < 1e-13 * (1.0 + D.norm()));
  }
}

TEST_CASE("solve then apply round-trips for well-conditioned operators") {
  LatticeWindow w(9);
  const Index n = w.dim();
  auto A = make_banded(Space::H, diagonally_dominant(random_banded(n, 3, 2, true, 31)));
  Vec v = deterministic_vector(n, 32);
  Vec b = A.apply(v);
  auto r = solve(A, b);
  CHECK((r.x - v).norm() <= 1e-10 * v.norm());
  CHECK(r.residual <= 1e-12);

  // adjoint route
  Vec badj = A.apply(v, true);
  auto radj = solve(A, badj, true);
  CHECK((radj.x - v).norm() <= 1e-10 * v.norm());
}

TEST_CASE("banded LU matches dense LU, with and without wrap corners") {
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    for (bool cyclic : {false, true}) {
      const Index n = 37;
      BandedMatrix A = diagonally_dominant(random_banded(n, 2, 4, cyclic, seed));
      Mat D = A.to_dense();
      Vec b = deterministic_vector(n, seed + 100);

      BandedLU lu(A);
      Vec x = lu.solve(b, false);
      Vec xd = Eigen::PartialPivLU<Mat>(D).solve(b);
      CHECK((x - xd).norm() <= 1e-11 * xd.norm());

      Vec y = lu.solve(b, true);
      Vec yd = Eigen::PartialPivLU<Mat>(Mat(D.adjoint())).solve(b);
      CHECK((y - yd).norm() <= 1e-11 * yd.norm());
    }
  }
}

TEST_CASE("singular-to-tolerance factorization raises a typed error with the pivot") {
  BandedMatrix Z(10, 1, 1);  // all zeros
  bool threw = false;
  try {
    BandedLU lu(Z);
  } catch (const SingularFactorizationError& e) {
    threw = true;
    CHECK(e.pivot_magnitude == doctest::Approx(0.0));
  }
  CHECK(threw);
}

TEST_CASE("typed errors: dimension and space mismatches") {
  LatticeWindow w(5);
  auto id = make_identity(Space::H, w.dim());
  Vec wrong = Vec::Zero(w.dim() + 2);
  CHECK_THROWS_AS(id.apply(wrong), DimensionMismatchError);

  DirectSumState pair(w);
  CHECK_THROWS_AS(apply(id, pair), SpaceMismatchError);
}

TEST_CASE("norm bookkeeping on states") {
  LatticeWindow w(4);
  SpinorState a(w), b(w);
  a.at(0, 0) = 3.0;
  b.at(1, 1) = 4.0;
  DirectSumState p(a, b);
  CHECK(p.norm() == doctest::Approx(5.0));
}
