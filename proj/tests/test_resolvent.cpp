#include "doctest.h"

#include <cmath>

#include "uniscatter/resolvent.hpp"

using namespace uniscatter;

namespace {

WindowedOperator diag_unitary(const std::vector<double>& phases) {
  Vec d(static_cast<Index>(phases.size()));
  for (size_t k = 0; k < phases.size(); ++k) d[k] = cplx(std::cos(phases[k]), std::sin(phases[k]));
  WindowedOperator op = make_diag(Space::Generic, d);
  return WindowedOperator(op.storage(), Space::Generic, Space::Generic, d.size(), d.size(), true);
}

Mat dense_resolvent(const Mat& U, cplx z) {
  const Index n = U.rows();
  return Eigen::PartialPivLU<Mat>(Mat::Identity(n, n) - z * U.adjoint()).solve(Mat::Identity(n, n));
}

Mat dense_delta(const Mat& U, double r, double theta) {
  Mat R = dense_resolvent(U, r * cplx(std::cos(theta), std::sin(theta)));
  return ((1.0 - r * r) / two_pi) * R * R.adjoint();
}

}  // namespace

TEST_CASE("resolvent at z = 0 is the identity") {
  auto U = make_dense(Space::Generic, random_unitary(10, 5), true);
  Vec v = deterministic_vector(10, 6);
  ResolventFactorization f(U, 0.0);
  CHECK((f.R(v) - v).norm() < 1e-14 * v.norm());
}

TEST_CASE("resolvent of the 1x1 unit at z = 1/2 doubles the vector") {
  Mat one(1, 1);
  one(0, 0) = 1.0;
  auto U = make_dense(Space::Generic, one, true);
  Vec v(1);
  v[0] = cplx(0.3, -0.4);
  auto res = resolvent_apply(U, RadialPoint(0.5, +1, 0.0), v);
  CHECK(std::abs(res.x[0] - 2.0 * v[0]) < 1e-14);
  CHECK(res.residual < 1e-14);
}

TEST_CASE("inside/outside relation R(1/conj(z))^* = -z U^* R(z)") {
  auto U = make_dense(Space::Generic, random_unitary(24, 7), true);
  Vec v = deterministic_vector(24, 8);
  const cplx z = 0.7 * cplx(std::cos(1.3), std::sin(1.3));

  ResolventFactorization fin(U, z);
  ResolventFactorization fout(U, 1.0 / std::conj(z));
  Vec lhs = fout.R_adj(v);
  Vec rhs = -z * U.apply(fin.R(v), true);
  CHECK((lhs - rhs).norm() <= 1e-10 * v.norm());
}

TEST_CASE("first resolvent equation holds at random points") {
  auto U = make_dense(Space::Generic, random_unitary(20, 9), true);
  Vec v = deterministic_vector(20, 10);
  const cplx z1 = 0.6 * cplx(std::cos(0.4), std::sin(0.4));
  const cplx z2 = 1.7 * cplx(std::cos(2.9), std::sin(2.9));
  ResolventFactorization f1(U, z1), f2(U, z2);
  Vec lhs = f1.R(v) - f2.R(v);
  Vec rhs = (z1 - z2) * f1.R(U.apply(f2.R(v), true));
  CHECK((lhs - rhs).norm() <= 1e-10 * v.norm());
}

TEST_CASE("geometric series oracle inside the disc") {
  auto U = make_dense(Space::Generic, random_unitary(16, 11), true);
  Vec v = deterministic_vector(16, 12);
  for (double rr : {0.5, 0.9}) {
    const cplx z = rr * cplx(std::cos(0.8), std::sin(0.8));
    ResolventFactorization f(U, z);
    Vec x = f.R(v);
    Vec acc = v, term = v;
    const int nterms = 60;
    for (int n = 1; n <= nterms; ++n) {
      term = z * U.apply(term, true);
      acc += term;
    }
    const double tail = std::pow(rr, nterms + 1) / (1.0 - rr) * v.norm();
    CHECK((x - acc).norm() <= tail + 1e-12);
  }
}

TEST_CASE("delta operator: norm formula, symmetry, positivity") {
  std::vector<double> phases = {0.3, 1.1, 2.0, 2.9, 4.2, 5.3};
  auto U = diag_unitary(phases);
  Mat Ud = to_dense(U);

  SUBCASE("norm attains (1+r)/(2pi|1-r|) when e^{i theta} is an eigenphase") {
    const double r = 0.5, theta = phases[2];
    Mat D = dense_delta(Ud, r, theta);
    Eigen::JacobiSVD<Mat> svd(D);
    const double envelope = (1.0 + r) / (two_pi * std::fabs(1.0 - r));
    CHECK(envelope == doctest::Approx(3.0 / two_pi));
    CHECK(std::fabs(svd.singularValues()(0) - envelope) < 1e-10);

    auto Dop = make_dense(Space::Generic, D);
    CHECK(std::fabs(op_norm(Dop) - envelope) <= 1e-9);
  }

  SUBCASE("norm bounded by the envelope at random (r, theta)") {
    Vec rnd = deterministic_vector(40, 77);
    for (int t = 0; t < 20; ++t) {
      double r = 0.1 + 0.8 * std::fabs(std::tanh(std::real(rnd[2 * t])));
      if (t % 3 == 0) r = 1.0 / r;
      double theta = wrap_angle(2.5 * std::imag(rnd[2 * t + 1]));
      Mat D = dense_delta(Ud, r, theta);
      Eigen::JacobiSVD<Mat> svd(D);
      const double envelope = (1.0 + r) / (two_pi * std::fabs(1.0 - r));
      CHECK(svd.singularValues()(0) <= envelope * (1.0 + 1e-12));
    }
  }

  SUBCASE("delta(1/r) = -delta(r) on vectors") {
    Vec v = deterministic_vector(6, 13);
    const double theta = 1.7;
    Vec a = delta_apply(U, RadialPoint(0.25, +1, theta), v);
    Vec b = delta_apply(U, RadialPoint(0.25, -1, theta), v);
    CHECK((a + b).norm() <= 1e-10 * a.norm());
  }

  SUBCASE("positivity of the Gram form inside the disc") {
    Vec v = deterministic_vector(6, 14);
    Vec dv = delta_apply(U, RadialPoint(0.3, +1, 0.9), v);
    cplx q = inner(dv, v);
    CHECK(std::real(q) >= 0.0);
    CHECK(std::fabs(std::imag(q)) <= 1e-12 * std::abs(q));
  }
}

TEST_CASE("poisson mass identity") {
  SUBCASE("1x1 exact") {
    Mat one(1, 1);
    one(0, 0) = cplx(std::cos(0.7), std::sin(0.7));
    auto U = make_dense(Space::Generic, one, true);
    Vec v(1);
    v[0] = cplx(1.2, -0.5);
    double mass = poisson_mass(U, 0.5, v, 1024);
    CHECK(std::fabs(mass - v.squaredNorm()) < 1e-12);
  }
  SUBCASE("random 32x32 inside, near the circle, and outside") {
    auto U = make_dense(Space::Generic, random_unitary(32, 15), true);
    Vec v = deterministic_vector(32, 16);
    for (double r : {0.5, 0.9, 2.0}) {
      double mass = poisson_mass(U, r, v, 4096);
      CHECK(std::fabs(mass - v.squaredNorm()) <= 1e-8 * v.squaredNorm());
    }
  }
}

TEST_CASE("boundary density") {
  std::vector<double> phases = {0.5, 1.4, 2.6, 3.8, 5.1};
  auto U = diag_unitary(phases);
  EpsSchedule sched({0.2, 0.1, 0.05, 0.025}, 1);

  SUBCASE("vectors in distinct spectral subspaces give zero") {
    Vec phi = Vec::Zero(5), psi = Vec::Zero(5);
    phi[0] = 1.0;
    psi[1] = 1.0;
    auto v = boundary_density(U, phases[0], phi, psi, +1, sched);
    CHECK(std::abs(v.value) < 1e-14);
  }

  SUBCASE("minus sign mirrors the plus sign") {
    Vec phi = deterministic_vector(5, 17);
    auto vp = boundary_density(U, phases[1] + 0.3, phi, phi, +1, sched);
    auto vm = boundary_density(U, phases[1] + 0.3, phi, phi, -1, sched);
    CHECK(std::abs(vp.value + vm.value) <= 1e-12 * std::max(1.0, std::abs(vp.value)));
  }
}

TEST_CASE("cayley transform") {
  SUBCASE("1x1 examples") {
    Mat m(1, 1);
    m(0, 0) = -1.0;
    auto r1 = cayley(make_dense(Space::Generic, m, true), 0.0);
    CHECK(std::abs(r1.h0(0, 0)) < 1e-14);

    m(0, 0) = cplx(0.0, 1.0);
    auto r2 = cayley(make_dense(Space::Generic, m, true), 0.0);
    CHECK(std::abs(r2.h0(0, 0) - cplx(-1.0, 0.0)) < 1e-14);
  }
  SUBCASE("16x16 random unitary satisfies the resolvent relation") {
    auto U = make_dense(Space::Generic, random_unitary(16, 19), true);
    auto r = cayley(U);
    CHECK((r.h0 - Mat(r.h0.adjoint())).norm() < 1e-12 * r.h0.norm());
    CHECK(r.relation_residual <= 1e-8);
  }
}

TEST_CASE("spectral filter") {
  auto U = make_dense(Space::Generic, random_unitary(48, 21), true);
  const Index n = 48;

  SUBCASE("full circle gives the identity") {
    auto F = spectral_filter(U, 0.0, two_pi, 48, 0.05);
    CHECK((to_dense(F) - Mat::Identity(n, n)).norm() < 1e-12);
  }

  SUBCASE("complementary arcs sum to the identity") {
    auto F1 = spectral_filter(U, 0.8, 2.4, 48, 0.05);
    auto F2 = spectral_filter(U, 2.4, 0.8 + two_pi, 48, 0.05);
    CHECK((to_dense(F1) + to_dense(F2) - Mat::Identity(n, n)).norm() < 1e-12);
  }

  SUBCASE("self-adjoint within 1e-12 and near-idempotent away from the edges") {
    const double sigma = 0.05;
    const Index M = 96;
    auto F = spectral_filter(U, 0.8, 2.4, M, sigma);
    Mat Fd = to_dense(F);
    CHECK((Fd - Mat(Fd.adjoint())).norm() <= 1e-12 * std::max(1.0, Fd.norm()));

    // Fourier tail bound of the tapered coefficients
    double leak = 0.0;
    for (Index p = M + 1; p < 20 * M; ++p) {
      double term = std::exp(-0.5 * double(p) * double(p) * sigma * sigma) / (pi * double(p));
      leak += 2.0 * term;
      if (term < 1e-18) break;
    }
    leak = std::max(leak, 1e-13);

    Eigen::ComplexEigenSolver<Mat> es(to_dense(U));
    for (Index k = 0; k < n; ++k) {
      double th = wrap_angle(std::arg(es.eigenvalues()[k]));
      if (angle_dist(th, 0.8) < 5 * sigma || angle_dist(th, 2.4) < 5 * sigma) continue;
      Vec w = es.eigenvectors().col(k);
      double defect = (Fd * (Fd * w) - Fd * w).norm();
      CHECK(defect <= 3.0 * leak + 1e-10);
    }
  }
}

TEST_CASE("smoothness diagnostic") {
  std::vector<double> phases = {0.4, 1.5, 2.7, 3.9, 5.0, 5.9};
  auto U = diag_unitary(phases);

  SUBCASE("T = 0 gives 0") {
    auto zero = make_scaled_identity(Space::Generic, 6, 0.0);
    auto d = smooth_diagnostic(U, zero, EpsSchedule({0.2, 0.1}, 0), {1.0, 2.0});
    CHECK(d.sup_norm == doctest::Approx(0.0));
  }

  SUBCASE("T = identity tracks the delta-norm envelope at a spectral angle") {
    auto id = make_identity(Space::Generic, 6);
    EpsSchedule sched({0.3, 0.2, 0.1}, 0);
    auto d = smooth_diagnostic(U, id, sched, {phases[2]});
    for (size_t i = 0; i < sched.eps.size(); ++i) {
      const double r = 1.0 - sched.eps[i];
      const double envelope = (1.0 + r) / (two_pi * (1.0 - r));
      CHECK(d.norms(static_cast<Index>(i), 0) ==
            doctest::Approx(envelope).epsilon(0.05));
    }
  }
}
