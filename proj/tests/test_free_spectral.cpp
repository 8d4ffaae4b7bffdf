#include "doctest.h"

#include <cmath>

#include "test_helpers.hpp"
#include "uniscatter/free_spectral.hpp"
#include "uniscatter/resolvent.hpp"

using namespace uniscatter;
using namespace uniscatter::testing;

namespace {
const double kInvSqrt2 = 1.0 / std::sqrt(2.0);
double wrap_pm_test(double t) {
  t = std::fmod(t, two_pi);
  if (t <= -pi) t += two_pi;
  if (t > pi) t -= two_pi;
  return t;
}
}

TEST_CASE("symbol: identity coin and the trace/determinant identities") {
  Mat2 s0 = symbol(CoinParams::identity(), 0.0);
  CHECK((s0 - Mat2::Identity()).norm() < 1e-15);

  const double k = 0.73;
  Mat2 s = symbol(CoinParams::identity(), k);
  Eigen::ComplexEigenSolver<Mat2> es(s);
  std::vector<double> phases = {wrap_angle(std::arg(es.eigenvalues()[0])),
                                wrap_angle(std::arg(es.eigenvalues()[1]))};
  std::sort(phases.begin(), phases.end());
  CHECK(phases[0] == doctest::Approx(k).epsilon(1e-12));
  CHECK(phases[1] == doctest::Approx(two_pi - k).epsilon(1e-12));

  Vec rnd = deterministic_vector(12, 60);
  for (int t = 0; t < 4; ++t) {
    double a = 0.2 + 0.75 * std::fabs(std::tanh(std::real(rnd[3 * t])));
    CoinParams p{a, std::sqrt(1 - a * a), std::imag(rnd[3 * t]), std::real(rnd[3 * t + 1]),
                 std::imag(rnd[3 * t + 1])};
    double kk = wrap_angle(std::real(rnd[3 * t + 2]));
    Mat2 u = symbol(p, kk);
    CHECK((u * u.adjoint() - Mat2::Identity()).norm() <= 1e-14);
    cplx tr_want = 2.0 * p.a * cplx(std::cos(p.delta / 2), std::sin(p.delta / 2)) *
                   std::cos(kk + p.alpha - p.delta / 2);
    CHECK(std::abs(u.trace() - tr_want) <= 1e-13);
    cplx det = u(0, 0) * u(1, 1) - u(0, 1) * u(1, 0);
    CHECK(std::abs(det - cplx(std::cos(p.delta), std::sin(p.delta))) <= 1e-13);
  }
}

TEST_CASE("band functions") {
  SUBCASE("identity coin: straight lines with unit velocities") {
    auto bands = band_functions(CoinParams::identity(), 0, 256);
    for (Index j = 0; j < 256; j += 17) {
      const double k = bands[0].k_grid[j];
      CHECK(bands[0].lambda(k) == doctest::Approx(wrap_angle(k)).epsilon(1e-12));
      CHECK(bands[0].v_grid[j] == doctest::Approx(1.0).epsilon(1e-10));
      CHECK(bands[1].lambda(k) == doctest::Approx(wrap_angle(-k)).epsilon(1e-12));
      CHECK(bands[1].v_grid[j] == doctest::Approx(-1.0).epsilon(1e-10));
    }
  }

  SUBCASE("Hadamard: arcs where |sin theta| <= 1/sqrt(2)") {
    auto bands = band_functions(CoinParams::hadamard(), 0, 512);
    for (const auto& b : bands) {
      CHECK(b.implicit_residual <= 1e-10);
      for (Index j = 0; j < 512; j += 7) {
        const double lam = wrap_angle(b.lambda_grid[j]);
        CHECK(std::fabs(std::sin(lam)) <= kInvSqrt2 + 1e-12);
      }
    }
  }

  SUBCASE("spectral-differentiation velocities match the closed form and finite differences") {
    CoinParams p{0.8, 0.6, 0.35, -0.6, 1.1};
    auto bands = band_functions(p, 1, 512);
    for (const auto& b : bands) {
      CHECK(b.implicit_residual <= 1e-10);
      for (Index j = 0; j < 512; j += 13) {
        const double k = b.k_grid[j];
        CHECK(std::fabs(b.v_grid[j] - b.velocity(k)) <= 1e-10);
        const double h = 1e-5;
        double num = wrap_pm_test(b.lambda(k + h) - b.lambda(k - h)) / (2 * h);
        CHECK(std::fabs(b.velocity(k) - num) <= 1e-7);
      }
    }
  }

  SUBCASE("velocity vanishes exactly at the band edges cos(lambda - delta/2) = +/- a") {
    CoinParams p{0.6, 0.8, 0.2, 0.0, 0.7};
    auto bands = band_functions(p, 0, 256);
    // edges sit at phi = 0 and pi, i.e. k = delta/2 - alpha and + pi
    for (double k : {p.delta / 2 - p.alpha, p.delta / 2 - p.alpha + pi}) {
      CHECK(std::fabs(bands[0].velocity(k)) <= 1e-8);
      const double lam = bands[0].lambda(k);
      CHECK(std::fabs(std::fabs(std::cos(lam - p.delta / 2)) - p.a) <= 1e-12);
    }
  }
}

TEST_CASE("thresholds") {
  LatticeWindow w(16);
  SUBCASE("identity coins: none") {
    WalkModel m = build_walk(uniform_field(CoinParams::identity()), w);
    CHECK(thresholds(m).empty());
  }
  SUBCASE("Hadamard coins: pi/4, 3pi/4, 5pi/4, 7pi/4") {
    WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);
    auto t = thresholds(m);
    REQUIRE(t.size() == 4);
    CHECK(t[0] == doctest::Approx(pi / 4).epsilon(1e-8));
    CHECK(t[1] == doctest::Approx(3 * pi / 4).epsilon(1e-8));
    CHECK(t[2] == doctest::Approx(5 * pi / 4).epsilon(1e-8));
    CHECK(t[3] == doctest::Approx(7 * pi / 4).epsilon(1e-8));
  }
  SUBCASE("mixed identity/Hadamard: only the Hadamard edges") {
    CoinField f = uniform_field(CoinParams::identity());
    f.right = CoinParams::hadamard();
    WalkModel m = build_walk(f, w);
    auto t = thresholds(m);
    CHECK(t.size() == 4);
  }
}

TEST_CASE("core spectrum multiplicities") {
  LatticeWindow w(16);
  SUBCASE("identity coins: full circle, four channels") {
    WalkModel m = build_walk(uniform_field(CoinParams::identity()), w);
    auto sa = core_spectrum(m);
    REQUIRE(sa.arcs.size() == 1);
    CHECK(sa.arcs[0].mult == 4);
    CHECK(sa.multiplicity(2.2) == 4);
  }
  SUBCASE("Hadamard coins: four on the arcs, zero in the gaps") {
    WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);
    auto sa = core_spectrum(m);
    CHECK(sa.multiplicity(0.0) == 4);     // |sin 0| = 0 < 1/sqrt2
    CHECK(sa.multiplicity(pi) == 4);
    CHECK(sa.multiplicity(pi / 2) == 0);  // gap
    CHECK(sa.multiplicity(3 * pi / 2) == 0);
  }
  SUBCASE("mixed: two in the Hadamard gaps, four on the overlap") {
    CoinField f = uniform_field(CoinParams::identity());
    f.right = CoinParams::hadamard();
    WalkModel m = build_walk(f, w);
    auto sa = core_spectrum(m);
    CHECK(sa.multiplicity(pi / 2) == 2);
    CHECK(sa.multiplicity(0.0) == 4);
  }
}

TEST_CASE("fibers") {
  LatticeWindow w(16);
  SUBCASE("identity coins at theta = pi/2") {
    WalkModel m = build_walk(uniform_field(CoinParams::identity()), w);
    Fiber f = fiber_at(m, pi / 2);
    REQUIRE(f.dim() == 4);
    for (int side = 0; side < 2; ++side) {
      std::vector<double> ks;
      for (const auto& c : f.channels)
        if (c.side == side) {
          ks.push_back(c.k);
          CHECK(std::fabs(std::fabs(c.v) - 1.0) <= 1e-12);
        }
      std::sort(ks.begin(), ks.end());
      REQUIRE(ks.size() == 2);
      CHECK(ks[0] == doctest::Approx(pi / 2).epsilon(1e-12));
      CHECK(ks[1] == doctest::Approx(3 * pi / 2).epsilon(1e-12));
    }
  }
  SUBCASE("Hadamard at theta = 0: momenta 0 and pi") {
    WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);
    Fiber f = fiber_at(m, 0.0);
    REQUIRE(f.dim() == 4);
    for (const auto& c : f.channels) {
      CHECK(std::fabs(c.v) == doctest::Approx(kInvSqrt2).epsilon(1e-10));
      const bool near0 = std::fabs(c.k) < 1e-10 || std::fabs(c.k - two_pi) < 1e-10;
      const bool nearpi = std::fabs(c.k - pi) < 1e-10;
      CHECK((near0 || nearpi));
      // channel satisfies the eigenvalue equation at theta
      Mat2 u = symbol(c.side == 0 ? m.field.left : m.field.right, c.k);
      CHECK((u * c.u - cplx(std::cos(f.theta), std::sin(f.theta)) * c.u).norm() <= 1e-10);
    }
  }
  SUBCASE("threshold proximity raises a typed error") {
    WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);
    CHECK_THROWS_AS(fiber_at(m, pi / 4 + 0.01), ThresholdProximityError);
  }
  SUBCASE("channel count matches the multiplicity function between thresholds") {
    CoinParams p{0.8, 0.6, 0.35, -0.6, 1.1};
    CoinField f = uniform_field(CoinParams::hadamard());
    f.right = p;
    WalkModel m = build_walk(f, w);
    auto sa = core_spectrum(m);
    for (double theta = 0.02; theta < two_pi; theta += 0.21) {
      bool near = false;
      for (double t : thresholds(m))
        if (angle_dist(theta, t) < 0.06) near = true;
      if (near) continue;
      if (sa.multiplicity(theta) == 0) continue;
      CHECK(fiber_at(m, theta).dim() == sa.multiplicity(theta));
    }
  }
}

TEST_CASE("F0: Parseval, diagonalization, linearity") {
  LatticeWindow w(256);
  WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);

  Fiber f0c = fiber_at(m, 0.0);
  DirectSumState pkt = wave_packet(m, f0c.channels[1], 0.0, 0.05);

  SUBCASE("Parseval within 1e-6") {
    CHECK(std::fabs(parseval_mass(m, pkt, 2048) - 1.0) <= 1e-6);
  }

  SUBCASE("diagonalization: F0 U0 = e^{i theta} F0 within 1e-8") {
    DirectSumState psi(w, interior_state_doubled(w, 100, 63));
    DirectSumState u0psi = apply(m.U0, psi);
    for (double theta : {0.0, 0.1, 3.0}) {
      FiberVector a = f0_apply(m, u0psi, theta);
      FiberVector b = f0_apply(m, psi, theta);
      const cplx ph(std::cos(theta), std::sin(theta));
      CHECK((a.coeff - ph * b.coeff).norm() <= 1e-8 * b.coeff.norm());
    }
  }

  SUBCASE("linearity") {
    Vec x = interior_state_doubled(w, 40, 61);
    Vec y = interior_state_doubled(w, 40, 62);
    Fiber fib = fiber_at(m, 0.15);
    const cplx ca(0.3, -1.1), cb(-0.7, 0.2);
    FiberVector fx = f0_apply(m, x, fib);
    FiberVector fy = f0_apply(m, y, fib);
    FiberVector fxy = f0_apply(m, Vec(ca * x + cb * y), fib);
    CHECK((fxy.coeff - ca * fx.coeff - cb * fy.coeff).lpNorm<Eigen::Infinity>() <= 1e-13);
  }

  SUBCASE("identity-coin model Parseval") {
    WalkModel mi = build_walk(uniform_field(CoinParams::identity()), w);
    Fiber fi = fiber_at(mi, pi / 2);
    DirectSumState pk = wave_packet(mi, fi.channels[0], pi / 2, 0.06);
    CHECK(std::fabs(parseval_mass(mi, pk, 2048) - 1.0) <= 1e-6);
  }
}

TEST_CASE("boundary density matches the fiber mass of the free walk") {
  LatticeWindow w(512);
  WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);
  const double theta = 0.0;
  Fiber fib = fiber_at(m, theta);
  DirectSumState pkt = wave_packet(m, fib.channels[2], theta, 0.2);

  FiberVector fv = f0_apply(m, pkt, theta);
  const double fiber_mass = fv.coeff.squaredNorm();

  EpsSchedule sched({0.06, 0.03, 0.015}, 2);
  auto bd = boundary_density(m.U0, theta, pkt.values, pkt.values, +1, sched);
  CHECK(std::fabs(std::real(bd.value) - fiber_mass) <= 5e-2 * fiber_mass);

  auto bdm = boundary_density(m.U0, theta, pkt.values, pkt.values, -1, sched);
  CHECK(std::abs(bdm.value + bd.value) <= 1e-10 * std::abs(bd.value));
}

TEST_CASE("wave packets") {
  LatticeWindow w(256);
  WalkModel m = build_walk(uniform_field(CoinParams::hadamard()), w);
  const double theta_star = pi;  // mid-band
  Fiber fib = fiber_at(m, theta_star);
  const double sigma = 0.06;

  SUBCASE("norm, concentration, channel purity") {
    for (Index c = 0; c < fib.dim(); ++c) {
      DirectSumState pkt = wave_packet(m, fib.channels[c], theta_star, sigma);
      CHECK(std::fabs(pkt.norm() - 1.0) <= 1e-10);

      FiberVector fv = f0_apply(m, pkt, theta_star);
      double peak = std::abs(fv.coeff[c]);
      for (Index o = 0; o < fib.dim(); ++o) {
        if (o == c) continue;
        CHECK(std::abs(fv.coeff[o]) <= 1e-3 * peak);
      }

      // mass outside |theta - theta*| > 3 sigma
      const Index n_theta = 1024;
      double outside = 0.0, total = 0.0;
      for (Index j = 0; j < n_theta; ++j) {
        const double th = two_pi * double(j) / double(n_theta);
        bool near_thresh = false;
        for (double t : thresholds(m))
          if (angle_dist(th, t) < 0.02) near_thresh = true;
        if (near_thresh) continue;
        Fiber fj;
        try {
          fj = fiber_at(m, th, 0.0);
        } catch (const Error&) {
          continue;
        }
        if (fj.dim() == 0) continue;
        double mass = f0_apply(m, pkt.values, fj).coeff.squaredNorm() * (two_pi / double(n_theta));
        total += mass;
        if (angle_dist(th, theta_star) > 3.0 * sigma) outside += mass;
      }
      CHECK(outside <= 1e-3 * total);
    }
  }

  SUBCASE("ballistic transport under U0") {
    const Channel& ch = fib.channels[1];
    DirectSumState pkt = wave_packet(m, ch, theta_star, sigma);
    const int n = 50;
    DirectSumState evolved = pkt;
    for (int t = 0; t < n; ++t) evolved = apply(m.U0, evolved);
    // forward evolution U0^n translates the packet by -n v (the band
    // velocity is the incoming, backward-evolution direction)
    const int shift = -static_cast<int>(std::lround(n * ch.v));
    Vec shifted = Vec::Zero(w.dim_doubled());
    const Index nH = w.dim();
    for (Index x = -w.half_width; x <= w.half_width; ++x) {
      Index src = x - shift;
      if (src < -w.half_width || src > w.half_width) continue;
      for (Index comp = 0; comp < 2; ++comp) {
        shifted[w.flat(x, comp)] = pkt.values[w.flat(src, comp)];
        shifted[nH + w.flat(x, comp)] = pkt.values[nH + w.flat(src, comp)];
      }
    }
    const double overlap = std::abs(evolved.values.dot(shifted));
    CHECK(overlap >= 1.0 - 0.1);
  }

  SUBCASE("too small a spread for the window is rejected") {
    LatticeWindow small(32);
    WalkModel ms = build_walk(uniform_field(CoinParams::hadamard()), small);
    Fiber fs = fiber_at(ms, theta_star);
    CHECK_THROWS_AS(wave_packet(ms, fs.channels[0], theta_star, 0.005), Error);
  }
}
