#include "uniscatter/wave_ops.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <functional>
#include <thread>

namespace uniscatter {

WaveSchedule WaveSchedule::from_eps(double eps) {
  WaveSchedule s;
  s.eps = eps;
  s.horizon = static_cast<Index>(std::ceil(0.5 / eps));
  Index nt = 512;
  while (nt < Index(8.0 / eps) && nt < (1 << 20)) nt *= 2;
  s.n_theta = nt;
  return s;
}

Index effective_support_radius(const LatticeWindow& w, const Vec& psi_flat, double tail_tol) {
  const Index nH = w.dim();
  const bool doubled = psi_flat.size() == 2 * nH;
  if (!doubled && psi_flat.size() != nH)
    throw DimensionMismatchError(nH, psi_flat.size());
  const double total = psi_flat.squaredNorm();
  if (total == 0.0) return 0;
  std::vector<double> site_mass(w.half_width + 1, 0.0);
  for (Index x = -w.half_width; x <= w.half_width; ++x) {
    const Index r = std::abs(x);
    double m = std::norm(psi_flat[w.flat(x, 0)]) + std::norm(psi_flat[w.flat(x, 1)]);
    if (doubled) m += std::norm(psi_flat[nH + w.flat(x, 0)]) + std::norm(psi_flat[nH + w.flat(x, 1)]);
    site_mass[r] += m;
  }
  double tail = 0.0;
  for (Index r = w.half_width; r >= 1; --r) {
    tail += site_mass[r];
    if (tail > tail_tol * total) return r;
  }
  return 0;
}

namespace {

// chunked, order-fixed parallel accumulation of sum_j f(j); the chunk count
// is fixed so the reduction order (and the bits) do not depend on the thread
// count
Vec accumulate_nodes(Index n_nodes, Index dim, int threads,
                     const std::function<Vec(Index)>& node_value) {
  constexpr Index kChunks = 16;
  std::vector<Vec> partial(kChunks, Vec::Zero(dim));
  std::atomic<Index> next{0};
  auto work = [&]() {
    while (true) {
      Index c = next.fetch_add(1);
      if (c >= kChunks) break;
      const Index lo = c * n_nodes / kChunks;
      const Index hi = (c + 1) * n_nodes / kChunks;
      for (Index j = lo; j < hi; ++j) partial[c] += node_value(j);
    }
  };
  if (threads <= 1) {
    work();
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < threads; ++t) pool.emplace_back(work);
    for (auto& th : pool) th.join();
  }
  Vec acc = Vec::Zero(dim);
  for (Index c = 0; c < kChunks; ++c) acc += partial[c];
  return acc;
}

// generic time-iteration wave vector for a triple (Ufull, U0, Jop):
// result = Ufull^{sign N} Jop U0^{-sign N} psi with checkpoint deltas
WaveResult strong_wave_generic(const WindowedOperator& Ufull, const WindowedOperator& U0,
                               const WindowedOperator& Jop, const LatticeWindow& w, int sign,
                               const Vec& psi, Index N, double cauchy_tol) {
  const bool back_adjoint = sign > 0;  // U0^{-n} for sign +, U0^{+n} for sign -
  WaveResult out;
  out.sign = sign;
  out.method = WaveMethod::strong;
  out.horizon = N;

  const Index R = effective_support_radius(w, psi);
  if (R + N >= w.half_width) throw NoWrapError(R + N + 1, w.half_width);
  {
    // leakage bound: mass outside the certified support radius
    const double total = psi.squaredNorm();
    double inside = 0.0;
    const Index nH = w.dim();
    for (Index x = -R; x <= R; ++x)
      for (Index comp = 0; comp < 2; ++comp) {
        inside += std::norm(psi[w.flat(x, comp)]);
        if (psi.size() == 2 * nH) inside += std::norm(psi[nH + w.flat(x, comp)]);
      }
    out.leakage_bound = std::max(0.0, total - inside);
  }

  const Index checkpoint = 50;
  Vec x = psi;
  for (Index n = 1; n <= N; ++n) {
    x = U0.apply(x, back_adjoint);
    if (n % checkpoint == 0 || n == N) {
      // delta_n = ||(U^{pm c} J U0^{mp c} - J) x_{n-c}|| evaluated at x_n
      Vec a = Jop.apply(x);
      Vec y = x;
      for (Index t = 0; t < checkpoint; ++t) y = U0.apply(y, back_adjoint);
      Vec b = Jop.apply(y);
      for (Index t = 0; t < checkpoint; ++t) b = Ufull.apply(b, !back_adjoint);
      out.convergence_trace.push_back((b - a).norm());
    }
  }
  Vec result = Jop.apply(x);
  for (Index n = 0; n < N; ++n) result = Ufull.apply(result, back_adjoint ? false : true);
  out.result = std::move(result);
  out.converged = !out.convergence_trace.empty() && out.convergence_trace.back() <= cauchy_tol;
  return out;
}

// generic stationary wave vector for a triple: pm g_pm(eps) * quadrature of
// R_full(z)^* Jop R0(z) psi
WaveResult stationary_wave_generic(const WindowedOperator& Ufull, const WindowedOperator& U0,
                                   const WindowedOperator& Jop, int sign, const Vec& psi,
                                   double eps, Index n_theta, int threads) {
  if (!(eps > 1e-5 && eps < 0.5))
    throw Error(ErrorCode::precondition, "stationary wave eps must lie in (1e-5, 0.5)");
  if (n_theta < 512)
    throw Error(ErrorCode::precondition, "stationary wave needs at least 512 quadrature nodes");

  WaveResult out;
  out.sign = sign;
  out.method = WaveMethod::stationary;
  out.eps = eps;
  out.n_theta = n_theta;

  const double r = sign > 0 ? 1.0 - eps : 1.0 / (1.0 - eps);
  const double g = RadialPoint(eps, sign, 0.0).g();
  const double h = two_pi / double(n_theta);
  std::vector<double> residuals(n_theta, 0.0);

  auto node_value = [&](Index j) -> Vec {
    const double theta = h * double(j);
    const cplx z = r * cplx(std::cos(theta), std::sin(theta));
    ResolventFactorization f0(U0, z);
    ResolventFactorization f(Ufull, z);
    Vec t = f0.R(psi);
    residuals[j] = f0.residual_R(t, psi);
    return f.R_adj(Jop.apply(t));
  };
  Vec acc = accumulate_nodes(n_theta, Jop.dim_codomain(), threads, node_value);
  out.result = (double(sign) * g * h) * acc;
  double worst = 0.0;
  for (double v : residuals) worst = std::max(worst, v);
  out.max_solve_residual = worst;
  return out;
}

}  // namespace

WaveResult strong_wave_apply(const WalkModel& model, int sign, const DirectSumState& psi0, Index N,
                             double cauchy_tol) {
  return strong_wave_generic(model.U, model.U0, model.J, model.window, sign, psi0.values, N,
                             cauchy_tol);
}

WaveResult stationary_wave_apply(const WalkModel& model, int sign, const DirectSumState& psi0,
                                 double eps, Index n_theta, int threads) {
  return stationary_wave_generic(model.U, model.U0, model.J, sign, psi0.values, eps, n_theta,
                                 threads);
}

WaveResult jj_wave_apply(const WalkModel& model, int sign, const DirectSumState& psi0,
                         WaveMethod method, const WaveSchedule& sched, int threads) {
  if (method == WaveMethod::strong) {
    // J*J multiplication is exact per step; the checkpoint trace certifies
    // the weak limit on the evaluated pair
    return strong_wave_generic(model.U0, model.U0, model.JtJ, model.window, sign, psi0.values,
                               sched.horizon, 1e-3);
  }
  return stationary_wave_generic(model.U0, model.U0, model.JtJ, sign, psi0.values, sched.eps,
                                 sched.n_theta, threads);
}

ProductCheck product_identity_check(const WalkModel& model, int sign, const DirectSumState& psi0,
                                    const DirectSumState& phi0, const WaveSchedule& sched,
                                    int threads) {
  ProductCheck out;
  WaveResult wpsi = stationary_wave_apply(model, sign, psi0, sched.eps, sched.n_theta, threads);
  WaveResult wphi = stationary_wave_apply(model, sign, phi0, sched.eps, sched.n_theta, threads);
  WaveResult jj = jj_wave_apply(model, sign, psi0, WaveMethod::strong, sched, threads);
  out.lhs = inner(wpsi.result, wphi.result);
  out.rhs = inner(jj.result, phi0.values);
  out.residual = std::abs(out.lhs - out.rhs);
  return out;
}

}  // namespace uniscatter
