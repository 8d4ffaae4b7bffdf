#ifndef UNISCATTER_WAVE_OPS_HPP
#define UNISCATTER_WAVE_OPS_HPP

#include "uniscatter/free_spectral.hpp"
#include "uniscatter/resolvent.hpp"
#include "uniscatter/walk.hpp"

namespace uniscatter {

enum class WaveMethod { strong, stationary };

struct WaveSchedule {
  double eps = 1e-2;
  Index n_theta = 512;
  Index horizon = 500;

  // the coupling eps ~ 1/(2N) used when deriving one parameter from the other
  static WaveSchedule from_eps(double eps);
};

struct WaveResult {
  int sign = +1;
  WaveMethod method = WaveMethod::strong;
  Vec result;
  double eps = 0.0;
  Index n_theta = 0;
  Index horizon = 0;
  std::vector<double> convergence_trace;  // checkpoint deltas (time methods)
  bool converged = false;
  double leakage_bound = 0.0;
  double max_solve_residual = 0.0;  // stationary methods
};

// W_pm^{(N)} psi = U^{pm N} J U0^{mp N} psi with a Cauchy trace every 50 steps.
WaveResult strong_wave_apply(const WalkModel& model, int sign, const DirectSumState& psi0, Index N,
                             double cauchy_tol = 1e-3);

// w_pm(eps) psi = pm g_pm(eps) * (2pi/N_theta) sum_j R(z_j)^* J R0(z_j) psi,
// z_j = (1-eps)^{pm 1} e^{i theta_j} on the periodic-trapezoid grid.
WaveResult stationary_wave_apply(const WalkModel& model, int sign, const DirectSumState& psi0,
                                 double eps, Index n_theta, int threads = 1);

// Same machinery for the auxiliary triple (U0, U0, J*J).
WaveResult jj_wave_apply(const WalkModel& model, int sign, const DirectSumState& psi0,
                         WaveMethod method, const WaveSchedule& sched, int threads = 1);

struct ProductCheck {
  cplx lhs{0, 0};  // <w_pm psi, w_pm phi>
  cplx rhs{0, 0};  // <w_pm(U0,U0,J*J) psi, phi>
  double residual = 0.0;
};

ProductCheck product_identity_check(const WalkModel& model, int sign, const DirectSumState& psi0,
                                    const DirectSumState& phi0, const WaveSchedule& sched,
                                    int threads = 1);

// Effective support radius: smallest R with mass outside sites |x| <= R below
// tail_tol * ||psi||^2 (both slots for H0 states).
Index effective_support_radius(const LatticeWindow& w, const Vec& psi_flat, double tail_tol = 1e-10);

}  // namespace uniscatter

#endif
