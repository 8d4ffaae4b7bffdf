#ifndef UNISCATTER_RESOLVENT_HPP
#define UNISCATTER_RESOLVENT_HPP

#include <optional>

#include "uniscatter/operators.hpp"

namespace uniscatter {

// Inner product linear in the FIRST argument (the convention used throughout
// the form evaluations).  Eigen's dot is antilinear in the first argument.
inline cplx inner(const Vec& a, const Vec& b) { return b.dot(a); }

// Point z = r e^{i theta} with r = (1 - eps)^{+1} (sign > 0, inside the
// circle) or (1 - eps)^{-1} (sign < 0, outside), plus the Abel weight
// g_pm(eps) = (1/2pi)(1 - (1-eps)^{pm 2}).
struct RadialPoint {
  double eps = 0.1;
  int sign = +1;
  double theta = 0.0;

  RadialPoint() = default;
  RadialPoint(double e, int s, double t) : eps(e), sign(s >= 0 ? +1 : -1), theta(wrap_angle(t)) {
    if (!(eps > 0.0 && eps < 1.0))
      throw Error(ErrorCode::precondition, "RadialPoint eps must lie in (0,1)");
  }

  double r() const { return sign > 0 ? 1.0 - eps : 1.0 / (1.0 - eps); }
  cplx z() const { return r() * cplx(std::cos(theta), std::sin(theta)); }
  double g() const {
    const double q = 1.0 - eps;
    return sign > 0 ? (1.0 - q * q) / two_pi : (1.0 - 1.0 / (q * q)) / two_pi;
  }
};

// Shared factorization for all resolvent evaluations at one z.  For |z| > 1
// the solves are re-expressed through (1 - U/z), which keeps the factored
// matrix of the form 1 - w*(unitary) with |w| < 1.
class ResolventFactorization {
 public:
  ResolventFactorization(const WindowedOperator& U, cplx z, double rel_pivot_tol = 1e-14);

  Vec R(const Vec& v) const;       // R(z) v = (1 - z U^*)^{-1} v
  Vec R_adj(const Vec& v) const;   // R(z)^* v
  Vec delta(const Vec& v) const;   // (1/2pi)(1 - r^2) R R^* v

  double residual_R(const Vec& x, const Vec& v) const;      // ||(1-zU*)x - v||/||v||
  double residual_R_adj(const Vec& x, const Vec& v) const;  // ||(1-conj(z)U)x - v||/||v||

  cplx z() const { return z_; }
  const WindowedOperator& op() const { return U_; }

 private:
  WindowedOperator U_;
  cplx z_;
  bool inside_;
  OperatorFactorization fact_;
};

struct ResolventResult {
  Vec x;
  double residual = 0.0;
};

// R(z) v or R(z)^* v with the solve residual of the defining equation.
ResolventResult resolvent_apply(const WindowedOperator& U, const RadialPoint& pt, const Vec& v,
                                bool adjoint = false);

// delta(r, theta) v realized as (1/2pi)(1 - r^2) R R^* v.
Vec delta_apply(const WindowedOperator& U, const RadialPoint& pt, const Vec& v);

// Periodic-trapezoid quadrature of <delta(r, theta) v, v> over theta.
// The kernel integrates to sgn(1 - r); the orientation is folded in so the
// return value compares directly against ||v||^2 on both sides of the circle.
double poisson_mass(const WindowedOperator& U, double r, const Vec& v, Index n_theta);

// Extrapolated lim_{eps->0} <delta((1-eps)^{sign}, theta) phi, psi>.
ExtrapolatedValue boundary_density(const WindowedOperator& U, double theta, const Vec& phi,
                                   const Vec& psi, int sign, const EpsSchedule& sched);

struct CayleyResult {
  Mat h0;                    // dense self-adjoint matrix
  double relation_residual;  // max over test points of the resolvent-relation defect
  double phi;                // rotation phase actually used
};

// H0 = i (1 + e^{i phi} U)(1 - e^{i phi} U)^{-1}, with phi chosen away from
// the spectrum when not supplied, and the resolvent relation checked at 8
// deterministic test points.
CayleyResult cayley(const WindowedOperator& U, std::optional<double> phi_phase = std::nullopt);

// Same transform without the relation check (used by bulk eigensolves).
CayleyResult cayley_unchecked(const WindowedOperator& U);

// Smoothed spectral-arc filter sum_{|n|<=M} c_n U^n where c_n are the Fourier
// coefficients of the arc indicator times a Gaussian taper.
WindowedOperator spectral_filter(const WindowedOperator& U, double theta1, double theta2, Index m,
                                 double taper_width);

struct SmoothDiagnostic {
  double sup_norm = 0.0;
  std::vector<double> eps;
  std::vector<double> theta;
  Eigen::MatrixXd norms;  // eps x theta table of ||T delta(1-eps,theta) T^*||
};

// sup over the (eps, theta) grid of ||T delta(1-eps, theta) T^*||: a flat
// trend in eps certifies weak smoothness numerically.
SmoothDiagnostic smooth_diagnostic(const WindowedOperator& U, const WindowedOperator& T,
                                   const EpsSchedule& sched, const std::vector<double>& theta_grid);

// 1 - w U (or 1 - w U^*), preserving the structure class of U.
WindowedOperator one_minus_w_u(const WindowedOperator& U, cplx w, bool adjoint_u);

}  // namespace uniscatter

#endif
