#ifndef UNISCATTER_SCATTERING_HPP
#define UNISCATTER_SCATTERING_HPP

#include "uniscatter/wave_ops.hpp"

namespace uniscatter {

enum class SMatrixSource { formula_plus, formula_minus, packet_oracle };

struct SMatrixSample {
  double theta = 0.0;
  Mat s;  // d x d, entry (b, a) = <channel b out | S | channel a in>
  SMatrixSource source = SMatrixSource::formula_plus;
  Fiber fiber;  // channel list; fixes the gauge record of the entries
  std::vector<double> eps_ladder;
  std::vector<double> eps_deltas;  // B-limit Cauchy deltas
  std::vector<double> sigma_ladder;
  double u_asymmetry = 0.0;      // Hermitian defect of the measured u_pm
  double dropped_weight = 0.0;   // aux-window compression bound
};

// squared moduli sorted into transmission (opposite sides) / reflection
struct ChannelCoefficients {
  Fiber fiber;
  Eigen::MatrixXd probs;  // |S_ba|^2
  Eigen::MatrixXd transmission;  // probs masked to side(b) != side(a)
  Eigen::MatrixXd reflection;    // probs masked to side(b) == side(a)
  RVec col_sums;  // outgoing flux per incoming channel
  RVec row_sums;
};

// knobs shared by the scattering evaluations
struct ScatteringOptions {
  EpsSchedule eps = EpsSchedule::standard();
  std::vector<double> sigma = {0.1, 0.05};  // packet width ladder
  Index jj_horizon = 0;                     // 0: derived from sigma
  Index packet_horizon = 400;
  double exclusion_radius = 0.05;
  int threads = 1;
};

// finite-horizon scattering operator S^(N) psi = U0^N J^* U^{-2N} J U0^N psi
Vec scattering_horizon_apply(const WindowedOperator& U, const WindowedOperator& U0,
                             const WindowedOperator& J, const LatticeWindow& w, const Vec& psi,
                             Index n);
Vec scattering_apply(const WalkModel& model, const DirectSumState& psi0, Index n);

// T_+(z) = U0^* J^* V - V^* R(z) V and T_-(z) = (T_+(1/conj(z)))^*
Vec t_apply(const WalkModel& model, cplx z, int sign, const Vec& psi0);

struct BLimitResult {
  Mat b;  // extrapolated boundary value on the effective aux window
  std::vector<double> eps_ladder;
  std::vector<double> cauchy_deltas;
};

// B_pm(theta) = lim B((1-eps)^{pm 1} e^{i theta}), B(z) = G R(z) G^*,
// compressed to the factorization's effective aux window.
BLimitResult b_limit(const WalkModel& model, double theta, int sign, const EpsSchedule& sched);

enum class Z0Operand { G0, GJU0 };

// Z0(theta, T0): columns F0(T0^* zeta_j)(theta) over the effective aux basis.
Mat z0_matrix(const WalkModel& model, double theta, Z0Operand which,
              double exclusion_radius = 0.05);

// aux-window Gram matrix of T0 delta0(1-eps,theta) T0^*, extrapolated; the
// cross-check partner of Z0^* Z0.
Mat delta_form_matrix(const WalkModel& model, double theta, Z0Operand which,
                      const EpsSchedule& sched);

struct UFiberResult {
  Mat u;  // d x d, Hermitian part of the Galerkin-corrected packet matrix
  double asymmetry = 0.0;
  std::vector<double> sigma_ladder;
};

// u_pm(theta) measured by packet fibering of the jj wave limit.
UFiberResult u_fiber(const WalkModel& model, double theta, int sign,
                     const ScatteringOptions& opts);

SMatrixSample smatrix_formula(const WalkModel& model, double theta, int sign,
                              const ScatteringOptions& opts);

SMatrixSample smatrix_packet(const WalkModel& model, double theta, const ScatteringOptions& opts);

// one-space surrogate oracle (U := U0, J := 1 on H0): S is exactly the identity
SMatrixSample smatrix_packet_identity_surrogate(const WalkModel& model, double theta,
                                                const ScatteringOptions& opts);

struct PmBisResult {
  cplx lhs{0, 0};
  cplx rhs{0, 0};
  double residual = 0.0;           // |lhs - rhs| / max(|lhs|, |rhs|, floor)
  std::vector<cplx> rhs_ladder;    // finite-eps values
  bool monotone_trend = true;
};

// <(S(theta) - u_pm)(F0 psi)(theta), (F0 phi)(theta)> against the
// extrapolated form +/- 2pi <T_pm delta0 psi, delta0 phi>.
PmBisResult pm_bis_check(const WalkModel& model, double theta, const DirectSumState& psi0,
                         const DirectSumState& phi0, int sign, const ScatteringOptions& opts,
                         const SMatrixSample* formula_sample = nullptr,
                         const UFiberResult* u_sample = nullptr);

ChannelCoefficients coefficients(const SMatrixSample& sample);

// entrywise-modulus distance between samples in the same fiber (the
// gauge-invariant comparison metric)
double modulus_distance(const SMatrixSample& a, const SMatrixSample& b);

}  // namespace uniscatter

#endif
