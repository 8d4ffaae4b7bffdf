#ifndef UNISCATTER_FREE_SPECTRAL_HPP
#define UNISCATTER_FREE_SPECTRAL_HPP

#include <array>

#include "uniscatter/walk.hpp"

namespace uniscatter {

// Quasi-momentum symbol of U_star = S C_star under psi_hat(k) = sum_x e^{-ikx} psi(x):
// U_hat(k) = diag(e^{ik}, e^{-ik}) C.
Mat2 symbol(const Mat2& coin, double k);
Mat2 symbol(const CoinParams& p, double k);

// One dispersion branch of one side.  Bands satisfy
// cos(lambda - delta/2) = a cos(k + alpha - delta/2); for a = 1 the branches
// are the two exact diagonals lambda = k + alpha and lambda = delta - alpha - k.
struct BandFunction {
  int side = 0;    // 0 = left, 1 = right
  int branch = 1;  // 1 or 2
  CoinParams coin;

  RVec k_grid;       // n_k uniform nodes on [0, 2pi)
  RVec lambda_grid;  // unwrapped phase samples
  RVec v_grid;       // group velocity by spectral differentiation
  int winding = 0;   // net winding of lambda over one k revolution
  double implicit_residual = 0.0;  // max dispersion-relation defect on the grid

  double lambda(double k) const;        // wrapped to [0, 2pi)
  double velocity(double k) const;      // closed form d lambda / dk
  Vec2 eigenvector(double k) const;     // spec gauge: largest component real positive
  Vec2 eigenvector_ref(double k, int ref_comp) const;  // fixed reference gauge
};

std::array<BandFunction, 2> band_functions(const CoinParams& coin, int side, Index n_k);

// Band-edge angles (vanishing group velocity) for one side / the model pair,
// deduplicated within 1e-10 and sorted.
std::vector<double> side_thresholds(const CoinParams& coin);
std::vector<double> thresholds(const WalkModel& model);

// Union of band arcs with the channel-count multiplicity, piecewise constant
// between thresholds.
struct SpectrumArcs {
  struct Arc {
    double lo = 0, hi = 0;
    Index mult = 0;
  };
  std::vector<double> breakpoints;
  std::vector<Arc> arcs;  // only pieces with mult > 0
  Index multiplicity(double theta) const;  // analytic channel count at theta

  CoinParams left_coin, right_coin;
};

SpectrumArcs core_spectrum(const WalkModel& model);

// One scattering channel at angle theta: lambda_branch^side(k) = theta with
// group velocity v != 0.  segment distinguishes the two momentum roots of a
// branch (sign of sin(k + alpha - delta/2)).
struct Channel {
  int side = 0;
  int branch = 1;
  int segment = +1;
  double k = 0.0;
  Vec2 u;      // phase-fixed unit eigenvector of the symbol
  double v = 0.0;
};

struct Fiber {
  double theta = 0.0;
  std::vector<Channel> channels;  // ordered by (side, branch, k)
  Index dim() const { return static_cast<Index>(channels.size()); }
};

// Channels found by bisection on the monotone band segments; throws
// ThresholdProximityError inside the exclusion radius of a threshold.
Fiber fiber_at(const WalkModel& model, double theta, double exclusion_radius = 0.05);

struct FiberVector {
  Fiber fiber;
  Vec coeff;  // one complex coefficient per channel
};

// (F0 psi)(theta): coefficient (2pi)^{-1/2} |v_c|^{-1/2} <u_c, psi_hat_side(k_c)>,
// linear in psi.
FiberVector f0_apply(const WalkModel& model, const DirectSumState& psi, double theta,
                     double exclusion_radius = 0.05);
FiberVector f0_apply(const WalkModel& model, const Vec& psi_flat, const Fiber& fiber);

// Windowed discrete-time Fourier transform of the H component at momentum k.
Vec2 dtft(const LatticeWindow& w, const Vec& psi_flat_h, double k);

// Approximate F0^* of a normalized Gaussian bump concentrated in one channel
// around theta_star.  The synthesized state is normalized to 1.
DirectSumState wave_packet(const WalkModel& model, const Channel& channel, double theta_star,
                           double sigma_theta);

// Total fiber mass sum_c |(F0 psi)(theta)_c|^2 integrated over an n_theta
// grid (nodes inside the exclusion radius of a threshold are skipped); equals
// ||psi||^2 for interior-supported states.
double parseval_mass(const WalkModel& model, const DirectSumState& psi, Index n_theta,
                     double exclusion_radius = 0.05);

}  // namespace uniscatter

#endif
