#ifndef UNISCATTER_WALK_HPP
#define UNISCATTER_WALK_HPP

#include <functional>
#include <map>
#include <optional>

#include "uniscatter/operators.hpp"

namespace uniscatter {

// Coin parameterization: a, b in [0,1] with a^2 + b^2 = 1 and phases
// alpha, beta, delta in (-pi, pi].  The built matrix is
//   e^{i delta/2} [ a e^{i(alpha-delta/2)}   b e^{i(beta-delta/2)} ]
//                 [ -b e^{-i(beta-delta/2)}  a e^{-i(alpha-delta/2)} ].
struct CoinParams {
  double a = 1.0;
  double b = 0.0;
  double alpha = 0.0;
  double beta = 0.0;
  double delta = 0.0;

  static CoinParams identity() { return {1.0, 0.0, 0.0, 0.0, 0.0}; }
  static CoinParams hadamard() { return {1.0 / std::sqrt(2.0), 1.0 / std::sqrt(2.0), 0.0, 0.0, pi}; }
};

Mat2 build_coin_matrix(const CoinParams& p);

// Site-dependent coin with two asymptotes and a finitely-supported deviation
// table or a power-law generator.  Outside the table (resp. at large |x|)
// the coin is exactly (resp. asymptotically) the side's asymptote.
struct CoinField {
  CoinParams left;
  CoinParams right;

  std::map<int, Mat2> table;  // absolute coins at the listed sites

  struct Generator {
    Mat2 herm_seed = Mat2::Identity();  // normalized to unit spectral norm
    double kappa_left = 0.0, eps_left = 1.0;
    double kappa_right = 0.0, eps_right = 1.0;
  };
  std::optional<Generator> generator;

  // declared short-range constants (per side)
  double kappa_left = 1.0, eps_left = 1.0;
  double kappa_right = 1.0, eps_right = 1.0;

  Mat2 coin_at(int x) const;
  Mat2 asymptote(int side_positive_x) const;  // side by sign of x (x >= 0 -> right)
};

struct ShortRangeReport {
  struct Side {
    double declared_kappa = 0.0, declared_eps = 0.0;
    double fitted_kappa = 0.0, fitted_eps = 0.0;
    bool fit_valid = false;
    double worst_ratio = 0.0;  // max over sites of dev / bound
    int worst_site = 0;
    bool pass = true;
  };
  Side left_side, right_side;
  std::map<int, double> deviations;  // ||C(x) - C_star|| per probed site
};

// Per-site verification of the declared decay bound plus a log-log fit of
// the tightest (kappa, eps).  Report-only; never throws.
ShortRangeReport check_short_range(const CoinField& field, Index probe_half_width = 0);

// Hilbert-Schmidt factorization V = G^* G0 with G0 = <Q>^{-s} (+) <Q>^{-s}
// and G = D^* <Q>^{-s}, D = <Q>^s V (<Q>^s (+) <Q>^s) on the window.
struct Factorization {
  double s = 1.0;
  WindowedOperator G0;  // H0 -> H0 diagonal weight
  WindowedOperator G;   // H -> H0
  WindowedOperator D;   // H0 -> H
  std::vector<Index> aux_window;      // retained H0 basis indices, ascending
  double dropped_weight = 0.0;        // cumulative dropped column weight
  double v_vs_gg0_error = 0.0;        // max entrywise |V - G^* G0|
  std::vector<Index> ladder_half_widths;
  std::vector<double> d_norm_ladder;  // op_norm(D) on growing sub-windows
};

// The assembled walk: U = SC, the asymptotic operators, the free operator
// U0 = U_l (+) U_r, the identification J, and the perturbation V = JU0 - UJ.
// On the cyclic window the exact commutator picks up entries at the wrap
// seam that the infinite lattice does not have; V holds the short-range part
// and V_wrap the seam correction, with V + V_wrap = JU0 - UJ exactly.
struct WalkModel {
  LatticeWindow window;
  CoinField field;

  WindowedOperator S;        // cyclic shift on H
  WindowedOperator U;        // S C
  WindowedOperator U_left;   // S C_l
  WindowedOperator U_right;  // S C_r
  WindowedOperator U0;       // U_l (+) U_r on H0
  WindowedOperator J;        // H0 -> H
  WindowedOperator JtJ;      // J^* J = diag(j_l, j_r) on H0
  WindowedOperator V;        // short-range part of JU0 - UJ
  WindowedOperator V_wrap;   // wrap-seam correction
  WindowedOperator V_full;   // V + V_wrap = JU0 - UJ, exact

  std::optional<Factorization> factorization;

  Vec j_left;   // cutoff on H, flat
  Vec j_right;

  Vec position_weight(double s) const;          // <x>^{-s} on H, flat
  Vec position_weight_doubled(double s) const;  // on H0

  const Factorization& require_factorization() const {
    if (!factorization)
      throw Error(ErrorCode::precondition, "walk model has no factorization; call factorize_perturbation");
    return *factorization;
  }
};

WalkModel build_walk(const CoinField& field, const LatticeWindow& window);

Factorization factorize_perturbation(const WalkModel& model, double s);
// convenience: factorize and store
void attach_factorization(WalkModel& model, double s = 1.0);

// Cyclic shift (S psi)(x) = (psi0(x+1), psi1(x-1)).
WindowedOperator make_shift_operator(const LatticeWindow& w);

// U = S C for a site-dependent coin.
WindowedOperator make_walk_operator(const LatticeWindow& w,
                                    const std::function<Mat2(int)>& coin_at);

// Eigenphases and eigenvectors of a unitary operator via the Cayley route;
// flags localized states by participation ratio.
struct PointSpectrumReport {
  std::vector<double> eigenphases;            // all phases, sorted
  std::vector<double> participation_ratios;   // matched to eigenphases
  std::vector<double> localized_phases;       // participation < threshold * window
};
PointSpectrumReport detect_point_spectrum(const WindowedOperator& U, const LatticeWindow& w,
                                          double participation_threshold = 0.2);

}  // namespace uniscatter

#endif
