#ifndef UNISCATTER_TEST_HELPERS_HPP
#define UNISCATTER_TEST_HELPERS_HPP

#include "uniscatter/walk.hpp"

namespace uniscatter::testing {

inline CoinField uniform_field(const CoinParams& p) {
  CoinField f;
  f.left = p;
  f.right = p;
  f.kappa_left = f.kappa_right = 1.0;
  f.eps_left = f.eps_right = 1.0;
  return f;
}

// base coin everywhere, explicit defect coins at the listed sites
inline CoinField defect_field(const CoinParams& base, const std::map<int, CoinParams>& defects,
                              double kappa = 0.0) {
  CoinField f = uniform_field(base);
  double worst = 0.0;
  for (const auto& [x, p] : defects) {
    Mat2 c = build_coin_matrix(p);
    f.table[x] = c;
    if (x != 0) {
      Eigen::JacobiSVD<Mat2> svd(Mat2(c - build_coin_matrix(base)));
      double need = svd.singularValues()(0) * std::pow(std::abs(double(x)), 2.0);
      worst = std::max(worst, need);
    }
  }
  f.kappa_left = f.kappa_right = kappa > 0.0 ? kappa : std::max(1.0, 1.5 * worst);
  f.eps_left = f.eps_right = 1.0;
  return f;
}

// random-ish interior-supported H state with the given support half-width
inline Vec interior_state(const LatticeWindow& w, Index support, std::uint64_t seed) {
  Vec full = deterministic_vector(w.dim(), seed);
  Vec v = Vec::Zero(w.dim());
  for (Index x = -support; x <= support; ++x) {
    v[w.flat(x, 0)] = full[w.flat(x, 0)];
    v[w.flat(x, 1)] = full[w.flat(x, 1)];
  }
  return v / v.norm();
}

inline Vec interior_state_doubled(const LatticeWindow& w, Index support, std::uint64_t seed) {
  Vec a = interior_state(w, support, seed);
  Vec b = interior_state(w, support, seed + 1);
  Vec v(2 * w.dim());
  v << a, b;
  return v / v.norm();
}

}  // namespace uniscatter::testing

#endif
