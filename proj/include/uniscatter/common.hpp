#ifndef UNISCATTER_COMMON_HPP
#define UNISCATTER_COMMON_HPP

#include <Eigen/Dense>
#include <complex>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace uniscatter {

using cplx = std::complex<double>;
using Vec = Eigen::VectorXcd;
using Mat = Eigen::MatrixXcd;
using RVec = Eigen::VectorXd;
using Mat2 = Eigen::Matrix2cd;
using Vec2 = Eigen::Vector2cd;
using Index = Eigen::Index;

inline constexpr double pi = 3.14159265358979323846;
inline constexpr double two_pi = 2.0 * pi;

// Wraps an angle into [0, 2*pi).
inline double wrap_angle(double t) {
  t = std::fmod(t, two_pi);
  if (t < 0.0) t += two_pi;
  return t;
}

// Distance between two angles on the circle, in [0, pi].
inline double angle_dist(double a, double b) {
  double d = std::fabs(wrap_angle(a) - wrap_angle(b));
  return std::min(d, two_pi - d);
}

// Japanese bracket <x> = sqrt(1 + x^2).
inline double jbracket(double x) { return std::sqrt(1.0 + x * x); }

// ---------------------------------------------------------------------------
// Errors. Codes map onto the CLI exit codes.
// ---------------------------------------------------------------------------

enum class ErrorCode : int { parse = 1, precondition = 2, convergence = 3, internal = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorCode c, const std::string& msg) : std::runtime_error(msg), code(c) {}
  ErrorCode code;
};

class SpaceMismatchError : public Error {
 public:
  explicit SpaceMismatchError(const std::string& msg)
      : Error(ErrorCode::precondition, "space mismatch: " + msg) {}
};

class DimensionMismatchError : public Error {
 public:
  DimensionMismatchError(Index expected, Index got)
      : Error(ErrorCode::precondition,
              "dimension mismatch: expected " + std::to_string(expected) + ", got " +
                  std::to_string(got)) {}
};

class SingularFactorizationError : public Error {
 public:
  explicit SingularFactorizationError(double pivot)
      : Error(ErrorCode::convergence,
              "factorization singular to tolerance (pivot magnitude " + std::to_string(pivot) + ")"),
        pivot_magnitude(pivot) {}
  double pivot_magnitude;
};

class NonConvergenceError : public Error {
 public:
  explicit NonConvergenceError(const std::string& what_op)
      : Error(ErrorCode::convergence, what_op + " did not converge") {}
};

class NoWrapError : public Error {
 public:
  NoWrapError(Index required_L, Index have_L)
      : Error(ErrorCode::precondition,
              "no-wrap condition violated: requires half_width >= " + std::to_string(required_L) +
                  " (have " + std::to_string(have_L) + ")"),
        required_half_width(required_L) {}
  Index required_half_width;
};

class ThresholdProximityError : public Error {
 public:
  ThresholdProximityError(double theta, double threshold)
      : Error(ErrorCode::precondition,
              "theta " + std::to_string(theta) + " within exclusion radius of threshold " +
                  std::to_string(threshold)) {}
};

class ShortRangeViolationError : public Error {
 public:
  explicit ShortRangeViolationError(int site)
      : Error(ErrorCode::precondition,
              "short-range violated at site " + std::to_string(site)),
        site(site) {}
  explicit ShortRangeViolationError(const std::string& msg)
      : Error(ErrorCode::precondition, "short-range violated: " + msg), site(0) {}
  int site;
};

class BoundaryLimitError : public Error {
 public:
  explicit BoundaryLimitError(const std::string& trend)
      : Error(ErrorCode::convergence, "boundary limit not resolved: " + trend) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(std::vector<std::string> problems)
      : Error(ErrorCode::parse, join(problems)), issues(std::move(problems)) {}
  std::vector<std::string> issues;

 private:
  static std::string join(const std::vector<std::string>& v) {
    std::string s = "config invalid:";
    for (const auto& p : v) s += "\n  - " + p;
    return s;
  }
};

// ---------------------------------------------------------------------------
// Lattice window and states
// ---------------------------------------------------------------------------

// Truncation of the lattice to sites -L..L with a C^2 internal degree of
// freedom.  Flat index layout: idx(x, c) = 2*(x + L) + c, so ascending flat
// order is ascending site, components within a site.  All reductions run in
// this order.
struct LatticeWindow {
  Index half_width = 0;

  LatticeWindow() = default;
  explicit LatticeWindow(Index L) : half_width(L) {
    if (L < 4) throw Error(ErrorCode::precondition, "LatticeWindow requires half_width >= 4");
  }

  Index site_count() const { return 2 * half_width + 1; }
  Index dim() const { return 2 * site_count(); }          // dim of H
  Index dim_doubled() const { return 2 * dim(); }          // dim of H0 = H (+) H

  Index flat(Index x, Index comp) const { return 2 * (x + half_width) + comp; }
  Index site_of(Index flat_idx) const { return flat_idx / 2 - half_width; }
  Index comp_of(Index flat_idx) const { return flat_idx % 2; }

  bool contains(Index x) const { return x >= -half_width && x <= half_width; }

  bool operator==(const LatticeWindow& o) const { return half_width == o.half_width; }
  bool operator!=(const LatticeWindow& o) const { return !(*this == o); }
};

// C^2-valued sequence on the window.
struct SpinorState {
  LatticeWindow window;
  Vec values;  // flat layout, size window.dim()

  SpinorState() = default;
  explicit SpinorState(const LatticeWindow& w) : window(w), values(Vec::Zero(w.dim())) {}
  SpinorState(const LatticeWindow& w, Vec v) : window(w), values(std::move(v)) {
    if (values.size() != window.dim()) throw DimensionMismatchError(window.dim(), values.size());
  }

  cplx& at(Index x, Index comp) { return values[window.flat(x, comp)]; }
  cplx at(Index x, Index comp) const { return values[window.flat(x, comp)]; }
  double norm() const { return values.norm(); }
};

// Element of H0 = H (+) H: ordered pair (left, right) on the same window.
// Flat layout: [left; right].
struct DirectSumState {
  LatticeWindow window;
  Vec values;  // size window.dim_doubled()

  DirectSumState() = default;
  explicit DirectSumState(const LatticeWindow& w) : window(w), values(Vec::Zero(w.dim_doubled())) {}
  DirectSumState(const SpinorState& l, const SpinorState& r) : window(l.window) {
    if (l.window != r.window)
      throw SpaceMismatchError("direct-sum slots live on different windows");
    values.resize(window.dim_doubled());
    values.head(window.dim()) = l.values;
    values.tail(window.dim()) = r.values;
  }
  DirectSumState(const LatticeWindow& w, Vec v) : window(w), values(std::move(v)) {
    if (values.size() != window.dim_doubled())
      throw DimensionMismatchError(window.dim_doubled(), values.size());
  }

  SpinorState left() const { return SpinorState(window, values.head(window.dim())); }
  SpinorState right() const { return SpinorState(window, values.tail(window.dim())); }
  double norm() const { return values.norm(); }
};

// ---------------------------------------------------------------------------
// Schedules and extrapolation
// ---------------------------------------------------------------------------

// Strictly decreasing epsilon ladder used for all eps -> 0 limits.
struct EpsSchedule {
  std::vector<double> eps;  // strictly decreasing, all in (0,1)
  int order = 1;            // Richardson order, 0..2

  EpsSchedule() = default;
  EpsSchedule(std::vector<double> e, int p) : eps(std::move(e)), order(p) { validate(); }

  void validate() const {
    if (order < 0 || order > 2)
      throw Error(ErrorCode::precondition, "EpsSchedule order must be 0, 1 or 2");
    if (eps.size() < static_cast<size_t>(order + 1))
      throw Error(ErrorCode::precondition, "EpsSchedule needs at least order+1 entries");
    double prev = 1.0;
    for (double e : eps) {
      if (!(e > 0.0 && e < 1.0 && e < prev))
        throw Error(ErrorCode::precondition, "EpsSchedule must be strictly decreasing in (0,1)");
      prev = e;
    }
  }

  static EpsSchedule standard() { return EpsSchedule({2e-2, 1e-2, 5e-3, 2.5e-3}, 1); }
};

// Result of an extrapolated limit, with the finite-parameter trail kept for
// diagnostics.  No value is reported without its stepwise differences.
struct ExtrapolatedValue {
  cplx value{0.0, 0.0};              // extrapolated limit
  std::vector<double> params;        // the parameter ladder actually used
  std::vector<cplx> samples;         // value at each parameter
  std::vector<double> step_deltas;   // |samples[i] - samples[i-1]|
  bool monotone_trend = true;        // deltas non-increasing
};

// Polynomial (in the parameter) extrapolation to 0 through the last
// (order+1) samples; order 0 returns the last sample.
ExtrapolatedValue extrapolate_to_zero(const std::vector<double>& params,
                                      const std::vector<cplx>& samples, int order);

}  // namespace uniscatter

#endif
