#include "uniscatter/free_spectral.hpp"

#include <algorithm>
#include <cmath>

namespace uniscatter {

namespace {

inline cplx eip(double t) { return cplx(std::cos(t), std::sin(t)); }

// wrap to (-pi, pi]
inline double wrap_pm(double t) {
  t = std::fmod(t, two_pi);
  if (t <= -pi) t += two_pi;
  if (t > pi) t -= two_pi;
  return t;
}

constexpr double kDiagonalCoinB = 1e-14;  // below this, treat b as exactly 0

// dispersion closed forms for one side ---------------------------------------

double branch_lambda(const CoinParams& p, int branch, double k) {
  if (p.b <= kDiagonalCoinB)
    return branch == 1 ? wrap_angle(k + p.alpha) : wrap_angle(p.delta - p.alpha - k);
  const double phi = k + p.alpha - p.delta / 2;
  const double arc = std::acos(std::clamp(p.a * std::cos(phi), -1.0, 1.0));
  return wrap_angle(branch == 1 ? p.delta / 2 + arc : p.delta / 2 - arc);
}

double branch_velocity(const CoinParams& p, int branch, double k) {
  if (p.b <= kDiagonalCoinB) return branch == 1 ? 1.0 : -1.0;
  const double phi = k + p.alpha - p.delta / 2;
  const double c = p.a * std::cos(phi);
  const double denom = std::sqrt(std::max(1e-300, 1.0 - c * c));
  const double d = p.a * std::sin(phi) / denom;
  return branch == 1 ? d : -d;
}

Vec2 branch_eigenvector_raw(const CoinParams& p, int branch, double k) {
  if (p.b <= kDiagonalCoinB) return branch == 1 ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
  const Mat2 c = build_coin_matrix(p);
  const cplx mu = eip(branch_lambda(p, branch, k));
  // candidate null vectors of (U_hat(k) - mu) from each row
  Vec2 cand1(eip(k) * c(0, 1), mu - eip(k) * c(0, 0));
  Vec2 cand2(mu - eip(-k) * c(1, 1), eip(-k) * c(1, 0));
  Vec2 u = cand1.norm() >= cand2.norm() ? cand1 : cand2;
  return u / u.norm();
}

Vec2 gauge_fix(Vec2 u, int ref_comp) {
  if (ref_comp < 0) ref_comp = std::abs(u[0]) >= std::abs(u[1]) ? 0 : 1;
  cplx a = u[ref_comp];
  if (std::abs(a) < 1e-12) {
    ref_comp = 1 - ref_comp;
    a = u[ref_comp];
  }
  return u * (std::conj(a) / std::abs(a));
}

}  // namespace

Mat2 symbol(const Mat2& coin, double k) {
  Mat2 d = Mat2::Zero();
  d(0, 0) = eip(k);
  d(1, 1) = eip(-k);
  return d * coin;
}

Mat2 symbol(const CoinParams& p, double k) { return symbol(build_coin_matrix(p), k); }

double BandFunction::lambda(double k) const { return branch_lambda(coin, branch, k); }
double BandFunction::velocity(double k) const { return branch_velocity(coin, branch, k); }
Vec2 BandFunction::eigenvector(double k) const {
  return gauge_fix(branch_eigenvector_raw(coin, branch, k), -1);
}
Vec2 BandFunction::eigenvector_ref(double k, int ref_comp) const {
  return gauge_fix(branch_eigenvector_raw(coin, branch, k), ref_comp);
}

std::array<BandFunction, 2> band_functions(const CoinParams& coin, int side, Index n_k) {
  if (n_k < 256 || (n_k & (n_k - 1)) != 0)
    throw Error(ErrorCode::precondition, "band grid must be a power of two >= 256");
  std::array<BandFunction, 2> out;
  for (int br = 1; br <= 2; ++br) {
    BandFunction& b = out[br - 1];
    b.side = side;
    b.branch = br;
    b.coin = coin;
    b.k_grid.resize(n_k);
    b.lambda_grid.resize(n_k);
    b.v_grid.resize(n_k);
    b.winding = (coin.b <= kDiagonalCoinB) ? (br == 1 ? 1 : -1) : 0;

    // sample and unwrap
    double prev = 0.0;
    double offset = 0.0;
    for (Index j = 0; j < n_k; ++j) {
      const double k = two_pi * double(j) / double(n_k);
      b.k_grid[j] = k;
      double lam = branch_lambda(coin, br, k);
      if (j > 0) {
        while (lam + offset - prev > pi) offset -= two_pi;
        while (lam + offset - prev < -pi) offset += two_pi;
      }
      prev = lam + offset;
      b.lambda_grid[j] = prev;
    }
    // continuity guard: a jump bigger than the grid can resolve means the
    // branch tracking failed (only reachable through a defective coin)
    for (Index j = 1; j < n_k; ++j) {
      if (std::fabs(b.lambda_grid[j] - b.lambda_grid[j - 1]) > 0.5)
        throw NonConvergenceError("band branch tracking");
    }

    // spectral differentiation of the periodic part lambda(k) - winding*k
    {
      const Index n = n_k;
      std::vector<cplx> chat(n, cplx(0, 0));
      for (Index m = 0; m < n; ++m) {
        cplx acc(0, 0);
        for (Index j = 0; j < n; ++j)
          acc += (b.lambda_grid[j] - b.winding * b.k_grid[j]) * eip(-two_pi * double(m * j) / double(n));
        chat[m] = acc / double(n);
      }
      for (Index j = 0; j < n; ++j) {
        cplx acc(0, 0);
        for (Index m = 0; m < n; ++m) {
          // derivative multiplier i*m with the symmetric frequency convention
          double freq = (m <= n / 2) ? double(m) : double(m) - double(n);
          if (m == n / 2) freq = 0.0;  // Nyquist mode has no odd derivative
          acc += cplx(0, freq) * chat[m] * eip(two_pi * double(m * j) / double(n));
        }
        b.v_grid[j] = std::real(acc) + double(b.winding);
      }
    }

    // dispersion-relation defect: v sin(lambda - delta/2) - a sin(k + alpha - delta/2)
    double worst = 0.0;
    for (Index j = 0; j < n_k; ++j) {
      const double lhs = b.v_grid[j] * std::sin(b.lambda_grid[j] - coin.delta / 2);
      const double rhs = coin.a * std::sin(b.k_grid[j] + coin.alpha - coin.delta / 2);
      worst = std::max(worst, std::fabs(lhs - rhs));
    }
    b.implicit_residual = worst;
  }
  return out;
}

std::vector<double> side_thresholds(const CoinParams& p) {
  if (p.b <= kDiagonalCoinB) return {};  // full-circle bands, no edges
  const double arc = std::acos(std::clamp(p.a, -1.0, 1.0));
  return {wrap_angle(p.delta / 2 + arc), wrap_angle(p.delta / 2 - arc),
          wrap_angle(p.delta / 2 + pi - arc), wrap_angle(p.delta / 2 - pi + arc)};
}

std::vector<double> thresholds(const WalkModel& model) {
  std::vector<double> all = side_thresholds(model.field.left);
  for (double t : side_thresholds(model.field.right)) all.push_back(t);
  std::sort(all.begin(), all.end());
  std::vector<double> out;
  for (double t : all) {
    if (out.empty() || t - out.back() > 1e-10)
      out.push_back(t);
    else
      out.back() = 0.5 * (out.back() + t);  // merge duplicates
  }
  if (out.size() > 1 && (out.front() + two_pi) - out.back() <= 1e-10) out.pop_back();
  return out;
}

namespace {

Index side_multiplicity(const CoinParams& p, double theta) {
  if (p.b <= kDiagonalCoinB) return 2;  // one momentum per full-circle branch
  const double w = std::cos(theta - p.delta / 2);
  return std::fabs(w) < p.a ? 2 : 0;  // two momenta on one branch arc
}

}  // namespace

Index SpectrumArcs::multiplicity(double theta) const {
  return side_multiplicity(left_coin, theta) + side_multiplicity(right_coin, theta);
}

SpectrumArcs core_spectrum(const WalkModel& model) {
  SpectrumArcs sa;
  sa.left_coin = model.field.left;
  sa.right_coin = model.field.right;
  sa.breakpoints = thresholds(model);
  if (sa.breakpoints.empty()) {
    Index m = sa.multiplicity(0.0);
    if (m > 0) sa.arcs.push_back({0.0, two_pi, m});
    return sa;
  }
  for (size_t i = 0; i < sa.breakpoints.size(); ++i) {
    const double lo = sa.breakpoints[i];
    const double hi =
        (i + 1 < sa.breakpoints.size()) ? sa.breakpoints[i + 1] : sa.breakpoints[0] + two_pi;
    const Index m = sa.multiplicity(wrap_angle(0.5 * (lo + hi)));
    if (m > 0) sa.arcs.push_back({lo, hi, m});
  }
  return sa;
}

// ---------------------------------------------------------------------------
// fibers
// ---------------------------------------------------------------------------

namespace {

// bisection for arccos(a cos(phi)) = target on a monotone phi segment
double bisect_arc(double a, double target, bool increasing_segment) {
  // increasing segment: phi in [0, pi]; decreasing: [-pi, 0]
  double lo = increasing_segment ? 0.0 : -pi;
  double hi = increasing_segment ? pi : 0.0;
  auto g = [&](double phi) { return std::acos(std::clamp(a * std::cos(phi), -1.0, 1.0)) - target; };
  double glo = g(lo);
  for (int it = 0; it < 200; ++it) {
    const double mid = 0.5 * (lo + hi);
    const double gm = g(mid);
    if ((gm <= 0) == (glo <= 0)) {
      lo = mid;
      glo = gm;
    } else {
      hi = mid;
    }
    if (hi - lo < 1e-14) break;
  }
  return 0.5 * (lo + hi);
}

void side_channels(const CoinParams& p, int side, double theta, std::vector<Channel>& out) {
  if (p.b <= kDiagonalCoinB) {
    for (int br = 1; br <= 2; ++br) {
      Channel c;
      c.side = side;
      c.branch = br;
      c.segment = +1;
      c.k = br == 1 ? wrap_angle(theta - p.alpha) : wrap_angle(p.delta - p.alpha - theta);
      c.v = br == 1 ? 1.0 : -1.0;
      c.u = br == 1 ? Vec2(1.0, 0.0) : Vec2(0.0, 1.0);
      out.push_back(c);
    }
    return;
  }
  const double w = wrap_angle(theta - p.delta / 2);
  int branch;
  double target;
  if (w > 0 && w < pi) {
    branch = 1;
    target = w;
  } else if (w > pi) {
    branch = 2;
    target = two_pi - w;
  } else {
    return;  // exactly at delta/2 or delta/2+pi: in a gap for a < 1
  }
  if (std::fabs(std::cos(target)) >= p.a) return;  // outside this side's band arc

  for (int seg : {+1, -1}) {
    const double phi = bisect_arc(p.a, target, seg > 0);
    Channel c;
    c.side = side;
    c.branch = branch;
    c.segment = seg;
    c.k = wrap_angle(phi - p.alpha + p.delta / 2);
    c.v = branch_velocity(p, branch, c.k);
    c.u = gauge_fix(branch_eigenvector_raw(p, branch, c.k), -1);
    out.push_back(c);
  }
}

}  // namespace

Fiber fiber_at(const WalkModel& model, double theta, double exclusion_radius) {
  theta = wrap_angle(theta);
  for (double t : thresholds(model))
    if (angle_dist(theta, t) < exclusion_radius) throw ThresholdProximityError(theta, t);

  Fiber f;
  f.theta = theta;
  side_channels(model.field.left, 0, theta, f.channels);
  side_channels(model.field.right, 1, theta, f.channels);
  std::sort(f.channels.begin(), f.channels.end(), [](const Channel& a, const Channel& b) {
    if (a.side != b.side) return a.side < b.side;
    if (a.branch != b.branch) return a.branch < b.branch;
    return a.k < b.k;
  });
  return f;
}

Vec2 dtft(const LatticeWindow& w, const Vec& psi_flat_h, double k) {
  Vec2 acc(0.0, 0.0);
  for (Index x = -w.half_width; x <= w.half_width; ++x) {
    const cplx ph = eip(-k * double(x));
    acc[0] += ph * psi_flat_h[w.flat(x, 0)];
    acc[1] += ph * psi_flat_h[w.flat(x, 1)];
  }
  return acc;
}

FiberVector f0_apply(const WalkModel& model, const Vec& psi_flat, const Fiber& fiber) {
  if (psi_flat.size() != model.window.dim_doubled())
    throw DimensionMismatchError(model.window.dim_doubled(), psi_flat.size());
  const Index nH = model.window.dim();
  FiberVector fv;
  fv.fiber = fiber;
  fv.coeff.resize(fiber.dim());
  for (Index c = 0; c < fiber.dim(); ++c) {
    const Channel& ch = fiber.channels[c];
    Vec slot = ch.side == 0 ? psi_flat.head(nH) : psi_flat.tail(nH);
    const Vec2 ph = dtft(model.window, slot, ch.k);
    fv.coeff[c] = (ch.u.dot(ph)) / std::sqrt(two_pi * std::fabs(ch.v));
  }
  return fv;
}

FiberVector f0_apply(const WalkModel& model, const DirectSumState& psi, double theta,
                     double exclusion_radius) {
  return f0_apply(model, psi.values, fiber_at(model, theta, exclusion_radius));
}

double parseval_mass(const WalkModel& model, const DirectSumState& psi, Index n_theta,
                     double exclusion_radius) {
  const auto tau = thresholds(model);
  const double h = two_pi / double(n_theta);
  double acc = 0.0;
  for (Index j = 0; j < n_theta; ++j) {
    const double theta = h * double(j);
    bool excluded = false;
    for (double t : tau)
      if (angle_dist(theta, t) < exclusion_radius) {
        excluded = true;
        break;
      }
    if (excluded) continue;
    Fiber f;
    f.theta = theta;
    side_channels(model.field.left, 0, theta, f.channels);
    side_channels(model.field.right, 1, theta, f.channels);
    if (f.channels.empty()) continue;
    FiberVector fv = f0_apply(model, psi.values, f);
    acc += fv.coeff.squaredNorm();
  }
  return acc * h;
}

// ---------------------------------------------------------------------------
// wave packets
// ---------------------------------------------------------------------------

DirectSumState wave_packet(const WalkModel& model, const Channel& channel, double theta_star,
                           double sigma_theta) {
  const LatticeWindow& w = model.window;
  const CoinParams& p = channel.side == 0 ? model.field.left : model.field.right;

  const double sig = 0.85 * sigma_theta;  // keeps mass outside 3 sigma_theta below 1e-3
  const double spread = std::fabs(channel.v) / (2.0 * sig);
  if (spread > double(w.half_width) / 4.0)
    throw Error(ErrorCode::precondition,
                "wave_packet: position spread " + std::to_string(spread) +
                    " exceeds a quarter window");

  // amplitude profile with unit L^2 mass in theta
  const double amp = std::pow(two_pi * sig * sig, -0.25);
  auto g = [&](double lam) {
    const double d = wrap_pm(lam - theta_star);
    return amp * std::exp(-d * d / (4.0 * sig * sig));
  };

  // smooth band-edge taper: the spectral amplitude must vanish at the
  // segment ends, otherwise the hard cut leaves 1/x position tails
  double edge_lo = 0.0, edge_hi = 0.0, taper_w = 0.0;
  if (p.b > kDiagonalCoinB) {
    const double arc = std::acos(std::clamp(p.a, -1.0, 1.0));
    if (channel.branch == 1) {
      edge_lo = p.delta / 2 + arc;
      edge_hi = p.delta / 2 + pi - arc;
    } else {
      edge_lo = p.delta / 2 - pi + arc;
      edge_hi = p.delta / 2 - arc;
    }
    const double arc_width = pi - 2.0 * arc;
    taper_w = std::min(sig, arc_width / 8.0);
  }
  auto edge_taper = [&](double lam) {
    if (p.b <= kDiagonalCoinB) return 1.0;
    const double d1 = angle_dist(lam, edge_lo);
    const double d2 = angle_dist(lam, edge_hi);
    if (d1 < 1e-12 || d2 < 1e-12) return 0.0;
    return std::exp(-taper_w * taper_w / (d1 * d2));
  };

  // gauge anchored at theta_star's momentum
  const Vec2 u_star = gauge_fix(branch_eigenvector_raw(p, channel.branch, channel.k), -1);
  const int ref = std::abs(u_star[0]) >= std::abs(u_star[1]) ? 0 : 1;

  // exact synthesis on the cyclic window: k nodes matched to the lattice
  const Index M = w.site_count();
  Vec slot = Vec::Zero(w.dim());
  const double hk = two_pi / double(M);
  for (Index m = 0; m < M; ++m) {
    const double k = hk * double(m);
    if (p.b > kDiagonalCoinB) {
      const double phi = wrap_pm(k + p.alpha - p.delta / 2);
      if (channel.segment > 0 && !(phi > 0 && phi < pi)) continue;
      if (channel.segment < 0 && !(phi < 0 && phi > -pi)) continue;
    }
    const double lam = branch_lambda(p, channel.branch, k);
    const double gg = g(lam) * edge_taper(lam);
    if (gg < 1e-18) continue;
    const double vel = branch_velocity(p, channel.branch, k);
    const cplx weight = gg * std::sqrt(std::fabs(vel) / two_pi);
    const Vec2 u = gauge_fix(branch_eigenvector_raw(p, channel.branch, k), ref);
    for (Index x = -w.half_width; x <= w.half_width; ++x) {
      const cplx ph = weight * eip(k * double(x)) * hk;
      slot[w.flat(x, 0)] += ph * u[0];
      slot[w.flat(x, 1)] += ph * u[1];
    }
  }

  Vec full = Vec::Zero(w.dim_doubled());
  if (channel.side == 0)
    full.head(w.dim()) = slot;
  else
    full.tail(w.dim()) = slot;
  const double nrm = full.norm();
  if (nrm < 1e-12)
    throw Error(ErrorCode::convergence, "wave_packet synthesis produced a null state");
  full /= nrm;
  return DirectSumState(w, std::move(full));
}

}  // namespace uniscatter
