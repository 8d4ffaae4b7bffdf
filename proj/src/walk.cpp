#include "uniscatter/walk.hpp"

#include <algorithm>
#include <cmath>

#include "uniscatter/resolvent.hpp"

namespace uniscatter {

Mat2 build_coin_matrix(const CoinParams& p) {
  if (std::fabs(p.a * p.a + p.b * p.b - 1.0) > 1e-12)
    throw Error(ErrorCode::precondition, "coin parameters must satisfy a^2 + b^2 = 1");
  const cplx phase(std::cos(p.delta / 2), std::sin(p.delta / 2));
  auto eip = [](double t) { return cplx(std::cos(t), std::sin(t)); };
  Mat2 c;
  c(0, 0) = p.a * eip(p.alpha - p.delta / 2);
  c(0, 1) = p.b * eip(p.beta - p.delta / 2);
  c(1, 0) = -p.b * eip(-(p.beta - p.delta / 2));
  c(1, 1) = p.a * eip(-(p.alpha - p.delta / 2));
  return phase * c;
}

Mat2 CoinField::asymptote(int x) const {
  return build_coin_matrix(x >= 0 ? right : left);
}

namespace {

Mat2 herm_exp(const Mat2& h, double t) {
  Eigen::SelfAdjointEigenSolver<Mat2> es(h);
  Vec2 phases;
  phases[0] = cplx(std::cos(t * es.eigenvalues()[0]), std::sin(t * es.eigenvalues()[0]));
  phases[1] = cplx(std::cos(t * es.eigenvalues()[1]), std::sin(t * es.eigenvalues()[1]));
  return es.eigenvectors() * phases.asDiagonal() * es.eigenvectors().adjoint();
}

double spectral_norm2(const Mat2& m) {
  Eigen::JacobiSVD<Mat2> svd(m);
  return svd.singularValues()(0);
}

}  // namespace

Mat2 CoinField::coin_at(int x) const {
  auto it = table.find(x);
  if (it != table.end()) return it->second;
  Mat2 base = asymptote(x);
  if (!generator) return base;
  const double kap = x >= 0 ? generator->kappa_right : generator->kappa_left;
  const double eps = x >= 0 ? generator->eps_right : generator->eps_left;
  if (kap == 0.0) return base;
  Mat2 seed = generator->herm_seed;
  double nrm = spectral_norm2(seed);
  if (nrm > 0) seed /= nrm;
  const double t = kap * std::pow(jbracket(double(x)), -1.0 - eps);
  return base * herm_exp(seed, t);
}

// ---------------------------------------------------------------------------
// operators
// ---------------------------------------------------------------------------

WindowedOperator make_shift_operator(const LatticeWindow& w) {
  const Index L = w.half_width;
  BandedMatrix S(w.dim(), 2, 2);
  for (Index x = -L; x <= L; ++x) {
    Index xp = (x == L) ? -L : x + 1;
    Index xm = (x == -L) ? L : x - 1;
    S.set(w.flat(x, 0), w.flat(xp, 0), 1.0);
    S.set(w.flat(x, 1), w.flat(xm, 1), 1.0);
  }
  return make_banded(Space::H, std::move(S), true);
}

WindowedOperator make_walk_operator(const LatticeWindow& w,
                                    const std::function<Mat2(int)>& coin_at) {
  const Index L = w.half_width;
  BandedMatrix U(w.dim(), 3, 3);
  for (Index x = -L; x <= L; ++x) {
    const Index xp = (x == L) ? -L : x + 1;
    const Index xm = (x == -L) ? L : x - 1;
    const Mat2 cp = coin_at(static_cast<int>(xp));
    const Mat2 cm = coin_at(static_cast<int>(xm));
    U.set(w.flat(x, 0), w.flat(xp, 0), cp(0, 0));
    U.set(w.flat(x, 0), w.flat(xp, 1), cp(0, 1));
    U.set(w.flat(x, 1), w.flat(xm, 0), cm(1, 0));
    U.set(w.flat(x, 1), w.flat(xm, 1), cm(1, 1));
  }
  return make_banded(Space::H, std::move(U), true);
}

Vec WalkModel::position_weight(double s) const {
  Vec d(window.dim());
  for (Index x = -window.half_width; x <= window.half_width; ++x) {
    const double v = std::pow(jbracket(double(x)), -s);
    d[window.flat(x, 0)] = v;
    d[window.flat(x, 1)] = v;
  }
  return d;
}

Vec WalkModel::position_weight_doubled(double s) const {
  Vec h = position_weight(s);
  Vec d(2 * h.size());
  d << h, h;
  return d;
}

// ---------------------------------------------------------------------------
// short-range verification
// ---------------------------------------------------------------------------

ShortRangeReport check_short_range(const CoinField& field, Index probe_half_width) {
  ShortRangeReport rep;
  rep.left_side.declared_kappa = field.kappa_left;
  rep.left_side.declared_eps = field.eps_left;
  rep.right_side.declared_kappa = field.kappa_right;
  rep.right_side.declared_eps = field.eps_right;

  Index probe = probe_half_width;
  if (probe == 0) {
    probe = 64;
    for (const auto& [x, c] : field.table) probe = std::max<Index>(probe, std::abs(x) + 8);
  }

  struct Fit {
    std::vector<double> logx, logd;
  };
  Fit fits[2];

  for (Index x = -probe; x <= probe; ++x) {
    if (x == 0) continue;  // the bound constrains only |x| > 0
    const Mat2 dev = field.coin_at(static_cast<int>(x)) - field.asymptote(static_cast<int>(x));
    const double d = spectral_norm2(dev);
    rep.deviations[static_cast<int>(x)] = d;
    auto& side = x < 0 ? rep.left_side : rep.right_side;
    const double kap = x < 0 ? field.kappa_left : field.kappa_right;
    const double eps = x < 0 ? field.eps_left : field.eps_right;
    const double bound = kap * std::pow(std::abs(double(x)), -1.0 - eps);
    const double ratio = bound > 0 ? d / bound : (d > 0 ? 1e300 : 0.0);
    if (ratio > side.worst_ratio) {
      side.worst_ratio = ratio;
      side.worst_site = static_cast<int>(x);
    }
    if (ratio > 1.0 + 1e-9) side.pass = false;
    if (d > 1e-14) {
      auto& f = fits[x < 0 ? 0 : 1];
      f.logx.push_back(std::log(std::abs(double(x))));
      f.logd.push_back(std::log(d));
    }
  }

  auto regress = [](const Fit& f, ShortRangeReport::Side& side) {
    const size_t n = f.logx.size();
    if (n < 2) return;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < n; ++i) {
      sx += f.logx[i];
      sy += f.logd[i];
      sxx += f.logx[i] * f.logx[i];
      sxy += f.logx[i] * f.logd[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::fabs(det) < 1e-12) return;
    const double slope = (n * sxy - sx * sy) / det;
    const double icept = (sy * sxx - sx * sxy) / det;
    side.fitted_eps = -slope - 1.0;
    side.fitted_kappa = std::exp(icept);
    side.fit_valid = true;
  };
  regress(fits[0], rep.left_side);
  regress(fits[1], rep.right_side);
  return rep;
}

// ---------------------------------------------------------------------------
// build
// ---------------------------------------------------------------------------

namespace {

const BandedMatrix& banded_of(const WindowedOperator& op) {
  return std::get<BandedMatrix>(op.storage());
}

}  // namespace

WalkModel build_walk(const CoinField& field, const LatticeWindow& window) {
  // deviation table must fit with margin
  for (const auto& [x, c] : field.table) {
    if (std::abs(x) > window.half_width - 8)
      throw Error(ErrorCode::precondition,
                  "deviation table site " + std::to_string(x) + " too close to the window edge");
    if ((c * c.adjoint() - Mat2::Identity()).norm() > 1e-13)
      throw Error(ErrorCode::precondition,
                  "coin table entry at site " + std::to_string(x) + " is not unitary");
  }
  {
    auto rep = check_short_range(field, window.half_width);
    if (!rep.left_side.pass) throw ShortRangeViolationError(rep.left_side.worst_site);
    if (!rep.right_side.pass) throw ShortRangeViolationError(rep.right_side.worst_site);
  }

  WalkModel m;
  m.window = window;
  m.field = field;
  m.S = make_shift_operator(window);
  m.U = make_walk_operator(window, [&](int x) { return field.coin_at(x); });
  const Mat2 cl = build_coin_matrix(field.left);
  const Mat2 cr = build_coin_matrix(field.right);
  m.U_left = make_walk_operator(window, [&](int) { return cl; });
  m.U_right = make_walk_operator(window, [&](int) { return cr; });
  m.U0 = make_direct_sum(m.U_left, m.U_right);

  const Index L = window.half_width;
  m.j_left = Vec::Zero(window.dim());
  m.j_right = Vec::Zero(window.dim());
  for (Index x = -L; x <= L; ++x)
    for (Index c = 0; c < 2; ++c) {
      if (x >= 0)
        m.j_right[window.flat(x, c)] = 1.0;
      else
        m.j_left[window.flat(x, c)] = 1.0;
    }
  m.J = make_hpair(make_diag(Space::H, m.j_left), make_diag(Space::H, m.j_right));
  m.JtJ = make_direct_sum(make_diag(Space::H, m.j_left), make_diag(Space::H, m.j_right));

  // V_star = j_star U_star - U j_star, split into the banded (short-range)
  // part and the wrap-seam entries.
  auto v_block = [&](const WindowedOperator& Ustar, const Vec& j) {
    BandedMatrix full = BandedMatrix::sum(banded_of(Ustar).scaled_rows(j), 1.0,
                                          banded_of(m.U).scaled_cols(j), -1.0);
    BandedMatrix phys = full.without_wrap();
    BandedMatrix seam(full.n, 0, 0);
    seam.wrap = full.wrap;
    return std::make_pair(std::move(phys), std::move(seam));
  };
  auto [vl, vl_seam] = v_block(m.U_left, m.j_left);
  auto [vr, vr_seam] = v_block(m.U_right, m.j_right);
  m.V = make_hpair(make_banded(Space::H, vl), make_banded(Space::H, vr));
  m.V_wrap = make_hpair(make_banded(Space::H, vl_seam), make_banded(Space::H, vr_seam));
  m.V_full = make_hpair(
      make_banded(Space::H, BandedMatrix::sum(vl, 1.0, vl_seam, 1.0)),
      make_banded(Space::H, BandedMatrix::sum(vr, 1.0, vr_seam, 1.0)));
  return m;
}

// ---------------------------------------------------------------------------
// factorization
// ---------------------------------------------------------------------------

Factorization factorize_perturbation(const WalkModel& model, double s) {
  if (!(s > 0.5))
    throw Error(ErrorCode::precondition, "factorization requires s > 1/2");

  Factorization f;
  f.s = s;
  const LatticeWindow& w = model.window;
  Vec ws = model.position_weight(-s);  // <x>^{+s}
  Vec wms = model.position_weight(s);  // <x>^{-s}

  const auto& hp = std::get<HPairStorage>(model.V.storage());
  BandedMatrix dl = banded_of(*hp.left).scaled_rows(ws).scaled_cols(ws);
  BandedMatrix dr = banded_of(*hp.right).scaled_rows(ws).scaled_cols(ws);
  f.D = make_hpair(make_banded(Space::H, dl), make_banded(Space::H, dr));

  f.G0 = make_direct_sum(make_diag(Space::H, wms), make_diag(Space::H, wms));
  // G = D^* <Q>^{-s} : H -> H0
  f.G = make_vpair(make_banded(Space::H, dl.adjoint().scaled_cols(wms)),
                   make_banded(Space::H, dr.adjoint().scaled_cols(wms)));

  // entrywise check V = G^* G0; G^* G0 block = <Q>^{-s} D_star <Q>^{-s}
  double worst = 0.0;
  auto check_block = [&](const BandedMatrix& d, const BandedMatrix& v) {
    BandedMatrix back = d.scaled_rows(wms).scaled_cols(wms);
    BandedMatrix diff = BandedMatrix::sum(back, 1.0, v, -1.0);
    worst = std::max(worst, diff.max_abs());
  };
  check_block(dl, banded_of(*hp.left));
  check_block(dr, banded_of(*hp.right));
  f.v_vs_gg0_error = worst;

  // effective auxiliary window: retain H0 basis columns of G^* by weight,
  // dropping from the smallest while the cumulative total stays under budget
  const Index nH = w.dim();
  const Index nAux = 2 * nH;
  std::vector<double> col_weight(nAux, 0.0);
  auto accumulate_cols = [&](const BandedMatrix& d, Index offset) {
    BandedMatrix g_star_block = d.scaled_rows(wms);  // <Q>^{-s} D_star : block of G^*
    for (Index j = 0; j < nH; ++j) {
      double acc = 0.0;
      Index ilo = std::max<Index>(0, j - g_star_block.ku);
      Index ihi = std::min<Index>(nH - 1, j + g_star_block.kl);
      for (Index i = ilo; i <= ihi; ++i) acc += std::norm(g_star_block.band(g_star_block.ku + i - j, j));
      for (const auto& e : g_star_block.wrap)
        if (e.col == j) acc += std::norm(e.value);
      col_weight[offset + j] = std::sqrt(acc);
    }
  };
  accumulate_cols(dl, 0);
  accumulate_cols(dr, nH);

  std::vector<Index> order(nAux);
  for (Index i = 0; i < nAux; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](Index a, Index b) { return col_weight[a] < col_weight[b]; });
  double total = 0.0;
  for (double v : col_weight) total += v;
  const double budget = 1e-12 * std::max(1.0, total);
  double dropped = 0.0;
  std::vector<bool> keep(nAux, true);
  for (Index idx : order) {
    if (dropped + col_weight[idx] > budget) break;
    dropped += col_weight[idx];
    keep[idx] = false;
  }
  f.dropped_weight = dropped;
  for (Index i = 0; i < nAux; ++i)
    if (keep[i]) f.aux_window.push_back(i);

  // boundedness certificate: op_norm(D) on growing interior sub-windows
  const Index L = w.half_width;
  for (Index frac : {4, 2}) f.ladder_half_widths.push_back(L / frac);
  f.ladder_half_widths.push_back(3 * L / 4);
  for (Index l : f.ladder_half_widths) {
    Vec maskH = Vec::Zero(nH);
    for (Index x = -l; x <= l; ++x) {
      maskH[w.flat(x, 0)] = 1.0;
      maskH[w.flat(x, 1)] = 1.0;
    }
    auto masked = [&](const BandedMatrix& d) {
      return make_banded(Space::H, d.scaled_rows(maskH).scaled_cols(maskH));
    };
    double nrm = op_norm(make_hpair(masked(dl), masked(dr)));
    f.d_norm_ladder.push_back(nrm);
  }
  // superlinear growth across the ladder flags a weight too strong for the
  // coin decay
  const double base = std::max(f.d_norm_ladder.front(), 1e-12);
  const double len_ratio =
      double(f.ladder_half_widths.back()) / double(std::max<Index>(1, f.ladder_half_widths.front()));
  const double growth_exponent = std::log(f.d_norm_ladder.back() / base) / std::log(len_ratio);
  if (f.d_norm_ladder.back() > 10.0 * base && growth_exponent > 1.1)
    throw ShortRangeViolationError("op_norm(D) grows superlinearly across sub-windows (s too large "
                                   "for the coin decay)");
  return f;
}

void attach_factorization(WalkModel& model, double s) {
  model.factorization = factorize_perturbation(model, s);
}

// ---------------------------------------------------------------------------
// point spectrum
// ---------------------------------------------------------------------------

PointSpectrumReport detect_point_spectrum(const WindowedOperator& U, const LatticeWindow& w,
                                          double participation_threshold) {
  CayleyResult cr = cayley_unchecked(U);
  Eigen::SelfAdjointEigenSolver<Mat> es(cr.h0);
  if (es.info() != Eigen::Success) throw NonConvergenceError("dense eigensolve");
  const Index n = cr.h0.rows();
  const cplx emip(std::cos(cr.phi), -std::sin(cr.phi));

  PointSpectrumReport rep;
  std::vector<std::pair<double, double>> pairs;  // (phase, participation)
  for (Index k = 0; k < n; ++k) {
    const double h = es.eigenvalues()[k];
    const cplx lam = emip * (h - cplx(0, 1)) / (h + cplx(0, 1));
    Vec v = es.eigenvectors().col(k);
    // participation ratio in sites: (sum p_x)^2 / sum p_x^2, p_x site mass
    double s2 = 0.0, s4 = 0.0;
    for (Index x = 0; x < w.site_count(); ++x) {
      const double px = std::norm(v[2 * x]) + std::norm(v[2 * x + 1]);
      s2 += px;
      s4 += px * px;
    }
    const double pr = (s4 > 0) ? (s2 * s2 / s4) : 0.0;
    pairs.emplace_back(wrap_angle(std::arg(lam)), pr);
  }
  std::sort(pairs.begin(), pairs.end());
  for (auto& [ph, pr] : pairs) {
    rep.eigenphases.push_back(ph);
    rep.participation_ratios.push_back(pr);
    if (pr < participation_threshold * double(w.site_count())) rep.localized_phases.push_back(ph);
  }
  return rep;
}

}  // namespace uniscatter
