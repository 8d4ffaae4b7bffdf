#include "uniscatter/scattering.hpp"

#include <algorithm>
#include <cmath>

namespace uniscatter {

namespace {

Vec aux_basis_vector(Index dim, Index j) {
  Vec e = Vec::Zero(dim);
  e[j] = 1.0;
  return e;
}

// mass sitting on the outermost two site shells (about to cross the seam)
double seam_mass(const LatticeWindow& w, const Vec& v) {
  const Index nH = w.dim();
  const bool doubled = v.size() == 2 * nH;
  double acc = 0.0;
  for (Index x : {-w.half_width, -w.half_width + 1, w.half_width - 1, w.half_width})
    for (Index comp = 0; comp < 2; ++comp) {
      acc += std::norm(v[w.flat(x, comp)]);
      if (doubled) acc += std::norm(v[nH + w.flat(x, comp)]);
    }
  return acc;
}

}  // namespace

Vec scattering_horizon_apply(const WindowedOperator& U, const WindowedOperator& U0,
                             const WindowedOperator& J, const LatticeWindow& w, const Vec& psi,
                             Index n) {
  // stationary packets return to the interaction region, so the meaningful
  // horizon is 2n; the seam guard below catches the rare drifting remainder
  const Index radius = effective_support_radius(w, psi);
  if (radius + 2 * n >= w.half_width) throw NoWrapError(radius + 2 * n + 1, w.half_width);

  const double total = psi.squaredNorm();
  double leak = 0.0;
  Vec y = psi;
  for (Index t = 0; t < n; ++t) y = U0.apply(y);
  leak = std::max(leak, seam_mass(w, y));
  y = J.apply(y);
  for (Index t = 0; t < 2 * n; ++t) {
    y = U.apply(y, true);
    if (t % 64 == 0) leak = std::max(leak, seam_mass(w, y));
  }
  y = J.apply(y, true);
  for (Index t = 0; t < n; ++t) y = U0.apply(y);
  leak = std::max(leak, seam_mass(w, y));
  if (leak > 1e-8 * total)
    throw NonConvergenceError("scattering horizon (mass reached the wrap seam)");
  return y;
}

Vec scattering_apply(const WalkModel& model, const DirectSumState& psi0, Index n) {
  return scattering_horizon_apply(model.U, model.U0, model.J, model.window, psi0.values, n);
}

Vec t_apply(const WalkModel& model, cplx z, int sign, const Vec& psi0) {
  if (std::fabs(std::abs(z) - 1.0) < 1e-14)
    throw Error(ErrorCode::precondition, "T_pm undefined on the unit circle");
  if (sign > 0) {
    // T_+(z) = U0^* J^* V - V^* R(z) V
    Vec v = model.V.apply(psi0);
    Vec first = model.U0.apply(model.J.apply(v, true), true);
    ResolventFactorization f(model.U, z);
    Vec second = model.V.apply(f.R(v), true);
    return first - second;
  }
  // T_-(z) = (T_+(1/conj(z)))^* = V^* J U0 - V^* R(1/conj(z))^* V
  Vec first = model.V.apply(model.J.apply(model.U0.apply(psi0)), true);
  ResolventFactorization f(model.U, 1.0 / std::conj(z));
  Vec second = model.V.apply(f.R_adj(model.V.apply(psi0)), true);
  return first - second;
}

// ---------------------------------------------------------------------------
// boundary values of B(z) = G R(z) G^*
// ---------------------------------------------------------------------------

BLimitResult b_limit(const WalkModel& model, double theta, int sign, const EpsSchedule& sched) {
  const Factorization& fact = model.require_factorization();
  const auto& aux = fact.aux_window;
  const Index na = static_cast<Index>(aux.size());
  const Index nAux = model.window.dim_doubled();

  std::vector<Vec> gcols(na);  // G^* e_j in H
  for (Index j = 0; j < na; ++j)
    gcols[j] = fact.G.apply(aux_basis_vector(nAux, aux[j]), true);

  BLimitResult out;
  out.eps_ladder = sched.eps;
  std::vector<Mat> samples;
  for (double e : sched.eps) {
    RadialPoint pt(e, sign, theta);
    ResolventFactorization f(model.U, pt.z());
    Mat b(na, na);
    for (Index j = 0; j < na; ++j) {
      Vec rc = f.R(gcols[j]);
      for (Index i = 0; i < na; ++i) b(i, j) = gcols[i].dot(rc);
    }
    samples.push_back(std::move(b));
    if (samples.size() > 1)
      out.cauchy_deltas.push_back((samples.back() - samples[samples.size() - 2]).norm());
  }
  if (out.cauchy_deltas.size() >= 2) {
    const double first = out.cauchy_deltas.front();
    const double last = out.cauchy_deltas.back();
    if (last > 4.0 * first && last > 1e-6)
      throw BoundaryLimitError("Cauchy deltas grow from " + std::to_string(first) + " to " +
                               std::to_string(last));
  }

  // entrywise polynomial extrapolation through the last order+1 ladder points
  const int npt = sched.order + 1;
  out.b = Mat::Zero(na, na);
  std::vector<double> params(sched.eps.end() - npt, sched.eps.end());
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < na; ++j) {
      std::vector<cplx> vals;
      for (int t = 0; t < npt; ++t) vals.push_back(samples[samples.size() - npt + t](i, j));
      out.b(i, j) = extrapolate_to_zero(params, vals, sched.order).value;
    }
  return out;
}

// ---------------------------------------------------------------------------
// Z0 matrices
// ---------------------------------------------------------------------------

namespace {

Vec t0_adjoint_column(const WalkModel& model, Z0Operand which, Index aux_flat) {
  const Factorization& fact = model.require_factorization();
  const Index nAux = model.window.dim_doubled();
  Vec e = aux_basis_vector(nAux, aux_flat);
  if (which == Z0Operand::G0) return fact.G0.apply(e);  // G0 is self-adjoint
  // (G J U0)^* = U0^* J^* G^*
  return model.U0.apply(model.J.apply(fact.G.apply(e, true), true), true);
}

}  // namespace

Mat z0_matrix(const WalkModel& model, double theta, Z0Operand which, double exclusion_radius) {
  const Factorization& fact = model.require_factorization();
  Fiber fiber = fiber_at(model, theta, exclusion_radius);
  const Index na = static_cast<Index>(fact.aux_window.size());
  Mat z(fiber.dim(), na);
  for (Index j = 0; j < na; ++j) {
    Vec col = t0_adjoint_column(model, which, fact.aux_window[j]);
    z.col(j) = f0_apply(model, col, fiber).coeff;
  }
  return z;
}

Mat delta_form_matrix(const WalkModel& model, double theta, Z0Operand which,
                      const EpsSchedule& sched) {
  const Factorization& fact = model.require_factorization();
  const auto& aux = fact.aux_window;
  const Index na = static_cast<Index>(aux.size());

  std::vector<Vec> cols(na);
  for (Index j = 0; j < na; ++j) cols[j] = t0_adjoint_column(model, which, aux[j]);

  std::vector<Mat> samples;
  for (double e : sched.eps) {
    RadialPoint pt(e, +1, theta);
    ResolventFactorization f(model.U0, pt.z());
    Mat d(na, na);
    for (Index j = 0; j < na; ++j) {
      Vec dc = f.delta(cols[j]);
      for (Index i = 0; i < na; ++i) d(i, j) = cols[i].dot(dc);
    }
    samples.push_back(std::move(d));
  }
  const int npt = sched.order + 1;
  std::vector<double> params(sched.eps.end() - npt, sched.eps.end());
  Mat out(na, na);
  for (Index i = 0; i < na; ++i)
    for (Index j = 0; j < na; ++j) {
      std::vector<cplx> vals;
      for (int t = 0; t < npt; ++t) vals.push_back(samples[samples.size() - npt + t](i, j));
      out(i, j) = extrapolate_to_zero(params, vals, sched.order).value;
    }
  return out;
}

// ---------------------------------------------------------------------------
// u_pm by packet fibering
// ---------------------------------------------------------------------------

namespace {

Index jj_horizon_for(const ScatteringOptions& opts, double sigma) {
  if (opts.jj_horizon > 0) return opts.jj_horizon;
  return std::max<Index>(200, static_cast<Index>(std::ceil(5.0 / sigma)));
}

// Galerkin matrices: M(b,a) = <psi_b, Op psi_a>, G(b,a) = <psi_b, psi_a>,
// corrected matrix G^{-1} M
Mat galerkin_matrix(const std::vector<DirectSumState>& packets,
                    const std::vector<Vec>& op_packets) {
  const Index d = static_cast<Index>(packets.size());
  Mat m(d, d), g(d, d);
  for (Index b = 0; b < d; ++b)
    for (Index a = 0; a < d; ++a) {
      m(b, a) = packets[b].values.dot(op_packets[a]);
      g(b, a) = packets[b].values.dot(packets[a].values);
    }
  return g.partialPivLu().solve(m);
}

}  // namespace

UFiberResult u_fiber(const WalkModel& model, double theta, int sign,
                     const ScatteringOptions& opts) {
  Fiber fiber = fiber_at(model, theta, opts.exclusion_radius);
  const Index d = fiber.dim();

  UFiberResult out;
  out.sigma_ladder = opts.sigma;
  std::vector<Mat> per_sigma;
  for (double sigma : opts.sigma) {
    std::vector<DirectSumState> packets;
    std::vector<Vec> jj_packets;
    WaveSchedule sched;
    sched.horizon = jj_horizon_for(opts, sigma);
    for (Index c = 0; c < d; ++c) {
      packets.push_back(wave_packet(model, fiber.channels[c], theta, sigma));
      jj_packets.push_back(
          jj_wave_apply(model, sign, packets.back(), WaveMethod::strong, sched, opts.threads)
              .result);
    }
    per_sigma.push_back(galerkin_matrix(packets, jj_packets));
  }

  // extrapolate sigma -> 0 in sigma^2 (the profile is symmetric about theta)
  Mat u(d, d);
  std::vector<double> params;
  for (double s : opts.sigma) params.push_back(s * s);
  const int order = std::min<int>(1, static_cast<int>(params.size()) - 1);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      std::vector<cplx> vals;
      for (const auto& m : per_sigma) vals.push_back(m(i, j));
      u(i, j) = extrapolate_to_zero(params, vals, order).value;
    }
  out.asymmetry = (u - Mat(u.adjoint())).norm();
  out.u = 0.5 * (u + Mat(u.adjoint()));
  return out;
}

// ---------------------------------------------------------------------------
// S(theta)
// ---------------------------------------------------------------------------

SMatrixSample smatrix_formula(const WalkModel& model, double theta, int sign,
                              const ScatteringOptions& opts) {
  const Factorization& fact = model.require_factorization();
  SMatrixSample sample;
  sample.theta = theta;
  sample.source = sign > 0 ? SMatrixSource::formula_plus : SMatrixSource::formula_minus;
  sample.fiber = fiber_at(model, theta, opts.exclusion_radius);
  sample.eps_ladder = opts.eps.eps;
  sample.dropped_weight = fact.dropped_weight;

  UFiberResult uf = u_fiber(model, theta, sign, opts);
  sample.u_asymmetry = uf.asymmetry;
  sample.sigma_ladder = opts.sigma;

  BLimitResult bl = b_limit(model, theta, sign, opts.eps);
  sample.eps_deltas = bl.cauchy_deltas;

  Mat z_g0 = z0_matrix(model, theta, Z0Operand::G0, opts.exclusion_radius);
  Mat z_gju = z0_matrix(model, theta, Z0Operand::GJU0, opts.exclusion_radius);

  if (sign > 0) {
    sample.s = uf.u + two_pi * (z_gju * z_g0.adjoint() - z_g0 * bl.b * z_g0.adjoint());
  } else {
    sample.s = uf.u - two_pi * (z_g0 * z_gju.adjoint() - z_g0 * bl.b * z_g0.adjoint());
  }
  return sample;
}

namespace {

SMatrixSample smatrix_packet_impl(const WalkModel& model, double theta,
                                  const ScatteringOptions& opts, const WindowedOperator& U,
                                  const WindowedOperator& U0, const WindowedOperator& J) {
  SMatrixSample sample;
  sample.theta = theta;
  sample.source = SMatrixSource::packet_oracle;
  sample.fiber = fiber_at(model, theta, opts.exclusion_radius);
  sample.sigma_ladder = opts.sigma;
  const Index d = sample.fiber.dim();

  std::vector<Mat> per_sigma;
  for (double sigma : opts.sigma) {
    std::vector<DirectSumState> packets;
    std::vector<Vec> s_packets;
    for (Index c = 0; c < d; ++c) {
      packets.push_back(wave_packet(model, sample.fiber.channels[c], theta, sigma));
      s_packets.push_back(scattering_horizon_apply(U, U0, J, model.window,
                                                   packets.back().values, opts.packet_horizon));
    }
    per_sigma.push_back(galerkin_matrix(packets, s_packets));
  }

  std::vector<double> params;
  for (double s : opts.sigma) params.push_back(s * s);
  const int order = std::min<int>(1, static_cast<int>(params.size()) - 1);
  sample.s.resize(d, d);
  for (Index i = 0; i < d; ++i)
    for (Index j = 0; j < d; ++j) {
      std::vector<cplx> vals;
      for (const auto& m : per_sigma) vals.push_back(m(i, j));
      sample.s(i, j) = extrapolate_to_zero(params, vals, order).value;
    }
  return sample;
}

}  // namespace

SMatrixSample smatrix_packet(const WalkModel& model, double theta, const ScatteringOptions& opts) {
  return smatrix_packet_impl(model, theta, opts, model.U, model.U0, model.J);
}

SMatrixSample smatrix_packet_identity_surrogate(const WalkModel& model, double theta,
                                                const ScatteringOptions& opts) {
  auto id = make_identity(Space::H0, model.window.dim_doubled());
  return smatrix_packet_impl(model, theta, opts, model.U0, model.U0, id);
}

// ---------------------------------------------------------------------------
// pm_bis
// ---------------------------------------------------------------------------

PmBisResult pm_bis_check(const WalkModel& model, double theta, const DirectSumState& psi0,
                         const DirectSumState& phi0, int sign, const ScatteringOptions& opts,
                         const SMatrixSample* formula_sample, const UFiberResult* u_sample) {
  PmBisResult out;

  SMatrixSample local_sample;
  if (!formula_sample) {
    local_sample = smatrix_formula(model, theta, sign, opts);
    formula_sample = &local_sample;
  }
  UFiberResult local_u;
  if (!u_sample) {
    local_u = u_fiber(model, theta, sign, opts);
    u_sample = &local_u;
  }

  FiberVector f_psi = f0_apply(model, psi0.values, formula_sample->fiber);
  FiberVector f_phi = f0_apply(model, phi0.values, formula_sample->fiber);
  out.lhs = f_phi.coeff.dot((formula_sample->s - u_sample->u) * f_psi.coeff);

  for (double e : opts.eps.eps) {
    const cplx z = (1.0 - e) * cplx(std::cos(theta), std::sin(theta));
    ResolventFactorization f0(model.U0, z);
    Vec dpsi = f0.delta(psi0.values);
    Vec dphi = f0.delta(phi0.values);
    Vec tpsi = t_apply(model, z, sign, dpsi);
    out.rhs_ladder.push_back(double(sign) * two_pi * dphi.dot(tpsi));
  }
  auto ext = extrapolate_to_zero(opts.eps.eps, out.rhs_ladder, opts.eps.order);
  out.rhs = ext.value;
  out.monotone_trend = ext.monotone_trend;
  const double scale = std::max({std::abs(out.lhs), std::abs(out.rhs), 1e-12});
  out.residual = std::abs(out.lhs - out.rhs) / scale;
  return out;
}

ChannelCoefficients coefficients(const SMatrixSample& sample) {
  ChannelCoefficients cc;
  cc.fiber = sample.fiber;
  const Index d = sample.s.rows();
  cc.probs = sample.s.cwiseAbs2();
  cc.transmission = Eigen::MatrixXd::Zero(d, d);
  cc.reflection = Eigen::MatrixXd::Zero(d, d);
  for (Index b = 0; b < d; ++b)
    for (Index a = 0; a < d; ++a) {
      if (sample.fiber.channels[b].side != sample.fiber.channels[a].side)
        cc.transmission(b, a) = cc.probs(b, a);
      else
        cc.reflection(b, a) = cc.probs(b, a);
    }
  cc.col_sums = cc.probs.colwise().sum();
  cc.row_sums = cc.probs.rowwise().sum();
  return cc;
}

double modulus_distance(const SMatrixSample& a, const SMatrixSample& b) {
  if (a.s.rows() != b.s.rows()) throw DimensionMismatchError(a.s.rows(), b.s.rows());
  return (a.s.cwiseAbs() - b.s.cwiseAbs()).lpNorm<Eigen::Infinity>();
}

}  // namespace uniscatter
