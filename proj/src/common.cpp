#include "uniscatter/common.hpp"

namespace uniscatter {

ExtrapolatedValue extrapolate_to_zero(const std::vector<double>& params,
                                      const std::vector<cplx>& samples, int order) {
  if (params.size() != samples.size() || params.empty())
    throw Error(ErrorCode::precondition, "extrapolation needs matching non-empty ladders");
  if (order < 0 || order > 2) throw Error(ErrorCode::precondition, "extrapolation order in 0..2");
  const int npt = order + 1;
  if (static_cast<int>(params.size()) < npt)
    throw Error(ErrorCode::precondition, "extrapolation needs order+1 samples");

  ExtrapolatedValue out;
  out.params = params;
  out.samples = samples;
  for (size_t i = 1; i < samples.size(); ++i)
    out.step_deltas.push_back(std::abs(samples[i] - samples[i - 1]));
  for (size_t i = 1; i < out.step_deltas.size(); ++i)
    if (out.step_deltas[i] > out.step_deltas[i - 1]) out.monotone_trend = false;

  // Neville's scheme on the last npt points, evaluated at parameter 0.
  const size_t base = params.size() - npt;
  std::vector<cplx> p(samples.begin() + base, samples.end());
  std::vector<double> t(params.begin() + base, params.end());
  for (int level = 1; level < npt; ++level) {
    for (int i = 0; i + level < npt; ++i) {
      const double ti = t[i], tj = t[i + level];
      p[i] = (tj * p[i] - ti * p[i + 1]) / (tj - ti);
    }
  }
  out.value = p[0];
  return out;
}

}  // namespace uniscatter
