#include "lgmrec/optim.hpp"

#include <algorithm>
#include <cmath>

#include "lgmrec/error.hpp"

namespace lgmrec {

AdamState AdamState::zeros_like(std::span<const DenseMatrix> params) {
  AdamState s;
  for (const auto& p : params) {
    s.m.emplace_back(p.rows(), p.cols());
    s.v.emplace_back(p.rows(), p.cols());
  }
  return s;
}

void adam_step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads, AdamState& state,
               const AdamOptions& opts) {
  if (params.size() != grads.size() || params.size() != state.m.size() ||
      params.size() != state.v.size()) {
    fail(ErrorCode::kDimension, "adam_step: parameter/gradient/state counts differ");
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (!params[i].same_shape(grads[i]) || !params[i].same_shape(state.m[i]) ||
        !params[i].same_shape(state.v[i])) {
      fail(ErrorCode::kDimension, "adam_step: shape mismatch at parameter " + std::to_string(i));
    }
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(opts.beta1, t);
  const double bc2 = 1.0 - std::pow(opts.beta2, t);
  for (std::size_t i = 0; i < params.size(); ++i) {
    auto p = params[i].values();
    const auto g = grads[i].values();
    auto m = state.m[i].values();
    auto v = state.v[i].values();
    for (std::size_t k = 0; k < p.size(); ++k) {
      m[k] = opts.beta1 * m[k] + (1.0 - opts.beta1) * g[k];
      v[k] = opts.beta2 * v[k] + (1.0 - opts.beta2) * g[k] * g[k];
      const double m_hat = m[k] / bc1;
      const double v_hat = v[k] / bc2;
      p[k] -= opts.lr * m_hat / (std::sqrt(v_hat) + opts.eps);
    }
  }
}

GradCheckResult finite_difference_check(const std::function<double(const ParamSet&)>& loss,
                                        ParamSet params, std::span<const DenseMatrix> analytic,
                                        double eps, double floor) {
  if (analytic.size() != params.size()) {
    fail(ErrorCode::kDimension, "finite_difference_check: gradient count mismatch");
  }
  GradCheckResult worst;
  for (std::size_t p = 0; p < params.size(); ++p) {
    if (!analytic[p].same_shape(params[p])) {
      fail(ErrorCode::kDimension, "finite_difference_check: gradient shape mismatch");
    }
    for (std::size_t k = 0; k < params[p].size(); ++k) {
      double& x = params[p].values()[k];
      const double saved = x;
      x = saved + eps;
      const double up = loss(params);
      x = saved - eps;
      const double down = loss(params);
      x = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = analytic[p].values()[k];
      const double denom = std::max({std::abs(a), std::abs(numeric), floor});
      const double rel = std::abs(a - numeric) / denom;
      if (rel > worst.max_rel_error) worst = {rel, p, k, a, numeric};
    }
  }
  return worst;
}

}  // namespace lgmrec
