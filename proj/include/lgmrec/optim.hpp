#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "lgmrec/params.hpp"

namespace lgmrec {

struct AdamOptions {
  double lr = 0.001;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// First/second moment accumulators per parameter plus the shared step counter.
struct AdamState {
  std::vector<DenseMatrix> m;
  std::vector<DenseMatrix> v;
  std::uint64_t step = 0;

  static AdamState zeros_like(std::span<const DenseMatrix> params);
};

/// One bias-corrected Adam update in place.
void adam_step(std::span<DenseMatrix> params, std::span<const DenseMatrix> grads, AdamState& state,
               const AdamOptions& opts);

/// Central-difference gradient check. `loss` must be a deterministic function of the
/// parameter values. Returns the worst |analytic - numeric| / max(|analytic|, |numeric|, floor).
struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t worst_param = 0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
};

GradCheckResult finite_difference_check(const std::function<double(const ParamSet&)>& loss,
                                        ParamSet params, std::span<const DenseMatrix> analytic,
                                        double eps = 1e-5, double floor = 1e-8);

}  // namespace lgmrec
