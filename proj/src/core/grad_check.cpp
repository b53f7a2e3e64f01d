// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#include "vdrp/grad_check.hpp"

#include <algorithm>
#include <cmath>

#include "vdrp/error.hpp"

namespace vdrp {

double grad_check(const ScalarFunction& f, const Tensor& params, double eps) {
  if (!(eps > 0.0)) throw ParameterError("grad_check requires eps > 0");
  Tensor analytic = Tensor::zeros_like(params);
  const double f0 = f(params, &analytic);
  if (!std::isfinite(f0) || !analytic.all_finite()) {
    throw NumericError("grad_check: non-finite value or gradient at the base point");
  }
  Tensor probe = params;
  double worst = 0.0;
  for (std::size_t i = 0; i < params.size(); ++i) {
    const double orig = probe[i];
    probe[i] = orig + eps;
    const double fp = f(probe, nullptr);
    probe[i] = orig - eps;
    const double fm = f(probe, nullptr);
    probe[i] = orig;
    if (!std::isfinite(fp) || !std::isfinite(fm)) {
      throw NumericError("grad_check: non-finite evaluation at coordinate " + std::to_string(i));
    }
    const double numeric = (fp - fm) / (2.0 * eps);
    const double err = std::abs(analytic[i] - numeric) / std::max(1.0, std::abs(analytic[i]));
    worst = std::max(worst, err);
  }
  return worst;
}

}  // namespace vdrp
