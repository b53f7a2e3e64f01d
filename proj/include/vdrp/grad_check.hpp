// Copyright 2026 The VDRP Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>

#include "vdrp/tensor.hpp"

namespace vdrp {

// Scalar objective. When `grad` is non-null the function must write the
// analytic gradient (same shape as params) into it.
using ScalarFunction = std::function<double(const Tensor& params, Tensor* grad)>;

// Max over coordinates of |analytic - central difference| / max(1, |analytic|).
// Throws NumericError if any evaluation is non-finite.
double grad_check(const ScalarFunction& f, const Tensor& params, double eps);

}  // namespace vdrp
