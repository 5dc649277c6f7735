#pragma once

#include <functional>

#include "phycine/ad/tape.hpp"

namespace phycine::ad {

// Builds a scalar loss from a watched copy of the input.
using ScalarFn = std::function<Tensor(Tape&, const Tensor&)>;

// Compares the analytic gradient of f at x against central finite differences
// with step eps, coordinate by coordinate. Returns the maximum relative error
// |analytic - fd| / max(1, |analytic|).
double grad_check(const ScalarFn& f, const Tensor& x, double eps);

}  // namespace phycine::ad
