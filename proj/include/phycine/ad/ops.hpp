#pragma once

#include <vector>

#include "phycine/ad/tape.hpp"
#include "phycine/ad/tensor.hpp"

namespace phycine::ad {

// l2_normalize clamps the norm from below at this floor.
inline constexpr double kSafeNormFloor = 1e-8;

// Elementwise; shapes must match exactly (use broadcast() first).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);

Tensor scale(const Tensor& a, double s);
Tensor add_scalar(const Tensor& a, double c);

// Rank-2 only: [n,m] x [m,p] -> [n,p].
Tensor matmul(const Tensor& a, const Tensor& b);

Tensor concat(const std::vector<Tensor>& parts, int axis);
Tensor slice(const Tensor& t, int axis, int start, int len);
Tensor reshape(const Tensor& t, const std::vector<int>& shape);

// Input rank may be lower than the target; leading axes of extent 1 are
// implied. Every axis must either match or have input extent 1.
Tensor broadcast(const Tensor& t, const std::vector<int>& shape);

Tensor sum(const Tensor& t);
Tensor mean(const Tensor& t);
Tensor sum_axis(const Tensor& t, int axis);

Tensor exp(const Tensor& t);
Tensor log(const Tensor& t);  // domain error on non-positive input
Tensor tanh(const Tensor& t);
Tensor relu(const Tensor& t);
Tensor sigmoid(const Tensor& t);
Tensor softplus(const Tensor& t);
Tensor square(const Tensor& t);

Tensor softmax(const Tensor& t, int axis);
Tensor l2_normalize(const Tensor& t, int axis);

// Compositions of the ops above; the max shift in logsumexp is detached, so
// the gradient is still the exact softmax.
Tensor logsumexp(const Tensor& t, int axis);
Tensor log_softmax(const Tensor& t, int axis);

}  // namespace phycine::ad
