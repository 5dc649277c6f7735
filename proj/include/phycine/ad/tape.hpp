#pragma once

#include <functional>
#include <vector>

#include "phycine/ad/tensor.hpp"

namespace phycine::ad {

// Gradient buffers for one backward pass, indexed by node id.
// Buffers are zero-initialized on first touch so untouched nodes cost nothing.
class GradStore {
public:
    double* acquire(int node, int size);
    const std::vector<double>* find(int node) const;

private:
    friend class Tape;
    std::vector<std::vector<double>> buf_;
};

// Receives the node's output gradient, accumulates into parent buffers.
using BackwardFn = std::function<void(const std::vector<double>& out_grad, GradStore& grads)>;

// Reverse-mode tape. Nodes are recorded in execution order; backward walks
// them once in reverse, so accumulation order is fixed and gradients are
// bitwise deterministic. Tapes are single-threaded by design.
class Tape {
public:
    // Register a leaf. Returns a tracked copy of `value`.
    Tensor watch(const Tensor& value);

    // Used by ops: append a node, return its id.
    int record(const std::vector<int>& out_shape, BackwardFn fn);

    // `loss` must be a scalar recorded on this tape. May be called again
    // (buffers reset). Leaves unreachable from the loss read back as zeros.
    void backward(const Tensor& loss);

    // Gradient of the last backward() w.r.t. `t` (any node of this tape).
    Tensor grad(const Tensor& t) const;

    std::size_t node_count() const { return shapes_.size(); }

private:
    std::vector<std::vector<int>> shapes_;
    std::vector<BackwardFn> fns_;
    GradStore grads_;
    bool ran_backward_ = false;
};

}  // namespace phycine::ad
