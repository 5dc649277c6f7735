#pragma once

#include <cstdint>
#include <vector>

#include "phycine/ad/tensor.hpp"

namespace phycine::opt {

struct AdamConfig {
    double lr = 3e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Moments are addressed positionally, so the parameter list must keep a fixed
// order across steps (and across checkpoint save/load).
struct Adam {
    AdamConfig cfg;
    std::int64_t t = 0;
    std::vector<std::vector<double>> m, v;

    explicit Adam(AdamConfig c = {}) : cfg(c) {}

    // params[i] is updated in place from grads[i]. A zero gradient entry with
    // zero moments yields an exactly-zero update (masking relies on this).
    void step(const std::vector<ad::Tensor*>& params, const std::vector<const ad::Tensor*>& grads);
};

}  // namespace phycine::opt
