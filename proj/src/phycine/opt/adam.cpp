#include "phycine/opt/adam.hpp"

#include <cmath>

#include "phycine/common/error.hpp"

namespace phycine::opt {

using ad::Tensor;

void Adam::step(const std::vector<Tensor*>& params, const std::vector<const Tensor*>& grads) {
    if (params.size() != grads.size())
        raise(ErrorKind::Invariant, "adam: params/grads count mismatch");
    if (m.empty()) {
        for (const Tensor* p : params) {
            m.emplace_back(p->size(), 0.0);
            v.emplace_back(p->size(), 0.0);
        }
    }
    if (m.size() != params.size())
        raise(ErrorKind::Invariant, "adam: parameter list changed size between steps");
    ++t;
    const double bc1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double bc2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        Tensor& p = *params[i];
        const Tensor& g = *grads[i];
        if (g.size() != p.size() || static_cast<std::size_t>(p.size()) != m[i].size())
            raise(ErrorKind::Invariant, "adam: gradient shape mismatch at parameter " +
                                            std::to_string(i));
        for (int j = 0; j < p.size(); ++j) {
            double& mj = m[i][j];
            double& vj = v[i][j];
            const double gj = g.data[j];
            mj = cfg.beta1 * mj + (1.0 - cfg.beta1) * gj;
            vj = cfg.beta2 * vj + (1.0 - cfg.beta2) * gj * gj;
            p.data[j] -= cfg.lr * (mj / bc1) / (std::sqrt(vj / bc2) + cfg.eps);
        }
    }
}

}  // namespace phycine::opt
