#include "phycine/ad/grad_check.hpp"

#include <cmath>

#include "phycine/common/error.hpp"

namespace phycine::ad {

namespace {

double eval(const ScalarFn& f, const Tensor& x) {
    Tape tape;
    Tensor loss = f(tape, tape.watch(x));
    if (!loss.is_scalar())
        raise(ErrorKind::Shape, "grad_check: function output must be scalar, got " +
                                    shape_str(loss.shape));
    return loss.value();
}

}  // namespace

double grad_check(const ScalarFn& f, const Tensor& x, double eps) {
    if (eps <= 0.0) raise(ErrorKind::Usage, "grad_check: eps must be positive");
    Tape tape;
    Tensor xw = tape.watch(x);
    Tensor loss = f(tape, xw);
    if (!loss.is_scalar())
        raise(ErrorKind::Shape, "grad_check: function output must be scalar, got " +
                                    shape_str(loss.shape));
    tape.backward(loss);
    Tensor g = tape.grad(xw);

    double max_rel = 0.0;
    for (int i = 0; i < x.size(); ++i) {
        Tensor xp = x.detached();
        Tensor xm = x.detached();
        xp.data[i] += eps;
        xm.data[i] -= eps;
        const double fd = (eval(f, xp) - eval(f, xm)) / (2.0 * eps);
        const double rel = std::abs(g.data[i] - fd) / std::max(1.0, std::abs(g.data[i]));
        max_rel = std::max(max_rel, rel);
    }
    return max_rel;
}

}  // namespace phycine::ad
