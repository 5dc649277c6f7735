#include "phycine/ad/random_graph.hpp"

#include <cmath>
#include <memory>
#include <vector>

#include "phycine/ad/grad_check.hpp"
#include "phycine/ad/ops.hpp"
#include "phycine/common/rng.hpp"

namespace phycine::ad {

namespace {

enum class Op {
    Add, Sub, Mul, Scale, AddScalar, Matmul, Concat, Slice, Reshape, Broadcast,
    Sum, Mean, SumAxis, Exp, SafeLog, Tanh, Relu, Sigmoid, Softplus, Square,
    Softmax, L2Normalize, Logsumexp, LogSoftmax,
};

constexpr Op kAllOps[] = {
    Op::Add, Op::Sub, Op::Mul, Op::Scale, Op::AddScalar, Op::Matmul, Op::Concat,
    Op::Slice, Op::Reshape, Op::Broadcast, Op::Sum, Op::Mean, Op::SumAxis,
    Op::Exp, Op::SafeLog, Op::Tanh, Op::Relu, Op::Sigmoid, Op::Softplus,
    Op::Square, Op::Softmax, Op::L2Normalize, Op::Logsumexp, Op::LogSoftmax,
};

// Some construction choices (taming factors, relu shifts) depend on tensor
// values. They are recorded on the first build and replayed on every
// finite-difference probe, so all probes evaluate the same fixed function.
struct Trace {
    std::vector<double> vals;
    std::size_t cursor = 0;
    bool recorded = false;

    double step(double fresh) {
        if (!recorded) {
            vals.push_back(fresh);
            return fresh;
        }
        return vals[cursor++];
    }
};

// Keeps intermediate magnitudes small enough that exp/square chains stay
// finite and finite differences stay well-conditioned.
Tensor tame(const Tensor& t, Trace& trace) {
    double m = 0.0;
    for (double v : t.data) m = std::max(m, std::abs(v));
    const double factor = trace.step(m > 6.0 ? 6.0 / m : 1.0);
    return factor == 1.0 ? t : scale(t, factor);
}

// Adapt `t` to exactly `size` elements as a rank-1 tensor, reusing concat and
// slice so shape plumbing shows up in every graph.
Tensor fit(const Tensor& t, int size) {
    Tensor flat = reshape(t, {t.size()});
    while (flat.size() < size) flat = concat({flat, flat}, 0);
    if (flat.size() > size) flat = slice(flat, 0, 0, size);
    return flat;
}

std::vector<int> random_shape(Rng& rng, int max_rank = 3, int max_dim = 4) {
    const int rank = 1 + rng.uniform_int(max_rank);
    std::vector<int> shape(rank);
    for (int a = 0; a < rank; ++a) shape[a] = 1 + rng.uniform_int(max_dim);
    return shape;
}

Tensor apply_op(Op op, const Tensor& cur, const std::vector<Tensor>& pool, Rng& rng,
                Trace& trace) {
    const Tensor t = tame(cur, trace);
    auto partner_like = [&](const Tensor& ref) {
        const Tensor& src = pool[rng.uniform_int(static_cast<int>(pool.size()))];
        return reshape(fit(src, ref.size()), ref.shape);
    };
    switch (op) {
        case Op::Add: return add(t, partner_like(t));
        case Op::Sub: return sub(t, partner_like(t));
        case Op::Mul: return mul(t, partner_like(t));
        case Op::Scale: return scale(t, rng.uniform(-2.0, 2.0));
        case Op::AddScalar: return add_scalar(t, rng.uniform(-1.0, 1.0));
        case Op::Matmul: {
            const int n = 1 + rng.uniform_int(3);
            const int m = 1 + rng.uniform_int(3);
            const int p = 1 + rng.uniform_int(3);
            Tensor a = reshape(fit(t, n * m), {n, m});
            Tensor b = reshape(fit(pool[rng.uniform_int(static_cast<int>(pool.size()))], m * p),
                               {m, p});
            return matmul(a, tame(b, trace));
        }
        case Op::Concat: {
            const int axis = rng.uniform_int(t.rank());
            return concat({t, partner_like(t)}, axis);
        }
        case Op::Slice: {
            const int axis = rng.uniform_int(t.rank());
            const int len = 1 + rng.uniform_int(t.shape[axis]);
            const int start = rng.uniform_int(t.shape[axis] - len + 1);
            return slice(t, axis, start, len);
        }
        case Op::Reshape: return reshape(t, {t.size()});
        case Op::Broadcast: {
            std::vector<int> shape = t.shape;
            shape.insert(shape.begin(), 1 + rng.uniform_int(3));
            return broadcast(t, shape);
        }
        case Op::Sum: return sum(t);
        case Op::Mean: return mean(t);
        case Op::SumAxis: return sum_axis(t, rng.uniform_int(t.rank()));
        case Op::Exp: return exp(t);
        case Op::SafeLog: return log(add_scalar(softplus(t), 0.1));
        case Op::Tanh: return tanh(t);
        case Op::Relu: {
            // Keep every input coordinate well away from the kink: probes move
            // intermediates by eps times a Jacobian that can reach a few
            // hundred, so the margin is generous.
            double shift = 0.1;
            for (int tries = 0; tries < 40; ++tries) {
                bool ok = true;
                for (double v : t.data)
                    if (std::abs(v + shift) < 0.05) ok = false;
                if (ok) break;
                shift += 0.0777;
            }
            shift = trace.step(shift);
            return relu(add_scalar(t, shift));
        }
        case Op::Sigmoid: return sigmoid(t);
        case Op::Softplus: return softplus(t);
        case Op::Square: return square(t);
        case Op::Softmax: return softmax(t, rng.uniform_int(t.rank()));
        case Op::L2Normalize: return l2_normalize(t, rng.uniform_int(t.rank()));
        case Op::Logsumexp: return logsumexp(t, rng.uniform_int(t.rank()));
        case Op::LogSoftmax: return log_softmax(t, rng.uniform_int(t.rank()));
    }
    return t;
}

}  // namespace

double random_graph_grad_error(std::uint64_t seed) {
    Rng shape_rng(derive_seed({seed, 0x517ADEULL}));
    const std::vector<int> x_shape = random_shape(shape_rng);
    Tensor x = Tensor::zeros(x_shape);
    for (double& v : x.data) v = shape_rng.uniform(-2.0, 2.0);
    const int rot = shape_rng.uniform_int(static_cast<int>(std::size(kAllOps)));

    auto trace = std::make_shared<Trace>();
    auto build = [seed, rot, trace](Tape&, const Tensor& xw) {
        // Re-derive the op randomness per call: every probe builds the same
        // graph and consumes the generator identically.
        Rng rng(derive_seed({seed, 0x09C0DEULL}));
        trace->cursor = 0;
        std::vector<Tensor> pool = {xw};
        Tensor cur = xw;
        const int n_ops = static_cast<int>(std::size(kAllOps));
        for (int s = 0; s < n_ops; ++s) {
            cur = apply_op(kAllOps[(rot + s) % n_ops], cur, pool, rng, *trace);
            pool.push_back(cur);
        }
        // Sum over the whole pool so no recorded op ends up with a dead
        // gradient path.
        Tensor loss = Tensor::scalar(0.0);
        for (const Tensor& p : pool) loss = add(loss, mean(p));
        trace->recorded = true;
        return loss;
    };
    return grad_check(build, x, 1e-5);
}

}  // namespace phycine::ad
