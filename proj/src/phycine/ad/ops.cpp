#include "phycine/ad/ops.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

#include "phycine/common/error.hpp"

namespace phycine::ad {

namespace {

Tape* common_tape(const char* op, std::initializer_list<const Tensor*> inputs) {
    Tape* tp = nullptr;
    for (const Tensor* t : inputs) {
        if (!t->on_tape()) continue;
        if (tp && tp != t->tape)
            raise(ErrorKind::Invariant, std::string(op) + ": inputs recorded on different tapes");
        tp = t->tape;
    }
    return tp;
}

void require_same_shape(const char* op, const Tensor& a, const Tensor& b) {
    if (a.shape != b.shape)
        raise(ErrorKind::Shape, std::string(op) + ": shape mismatch " + shape_str(a.shape) +
                                    " vs " + shape_str(b.shape));
}

void require_axis(const char* op, const Tensor& t, int axis) {
    if (axis < 0 || axis >= t.rank())
        raise(ErrorKind::Shape, std::string(op) + ": axis " + std::to_string(axis) +
                                    " out of range for " + shape_str(t.shape));
}

// Collapse `shape` around `axis` into [outer, n, inner].
struct AxisView {
    int outer = 1, n = 1, inner = 1;
};

AxisView axis_view(const std::vector<int>& shape, int axis) {
    AxisView v;
    for (int a = 0; a < axis; ++a) v.outer *= shape[a];
    v.n = shape[axis];
    for (int a = axis + 1; a < static_cast<int>(shape.size()); ++a) v.inner *= shape[a];
    return v;
}

// Shared skeleton for elementwise unary ops. `dfwd` produces the output
// vector, `dbwd(saved, g, ga, n)` accumulates the input gradient; `saved` is
// whichever vector the op asked to keep (input or output).
template <typename Fwd>
Tensor unary(const char* /*op*/, const Tensor& x, Fwd fwd,
             bool save_output,
             void (*bwd)(const std::vector<double>&, const std::vector<double>&, double*, int)) {
    Tensor out;
    out.shape = x.shape;
    const int n = x.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) out.data[i] = fwd(x.data[i]);
    if (x.on_tape()) {
        std::vector<double> saved = save_output ? out.data : x.data;
        const int px = x.node;
        out.tape = x.tape;
        out.node = x.tape->record(out.shape, [px, n, bwd, saved = std::move(saved)](
                                                 const std::vector<double>& g, GradStore& gs) {
            bwd(saved, g, gs.acquire(px, n), n);
        });
    }
    return out;
}

}  // namespace

Tensor add(const Tensor& a, const Tensor& b) {
    require_same_shape("add", a, b);
    Tensor out;
    out.shape = a.shape;
    const int n = a.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) out.data[i] = a.data[i] + b.data[i];
    if (Tape* tp = common_tape("add", {&a, &b})) {
        const int pa = a.node, pb = b.node;
        out.tape = tp;
        out.node = tp->record(out.shape, [pa, pb, n](const std::vector<double>& g, GradStore& gs) {
            if (pa >= 0) {
                double* ga = gs.acquire(pa, n);
                for (int i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (pb >= 0) {
                double* gb = gs.acquire(pb, n);
                for (int i = 0; i < n; ++i) gb[i] += g[i];
            }
        });
    }
    return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
    require_same_shape("sub", a, b);
    Tensor out;
    out.shape = a.shape;
    const int n = a.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) out.data[i] = a.data[i] - b.data[i];
    if (Tape* tp = common_tape("sub", {&a, &b})) {
        const int pa = a.node, pb = b.node;
        out.tape = tp;
        out.node = tp->record(out.shape, [pa, pb, n](const std::vector<double>& g, GradStore& gs) {
            if (pa >= 0) {
                double* ga = gs.acquire(pa, n);
                for (int i = 0; i < n; ++i) ga[i] += g[i];
            }
            if (pb >= 0) {
                double* gb = gs.acquire(pb, n);
                for (int i = 0; i < n; ++i) gb[i] -= g[i];
            }
        });
    }
    return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
    require_same_shape("mul", a, b);
    Tensor out;
    out.shape = a.shape;
    const int n = a.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) out.data[i] = a.data[i] * b.data[i];
    if (Tape* tp = common_tape("mul", {&a, &b})) {
        const int pa = a.node, pb = b.node;
        out.tape = tp;
        out.node = tp->record(out.shape, [pa, pb, n, av = a.data, bv = b.data](
                                             const std::vector<double>& g, GradStore& gs) {
            if (pa >= 0) {
                double* ga = gs.acquire(pa, n);
                for (int i = 0; i < n; ++i) ga[i] += g[i] * bv[i];
            }
            if (pb >= 0) {
                double* gb = gs.acquire(pb, n);
                for (int i = 0; i < n; ++i) gb[i] += g[i] * av[i];
            }
        });
    }
    return out;
}

Tensor scale(const Tensor& a, double s) {
    Tensor out;
    out.shape = a.shape;
    const int n = a.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) out.data[i] = a.data[i] * s;
    if (a.on_tape()) {
        const int pa = a.node;
        out.tape = a.tape;
        out.node = a.tape->record(out.shape, [pa, n, s](const std::vector<double>& g, GradStore& gs) {
            double* ga = gs.acquire(pa, n);
            for (int i = 0; i < n; ++i) ga[i] += g[i] * s;
        });
    }
    return out;
}

Tensor add_scalar(const Tensor& a, double c) {
    Tensor out;
    out.shape = a.shape;
    const int n = a.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) out.data[i] = a.data[i] + c;
    if (a.on_tape()) {
        const int pa = a.node;
        out.tape = a.tape;
        out.node = a.tape->record(out.shape, [pa, n](const std::vector<double>& g, GradStore& gs) {
            double* ga = gs.acquire(pa, n);
            for (int i = 0; i < n; ++i) ga[i] += g[i];
        });
    }
    return out;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
    if (a.rank() != 2 || b.rank() != 2)
        raise(ErrorKind::Shape, "matmul: rank-2 tensors required, got " + shape_str(a.shape) +
                                    " x " + shape_str(b.shape));
    if (a.shape[1] != b.shape[0])
        raise(ErrorKind::Shape, "matmul: inner dimensions differ, " + shape_str(a.shape) + " x " +
                                    shape_str(b.shape));
    const int n = a.shape[0], m = a.shape[1], p = b.shape[1];
    Tensor out = Tensor::zeros({n, p});
    for (int i = 0; i < n; ++i) {
        const double* arow = &a.data[static_cast<std::size_t>(i) * m];
        double* orow = &out.data[static_cast<std::size_t>(i) * p];
        for (int k = 0; k < m; ++k) {
            const double aik = arow[k];
            const double* brow = &b.data[static_cast<std::size_t>(k) * p];
            for (int j = 0; j < p; ++j) orow[j] += aik * brow[j];
        }
    }
    if (Tape* tp = common_tape("matmul", {&a, &b})) {
        const int pa = a.node, pb = b.node;
        out.tape = tp;
        out.node = tp->record(out.shape, [pa, pb, n, m, p, av = a.data, bv = b.data](
                                             const std::vector<double>& g, GradStore& gs) {
            if (pa >= 0) {
                double* ga = gs.acquire(pa, n * m);
                for (int i = 0; i < n; ++i) {
                    const double* grow = &g[static_cast<std::size_t>(i) * p];
                    double* garow = &ga[static_cast<std::size_t>(i) * m];
                    for (int k = 0; k < m; ++k) {
                        const double* brow = &bv[static_cast<std::size_t>(k) * p];
                        double acc = 0.0;
                        for (int j = 0; j < p; ++j) acc += grow[j] * brow[j];
                        garow[k] += acc;
                    }
                }
            }
            if (pb >= 0) {
                double* gb = gs.acquire(pb, m * p);
                for (int i = 0; i < n; ++i) {
                    const double* arow = &av[static_cast<std::size_t>(i) * m];
                    const double* grow = &g[static_cast<std::size_t>(i) * p];
                    for (int k = 0; k < m; ++k) {
                        const double aik = arow[k];
                        double* gbrow = &gb[static_cast<std::size_t>(k) * p];
                        for (int j = 0; j < p; ++j) gbrow[j] += aik * grow[j];
                    }
                }
            }
        });
    }
    return out;
}

Tensor concat(const std::vector<Tensor>& parts, int axis) {
    if (parts.empty()) raise(ErrorKind::Shape, "concat: no inputs");
    const int rank = parts[0].rank();
    require_axis("concat", parts[0], axis);
    std::vector<int> out_shape = parts[0].shape;
    out_shape[axis] = 0;
    for (const Tensor& p : parts) {
        if (p.rank() != rank) raise(ErrorKind::Shape, "concat: rank mismatch");
        for (int a = 0; a < rank; ++a)
            if (a != axis && p.shape[a] != parts[0].shape[a])
                raise(ErrorKind::Shape, "concat: shape mismatch " + shape_str(p.shape) + " vs " +
                                            shape_str(parts[0].shape));
        out_shape[axis] += p.shape[axis];
    }
    Tensor out = Tensor::zeros(out_shape);
    const AxisView v = axis_view(out_shape, axis);
    std::vector<int> offsets;  // element offset of each part within an outer row
    {
        int off = 0;
        for (const Tensor& p : parts) {
            offsets.push_back(off);
            off += p.shape[axis] * v.inner;
        }
    }
    const int out_row = v.n * v.inner;
    for (std::size_t pi = 0; pi < parts.size(); ++pi) {
        const Tensor& p = parts[pi];
        const int part_row = p.shape[axis] * v.inner;
        for (int o = 0; o < v.outer; ++o)
            std::copy_n(&p.data[static_cast<std::size_t>(o) * part_row], part_row,
                        &out.data[static_cast<std::size_t>(o) * out_row + offsets[pi]]);
    }
    std::vector<const Tensor*> ptrs;
    for (const Tensor& p : parts) ptrs.push_back(&p);
    Tape* tp = nullptr;
    for (const Tensor* t : ptrs) {
        if (!t->on_tape()) continue;
        if (tp && tp != t->tape)
            raise(ErrorKind::Invariant, "concat: inputs recorded on different tapes");
        tp = t->tape;
    }
    if (tp) {
        struct Src {
            int node, offset, row;
        };
        std::vector<Src> srcs;
        for (std::size_t pi = 0; pi < parts.size(); ++pi)
            if (parts[pi].on_tape())
                srcs.push_back({parts[pi].node, offsets[pi], parts[pi].shape[axis] * v.inner});
        const int outer = v.outer;
        out.tape = tp;
        out.node = tp->record(out.shape, [srcs, outer, out_row](const std::vector<double>& g,
                                                                GradStore& gs) {
            for (const Src& s : srcs) {
                double* gp = gs.acquire(s.node, outer * s.row);
                for (int o = 0; o < outer; ++o) {
                    const double* gsrc = &g[static_cast<std::size_t>(o) * out_row + s.offset];
                    double* gdst = &gp[static_cast<std::size_t>(o) * s.row];
                    for (int i = 0; i < s.row; ++i) gdst[i] += gsrc[i];
                }
            }
        });
    }
    return out;
}

Tensor slice(const Tensor& t, int axis, int start, int len) {
    require_axis("slice", t, axis);
    if (len <= 0 || start < 0 || start + len > t.shape[axis])
        raise(ErrorKind::Shape, "slice: range [" + std::to_string(start) + "," +
                                    std::to_string(start + len) + ") out of bounds for " +
                                    shape_str(t.shape));
    std::vector<int> out_shape = t.shape;
    out_shape[axis] = len;
    Tensor out = Tensor::zeros(out_shape);
    const AxisView v = axis_view(t.shape, axis);
    const int in_row = v.n * v.inner;
    const int out_row = len * v.inner;
    const int off = start * v.inner;
    for (int o = 0; o < v.outer; ++o)
        std::copy_n(&t.data[static_cast<std::size_t>(o) * in_row + off], out_row,
                    &out.data[static_cast<std::size_t>(o) * out_row]);
    if (t.on_tape()) {
        const int pt = t.node, outer = v.outer, in_total = t.size();
        out.tape = t.tape;
        out.node = t.tape->record(out.shape, [pt, outer, in_row, out_row, off, in_total](
                                                 const std::vector<double>& g, GradStore& gs) {
            double* gt = gs.acquire(pt, in_total);
            for (int o = 0; o < outer; ++o) {
                const double* gsrc = &g[static_cast<std::size_t>(o) * out_row];
                double* gdst = &gt[static_cast<std::size_t>(o) * in_row + off];
                for (int i = 0; i < out_row; ++i) gdst[i] += gsrc[i];
            }
        });
    }
    return out;
}

Tensor reshape(const Tensor& t, const std::vector<int>& shape) {
    if (shape_size(shape) != t.size())
        raise(ErrorKind::Shape, "reshape: cannot view " + shape_str(t.shape) + " as " +
                                    shape_str(shape));
    Tensor out;
    out.shape = shape;
    out.data = t.data;
    if (t.on_tape()) {
        const int pt = t.node, n = t.size();
        out.tape = t.tape;
        out.node = t.tape->record(out.shape, [pt, n](const std::vector<double>& g, GradStore& gs) {
            double* gt = gs.acquire(pt, n);
            for (int i = 0; i < n; ++i) gt[i] += g[i];
        });
    }
    return out;
}

Tensor broadcast(const Tensor& t, const std::vector<int>& shape) {
    const int out_rank = static_cast<int>(shape.size());
    if (t.rank() > out_rank)
        raise(ErrorKind::Shape, "broadcast: cannot lower rank " + shape_str(t.shape) + " -> " +
                                    shape_str(shape));
    // Align trailing axes; missing leading axes behave as extent 1.
    std::vector<int> in_shape(out_rank, 1);
    const int pad = out_rank - t.rank();
    for (int a = 0; a < t.rank(); ++a) in_shape[pad + a] = t.shape[a];
    for (int a = 0; a < out_rank; ++a)
        if (in_shape[a] != shape[a] && in_shape[a] != 1)
            raise(ErrorKind::Shape, "broadcast: " + shape_str(t.shape) + " incompatible with " +
                                        shape_str(shape));
    const int n_out = shape_size(shape);
    // Input strides in the aligned frame; 0 on broadcast axes.
    std::vector<long long> stride(out_rank, 0);
    {
        long long s = 1;
        for (int a = out_rank - 1; a >= 0; --a) {
            stride[a] = (in_shape[a] == 1) ? 0 : s;
            s *= in_shape[a];
        }
    }
    Tensor out = Tensor::zeros(shape);
    std::vector<int> idx(out_rank, 0);
    long long in_flat = 0;
    for (int i = 0; i < n_out; ++i) {
        out.data[i] = t.data[in_flat];
        for (int a = out_rank - 1; a >= 0; --a) {
            ++idx[a];
            in_flat += stride[a];
            if (idx[a] < shape[a]) break;
            idx[a] = 0;
            in_flat -= stride[a] * shape[a];
        }
    }
    if (t.on_tape()) {
        const int pt = t.node, in_total = t.size();
        const std::vector<int> out_shape = shape;
        out.tape = t.tape;
        out.node = t.tape->record(
            out.shape, [pt, in_total, n_out, stride, out_shape, out_rank](
                           const std::vector<double>& g, GradStore& gs) {
                double* gt = gs.acquire(pt, in_total);
                std::vector<int> idx(out_rank, 0);
                long long in_flat = 0;
                for (int i = 0; i < n_out; ++i) {
                    gt[in_flat] += g[i];
                    for (int a = out_rank - 1; a >= 0; --a) {
                        ++idx[a];
                        in_flat += stride[a];
                        if (idx[a] < out_shape[a]) break;
                        idx[a] = 0;
                        in_flat -= stride[a] * out_shape[a];
                    }
                }
            });
    }
    return out;
}

Tensor sum(const Tensor& t) {
    double acc = 0.0;
    for (double v : t.data) acc += v;
    Tensor out = Tensor::scalar(acc);
    if (t.on_tape()) {
        const int pt = t.node, n = t.size();
        out.tape = t.tape;
        out.node = t.tape->record(out.shape, [pt, n](const std::vector<double>& g, GradStore& gs) {
            double* gt = gs.acquire(pt, n);
            for (int i = 0; i < n; ++i) gt[i] += g[0];
        });
    }
    return out;
}

Tensor mean(const Tensor& t) { return scale(sum(t), 1.0 / t.size()); }

Tensor sum_axis(const Tensor& t, int axis) {
    require_axis("sum_axis", t, axis);
    const AxisView v = axis_view(t.shape, axis);
    std::vector<int> out_shape;
    for (int a = 0; a < t.rank(); ++a)
        if (a != axis) out_shape.push_back(t.shape[a]);
    if (out_shape.empty()) out_shape.push_back(1);
    Tensor out = Tensor::zeros(out_shape);
    // Accumulate each slice in sorted-value order: the result is then
    // invariant under permutations along the axis (slot exchangeability).
    {
        std::vector<double> vals(v.n);
        for (int o = 0; o < v.outer; ++o)
            for (int i = 0; i < v.inner; ++i) {
                const std::size_t base = static_cast<std::size_t>(o) * v.n * v.inner + i;
                for (int k = 0; k < v.n; ++k)
                    vals[k] = t.data[base + static_cast<std::size_t>(k) * v.inner];
                std::sort(vals.begin(), vals.end());
                double acc = 0.0;
                for (double x : vals) acc += x;
                out.data[static_cast<std::size_t>(o) * v.inner + i] = acc;
            }
    }
    if (t.on_tape()) {
        const int pt = t.node, n_in = t.size();
        const AxisView vv = v;
        out.tape = t.tape;
        out.node = t.tape->record(out.shape, [pt, n_in, vv](const std::vector<double>& g,
                                                            GradStore& gs) {
            double* gt = gs.acquire(pt, n_in);
            for (int o = 0; o < vv.outer; ++o)
                for (int k = 0; k < vv.n; ++k) {
                    double* dst = &gt[(static_cast<std::size_t>(o) * vv.n + k) * vv.inner];
                    const double* src = &g[static_cast<std::size_t>(o) * vv.inner];
                    for (int i = 0; i < vv.inner; ++i) dst[i] += src[i];
                }
        });
    }
    return out;
}

Tensor exp(const Tensor& t) {
    return unary("exp", t, [](double x) { return std::exp(x); }, true,
                 [](const std::vector<double>& y, const std::vector<double>& g, double* ga, int n) {
                     for (int i = 0; i < n; ++i) ga[i] += g[i] * y[i];
                 });
}

Tensor log(const Tensor& t) {
    for (double v : t.data)
        if (v <= 0.0) raise(ErrorKind::Numeric, "log: non-positive input");
    return unary("log", t, [](double x) { return std::log(x); }, false,
                 [](const std::vector<double>& x, const std::vector<double>& g, double* ga, int n) {
                     for (int i = 0; i < n; ++i) ga[i] += g[i] / x[i];
                 });
}

Tensor tanh(const Tensor& t) {
    return unary("tanh", t, [](double x) { return std::tanh(x); }, true,
                 [](const std::vector<double>& y, const std::vector<double>& g, double* ga, int n) {
                     for (int i = 0; i < n; ++i) ga[i] += g[i] * (1.0 - y[i] * y[i]);
                 });
}

Tensor relu(const Tensor& t) {
    return unary("relu", t, [](double x) { return x > 0.0 ? x : 0.0; }, false,
                 [](const std::vector<double>& x, const std::vector<double>& g, double* ga, int n) {
                     for (int i = 0; i < n; ++i)
                         if (x[i] > 0.0) ga[i] += g[i];
                 });
}

Tensor sigmoid(const Tensor& t) {
    return unary("sigmoid", t,
                 [](double x) { return x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                                : std::exp(x) / (1.0 + std::exp(x)); },
                 true,
                 [](const std::vector<double>& y, const std::vector<double>& g, double* ga, int n) {
                     for (int i = 0; i < n; ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
                 });
}

Tensor softplus(const Tensor& t) {
    Tensor out;
    out.shape = t.shape;
    const int n = t.size();
    out.data.resize(n);
    for (int i = 0; i < n; ++i) {
        const double x = t.data[i];
        out.data[i] = x > 30.0 ? x : (x < -30.0 ? std::exp(x) : std::log1p(std::exp(x)));
    }
    if (t.on_tape()) {
        const int pt = t.node;
        out.tape = t.tape;
        out.node = t.tape->record(out.shape, [pt, n, xv = t.data](const std::vector<double>& g,
                                                                  GradStore& gs) {
            double* gt = gs.acquire(pt, n);
            for (int i = 0; i < n; ++i) {
                const double x = xv[i];
                const double s = x >= 0.0 ? 1.0 / (1.0 + std::exp(-x))
                                          : std::exp(x) / (1.0 + std::exp(x));
                gt[i] += g[i] * s;
            }
        });
    }
    return out;
}

Tensor square(const Tensor& t) {
    return unary("square", t, [](double x) { return x * x; }, false,
                 [](const std::vector<double>& x, const std::vector<double>& g, double* ga, int n) {
                     for (int i = 0; i < n; ++i) ga[i] += g[i] * 2.0 * x[i];
                 });
}

Tensor softmax(const Tensor& t, int axis) {
    require_axis("softmax", t, axis);
    const AxisView v = axis_view(t.shape, axis);
    Tensor out = Tensor::zeros(t.shape);
    // Sorted-order denominator keeps softmax permutation-invariant along the
    // axis (see sum_axis).
    std::vector<double> evals(v.n);
    for (int o = 0; o < v.outer; ++o)
        for (int i = 0; i < v.inner; ++i) {
            const std::size_t base = static_cast<std::size_t>(o) * v.n * v.inner + i;
            double m = t.data[base];
            for (int k = 1; k < v.n; ++k)
                m = std::max(m, t.data[base + static_cast<std::size_t>(k) * v.inner]);
            for (int k = 0; k < v.n; ++k) {
                const std::size_t at = base + static_cast<std::size_t>(k) * v.inner;
                out.data[at] = std::exp(t.data[at] - m);
                evals[k] = out.data[at];
            }
            std::sort(evals.begin(), evals.end());
            double s = 0.0;
            for (double e : evals) s += e;
            for (int k = 0; k < v.n; ++k) out.data[base + static_cast<std::size_t>(k) * v.inner] /= s;
        }
    if (t.on_tape()) {
        const int pt = t.node, n_in = t.size();
        const AxisView vv = v;
        out.tape = t.tape;
        out.node = t.tape->record(out.shape, [pt, n_in, vv, yv = out.data](
                                                 const std::vector<double>& g, GradStore& gs) {
            double* gt = gs.acquire(pt, n_in);
            for (int o = 0; o < vv.outer; ++o)
                for (int i = 0; i < vv.inner; ++i) {
                    const std::size_t base = static_cast<std::size_t>(o) * vv.n * vv.inner + i;
                    double dot = 0.0;
                    for (int k = 0; k < vv.n; ++k) {
                        const std::size_t at = base + static_cast<std::size_t>(k) * vv.inner;
                        dot += g[at] * yv[at];
                    }
                    for (int k = 0; k < vv.n; ++k) {
                        const std::size_t at = base + static_cast<std::size_t>(k) * vv.inner;
                        gt[at] += yv[at] * (g[at] - dot);
                    }
                }
        });
    }
    return out;
}

Tensor l2_normalize(const Tensor& t, int axis) {
    require_axis("l2_normalize", t, axis);
    const AxisView v = axis_view(t.shape, axis);
    Tensor out = Tensor::zeros(t.shape);
    const int slices = v.outer * v.inner;
    std::vector<double> norms(slices);  // post-floor norms, saved for backward
    std::vector<char> clamped(slices);
    std::vector<double> sq(v.n);
    for (int o = 0; o < v.outer; ++o)
        for (int i = 0; i < v.inner; ++i) {
            const std::size_t base = static_cast<std::size_t>(o) * v.n * v.inner + i;
            for (int k = 0; k < v.n; ++k) {
                const double x = t.data[base + static_cast<std::size_t>(k) * v.inner];
                sq[k] = x * x;
            }
            std::sort(sq.begin(), sq.end());
            double n2 = 0.0;
            for (double x : sq) n2 += x;
            const double raw = std::sqrt(n2);
            const int si = o * v.inner + i;
            clamped[si] = raw < kSafeNormFloor;
            norms[si] = clamped[si] ? kSafeNormFloor : raw;
            for (int k = 0; k < v.n; ++k) {
                const std::size_t at = base + static_cast<std::size_t>(k) * v.inner;
                out.data[at] = t.data[at] / norms[si];
            }
        }
    if (t.on_tape()) {
        const int pt = t.node, n_in = t.size();
        const AxisView vv = v;
        out.tape = t.tape;
        out.node = t.tape->record(
            out.shape, [pt, n_in, vv, yv = out.data, norms = std::move(norms),
                        clamped = std::move(clamped)](const std::vector<double>& g, GradStore& gs) {
                double* gt = gs.acquire(pt, n_in);
                for (int o = 0; o < vv.outer; ++o)
                    for (int i = 0; i < vv.inner; ++i) {
                        const std::size_t base = static_cast<std::size_t>(o) * vv.n * vv.inner + i;
                        const int si = o * vv.inner + i;
                        if (clamped[si]) {
                            // Below the floor the denominator is constant.
                            for (int k = 0; k < vv.n; ++k) {
                                const std::size_t at = base + static_cast<std::size_t>(k) * vv.inner;
                                gt[at] += g[at] / norms[si];
                            }
                            continue;
                        }
                        double dot = 0.0;
                        for (int k = 0; k < vv.n; ++k) {
                            const std::size_t at = base + static_cast<std::size_t>(k) * vv.inner;
                            dot += g[at] * yv[at];
                        }
                        for (int k = 0; k < vv.n; ++k) {
                            const std::size_t at = base + static_cast<std::size_t>(k) * vv.inner;
                            gt[at] += (g[at] - yv[at] * dot) / norms[si];
                        }
                    }
            });
    }
    return out;
}

Tensor logsumexp(const Tensor& t, int axis) {
    require_axis("logsumexp", t, axis);
    const AxisView v = axis_view(t.shape, axis);
    std::vector<int> red_shape;
    for (int a = 0; a < t.rank(); ++a)
        if (a != axis) red_shape.push_back(t.shape[a]);
    if (red_shape.empty()) red_shape.push_back(1);
    // Detached max keeps the exponentials bounded without entering the tape;
    // the gradient of the composition is still the exact softmax.
    Tensor m = Tensor::zeros(red_shape);
    for (int o = 0; o < v.outer; ++o)
        for (int i = 0; i < v.inner; ++i) {
            const std::size_t base = static_cast<std::size_t>(o) * v.n * v.inner + i;
            double mx = t.data[base];
            for (int k = 1; k < v.n; ++k)
                mx = std::max(mx, t.data[base + static_cast<std::size_t>(k) * v.inner]);
            m.data[static_cast<std::size_t>(o) * v.inner + i] = mx;
        }
    std::vector<int> keep_shape = t.shape;
    keep_shape[axis] = 1;
    Tensor shifted = sub(t, broadcast(reshape(m, keep_shape), t.shape));
    return add(log(sum_axis(exp(shifted), axis)), m);
}

Tensor log_softmax(const Tensor& t, int axis) {
    std::vector<int> keep_shape = t.shape;
    keep_shape[axis] = 1;
    return sub(t, broadcast(reshape(logsumexp(t, axis), keep_shape), t.shape));
}

}  // namespace phycine::ad
