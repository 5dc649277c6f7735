#include "phycine/dyn/interaction.hpp"

#include <cmath>

#include "phycine/common/error.hpp"

namespace phycine::dyn {

using namespace phycine::ad;

LatentState split_latent(const Tensor& z) {
    if (z.rank() != 2 || z.shape[1] != kLatentDim)
        raise(ErrorKind::Shape, "split_latent: expected K x " + std::to_string(kLatentDim) +
                                    ", got " + shape_str(z.shape));
    LatentState s;
    s.ctx = slice(z, 1, kCtxOff, kCtxDim);
    s.dyn = slice(z, 1, kDynOff, kDynDim);
    s.m = slice(z, 1, kMassOff, kMassDim);
    s.c = slice(z, 1, kChargeOff, kChargeDim);
    return s;
}

Tensor join_latent(const LatentState& s) { return concat({s.ctx, s.dyn, s.m, s.c}, 1); }

namespace {

Tensor dense_init_t(int in, int out, Rng& rng) {
    Tensor w = Tensor::zeros({in, out});
    const double sc = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data) v = sc * rng.normal();
    return w;
}

Tensor with_bias(const Tensor& x, const Tensor& b) {
    return add(x, broadcast(reshape(b, {1, b.size()}), {x.shape[0], b.size()}));
}

// Constant 0/1 selection matrices for ordered pairs (i, j), j != i, laid out
// i-major. gather_i/j pull slot rows into pair rows via matmul; scatter sums
// pair rows back per first index. matmul's backward gives the scatter/gather
// adjoints for free.
struct PairIndex {
    Tensor gather_i, gather_j;  // P x K
    Tensor scatter;             // K x P
    std::vector<std::pair<int, int>> pairs;
};

PairIndex make_pair_index(int k) {
    const int p = k * (k - 1);
    PairIndex idx;
    idx.gather_i = Tensor::zeros({p, k});
    idx.gather_j = Tensor::zeros({p, k});
    idx.scatter = Tensor::zeros({k, p});
    int row = 0;
    for (int i = 0; i < k; ++i)
        for (int j = 0; j < k; ++j) {
            if (j == i) continue;
            idx.gather_i.data[row * k + i] = 1.0;
            idx.gather_j.data[row * k + j] = 1.0;
            idx.scatter.data[i * p + row] = 1.0;
            idx.pairs.emplace_back(i, j);
            ++row;
        }
    return idx;
}

struct PairFeatures {
    PairIndex idx;
    Tensor attn;   // P x 1
    Tensor f_dir;  // P x 2
    Tensor f_int;  // P x 1
};

PairFeatures pair_features(const LatentState& s, const InteractionParams& p) {
    PairFeatures f;
    f.idx = make_pair_index(s.slots());
    Tensor ci = matmul(f.idx.gather_i, s.ctx);
    Tensor cj = matmul(f.idx.gather_j, s.ctx);
    Tensor di = matmul(f.idx.gather_i, s.dyn);
    Tensor dj = matmul(f.idx.gather_j, s.dyn);
    Tensor pair_in = concat({ci, di, cj, dj}, 1);  // P x 28
    f.attn = sigmoid(p.attn.apply(pair_in));
    f.f_dir = l2_normalize(p.dir.apply(pair_in), 1);
    Tensor mi = matmul(f.idx.gather_i, s.m);
    Tensor mj = matmul(f.idx.gather_j, s.m);
    f.f_int = p.inten.apply(concat({mi, di, mj, dj}, 1));  // P x 6 -> P x 1
    return f;
}

}  // namespace

Tensor PairMap::apply(const Tensor& x) const {
    if (x.rank() != 2 || x.shape[1] != w1.shape[0])
        raise(ErrorKind::Shape, "PairMap: input " + shape_str(x.shape) + " does not match " +
                                    shape_str(w1.shape));
    Tensor h = with_bias(matmul(x, w1), b1);
    if (hidden == 0) return h;
    return with_bias(matmul(tanh(h), w2), b2);
}

PairMap PairMap::init(int in, int out, int hidden, Rng& rng) {
    PairMap m;
    m.hidden = hidden;
    if (hidden == 0) {
        m.w1 = dense_init_t(in, out, rng);
        m.b1 = Tensor::zeros({out});
    } else {
        m.w1 = dense_init_t(in, hidden, rng);
        m.b1 = Tensor::zeros({hidden});
        m.w2 = dense_init_t(hidden, out, rng);
        m.b2 = Tensor::zeros({out});
    }
    return m;
}

void PairMap::collect(const std::string& prefix,
                      std::vector<std::pair<std::string, Tensor*>>& out) {
    out.emplace_back(prefix + ".w1", &w1);
    out.emplace_back(prefix + ".b1", &b1);
    if (hidden > 0) {
        out.emplace_back(prefix + ".w2", &w2);
        out.emplace_back(prefix + ".b2", &b2);
    }
}

InteractionParams InteractionParams::init(const InteractionConfig& cfg, Rng& rng) {
    InteractionParams p;
    p.trans = PairMap::init(kDynDim, kCtxDim, 0, rng);  // the transition stays linear
    p.attn = PairMap::init(2 * (kCtxDim + kDynDim), 1, cfg.attn_hidden, rng);
    p.dir = PairMap::init(2 * (kCtxDim + kDynDim), 2, cfg.dir_hidden, rng);
    p.inten = PairMap::init(2 * (kMassDim + kDynDim), 1, cfg.inten_hidden, rng);
    p.chg = PairMap::init(2 * kCtxDim, 2, cfg.chg_hidden, rng);
    return p;
}

std::vector<std::pair<std::string, Tensor*>> InteractionParams::named_tensors() {
    std::vector<std::pair<std::string, Tensor*>> out;
    trans.collect("inter.trans", out);
    attn.collect("inter.attn", out);
    dir.collect("inter.dir", out);
    inten.collect("inter.inten", out);
    chg.collect("inter.chg", out);
    return out;
}

LatentState transition(const LatentState& s, const InteractionParams& p) {
    LatentState next = s;
    next.ctx = add(p.trans.apply(s.dyn), s.ctx);
    return next;
}

Tensor collision_forces(const LatentState& s, const InteractionParams& p,
                        const InteractionConfig& cfg) {
    const int k = s.slots();
    if (k < 2) return Tensor::zeros({k, 2});
    PairFeatures f = pair_features(s, p);
    const int np = static_cast<int>(f.idx.pairs.size());
    if (cfg.product_of_sums) {
        Tensor dir_sum = matmul(f.idx.scatter,
                                l2_normalize(mul(f.f_dir, broadcast(f.attn, {np, 2})), 1));
        Tensor int_sum = matmul(f.idx.scatter, mul(f.f_int, f.attn));  // K x 1
        return mul(dir_sum, broadcast(int_sum, {k, 2}));
    }
    Tensor w = mul(f.attn, f.f_int);  // P x 1
    return matmul(f.idx.scatter, mul(f.f_dir, broadcast(w, {np, 2})));
}

Tensor charge_forces(const LatentState& s, const InteractionParams& p) {
    const int k = s.slots();
    if (k < 2) return Tensor::zeros({k, 2});
    PairIndex idx = make_pair_index(k);
    const int np = static_cast<int>(idx.pairs.size());
    Tensor ci = matmul(idx.gather_i, s.ctx);
    Tensor cj = matmul(idx.gather_j, s.ctx);
    Tensor basis = p.chg.apply(concat({ci, cj}, 1));  // P x 2
    Tensor qq = mul(matmul(idx.gather_i, s.c), matmul(idx.gather_j, s.c));  // P x 1
    return matmul(idx.scatter, mul(basis, broadcast(qq, {np, 2})));
}

LatentState apply_forces(const LatentState& s, const Tensor& f_col, const Tensor& f_chg,
                         double col_gate, double chg_gate) {
    LatentState next = s;
    Tensor d = s.dyn;
    if (col_gate != 0.0) d = add(d, scale(f_col, col_gate));
    if (chg_gate != 0.0) d = add(d, scale(f_chg, chg_gate));
    next.dyn = d;
    return next;
}

RolloutResult rollout(const LatentState& z0, int n_steps, const InteractionParams& p,
                      const InteractionConfig& cfg, double col_gate, double chg_gate,
                      bool record_breakdown) {
    if (n_steps < 0) raise(ErrorKind::Usage, "rollout: negative step count");
    RolloutResult r;
    r.steps.push_back(z0);
    const int k = z0.slots();
    for (int t = 0; t < n_steps; ++t) {
        const LatentState& cur = r.steps.back();
        Tensor f_col = col_gate != 0.0 ? collision_forces(cur, p, cfg) : Tensor::zeros({k, 2});
        Tensor f_chg = chg_gate != 0.0 ? charge_forces(cur, p) : Tensor::zeros({k, 2});
        LatentState pushed = apply_forces(cur, f_col, f_chg, col_gate, chg_gate);
        LatentState next = transition(pushed, p);  // transition sees the updated dyn
        if (!next.dyn.all_finite() || !next.ctx.all_finite())
            raise(ErrorKind::Numeric, "rollout: non-finite latent at step " + std::to_string(t + 1));
        if (record_breakdown) {
            StepBreakdown bd;
            if (k >= 2 && col_gate != 0.0) {
                PairFeatures f = pair_features(cur, p);
                for (std::size_t pr = 0; pr < f.idx.pairs.size(); ++pr) {
                    PairRecord rec;
                    rec.i = f.idx.pairs[pr].first;
                    rec.j = f.idx.pairs[pr].second;
                    rec.attn = f.attn.data[pr];
                    rec.fd_x = f.f_dir.data[pr * 2];
                    rec.fd_y = f.f_dir.data[pr * 2 + 1];
                    rec.f_i = f.f_int.data[pr];
                    bd.pairs.push_back(rec);
                }
            }
            for (int s = 0; s < k; ++s) {
                bd.f_collision.push_back({f_col.data[s * 2], f_col.data[s * 2 + 1]});
                bd.f_charge.push_back({f_chg.data[s * 2], f_chg.data[s * 2 + 1]});
                bd.dyn.push_back({next.dyn.data[s * 2], next.dyn.data[s * 2 + 1]});
                bd.mass.push_back(next.m.data[s]);
            }
            r.breakdown.push_back(std::move(bd));
        }
        r.steps.push_back(std::move(next));
    }
    return r;
}

}  // namespace phycine::dyn
