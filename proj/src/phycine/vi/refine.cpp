#include "phycine/vi/refine.hpp"

#include <cmath>
#include <limits>

#include <json.hpp>

#include "phycine/ad/tape.hpp"
#include "phycine/common/error.hpp"
#include "phycine/opt/adam.hpp"

namespace phycine::vi {

using ad::Tape;
using ad::Tensor;

std::array<double, dyn::kLatentDim> ctx_mask() {
    std::array<double, dyn::kLatentDim> m{};
    for (int d = dyn::kCtxOff; d < dyn::kCtxOff + dyn::kCtxDim; ++d) m[d] = 1.0;
    return m;
}

std::array<double, dyn::kLatentDim> dyn_mask() {
    std::array<double, dyn::kLatentDim> m{};
    for (int d = dyn::kDynOff; d < dyn::kDynOff + dyn::kDynDim; ++d) m[d] = 1.0;
    return m;
}

std::array<double, dyn::kLatentDim> intrinsic_mask() {
    std::array<double, dyn::kLatentDim> m{};
    m[dyn::kMassOff] = 1.0;
    m[dyn::kChargeOff] = 1.0;
    return m;
}

namespace {

Tensor masked_grad(const Tensor& g, const std::array<double, dyn::kLatentDim>& mask) {
    Tensor out = g.detached();
    for (int j = 0; j < out.size(); ++j) out.data[j] *= mask[j % dyn::kLatentDim];
    return out;
}

RefineStep make_step(const ElboReport& rep, int iteration) {
    RefineStep s;
    s.iteration = iteration;
    s.total = rep.value();
    s.kl = rep.kl;
    s.nll = rep.nll;
    return s;
}

}  // namespace

RefineResult refine(const Posterior& init, const std::vector<Tensor>& frames,
                    const model::ModelParams& params, const model::ModelConfig& cfg,
                    const RefineOptions& opt, Rng& rng) {
    if (opt.steps < 1 || opt.inner_steps < 1)
        raise(ErrorKind::Usage, "refine: steps and inner_steps must be >= 1");

    RefineResult res;
    res.post = Posterior{init.mean.detached(), init.log_var.detached()};
    res.prev = Posterior{res.post.mean.detached(), res.post.log_var.detached()};

    opt::Adam adam({opt.lr, 0.9, 0.999, 1e-8});
    double best_val = std::numeric_limits<double>::infinity();
    Posterior best{res.post.mean.detached(), res.post.log_var.detached()};
    const int total_steps = opt.steps * opt.inner_steps;
    for (int step = 0; step < total_steps; ++step) {
        Tape tape;
        Posterior wp{tape.watch(res.post.mean), tape.watch(res.post.log_var)};
        ElboReport rep = elbo_loss(frames, wp, params, cfg, opt.elbo, rng);
        if (!std::isfinite(rep.value()))
            raise(ErrorKind::Numeric, "refine: non-finite loss at iteration " +
                                          std::to_string(step / opt.inner_steps) + " (update " +
                                          std::to_string(step) + ")");
        if (opt.keep_best && rep.value() < best_val) {
            best_val = rep.value();
            best = Posterior{res.post.mean.detached(), res.post.log_var.detached()};
        }
        if (opt.record_trajectory && step % opt.inner_steps == 0)
            res.trajectory.push_back(make_step(rep, step / opt.inner_steps));
        tape.backward(rep.total);
        Tensor g_mean = masked_grad(tape.grad(wp.mean), opt.mask);
        Tensor g_lv = masked_grad(tape.grad(wp.log_var), opt.mask);
        if (step == total_steps - 1)
            res.prev = Posterior{res.post.mean.detached(), res.post.log_var.detached()};
        std::vector<Tensor*> ps = {&res.post.mean, &res.post.log_var};
        std::vector<const Tensor*> gs = {&g_mean, &g_lv};
        adam.step(ps, gs);
    }
    if (opt.record_trajectory || opt.keep_best) {
        ElboReport final_rep = elbo_loss(frames, res.post, params, cfg, opt.elbo, rng);
        if (opt.record_trajectory) res.trajectory.push_back(make_step(final_rep, opt.steps));
        if (opt.keep_best && best_val < final_rep.value()) res.post = best;
    }
    return res;
}

InferResult infer(const std::vector<Tensor>& frames, const model::ModelParams& params,
                  const model::ModelConfig& cfg, const InferOptions& opt, Rng& rng) {
    if (frames.size() < 2) raise(ErrorKind::Usage, "infer: need at least 2 frames");
    if (opt.slots < 1) raise(ErrorKind::Usage, "infer: slots must be >= 1");

    const std::vector<Tensor> frame0(frames.begin(), frames.begin() + 1);
    const std::vector<Tensor> frames01(frames.begin(), frames.begin() + 2);

    struct Phase {
        const char* name;
        std::array<double, dyn::kLatentDim> mask;
        const std::vector<Tensor>* frames;
        int steps;
    };
    const Phase phases[] = {
        {"ctx", ctx_mask(), &frame0, opt.phase_steps[0]},
        {"dyn", dyn_mask(), &frames01, opt.phase_steps[1]},
        {"intrinsic", intrinsic_mask(), &frames, opt.phase_steps[2]},
        {"polish", full_mask(), &frames, opt.phase_steps[3]},
    };

    InferResult res;
    Posterior post = init_posterior(opt.slots, rng);
    Posterior prev{post.mean.detached(), post.log_var.detached()};
    for (const Phase& ph : phases) {
        if (ph.steps < 1) continue;
        RefineOptions ro;
        ro.steps = ph.steps;
        ro.inner_steps = opt.inner_steps;
        ro.lr = opt.lr;
        ro.mask = ph.mask;
        ro.elbo = opt.elbo;
        ro.record_trajectory = opt.record_trajectory;
        RefineResult rr = refine(post, *ph.frames, params, cfg, ro, rng);
        post = rr.post;
        prev = rr.prev;
        for (RefineStep& s : rr.trajectory) {
            s.phase = ph.name;
            res.trajectory.push_back(std::move(s));
        }
        res.phase_posts.emplace_back(ph.name,
                                     Posterior{post.mean.detached(), post.log_var.detached()});
    }
    res.post = post;
    res.prev = prev;
    res.latents = dyn::split_latent(res.post.mean);
    return res;
}

std::string trajectory_jsonl(const std::vector<RefineStep>& steps) {
    std::string out;
    for (const RefineStep& s : steps) {
        nlohmann::json j;
        j["phase"] = s.phase;
        j["iteration"] = s.iteration;
        j["total"] = s.total;
        j["kl"] = s.kl;
        j["nll"] = s.nll;
        out += j.dump();
        out += '\n';
    }
    return out;
}

}  // namespace phycine::vi
