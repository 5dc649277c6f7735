#include "phycine/vi/elbo.hpp"

#include "phycine/common/error.hpp"

namespace phycine::vi {

using ad::Tensor;

ElboReport elbo_loss(const std::vector<Tensor>& frames, const Posterior& post,
                     const model::ModelParams& params, const model::ModelConfig& cfg,
                     const ElboOptions& opt, Rng& rng) {
    if (frames.empty()) raise(ErrorKind::Usage, "elbo_loss: need at least one frame");
    if (opt.mc_samples < 1) raise(ErrorKind::Usage, "elbo_loss: mc_samples must be >= 1");
    const std::vector<int>& fs = frames[0].shape;
    if (fs.size() != 3 || fs[2] != 3)
        raise(ErrorKind::Shape, "elbo_loss: frames must be H x W x 3, got " + ad::shape_str(fs));
    for (const Tensor& f : frames)
        if (f.shape != fs)
            raise(ErrorKind::Shape, "elbo_loss: inconsistent frame shapes " + ad::shape_str(fs) +
                                        " vs " + ad::shape_str(f.shape));

    const int n = static_cast<int>(frames.size()) - 1;
    const double inv_s = 1.0 / opt.mc_samples;

    ElboReport report;
    report.beta = opt.beta;
    report.nll.assign(n + 1, 0.0);

    Tensor kl = kl_to_standard_normal(post);
    report.kl = kl.value();

    Tensor recon = Tensor::scalar(0.0);
    for (int s = 0; s < opt.mc_samples; ++s) {
        Tensor z = opt.fixed_eps ? post.mean : sample(post, rng);
        dyn::RolloutResult rr =
            dyn::rollout(dyn::split_latent(z), n, params.interaction, cfg.interaction,
                         opt.col_gate, opt.chg_gate);
        for (int t = 0; t <= n; ++t) {
            dec::SlotDecode slots = dec::decode(rr.steps[t].ctx, fs[0], fs[1], params.decoder);
            Tensor nll_t =
                ad::scale(dec::mixture_log_likelihood(frames[t], slots, cfg.decoder.sigma), -1.0);
            report.nll[t] += nll_t.value() * inv_s;
            recon = ad::add(recon, nll_t);
        }
    }
    report.total = ad::add(ad::scale(recon, inv_s), ad::scale(kl, opt.beta));
    return report;
}

Tensor frame_tensor(const sim::Episode& ep, int t) {
    if (t < 0 || t >= ep.frames)
        raise(ErrorKind::Usage, "frame_tensor: frame " + std::to_string(t) + " out of range");
    Tensor img = Tensor::zeros({ep.height, ep.width, 3});
    const float* src = ep.frame_rgb(t);
    for (int i = 0; i < img.size(); ++i) img.data[i] = src[i];
    return img;
}

std::vector<Tensor> episode_frames(const sim::Episode& ep, int start, int count) {
    std::vector<Tensor> out;
    out.reserve(count);
    for (int t = start; t < start + count; ++t) out.push_back(frame_tensor(ep, t));
    return out;
}

}  // namespace phycine::vi
