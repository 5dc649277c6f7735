#pragma once

#include <vector>

#include "phycine/model/model.hpp"
#include "phycine/sim/episode.hpp"
#include "phycine/vi/posterior.hpp"

namespace phycine::vi {

struct ElboOptions {
    double beta = 100.0;
    double col_gate = 1.0;
    double chg_gate = 1.0;
    int mc_samples = 1;
    // eps = 0 instead of a draw: deterministic mean-path loss for tests and
    // refinement schedules that must not depend on sampling noise.
    bool fixed_eps = false;
};

struct ElboReport {
    ad::Tensor total;         // scalar; differentiable w.r.t. posterior and params
    std::vector<double> nll;  // per-step reconstruction NLL, averaged over samples
    double kl = 0.0;
    double beta = 0.0;

    double value() const { return total.value(); }
};

// Negative ELBO of frames x^{0..N} under the posterior: sample latents,
// rollout N steps, decode every step, sum per-frame NLL, charge beta * KL
// once for lambda^0. Averaged over mc_samples.
ElboReport elbo_loss(const std::vector<ad::Tensor>& frames, const Posterior& post,
                     const model::ModelParams& params, const model::ModelConfig& cfg,
                     const ElboOptions& opt, Rng& rng);

// Episode frame t as an H x W x 3 tensor in [0, 1].
ad::Tensor frame_tensor(const sim::Episode& ep, int t);
std::vector<ad::Tensor> episode_frames(const sim::Episode& ep, int start, int count);

}  // namespace phycine::vi
