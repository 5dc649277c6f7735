#pragma once

#include <array>
#include <string>
#include <vector>

#include "phycine/vi/elbo.hpp"

namespace phycine::vi {

constexpr std::array<double, dyn::kLatentDim> full_mask() {
    std::array<double, dyn::kLatentDim> m{};
    for (double& x : m) x = 1.0;
    return m;
}
// Masks selecting which latent entries a phase refines; the rest stay frozen
// (exactly zero update, moments included).
std::array<double, dyn::kLatentDim> ctx_mask();
std::array<double, dyn::kLatentDim> dyn_mask();
std::array<double, dyn::kLatentDim> intrinsic_mask();  // m and c

struct RefineOptions {
    int steps = 5;        // outer iterations; one trajectory entry each
    int inner_steps = 4;  // Adam updates per outer iteration
    double lr = 0.05;
    std::array<double, dyn::kLatentDim> mask = full_mask();
    ElboOptions elbo;
    // Trajectory logging costs one extra forward pass at the end; training
    // loops turn it off.
    bool record_trajectory = true;
    // Return the iterate with the lowest loss instead of the last one. Only
    // meaningful with a deterministic loss (fixed_eps); prev is unaffected.
    bool keep_best = false;
};

struct RefineStep {
    std::string phase;  // empty for bare refine; set by infer
    int iteration = 0;  // outer index; 0 is the entry loss
    double total = 0.0;
    double kl = 0.0;
    std::vector<double> nll;
};

struct RefineResult {
    Posterior post;
    Posterior prev;  // one Adam update before the end; truncated-unroll hook
    std::vector<RefineStep> trajectory;  // steps + 1 entries
};

// Adam-preconditioned gradient descent on lambda against the negative ELBO.
// Model params are read-only; moments start at zero (reset per phase).
RefineResult refine(const Posterior& init, const std::vector<ad::Tensor>& frames,
                    const model::ModelParams& params, const model::ModelConfig& cfg,
                    const RefineOptions& opt, Rng& rng);

struct InferOptions {
    int slots = 4;
    // Outer steps per phase (ctx, dyn, intrinsic, polish); inner_steps Adam
    // updates inside each outer step. Training uses a shorter schedule than
    // evaluation; both go through the same phases.
    std::array<int, 4> phase_steps = {5, 5, 5, 5};
    int inner_steps = 4;
    double lr = 0.05;
    ElboOptions elbo;
    bool record_trajectory = true;
};

struct InferResult {
    Posterior post;
    Posterior prev;
    dyn::LatentState latents;  // split view of post.mean
    std::vector<RefineStep> trajectory;
    // Posterior at each phase boundary, for probes and masking checks.
    std::vector<std::pair<std::string, Posterior>> phase_posts;
};

// Staged refinement: ctx against frame 0, dyn against frames 0..1 (ctx
// frozen), m/c against all frames (ctx, dyn frozen), then a joint polish.
InferResult infer(const std::vector<ad::Tensor>& frames, const model::ModelParams& params,
                  const model::ModelConfig& cfg, const InferOptions& opt, Rng& rng);

// One JSON object per refinement step: phase, iteration, total, kl, nll[].
std::string trajectory_jsonl(const std::vector<RefineStep>& steps);

}  // namespace phycine::vi
