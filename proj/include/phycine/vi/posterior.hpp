#pragma once

#include "phycine/ad/ops.hpp"
#include "phycine/common/rng.hpp"
#include "phycine/dyn/latent.hpp"

namespace phycine::vi {

// Diagonal Gaussian over the K x 16 latent block, lambda = {mean, log_var}.
struct Posterior {
    ad::Tensor mean;
    ad::Tensor log_var;

    int slots() const { return mean.shape.empty() ? 0 : mean.shape[0]; }
};

// Both halves i.i.d. uniform on [-0.5, 0.5].
Posterior init_posterior(int k, Rng& rng);

// Reparameterized draw: z = mean + exp(0.5 log_var) * eps, eps ~ N(0, I).
// Gradients flow to mean and log_var when the posterior lives on a tape.
ad::Tensor sample(const Posterior& post, Rng& rng);

// KL(q || N(0, I)) = sum 0.5 (exp(log_var) + mean^2 - 1 - log_var); >= 0.
ad::Tensor kl_to_standard_normal(const Posterior& post);

}  // namespace phycine::vi
