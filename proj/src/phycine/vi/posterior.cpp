#include "phycine/vi/posterior.hpp"

#include "phycine/common/error.hpp"

namespace phycine::vi {

using ad::Tensor;

Posterior init_posterior(int k, Rng& rng) {
    if (k < 1) raise(ErrorKind::Usage, "init_posterior: K must be >= 1, got " + std::to_string(k));
    Posterior p{Tensor::zeros({k, dyn::kLatentDim}), Tensor::zeros({k, dyn::kLatentDim})};
    for (double& x : p.mean.data) x = rng.uniform(-0.5, 0.5);
    for (double& x : p.log_var.data) x = rng.uniform(-0.5, 0.5);
    return p;
}

Tensor sample(const Posterior& post, Rng& rng) {
    Tensor eps = Tensor::zeros(post.mean.shape);
    for (double& x : eps.data) x = rng.normal();
    return ad::add(post.mean, ad::mul(ad::exp(ad::scale(post.log_var, 0.5)), eps));
}

Tensor kl_to_standard_normal(const Posterior& post) {
    Tensor term = ad::sub(ad::add(ad::exp(post.log_var), ad::square(post.mean)),
                          ad::add_scalar(post.log_var, 1.0));
    return ad::scale(ad::sum(term), 0.5);
}

}  // namespace phycine::vi
