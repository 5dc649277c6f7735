#pragma once

#include <vector>

#include "phycine/ad/ops.hpp"
#include "phycine/common/rng.hpp"

namespace phycine::dec {

struct DecoderConfig {
    int ctx_dim = 12;
    int hidden = 32;
    double sigma = 0.3;  // pixel std of the Gaussian image model
};

// Spatial-broadcast per-pixel MLP, shared across slots and pixels:
// [z_ctx; x; y] -> hidden -> hidden -> (3 sigmoid channel means, 1 mask logit).
struct DecoderParams {
    ad::Tensor w1, b1, w2, b2, w3, b3;

    static DecoderParams init(const DecoderConfig& cfg, Rng& rng);
    std::vector<std::pair<std::string, ad::Tensor*>> named_tensors();
};

struct SlotDecode {
    ad::Tensor means;        // K,H,W,3
    ad::Tensor mask_logits;  // K,H,W
    ad::Tensor masks;        // K,H,W, softmax over slots per pixel
};

// ctx: K x ctx_dim; may live on a tape (params and ctx flow gradients).
SlotDecode decode(const ad::Tensor& ctx, int height, int width, const DecoderParams& params);

// Spatial Gaussian mixture log-likelihood of `image` (H,W,3 in [0,1]) under
// the decoded slots: per pixel, log sum_k softmax(logits)_k N(x; mu_k, sigma^2 I),
// stabilized through log-space.
ad::Tensor mixture_log_likelihood(const ad::Tensor& image, const SlotDecode& slots, double sigma);

// Mask-weighted mean image, H,W,3.
ad::Tensor composite_image(const SlotDecode& slots);

}  // namespace phycine::dec
