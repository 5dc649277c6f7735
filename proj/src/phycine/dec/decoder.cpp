#include "phycine/dec/decoder.hpp"

#include <cmath>

#include "phycine/common/error.hpp"

namespace phycine::dec {

using namespace phycine::ad;

namespace {

Tensor dense_init(int in, int out, Rng& rng) {
    Tensor w = Tensor::zeros({in, out});
    const double s = 1.0 / std::sqrt(static_cast<double>(in));
    for (double& v : w.data) v = s * rng.normal();
    return w;
}

// Rows of [x, y] pixel-center coordinates in [-1, 1], row-major over H, W.
Tensor coord_grid(int height, int width) {
    Tensor g = Tensor::zeros({height * width, 2});
    for (int r = 0; r < height; ++r)
        for (int c = 0; c < width; ++c) {
            g.data[(static_cast<std::size_t>(r) * width + c) * 2] =
                width == 1 ? 0.0 : 2.0 * c / (width - 1) - 1.0;
            g.data[(static_cast<std::size_t>(r) * width + c) * 2 + 1] =
                height == 1 ? 0.0 : 2.0 * r / (height - 1) - 1.0;
        }
    return g;
}

Tensor dense(const Tensor& x, const Tensor& w, const Tensor& b) {
    Tensor h = matmul(x, w);
    return add(h, broadcast(reshape(b, {1, b.size()}), h.shape));
}

}  // namespace

DecoderParams DecoderParams::init(const DecoderConfig& cfg, Rng& rng) {
    DecoderParams p;
    const int in = cfg.ctx_dim + 2;
    p.w1 = dense_init(in, cfg.hidden, rng);
    p.b1 = Tensor::zeros({cfg.hidden});
    p.w2 = dense_init(cfg.hidden, cfg.hidden, rng);
    p.b2 = Tensor::zeros({cfg.hidden});
    p.w3 = dense_init(cfg.hidden, 4, rng);
    p.b3 = Tensor::zeros({4});
    return p;
}

std::vector<std::pair<std::string, ad::Tensor*>> DecoderParams::named_tensors() {
    return {{"dec.w1", &w1}, {"dec.b1", &b1}, {"dec.w2", &w2},
            {"dec.b2", &b2}, {"dec.w3", &w3}, {"dec.b3", &b3}};
}

SlotDecode decode(const Tensor& ctx, int height, int width, const DecoderParams& params) {
    if (ctx.rank() != 2)
        raise(ErrorKind::Shape, "decode: ctx must be K x ctx_dim, got " + shape_str(ctx.shape));
    const int k = ctx.shape[0];
    const int ctx_dim = ctx.shape[1];
    if (params.w1.shape[0] != ctx_dim + 2)
        raise(ErrorKind::Shape, "decode: ctx dim " + std::to_string(ctx_dim) +
                                    " does not match decoder input " +
                                    std::to_string(params.w1.shape[0] - 2));
    const int hw = height * width;
    const int rows = k * hw;

    // Every slot decodes through the same per-pixel MLP (exchangeability).
    Tensor ctx_rows = reshape(broadcast(reshape(ctx, {k, 1, ctx_dim}), {k, hw, ctx_dim}),
                              {rows, ctx_dim});
    Tensor coord_rows = reshape(broadcast(reshape(coord_grid(height, width), {1, hw, 2}),
                                          {k, hw, 2}),
                                {rows, 2});
    Tensor in = concat({ctx_rows, coord_rows}, 1);

    Tensor h1 = tanh(dense(in, params.w1, params.b1));
    Tensor h2 = tanh(dense(h1, params.w2, params.b2));
    Tensor out = dense(h2, params.w3, params.b3);

    SlotDecode s;
    s.means = reshape(sigmoid(slice(out, 1, 0, 3)), {k, height, width, 3});
    s.mask_logits = reshape(slice(out, 1, 3, 1), {k, height, width});
    s.masks = softmax(s.mask_logits, 0);
    return s;
}

Tensor mixture_log_likelihood(const Tensor& image, const SlotDecode& slots, double sigma) {
    if (sigma <= 0.0) raise(ErrorKind::Usage, "mixture_log_likelihood: sigma must be positive");
    const auto& ms = slots.means.shape;
    if (ms.size() != 4 || image.rank() != 3 || image.shape[0] != ms[1] ||
        image.shape[1] != ms[2] || image.shape[2] != 3)
        raise(ErrorKind::Shape, "mixture_log_likelihood: image " + shape_str(image.shape) +
                                    " does not match slot means " + shape_str(ms));
    const int k = ms[0], h = ms[1], w = ms[2];

    Tensor xb = broadcast(reshape(image, {1, h, w, 3}), {k, h, w, 3});
    Tensor sse = sum_axis(square(sub(xb, slots.means)), 3);  // K,H,W
    const double log_norm = -1.5 * std::log(2.0 * M_PI * sigma * sigma);
    Tensor log_gauss = add_scalar(scale(sse, -0.5 / (sigma * sigma)), log_norm);
    Tensor weighted = add(log_softmax(slots.mask_logits, 0), log_gauss);
    return sum(logsumexp(weighted, 0));
}

Tensor composite_image(const SlotDecode& slots) {
    const auto& ms = slots.means.shape;
    const int k = ms[0], h = ms[1], w = ms[2];
    Tensor mk = broadcast(reshape(slots.masks, {k, h, w, 1}), {k, h, w, 3});
    return sum_axis(mul(mk, slots.means), 0);
}

}  // namespace phycine::dec
