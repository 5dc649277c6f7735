#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "phycine/ad/grad_check.hpp"
#include "phycine/common/error.hpp"
#include "phycine/dec/decoder.hpp"

using namespace phycine;
using namespace phycine::ad;
using namespace phycine::dec;

namespace {

Tensor random_ctx(int k, int dim, Rng& rng) {
    Tensor t = Tensor::zeros({k, dim});
    for (double& v : t.data) v = rng.uniform(-1.0, 1.0);
    return t;
}

}  // namespace

TEST_CASE("masks sum to one across slots at every pixel") {
    Rng rng(11);
    DecoderConfig cfg;
    DecoderParams p = DecoderParams::init(cfg, rng);
    for (int trial = 0; trial < 3; ++trial) {
        const int k = 1 + trial * 2;  // 1, 3, 5
        SlotDecode s = decode(random_ctx(k, cfg.ctx_dim, rng), 8, 12, p);
        for (int px = 0; px < 8 * 12; ++px) {
            double total = 0.0;
            for (int slot = 0; slot < k; ++slot) total += s.masks.data[slot * 8 * 12 + px];
            CHECK(std::abs(total - 1.0) < 1e-12);
        }
        for (double v : s.means.data) {
            CHECK(v > 0.0);
            CHECK(v < 1.0);
        }
    }
}

TEST_CASE("K=1 perfect reconstruction hits the closed-form likelihood") {
    // With one slot the mask is exactly 1 and each matched pixel contributes
    // -1.5*log(2*pi*sigma^2); sigma=0.3 gives 0.8551035... per pixel.
    Rng rng(5);
    DecoderConfig cfg;
    DecoderParams p = DecoderParams::init(cfg, rng);
    const int h = 4, w = 5;
    SlotDecode s = decode(random_ctx(1, cfg.ctx_dim, rng), h, w, p);
    Tensor image = reshape(s.means.detached(), {h, w, 3});
    const double ll = mixture_log_likelihood(image, s, 0.3).value();
    const double per_pixel = -1.5 * std::log(2.0 * M_PI * 0.09);
    CHECK(per_pixel == doctest::Approx(0.8551035).epsilon(1e-6));
    CHECK(ll == doctest::Approx(h * w * per_pixel).epsilon(1e-12));
}

TEST_CASE("likelihood never exceeds the perfect-fit bound") {
    Rng rng(13);
    DecoderConfig cfg;
    DecoderParams p = DecoderParams::init(cfg, rng);
    const int h = 6, w = 6, k = 4;
    const double bound = h * w * (-1.5 * std::log(2.0 * M_PI * 0.09));
    for (int trial = 0; trial < 20; ++trial) {
        SlotDecode s = decode(random_ctx(k, cfg.ctx_dim, rng), h, w, p);
        Tensor image = Tensor::zeros({h, w, 3});
        for (double& v : image.data) v = rng.uniform(0.0, 1.0);
        CHECK(mixture_log_likelihood(image, s, 0.3).value() <= bound + 1e-9);
    }
}

TEST_CASE("mixture likelihood is exactly slot-permutation invariant") {
    Rng rng(17);
    DecoderConfig cfg;
    DecoderParams p = DecoderParams::init(cfg, rng);
    const int h = 5, w = 7;
    for (int trial = 0; trial < 100; ++trial) {
        const int k = 2 + rng.uniform_int(5);
        Tensor ctx = random_ctx(k, cfg.ctx_dim, rng);
        Tensor image = Tensor::zeros({h, w, 3});
        for (double& v : image.data) v = rng.uniform(0.0, 1.0);

        std::vector<int> perm(k);
        for (int i = 0; i < k; ++i) perm[i] = i;
        for (int i = k - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);
        Tensor ctx_perm = Tensor::zeros({k, cfg.ctx_dim});
        for (int i = 0; i < k; ++i)
            std::copy_n(&ctx.data[perm[i] * cfg.ctx_dim], cfg.ctx_dim,
                        &ctx_perm.data[i * cfg.ctx_dim]);

        const double a = mixture_log_likelihood(image, decode(ctx, h, w, p), 0.3).value();
        const double b = mixture_log_likelihood(image, decode(ctx_perm, h, w, p), 0.3).value();
        CHECK(a == b);  // bitwise
    }
}

TEST_CASE("likelihood gradients match finite differences through the decoder") {
    Rng rng(23);
    DecoderConfig cfg;
    cfg.hidden = 8;
    DecoderParams p = DecoderParams::init(cfg, rng);
    const int h = 3, w = 3, k = 2;
    Tensor ctx = random_ctx(k, cfg.ctx_dim, rng);
    Tensor image = Tensor::zeros({h, w, 3});
    for (double& v : image.data) v = rng.uniform(0.0, 1.0);
    auto f = [&](Tape&, const Tensor& c) {
        return mixture_log_likelihood(image, decode(c, h, w, p), 0.3);
    };
    CHECK(grad_check(f, ctx, 1e-5) < 1e-4);

    // And through a decoder weight with ctx held constant.
    auto g = [&](Tape& tape, const Tensor& w1v) {
        DecoderParams q = p;
        q.w1 = w1v;
        (void)tape;
        return mixture_log_likelihood(image, decode(ctx, h, w, q), 0.3);
    };
    CHECK(grad_check(g, p.w1, 1e-5) < 1e-4);
}

TEST_CASE("composite image is a convex combination of slot means") {
    Rng rng(29);
    DecoderConfig cfg;
    DecoderParams p = DecoderParams::init(cfg, rng);
    SlotDecode s = decode(random_ctx(3, cfg.ctx_dim, rng), 4, 4, p);
    Tensor comp = composite_image(s);
    CHECK(comp.shape == std::vector<int>{4, 4, 3});
    for (double v : comp.data) {
        CHECK(v > 0.0);
        CHECK(v < 1.0);
    }
}

TEST_CASE("bad sigma and shape mismatches raise") {
    Rng rng(31);
    DecoderConfig cfg;
    DecoderParams p = DecoderParams::init(cfg, rng);
    SlotDecode s = decode(random_ctx(2, cfg.ctx_dim, rng), 4, 4, p);
    Tensor image = Tensor::zeros({4, 4, 3});
    CHECK_THROWS_AS(mixture_log_likelihood(image, s, 0.0), Error);
    CHECK_THROWS_AS(mixture_log_likelihood(image, s, -1.0), Error);
    Tensor wrong = Tensor::zeros({5, 4, 3});
    CHECK_THROWS_AS(mixture_log_likelihood(wrong, s, 0.3), Error);
    Tensor bad_ctx = Tensor::zeros({2, 7});
    CHECK_THROWS_AS(decode(bad_ctx, 4, 4, p), Error);
}
