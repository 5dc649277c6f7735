#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <string>
#include <vector>

#include <json.hpp>

#include "phycine/ad/grad_check.hpp"
#include "phycine/common/error.hpp"
#include "phycine/opt/adam.hpp"
#include "phycine/vi/refine.hpp"

using namespace phycine;
using namespace phycine::ad;
using namespace phycine::vi;

namespace {

// Tiny deterministic frame batch so unit tests stay in the millisecond range.
std::vector<Tensor> toy_frames(int count, int h = 6, int w = 8) {
    std::vector<Tensor> out;
    Rng rng(20260814);
    for (int t = 0; t < count; ++t) {
        Tensor f = Tensor::zeros({h, w, 3});
        for (double& v : f.data) v = rng.uniform(0.0, 1.0);
        out.push_back(f);
    }
    return out;
}

model::ModelConfig toy_cfg() { return {}; }

model::ModelParams toy_params(std::uint64_t seed = 99) {
    Rng rng(seed);
    return model::ModelParams::init(toy_cfg(), rng);
}

}  // namespace

TEST_CASE("posterior init is deterministic, in range, correctly shaped") {
    Rng a(42), b(42);
    Posterior pa = init_posterior(8, a);
    Posterior pb = init_posterior(8, b);
    CHECK(pa.mean.shape == std::vector<int>{8, 16});
    CHECK(pa.log_var.shape == std::vector<int>{8, 16});
    CHECK(pa.mean.data == pb.mean.data);
    CHECK(pa.log_var.data == pb.log_var.data);
    for (double v : pa.mean.data) {
        CHECK(v >= -0.5);
        CHECK(v <= 0.5);
    }
    for (double v : pa.log_var.data) {
        CHECK(v >= -0.5);
        CHECK(v <= 0.5);
    }
    CHECK_THROWS_AS(init_posterior(0, a), Error);
}

TEST_CASE("zero-variance limit collapses samples onto the mean") {
    Rng rng(7);
    Posterior p = init_posterior(2, rng);
    for (double& v : p.log_var.data) v = -40.0;
    Tensor z = sample(p, rng);
    for (int i = 0; i < z.size(); ++i)
        CHECK(z.data[i] == doctest::Approx(p.mean.data[i]).epsilon(1e-8));
    dyn::LatentState s = dyn::split_latent(z);
    CHECK(s.ctx.shape == std::vector<int>{2, 12});
    CHECK(s.dyn.shape == std::vector<int>{2, 2});
    CHECK(s.m.shape == std::vector<int>{2, 1});
    CHECK(s.c.shape == std::vector<int>{2, 1});
}

TEST_CASE("sample mean over many draws concentrates on the posterior mean") {
    Rng rng(11);
    Posterior p = init_posterior(1, rng);
    const int n = 100000;
    std::vector<double> acc(16, 0.0);
    for (int i = 0; i < n; ++i) {
        Tensor z = sample(p, rng);
        for (int d = 0; d < 16; ++d) acc[d] += z.data[d];
    }
    for (int d = 0; d < 16; ++d) {
        const double sigma = std::exp(0.5 * p.log_var.data[d]);
        CHECK(std::abs(acc[d] / n - p.mean.data[d]) < 3.0 * sigma / std::sqrt(double(n)));
    }
}

TEST_CASE("sampling is reparameterized: gradients reach mean and log_var") {
    Rng rng(13);
    Posterior p = init_posterior(2, rng);
    auto f_mean = [&](Tape&, const Tensor& x) {
        Posterior q{x, p.log_var};
        Rng r(555);
        return sum(square(sample(q, r)));
    };
    CHECK(grad_check(f_mean, p.mean, 1e-6) < 1e-5);
    auto f_lv = [&](Tape&, const Tensor& x) {
        Posterior q{p.mean, x};
        Rng r(555);
        return sum(square(sample(q, r)));
    };
    CHECK(grad_check(f_lv, p.log_var, 1e-6) < 1e-5);
}

TEST_CASE("KL closed form: zero at the prior, half mean-square off it") {
    Posterior p{Tensor::zeros({1, 16}), Tensor::zeros({1, 16})};
    CHECK(kl_to_standard_normal(p).value() == 0.0);
    p.mean.data[3] = 1.0;
    CHECK(kl_to_standard_normal(p).value() == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("KL matches an independent closed-form evaluation and stays nonnegative") {
    Rng rng(17);
    for (int trial = 0; trial < 20; ++trial) {
        Posterior p = init_posterior(3, rng);
        double want = 0.0;
        for (int i = 0; i < p.mean.size(); ++i) {
            const double mu = p.mean.data[i];
            const double lv = p.log_var.data[i];
            want += 0.5 * (std::exp(lv) + mu * mu - 1.0 - lv);
        }
        const double got = kl_to_standard_normal(p).value();
        CHECK(got == doctest::Approx(want).epsilon(1e-12));
        CHECK(got >= 0.0);
    }
}

TEST_CASE("elbo report satisfies the decomposition identity") {
    Rng rng(19);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(3, rng);
    std::vector<Tensor> frames = toy_frames(3);
    ElboOptions opt;
    opt.mc_samples = 2;
    ElboReport rep = elbo_loss(frames, p, params, toy_cfg(), opt, rng);
    REQUIRE(rep.nll.size() == 3);
    double recon = 0.0;
    for (double v : rep.nll) recon += v;
    CHECK(rep.value() == doctest::Approx(recon + rep.beta * rep.kl).epsilon(1e-9));
}

TEST_CASE("beta weighting is linear and beta zero leaves pure reconstruction") {
    Rng rng(23);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> frames = toy_frames(2);
    ElboOptions opt;
    opt.fixed_eps = true;  // identical reconstruction across the three runs
    opt.beta = 0.0;
    Rng r1(1), r2(1), r3(1);
    ElboReport rep0 = elbo_loss(frames, p, params, toy_cfg(), opt, r1);
    double recon = 0.0;
    for (double v : rep0.nll) recon += v;
    CHECK(rep0.value() == doctest::Approx(recon).epsilon(1e-12));
    opt.beta = 100.0;
    ElboReport rep1 = elbo_loss(frames, p, params, toy_cfg(), opt, r2);
    opt.beta = 200.0;
    ElboReport rep2 = elbo_loss(frames, p, params, toy_cfg(), opt, r3);
    CHECK(rep1.value() - rep0.value() == doctest::Approx(100.0 * rep1.kl).epsilon(1e-9));
    CHECK(rep2.value() - rep0.value() == doctest::Approx(2.0 * (rep1.value() - rep0.value())).epsilon(1e-9));
}

TEST_CASE("single-frame elbo degenerates to the static loss") {
    Rng rng(29);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> frames = toy_frames(1);
    ElboReport rep = elbo_loss(frames, p, params, toy_cfg(), ElboOptions{}, rng);
    CHECK(rep.nll.size() == 1);
    CHECK(std::isfinite(rep.value()));
}

TEST_CASE("elbo rejects malformed frame stacks") {
    Rng rng(31);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> none;
    CHECK_THROWS_AS(elbo_loss(none, p, params, toy_cfg(), ElboOptions{}, rng), Error);
    std::vector<Tensor> bad = toy_frames(2);
    bad[1] = Tensor::zeros({5, 8, 3});
    CHECK_THROWS_AS(elbo_loss(bad, p, params, toy_cfg(), ElboOptions{}, rng), Error);
}

TEST_CASE("elbo gradients w.r.t. the posterior match finite differences") {
    Rng rng(37);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> frames = toy_frames(2);
    ElboOptions opt;
    opt.beta = 5.0;  // keep both terms in play
    auto f_mean = [&](Tape&, const Tensor& x) {
        Posterior q{x, p.log_var};
        Rng r(777);
        return elbo_loss(frames, q, params, toy_cfg(), opt, r).total;
    };
    CHECK(grad_check(f_mean, p.mean, 1e-5) < 1e-3);
    auto f_lv = [&](Tape&, const Tensor& x) {
        Posterior q{p.mean, x};
        Rng r(777);
        return elbo_loss(frames, q, params, toy_cfg(), opt, r).total;
    };
    CHECK(grad_check(f_lv, p.log_var, 1e-5) < 1e-3);
}

TEST_CASE("zero learning rate leaves the posterior bitwise unchanged") {
    Rng rng(41);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> frames = toy_frames(2);
    RefineOptions opt;
    opt.steps = 2;
    opt.inner_steps = 2;
    opt.lr = 0.0;
    RefineResult res = refine(p, frames, params, toy_cfg(), opt, rng);
    CHECK(res.post.mean.data == p.mean.data);
    CHECK(res.post.log_var.data == p.log_var.data);
    CHECK(res.prev.mean.data == p.mean.data);
    CHECK(res.trajectory.size() == 3);
}

TEST_CASE("masked refinement freezes untargeted latent entries bitwise") {
    Rng rng(43);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(3, rng);
    std::vector<Tensor> frames = toy_frames(2);
    RefineOptions opt;
    opt.steps = 3;
    opt.inner_steps = 2;
    opt.mask = intrinsic_mask();
    RefineResult res = refine(p, frames, params, toy_cfg(), opt, rng);
    bool intrinsic_moved = false;
    for (int k = 0; k < 3; ++k)
        for (int d = 0; d < 16; ++d) {
            const int j = k * 16 + d;
            if (d == dyn::kMassOff || d == dyn::kChargeOff) {
                if (res.post.mean.data[j] != p.mean.data[j]) intrinsic_moved = true;
            } else {
                CHECK(res.post.mean.data[j] == p.mean.data[j]);
                CHECK(res.post.log_var.data[j] == p.log_var.data[j]);
            }
        }
    CHECK(intrinsic_moved);
}

TEST_CASE("refinement reduces the loss on a fixed toy problem") {
    Rng rng(47);
    model::ModelParams params = toy_params();
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> frames = toy_frames(1);
    RefineOptions opt;
    opt.steps = 5;
    opt.inner_steps = 4;
    opt.elbo.fixed_eps = true;
    RefineResult res = refine(p, frames, params, toy_cfg(), opt, rng);
    CHECK(res.trajectory.back().total < res.trajectory.front().total);
}

TEST_CASE("refine flags a non-finite loss with the iteration index") {
    Rng rng(53);
    model::ModelParams params = toy_params();
    // A decoder bias pushed to infinity poisons the likelihood immediately.
    for (double& v : params.decoder.b3.data) v = 1e308;
    for (double& v : params.decoder.w3.data) v = 1e308;
    Posterior p = init_posterior(2, rng);
    std::vector<Tensor> frames = toy_frames(1);
    RefineOptions opt;
    try {
        refine(p, frames, params, toy_cfg(), opt, rng);
        FAIL("expected a numeric error");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        CHECK(std::string(e.what()).find("iteration") != std::string::npos);
    }
}

TEST_CASE("staged inference labels phases and freezes upstream entries") {
    Rng rng(59);
    model::ModelParams params = toy_params();
    std::vector<Tensor> frames = toy_frames(3);
    InferOptions opt;
    opt.slots = 2;
    opt.phase_steps = {2, 2, 2, 2};
    opt.inner_steps = 2;
    InferResult res = infer(frames, params, toy_cfg(), opt, rng);
    REQUIRE(res.phase_posts.size() == 4);
    CHECK(res.phase_posts[0].first == "ctx");
    CHECK(res.phase_posts[1].first == "dyn");
    CHECK(res.phase_posts[2].first == "intrinsic");
    CHECK(res.phase_posts[3].first == "polish");
    // During the intrinsic phase ctx and dyn entries must not move at all.
    const Posterior& after_dyn = res.phase_posts[1].second;
    const Posterior& after_intr = res.phase_posts[2].second;
    for (int k = 0; k < 2; ++k)
        for (int d = 0; d < dyn::kMassOff; ++d) {
            const int j = k * 16 + d;
            CHECK(after_intr.mean.data[j] == after_dyn.mean.data[j]);
            CHECK(after_intr.log_var.data[j] == after_dyn.log_var.data[j]);
        }
    CHECK(res.latents.ctx.shape == std::vector<int>{2, 12});
    CHECK(res.trajectory.size() == 4 * 3);
    std::vector<Tensor> one = toy_frames(1);
    CHECK_THROWS_AS(infer(one, params, toy_cfg(), opt, rng), Error);
}

TEST_CASE("inference is deterministic under a fixed seed") {
    model::ModelParams params = toy_params();
    std::vector<Tensor> frames = toy_frames(3);
    InferOptions opt;
    opt.slots = 2;
    opt.phase_steps = {1, 1, 1, 1};
    opt.inner_steps = 2;
    Rng r1(1234), r2(1234);
    InferResult a = infer(frames, params, toy_cfg(), opt, r1);
    InferResult b = infer(frames, params, toy_cfg(), opt, r2);
    CHECK(a.post.mean.data == b.post.mean.data);
    CHECK(a.post.log_var.data == b.post.log_var.data);
    CHECK(a.prev.mean.data == b.prev.mean.data);
}

TEST_CASE("trajectory serializes to parseable JSONL") {
    Rng rng(61);
    model::ModelParams params = toy_params();
    std::vector<Tensor> frames = toy_frames(2);
    InferOptions opt;
    opt.slots = 2;
    opt.phase_steps = {1, 1, 1, 1};
    opt.inner_steps = 1;
    InferResult res = infer(frames, params, toy_cfg(), opt, rng);
    std::string text = trajectory_jsonl(res.trajectory);
    int lines = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t nl = text.find('\n', pos);
        REQUIRE(nl != std::string::npos);
        nlohmann::json j = nlohmann::json::parse(text.substr(pos, nl - pos));
        CHECK(j.contains("phase"));
        CHECK(j.contains("iteration"));
        CHECK(j.contains("total"));
        CHECK(j.contains("kl"));
        CHECK(j["nll"].is_array());
        pos = nl + 1;
        ++lines;
    }
    CHECK(lines == static_cast<int>(res.trajectory.size()));
}

TEST_CASE("adam takes a step against a quadratic and masking holds it still") {
    phycine::opt::AdamConfig cfg;
    cfg.lr = 0.1;
    phycine::opt::Adam adam(cfg);
    Tensor x = Tensor::of({2}, {2.0, -3.0});
    for (int it = 0; it < 200; ++it) {
        Tensor g = Tensor::of({2}, {2.0 * x.data[0], 2.0 * x.data[1]});
        std::vector<Tensor*> ps = {&x};
        std::vector<const Tensor*> gs = {&g};
        adam.step(ps, gs);
    }
    CHECK(std::abs(x.data[0]) < 0.05);
    CHECK(std::abs(x.data[1]) < 0.05);

    phycine::opt::Adam adam2(cfg);
    Tensor y = Tensor::of({2}, {1.5, -2.5});
    const double y1 = y.data[1];
    for (int it = 0; it < 50; ++it) {
        Tensor g = Tensor::of({2}, {2.0 * y.data[0], 0.0});
        std::vector<Tensor*> ps = {&y};
        std::vector<const Tensor*> gs = {&g};
        adam2.step(ps, gs);
    }
    CHECK(y.data[1] == y1);  // zero grad + zero moments = bitwise no-op
}
