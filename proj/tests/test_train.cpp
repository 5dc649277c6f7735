#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "phycine/common/error.hpp"
#include "phycine/train/trainer.hpp"
#include "phycine/vi/refine.hpp"

using namespace phycine;
using namespace phycine::train;

namespace {

sim::GenConfig tiny_gen() {
    sim::GenConfig g;
    g.width = 24;
    g.height = 16;
    g.frames = 12;
    return g;
}

// Small mixed dataset shared by the training tests; built once.
const std::vector<sim::Episode>& tiny_dataset() {
    static const std::vector<sim::Episode> data = [] {
        return sim::generate_dataset(tiny_gen(), {3, 2, 2, 1, 1}, 1717);
    }();
    return data;
}

TrainConfig tiny_cfg() {
    TrainConfig cfg;
    cfg.seed = 555;
    cfg.slots = 3;
    cfg.stages[0] = StageConfig{{1}, 2, 0.5, false, 2, 2};
    cfg.stages[1] = StageConfig{{1, 2}, 2, 1.0, false, 2, 2};
    cfg.stages[2] = StageConfig{{1, 2, 3, 4, 5}, 2, 1.0, true, 1, 2};
    cfg.refine_phase_steps = {1, 1, 1, 1};
    cfg.refine_inner_steps = 1;
    return cfg;
}

std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    REQUIRE(in.good());
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

}  // namespace

TEST_CASE("train config survives a JSON round trip and rejects bad schedules") {
    TrainConfig cfg = tiny_cfg();
    cfg.ablation = "no-b2u";
    cfg.model.interaction.attn_hidden = 12;
    const std::string a = to_json(cfg);
    TrainConfig back = config_from_json(a);
    CHECK(to_json(back) == a);
    CHECK(back.stages[0].collision_prob == cfg.stages[0].collision_prob);
    CHECK(back.model.interaction.attn_hidden == 12);

    TrainConfig bad = tiny_cfg();
    bad.stages[0].categories = {1, 2};
    CHECK_THROWS_AS(validate(bad), Error);
    bad = tiny_cfg();
    bad.stages[1].categories = {3};
    CHECK_THROWS_AS(validate(bad), Error);
    bad = tiny_cfg();
    bad.ablation = "nonsense";
    CHECK_THROWS_AS(validate(bad), Error);
    CHECK_THROWS_AS(config_from_json("{\"refine\":{\"phase_steps\":[1,2,3]}}"), Error);
    CHECK_THROWS_AS(config_from_json("not json"), Error);
}

TEST_CASE("checkpoint round trip is byte-identical and validates its header") {
    const model::ModelConfig mc;
    Rng rng(77);
    TrainState st{model::ModelParams::init(mc, rng), opt::Adam{}, 2, 14, 999, 0xABCDEF};
    // Populate optimizer moments so the full payload is exercised.
    auto named = st.params.named_tensors();
    std::vector<ad::Tensor> gs;
    std::vector<ad::Tensor*> ps;
    for (auto& [name, t] : named) {
        ad::Tensor g = ad::Tensor::zeros(t->shape);
        for (double& v : g.data) v = rng.uniform(-1.0, 1.0);
        gs.push_back(g);
    }
    std::vector<const ad::Tensor*> gps;
    for (auto& [name, t] : named) ps.push_back(t);
    for (auto& g : gs) gps.push_back(&g);
    st.adam.step(ps, gps);

    const std::string p1 = "/tmp/phycine_ckpt_rt1.phyc";
    const std::string p2 = "/tmp/phycine_ckpt_rt2.phyc";
    save_checkpoint(p1, st);
    TrainState back = load_checkpoint(p1, mc);
    CHECK(back.stage == 2);
    CHECK(back.iteration == 14);
    CHECK(back.seed == 999);
    CHECK(back.config_hash == 0xABCDEF);
    CHECK(back.adam.t == st.adam.t);
    CHECK(back.params.content_hash() == st.params.content_hash());
    CHECK(back.adam.m == st.adam.m);
    CHECK(back.adam.v == st.adam.v);
    save_checkpoint(p2, back);
    CHECK(read_file(p1) == read_file(p2));
}

TEST_CASE("checkpoint loader rejects corruption, version skew and mismatched configs") {
    const model::ModelConfig mc;
    Rng rng(78);
    TrainState st{model::ModelParams::init(mc, rng), opt::Adam{}, 1, 0, 1, 1};
    const std::string path = "/tmp/phycine_ckpt_guard.phyc";
    save_checkpoint(path, st);
    std::string bytes = read_file(path);

    {  // wrong magic
        std::ofstream out("/tmp/phycine_ckpt_magic.phyc", std::ios::binary);
        std::string b = bytes;
        b[0] = 'X';
        out << b;
        out.close();
        CHECK_THROWS_AS(load_checkpoint("/tmp/phycine_ckpt_magic.phyc", mc), Error);
    }
    {  // unsupported version
        std::ofstream out("/tmp/phycine_ckpt_ver.phyc", std::ios::binary);
        std::string b = bytes;
        b[4] = 9;
        out << b;
        out.close();
        CHECK_THROWS_AS(load_checkpoint("/tmp/phycine_ckpt_ver.phyc", mc), Error);
    }
    {  // truncated
        std::ofstream out("/tmp/phycine_ckpt_trunc.phyc", std::ios::binary);
        out << bytes.substr(0, bytes.size() / 2);
        out.close();
        CHECK_THROWS_AS(load_checkpoint("/tmp/phycine_ckpt_trunc.phyc", mc), Error);
    }
    {  // trailing bytes
        std::ofstream out("/tmp/phycine_ckpt_trail.phyc", std::ios::binary);
        out << bytes << '\0';
        out.close();
        CHECK_THROWS_AS(load_checkpoint("/tmp/phycine_ckpt_trail.phyc", mc), Error);
    }
    {  // parameter layout mismatch
        model::ModelConfig other;
        other.interaction.attn_hidden = 8;
        CHECK_THROWS_AS(load_checkpoint(path, other), Error);
    }
    try {
        load_checkpoint(path, [] {
            model::ModelConfig other;
            other.interaction.attn_hidden = 8;
            return other;
        }());
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Data);
    }
}

TEST_CASE("clip sampler respects bounds and biases toward collision windows") {
    const sim::Episode* with_events = nullptr;
    for (const sim::Episode& ep : tiny_dataset())
        if (!ep.events.empty()) {
            with_events = &ep;
            break;
        }
    REQUIRE(with_events != nullptr);
    Rng rng(31);
    const int horizon = 3;
    int covering = 0;
    const int draws = 400;
    for (int i = 0; i < draws; ++i) {
        const int t0 = pick_clip_start(*with_events, horizon, rng);
        CHECK(t0 >= 0);
        CHECK(t0 + horizon < with_events->frames);
        for (const sim::CollisionEvent& ev : with_events->events)
            if (ev.frame > t0 && ev.frame <= t0 + horizon) {
                ++covering;
                break;
            }
    }
    // Half the draws aim at an event window on purpose; uniform draws land
    // there sometimes too.
    CHECK(covering > draws / 3);

    sim::Episode short_ep = *with_events;
    short_ep.frames = 2;
    CHECK_THROWS_AS(pick_clip_start(short_ep, 5, rng), Error);
}

TEST_CASE("stage sampling is gated by category") {
    StageConfig s1{{1}, 2, 0.5, false, 1, 1};
    std::vector<int> idx = eligible_episodes(tiny_dataset(), s1, 1);
    CHECK(!idx.empty());
    for (int i : idx) {
        CHECK(tiny_dataset()[i].category == 1);
        // Category 1: no charges, identical masses.
        for (const auto& obj : tiny_dataset()[i].states[0].objects) {
            CHECK(obj.charge == 0.0);
            CHECK(obj.mass == tiny_dataset()[i].states[0].objects[0].mass);
        }
    }
    std::vector<sim::Episode> cat1_only;
    for (const sim::Episode& ep : tiny_dataset())
        if (ep.category == 1) cat1_only.push_back(ep);
    StageConfig s2{{1, 2}, 2, 1.0, false, 1, 1};
    CHECK_THROWS_AS(eligible_episodes(cat1_only, s2, 2), Error);  // category 2 absent
}

TEST_CASE("ablation plans reshape the curriculum") {
    TrainConfig cfg = tiny_cfg();
    std::vector<StageRun> full = make_plan(cfg);
    REQUIRE(full.size() == 3);
    CHECK(full[0].stage_id == 1);
    CHECK(full[2].sc.charge_enabled);

    cfg.ablation = "no-b2u";
    std::vector<StageRun> flat = make_plan(cfg);
    REQUIRE(flat.size() == 1);
    CHECK(flat[0].stage_id == 3);
    CHECK(flat[0].sc.iterations == 5);  // 2 + 2 + 1
    CHECK(flat[0].sc.charge_enabled);
}

TEST_CASE("a training stage runs, logs metrics, and moves only ungated parameters") {
    TrainConfig cfg = tiny_cfg();
    Rng rng(901);
    TrainState st{model::ModelParams::init(cfg.model, rng), opt::Adam({cfg.lr, 0.9, 0.999, 1e-8}),
                  1, 0, cfg.seed, config_hash(cfg)};
    const ad::Tensor chg_before = st.params.interaction.chg.w1;
    const std::uint64_t dec_hash_before = st.params.content_hash();

    std::vector<MetricRow> metrics;
    StageRun run{1, cfg.stages[0]};
    train_stage(run, tiny_dataset(), cfg, st, metrics);
    CHECK(st.iteration == 2);
    REQUIRE(metrics.size() == 2);
    for (const MetricRow& r : metrics) {
        CHECK(r.stage == 1);
        CHECK(std::isfinite(r.loss));
        CHECK(r.chg_gate == 0.0);  // stage 1 never trains the charge module
        CHECK(r.horizon == 2);
    }
    CHECK(st.params.content_hash() != dec_hash_before);
    // Charge module gated off: its weights cannot move, bitwise.
    CHECK(st.params.interaction.chg.w1.data == chg_before.data);

    std::string jsonl = metrics_jsonl(metrics);
    nlohmann::json first = nlohmann::json::parse(jsonl.substr(0, jsonl.find('\n')));
    CHECK(first["stage"] == 1);
    CHECK(first.contains("wall_ms"));
}

TEST_CASE("no-interaction training freezes every pairwise force map") {
    TrainConfig cfg = tiny_cfg();
    cfg.ablation = "no-interaction";
    Rng rng(902);
    TrainState st{model::ModelParams::init(cfg.model, rng), opt::Adam({cfg.lr, 0.9, 0.999, 1e-8}),
                  1, 0, cfg.seed, config_hash(cfg)};
    const auto attn = st.params.interaction.attn.w1.data;
    const auto dir = st.params.interaction.dir.w1.data;
    const auto inten = st.params.interaction.inten.w1.data;
    const auto chg = st.params.interaction.chg.w1.data;
    const auto trans = st.params.interaction.trans.w1.data;

    std::vector<MetricRow> metrics;
    train_stage({1, cfg.stages[0]}, tiny_dataset(), cfg, st, metrics);
    CHECK(st.params.interaction.attn.w1.data == attn);
    CHECK(st.params.interaction.dir.w1.data == dir);
    CHECK(st.params.interaction.inten.w1.data == inten);
    CHECK(st.params.interaction.chg.w1.data == chg);
    CHECK(st.params.interaction.trans.w1.data != trans);  // transition still learns
}

TEST_CASE("training is deterministic for a fixed seed") {
    TrainConfig cfg = tiny_cfg();
    TrainResult a = train_full(tiny_dataset(), cfg);
    TrainResult b = train_full(tiny_dataset(), cfg);
    CHECK(a.state.params.content_hash() == b.state.params.content_hash());
    REQUIRE(a.metrics.size() == b.metrics.size());
    for (std::size_t i = 0; i < a.metrics.size(); ++i) {
        CHECK(a.metrics[i].stage == b.metrics[i].stage);
        CHECK(a.metrics[i].iteration == b.metrics[i].iteration);
        CHECK(a.metrics[i].loss == b.metrics[i].loss);  // bitwise; wall_ms is exempt
        CHECK(a.metrics[i].recon == b.metrics[i].recon);
        CHECK(a.metrics[i].kl == b.metrics[i].kl);
        CHECK(a.metrics[i].col_gate == b.metrics[i].col_gate);
    }
    CHECK(a.state.stage == 3);
}

TEST_CASE("resume from a mid-stage checkpoint reproduces the full run bitwise") {
    TrainConfig cfg = tiny_cfg();
    cfg.checkpoint_every = 1;
    const std::string dir_a = "/tmp/phycine_train_a";
    std::filesystem::create_directories(dir_a);
    TrainResult full = train_full(tiny_dataset(), cfg, dir_a);

    TrainState mid = load_checkpoint(dir_a + "/ckpt-s2-i1.phyc", cfg.model);
    CHECK(mid.stage == 2);
    CHECK(mid.iteration == 1);
    TrainResult resumed = train_full(tiny_dataset(), cfg, "", &mid);
    CHECK(resumed.state.params.content_hash() == full.state.params.content_hash());

    // Metrics of the resumed run cover exactly the remaining iterations.
    CHECK(resumed.metrics.size() + 3 == full.metrics.size());

    TrainConfig other = cfg;
    other.beta = 50.0;
    CHECK_THROWS_AS(train_full(tiny_dataset(), other, "", &mid), Error);
}

TEST_CASE("divergence is reported with stage, iteration and seed") {
    TrainConfig cfg = tiny_cfg();
    Rng rng(903);
    TrainState st{model::ModelParams::init(cfg.model, rng), opt::Adam({cfg.lr, 0.9, 0.999, 1e-8}),
                  1, 0, cfg.seed, config_hash(cfg)};
    for (double& v : st.params.decoder.w3.data) v = 1e308;
    for (double& v : st.params.decoder.b3.data) v = 1e308;
    std::vector<MetricRow> metrics;
    try {
        train_stage({1, cfg.stages[0]}, tiny_dataset(), cfg, st, metrics);
        FAIL("expected numeric failure");
    } catch (const Error& e) {
        CHECK(e.kind() == ErrorKind::Numeric);
        const std::string msg = e.what();
        CHECK(msg.find("iteration") != std::string::npos);
        CHECK(msg.find("seed") != std::string::npos);
    }
}

TEST_CASE("pure evaluation leaves the parameter hash unchanged") {
    TrainConfig cfg = tiny_cfg();
    Rng rng(904);
    model::ModelParams params = model::ModelParams::init(cfg.model, rng);
    const std::uint64_t before = params.content_hash();
    const std::vector<ad::Tensor> frames = vi::episode_frames(tiny_dataset()[0], 0, 3);
    vi::InferOptions io;
    io.slots = 3;
    io.phase_steps = {1, 1, 1, 1};
    io.inner_steps = 1;
    vi::infer(frames, params, cfg.model, io, rng);
    Rng r2(905);
    vi::Posterior post = vi::init_posterior(3, r2);
    vi::elbo_loss(frames, post, params, cfg.model, vi::ElboOptions{}, r2);
    CHECK(params.content_hash() == before);
}
