#include "phycine/train/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include <json.hpp>

#include "phycine/common/error.hpp"
#include "phycine/vi/refine.hpp"

namespace phycine::train {

using ad::Tape;
using ad::Tensor;

std::string metrics_jsonl(const std::vector<MetricRow>& rows) {
    std::string out;
    for (const MetricRow& r : rows) {
        nlohmann::json j;
        j["stage"] = r.stage;
        j["iteration"] = r.iteration;
        j["loss"] = r.loss;
        j["recon"] = r.recon;
        j["kl"] = r.kl;
        j["horizon"] = r.horizon;
        j["col_gate"] = r.col_gate;
        j["chg_gate"] = r.chg_gate;
        j["wall_ms"] = r.wall_ms;
        out += j.dump();
        out += '\n';
    }
    return out;
}

std::vector<StageRun> make_plan(const TrainConfig& cfg) {
    if (cfg.ablation == "no-b2u") {
        StageRun run{3, cfg.stages[2]};
        run.sc.iterations =
            cfg.stages[0].iterations + cfg.stages[1].iterations + cfg.stages[2].iterations;
        return {run};
    }
    std::vector<StageRun> plan;
    for (int i = 0; i < 3; ++i) plan.push_back({i + 1, cfg.stages[i]});
    return plan;
}

int pick_clip_start(const sim::Episode& ep, int horizon, Rng& rng) {
    const int max_t0 = ep.frames - (horizon + 1);
    if (max_t0 < 0)
        raise(ErrorKind::Data, "train: episode of " + std::to_string(ep.frames) +
                                   " frames is shorter than horizon " + std::to_string(horizon) +
                                   " + 1");
    if (max_t0 == 0) return 0;
    if (!ep.events.empty() && rng.bernoulli(0.5)) {
        const sim::CollisionEvent& ev = ep.events[rng.uniform_int(int(ep.events.size()))];
        // Event frame must land inside the predicted span [t0+1, t0+horizon].
        const int lo = std::max(0, ev.frame - horizon);
        const int hi = std::min(max_t0, ev.frame - 1);
        if (hi >= lo) return lo + rng.uniform_int(hi - lo + 1);
    }
    return rng.uniform_int(max_t0 + 1);
}

std::vector<int> eligible_episodes(const std::vector<sim::Episode>& dataset,
                                   const StageConfig& sc, int stage_id) {
    std::vector<int> out;
    for (int cat : sc.categories) {
        bool found = false;
        for (int i = 0; i < static_cast<int>(dataset.size()); ++i)
            if (dataset[i].category == cat) {
                found = true;
                break;
            }
        if (!found)
            raise(ErrorKind::Data, "train: dataset has no category-" + std::to_string(cat) +
                                       " episodes required by stage " + std::to_string(stage_id));
    }
    for (int i = 0; i < static_cast<int>(dataset.size()); ++i)
        if (std::find(sc.categories.begin(), sc.categories.end(), dataset[i].category) !=
            sc.categories.end())
            out.push_back(i);
    return out;
}

namespace {

std::string ckpt_path(const std::string& dir, int stage, int iter) {
    return dir + "/ckpt-s" + std::to_string(stage) + "-i" + std::to_string(iter) + ".phyc";
}

}  // namespace

void train_stage(const StageRun& run, const std::vector<sim::Episode>& dataset,
                 const TrainConfig& cfg, TrainState& st, std::vector<MetricRow>& metrics,
                 const std::string& out_dir) {
    const StageConfig& sc = run.sc;
    const std::vector<int> eligible = eligible_episodes(dataset, sc, run.stage_id);
    const bool no_interaction = cfg.ablation == "no-interaction";

    auto named = st.params.named_tensors();
    for (; st.iteration < sc.iterations; ++st.iteration) {
        const auto t_start = std::chrono::steady_clock::now();
        Rng rng(derive_seed({cfg.seed, std::uint64_t(run.stage_id), std::uint64_t(st.iteration),
                             0x7241A11ULL}));

        std::vector<Tensor> acc;
        for (auto& [name, t] : named) acc.push_back(Tensor::zeros(t->shape));
        MetricRow row;
        row.stage = run.stage_id;
        row.iteration = st.iteration;
        row.horizon = sc.horizon;
        const double inv_b = 1.0 / sc.batch_size;

        for (int b = 0; b < sc.batch_size; ++b) {
            const sim::Episode& ep = dataset[eligible[rng.uniform_int(int(eligible.size()))]];
            const int t0 = pick_clip_start(ep, sc.horizon, rng);
            const std::vector<Tensor> frames = vi::episode_frames(ep, t0, sc.horizon + 1);

            const double col_gate =
                no_interaction ? 0.0 : (rng.bernoulli(sc.collision_prob) ? 1.0 : 0.0);
            const double chg_gate = (no_interaction || !sc.charge_enabled) ? 0.0 : 1.0;

            vi::ElboOptions eopt;
            eopt.beta = cfg.beta;
            eopt.col_gate = col_gate;
            eopt.chg_gate = chg_gate;
            eopt.mc_samples = cfg.mc_samples;
            eopt.fixed_eps = cfg.fixed_eps;

            vi::InferOptions io;
            io.slots = cfg.slots;
            io.phase_steps = cfg.refine_phase_steps;
            io.inner_steps = cfg.refine_inner_steps;
            io.lr = cfg.refine_lr;
            io.elbo = eopt;
            io.record_trajectory = false;

            const auto diverged = [&](const std::string& what) {
                raise(ErrorKind::Numeric,
                      "train: non-finite loss at stage " + std::to_string(run.stage_id) +
                          " iteration " + std::to_string(st.iteration) + " (seed " +
                          std::to_string(cfg.seed) + "): " + what);
            };

            Tape tape;
            model::ModelParams wp = model::watch_params(tape, st.params);
            Tensor loss;
            double clip_recon = 0.0, clip_kl = 0.0;
            try {
                vi::InferResult ir = vi::infer(frames, st.params, cfg.model, io, rng);
                vi::ElboReport r_prev = vi::elbo_loss(frames, ir.prev, wp, cfg.model, eopt, rng);
                vi::ElboReport r_post = vi::elbo_loss(frames, ir.post, wp, cfg.model, eopt, rng);
                loss = ad::scale(ad::add(r_prev.total, r_post.total), 0.5);
                for (double nll : r_post.nll) clip_recon += nll;
                clip_kl = r_post.kl;
            } catch (const Error& e) {
                if (e.kind() == ErrorKind::Numeric) diverged(e.what());
                throw;
            }
            if (!std::isfinite(loss.value())) diverged("loss is not finite");
            tape.backward(loss);

            auto wnamed = wp.named_tensors();
            for (std::size_t i = 0; i < wnamed.size(); ++i) {
                const Tensor g = tape.grad(*wnamed[i].second);
                for (int j = 0; j < g.size(); ++j) acc[i].data[j] += g.data[j] * inv_b;
            }
            row.loss += loss.value() * inv_b;
            row.recon += clip_recon * inv_b;
            row.kl += clip_kl * inv_b;
            row.col_gate += col_gate * inv_b;
            row.chg_gate += chg_gate * inv_b;
        }

        std::vector<Tensor*> ps;
        std::vector<const Tensor*> gs;
        for (std::size_t i = 0; i < named.size(); ++i) {
            ps.push_back(named[i].second);
            gs.push_back(&acc[i]);
        }
        st.adam.step(ps, gs);

        row.wall_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() -
                                                                t_start)
                          .count();
        metrics.push_back(row);

        if (!out_dir.empty() && cfg.checkpoint_every > 0 &&
            (st.iteration + 1) % cfg.checkpoint_every == 0 && st.iteration + 1 < sc.iterations) {
            TrainState snap = st;
            ++snap.iteration;  // first iteration a resumed run must execute
            save_checkpoint(ckpt_path(out_dir, run.stage_id, snap.iteration), snap);
        }
    }
}

TrainResult train_full(const std::vector<sim::Episode>& dataset, const TrainConfig& cfg,
                       const std::string& out_dir, const TrainState* resume, int max_stage) {
    validate(cfg);
    const std::vector<StageRun> plan = make_plan(cfg);
    const std::uint64_t want_hash = config_hash(cfg);

    TrainResult res;
    if (resume) {
        if (resume->config_hash != want_hash)
            raise(ErrorKind::Data, "train: resume checkpoint was produced by a different config");
        res.state = *resume;
    } else {
        Rng init_rng(derive_seed({cfg.seed, 0xF17A9A15ULL}));
        res.state.params = model::ModelParams::init(cfg.model, init_rng);
        res.state.adam = opt::Adam({cfg.lr, 0.9, 0.999, 1e-8});
        res.state.stage = plan.front().stage_id;
        res.state.iteration = 0;
        res.state.seed = cfg.seed;
        res.state.config_hash = want_hash;
    }

    for (const StageRun& run : plan) {
        if (max_stage > 0 && run.stage_id > max_stage) break;
        if (run.sc.iterations < 1) continue;  // stage disabled by the caller
        if (run.stage_id < res.state.stage) continue;
        if (run.stage_id > res.state.stage) {
            res.state.stage = run.stage_id;
            res.state.iteration = 0;
            res.state.adam = opt::Adam({cfg.lr, 0.9, 0.999, 1e-8});
        }
        train_stage(run, dataset, cfg, res.state, res.metrics, out_dir);
        if (!out_dir.empty())
            save_checkpoint(ckpt_path(out_dir, run.stage_id, res.state.iteration), res.state);
    }
    if (!out_dir.empty()) save_checkpoint(out_dir + "/final.phyc", res.state);
    return res;
}

}  // namespace phycine::train
