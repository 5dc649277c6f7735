#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "phycine/ad/random_graph.hpp"
#include "phycine/common/error.hpp"
#include "phycine/common/version.hpp"
#include "phycine/eval/counterfactual.hpp"
#include "phycine/eval/oracle.hpp"
#include "phycine/eval/probes.hpp"
#include "phycine/train/trainer.hpp"
#include "phycine/vi/refine.hpp"

using nlohmann::json;
using namespace phycine;

namespace {

std::uint64_t effective_seed(std::uint64_t flag_seed) {
    const char* env = std::getenv("PHYCINE_SEED");
    if (!env) return flag_seed;
    char* end = nullptr;
    const unsigned long long v = std::strtoull(env, &end, 10);
    if (end == env || *end != '\0')
        raise(ErrorKind::Usage, std::string("PHYCINE_SEED must be an unsigned integer, got '") +
                                    env + "'");
    std::fprintf(stderr, "seed overridden by PHYCINE_SEED=%llu\n", v);
    return v;
}

void ensure_dir(const std::string& path) {
    std::error_code ec;
    std::filesystem::create_directories(path, ec);
    if (ec) raise(ErrorKind::Data, "cannot create directory " + path + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::Data, "cannot open " + path + " for writing");
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    if (!f) raise(ErrorKind::Data, "write failed for " + path);
}

// Every artifact directory gets the resolved settings plus the version.
void write_run_config(const std::string& path, const std::string& command, json resolved) {
    resolved["version"] = kVersionString;
    resolved["command"] = command;
    write_text(path, resolved.dump(2) + "\n");
}

std::string ppm_bytes(const ad::Tensor& img) {
    const int h = img.shape[0], w = img.shape[1];
    std::string out = "P6\n# ";
    out += kVersionString;
    out += "\n" + std::to_string(w) + " " + std::to_string(h) + "\n255\n";
    out.reserve(out.size() + static_cast<size_t>(h) * w * 3);
    for (double v : img.data) {
        const int byte = static_cast<int>(std::lround(std::fmin(1.0, std::fmax(0.0, v)) * 255.0));
        out.push_back(static_cast<char>(byte));
    }
    return out;
}

std::string frame_name(const std::string& dir, const char* stem, int t) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%s-%03d.ppm", stem, t);
    return dir + "/" + buf;
}

// Renders every rollout step through the shared decoder path, so two
// commands given the same latents emit identical bytes.
std::vector<ad::Tensor> composite_frames(const dyn::RolloutResult& rr, int h, int w,
                                         const model::ModelParams& params) {
    std::vector<ad::Tensor> out;
    out.reserve(rr.steps.size());
    for (const auto& s : rr.steps)
        out.push_back(dec::composite_image(dec::decode(s.ctx, h, w, params.decoder)));
    return out;
}

// Two rows of frames: top the baseline, bottom the comparison.
ad::Tensor image_strip(const std::vector<ad::Tensor>& top, const std::vector<ad::Tensor>& bottom) {
    const int h = top[0].shape[0], w = top[0].shape[1];
    const int n = static_cast<int>(top.size());
    ad::Tensor out = ad::Tensor::zeros({2 * h, n * w, 3});
    for (int t = 0; t < n; ++t) {
        for (int y = 0; y < h; ++y) {
            for (int x = 0; x < w; ++x) {
                for (int c = 0; c < 3; ++c) {
                    out.at({y, t * w + x, c}) = top[static_cast<size_t>(t)].at({y, x, c});
                    out.at({h + y, t * w + x, c}) = bottom[static_cast<size_t>(t)].at({y, x, c});
                }
            }
        }
    }
    return out;
}

std::vector<int> parse_int_list(const std::string& s, const char* what) {
    std::vector<int> out;
    std::string cur;
    for (char c : s + ",") {
        if (c == ',') {
            if (cur.empty()) raise(ErrorKind::Usage, std::string(what) + ": empty entry in list");
            try {
                out.push_back(std::stoi(cur));
            } catch (const std::exception&) {
                raise(ErrorKind::Usage, std::string(what) + ": bad integer '" + cur + "'");
            }
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return out;
}

eval::Intervention parse_edit(const std::string& spec) {
    if (spec == "identity") return {};
    std::vector<std::string> parts;
    std::string cur;
    for (char c : spec + ":") {
        if (c == ':') {
            parts.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    if (parts.size() != 3 || parts[1].rfind("slot=", 0) != 0)
        raise(ErrorKind::Usage,
              "--edit expects identity or <charge|mass|dyn>:slot=<k>:<action>, got '" + spec + "'");
    eval::Intervention iv;
    try {
        iv.slot = std::stoi(parts[1].substr(5));
    } catch (const std::exception&) {
        raise(ErrorKind::Usage, "--edit: bad slot in '" + spec + "'");
    }
    const std::string& target = parts[0];
    const std::string& action = parts[2];
    auto value_of = [&](const std::string& a, size_t prefix) {
        try {
            return std::stod(a.substr(prefix));
        } catch (const std::exception&) {
            raise(ErrorKind::Usage, "--edit: bad value in '" + spec + "'");
        }
    };
    if (target == "charge" && action == "flip") {
        iv.kind = eval::Intervention::Kind::FlipCharge;
    } else if (target == "charge" && action.rfind("set=", 0) == 0) {
        iv.kind = eval::Intervention::Kind::SetCharge;
        iv.value = value_of(action, 4);
    } else if (target == "mass" && action.rfind("scale=", 0) == 0) {
        iv.kind = eval::Intervention::Kind::ScaleMassLatent;
        iv.value = value_of(action, 6);
    } else if (target == "dyn" && action.rfind("set0=", 0) == 0) {
        iv.kind = eval::Intervention::Kind::SetDynComponent;
        iv.component = 0;
        iv.value = value_of(action, 5);
    } else if (target == "dyn" && action.rfind("set1=", 0) == 0) {
        iv.kind = eval::Intervention::Kind::SetDynComponent;
        iv.component = 1;
        iv.value = value_of(action, 5);
    } else {
        raise(ErrorKind::Usage, "--edit: unknown action '" + target + ":" + action + "'");
    }
    return iv;
}

// Flags shared by the commands that run inference on one episode.
struct ClipFlags {
    std::string ckpt;
    std::string data;
    std::string config;  // optional train-config JSON for nonstandard model dims
    std::string out;
    int episode = 0;
    int slots = 4;
    std::uint64_t seed = 1;
    std::string phase_steps = "5,5,5,5";
    int inner_steps = 4;
    double lr = 0.05;
    double beta = 100.0;
    bool fixed_eps = false;
    double col_gate = 1.0;
    double chg_gate = 1.0;
};

void add_clip_flags(CLI::App* cmd, ClipFlags& f) {
    cmd->add_option("--ckpt", f.ckpt, "model checkpoint (.phyc)")->required();
    cmd->add_option("--data", f.data, "dataset file (.phyd)")->required();
    cmd->add_option("--config", f.config, "train config JSON (model dims)");
    cmd->add_option("--out", f.out, "output directory")->required();
    cmd->add_option("--episode", f.episode, "episode index");
    cmd->add_option("--slots", f.slots, "posterior slots K");
    cmd->add_option("--seed", f.seed, "rng seed");
    cmd->add_option("--phase-steps", f.phase_steps, "refinement outer steps per phase");
    cmd->add_option("--inner-steps", f.inner_steps, "Adam updates per outer step");
    cmd->add_option("--lr", f.lr, "refinement learning rate");
    cmd->add_option("--beta", f.beta, "KL weight");
    cmd->add_flag("--fixed-eps", f.fixed_eps, "use the posterior mean instead of sampling");
    cmd->add_option("--col-gate", f.col_gate, "collision force gate");
    cmd->add_option("--chg-gate", f.chg_gate, "charge force gate");
}

model::ModelConfig model_config_of(const ClipFlags& f) {
    if (f.config.empty()) return model::ModelConfig{};
    return train::load_train_config(f.config).model;
}

vi::InferOptions infer_options_of(const ClipFlags& f) {
    vi::InferOptions io;
    io.slots = f.slots;
    const auto steps = parse_int_list(f.phase_steps, "--phase-steps");
    if (steps.size() != 4) raise(ErrorKind::Usage, "--phase-steps needs 4 entries");
    for (int i = 0; i < 4; ++i) io.phase_steps[i] = steps[i];
    io.inner_steps = f.inner_steps;
    io.lr = f.lr;
    io.elbo.beta = f.beta;
    io.elbo.fixed_eps = f.fixed_eps;
    io.elbo.col_gate = f.col_gate;
    io.elbo.chg_gate = f.chg_gate;
    return io;
}

json clip_flags_json(const ClipFlags& f, std::uint64_t seed) {
    return json{{"ckpt", f.ckpt},
                {"data", f.data},
                {"config", f.config},
                {"out", f.out},
                {"episode", f.episode},
                {"slots", f.slots},
                {"seed", seed},
                {"phase_steps", f.phase_steps},
                {"inner_steps", f.inner_steps},
                {"lr", f.lr},
                {"beta", f.beta},
                {"fixed_eps", f.fixed_eps},
                {"col_gate", f.col_gate},
                {"chg_gate", f.chg_gate}};
}

const sim::Episode& episode_at(const std::vector<sim::Episode>& eps, int idx) {
    if (idx < 0 || idx >= static_cast<int>(eps.size()))
        raise(ErrorKind::Usage, "episode index " + std::to_string(idx) + " out of range for " +
                                    std::to_string(eps.size()) + " episodes");
    return eps[static_cast<size_t>(idx)];
}

json tensor_rows(const ad::Tensor& t) {
    json rows = json::array();
    const int k = t.shape[0], d = t.shape[1];
    for (int s = 0; s < k; ++s) {
        json row = json::array();
        for (int j = 0; j < d; ++j) row.push_back(t.at({s, j}));
        rows.push_back(std::move(row));
    }
    return rows;
}

// ---- subcommands ----

struct GenDataFlags {
    std::string out;
    std::string counts = "10,10,10,10,10";
    std::uint64_t seed = 7;
    int width = 48, height = 32, frames = 24;
    int min_objects = 2, max_objects = 3;
};

int cmd_gen_data(const GenDataFlags& f) {
    const std::uint64_t seed = effective_seed(f.seed);
    std::vector<int> counts = parse_int_list(f.counts, "--counts");
    if (counts.size() > sim::kNumCategories)
        raise(ErrorKind::Usage, "--counts takes at most 5 entries");
    counts.resize(sim::kNumCategories, 0);
    int total = 0;
    for (int c : counts) {
        if (c < 0) raise(ErrorKind::Usage, "--counts entries must be >= 0");
        total += c;
    }
    if (total == 0) raise(ErrorKind::Usage, "--counts generates no episodes");

    sim::GenConfig gc;
    gc.width = f.width;
    gc.height = f.height;
    gc.frames = f.frames;
    gc.min_objects = f.min_objects;
    gc.max_objects = f.max_objects;

    const auto episodes = sim::generate_dataset(gc, counts, seed);
    sim::write_dataset(f.out, episodes, gc);
    write_run_config(f.out + ".run.json", "gen-data",
                     json{{"out", f.out},
                          {"counts", counts},
                          {"seed", seed},
                          {"width", f.width},
                          {"height", f.height},
                          {"frames", f.frames},
                          {"min_objects", f.min_objects},
                          {"max_objects", f.max_objects}});
    std::printf("wrote %zu episodes to %s\n", episodes.size(), f.out.c_str());
    return 0;
}

struct TrainFlags {
    std::string config;
    std::string data;
    std::string out;
    std::string resume;
    std::string ablation;
    int stage = 0;  // 0: all stages
    std::uint64_t seed = 0;
    bool seed_set = false;
};

int cmd_train(const TrainFlags& f) {
    train::TrainConfig cfg =
        f.config.empty() ? train::TrainConfig{} : train::load_train_config(f.config);
    if (!f.ablation.empty()) cfg.ablation = f.ablation;
    if (f.seed_set) cfg.seed = f.seed;
    cfg.seed = effective_seed(cfg.seed);
    if (f.stage != 0 && (f.stage < 1 || f.stage > 3))
        raise(ErrorKind::Usage, "--stage must be 1, 2, or 3");
    train::validate(cfg);

    ensure_dir(f.out);
    const auto dataset = sim::read_dataset(f.data);

    train::TrainState resume_state;
    const train::TrainState* resume = nullptr;
    if (!f.resume.empty()) {
        resume_state = train::load_checkpoint(f.resume, cfg.model);
        resume = &resume_state;
    }

    train::save_train_config(f.out + "/config.json", cfg);
    write_run_config(f.out + "/run.json", "train",
                     json{{"config", f.config},
                          {"data", f.data},
                          {"out", f.out},
                          {"resume", f.resume},
                          {"ablation", cfg.ablation},
                          {"stage", f.stage},
                          {"seed", cfg.seed}});

    const auto result = train::train_full(dataset, cfg, f.out, resume, f.stage);
    write_text(f.out + "/metrics.jsonl", train::metrics_jsonl(result.metrics));
    std::printf("trained to stage %d iteration %d; checkpoint %s/final.phyc\n", result.state.stage,
                result.state.iteration, f.out.c_str());
    return 0;
}

struct InferFlags : ClipFlags {
    int frames = 6;
};

int cmd_infer(const InferFlags& f) {
    const std::uint64_t seed = effective_seed(f.seed);
    const auto cfg = model_config_of(f);
    const auto state = train::load_checkpoint(f.ckpt, cfg);
    const auto dataset = sim::read_dataset(f.data);
    const auto& ep = episode_at(dataset, f.episode);
    if (f.frames < 2 || f.frames > ep.frames)
        raise(ErrorKind::Usage, "--frames must be in [2, " + std::to_string(ep.frames) + "]");

    ensure_dir(f.out);
    vi::InferOptions io = infer_options_of(f);
    io.record_trajectory = true;
    Rng rng(seed);
    const auto frames = vi::episode_frames(ep, 0, f.frames);
    const auto ir = vi::infer(frames, state.params, cfg, io, rng);

    write_text(f.out + "/trajectory.jsonl", vi::trajectory_jsonl(ir.trajectory));
    json latents{{"version", kVersionString},
                 {"mean", tensor_rows(ir.post.mean)},
                 {"log_var", tensor_rows(ir.post.log_var)}};
    write_text(f.out + "/latents.json", latents.dump(2) + "\n");

    const auto rr = dyn::rollout(dyn::split_latent(ir.post.mean.detached()), f.frames - 1,
                                 state.params.interaction, cfg.interaction, f.col_gate, f.chg_gate);
    const auto imgs = composite_frames(rr, ep.height, ep.width, state.params);
    json mse = json::array();
    for (int t = 0; t < f.frames; ++t) {
        const ad::Tensor& img = imgs[static_cast<size_t>(t)];
        write_text(frame_name(f.out, "recon", t), ppm_bytes(img));
        double ss = 0.0;
        for (size_t i = 0; i < img.data.size(); ++i) {
            const double d = img.data[i] - frames[static_cast<size_t>(t)].data[i];
            ss += d * d;
        }
        mse.push_back(ss / static_cast<double>(img.data.size()));
    }
    json report{{"version", kVersionString}, {"mse", mse}, {"frames", f.frames}};
    write_text(f.out + "/report.json", report.dump(2) + "\n");

    json resolved = clip_flags_json(f, seed);
    resolved["frames"] = f.frames;
    write_run_config(f.out + "/run.json", "infer", resolved);
    std::printf("inferred %d slots over %d frames; outputs in %s\n", f.slots, f.frames,
                f.out.c_str());
    return 0;
}

struct RolloutFlags : ClipFlags {
    int obs = 2;
    int steps = 6;
    bool dump_intermediates = false;
};

// Shared by rollout and counterfactual so an identity edit reproduces the
// rollout artifacts byte for byte.
struct RolloutRun {
    ad::Tensor z0;
    int t_end = 0;
    model::ModelConfig cfg;
    train::TrainState state;
    sim::Episode episode;
};

RolloutRun run_clip_inference(const RolloutFlags& f, std::uint64_t seed) {
    RolloutRun r;
    r.cfg = model_config_of(f);
    r.state = train::load_checkpoint(f.ckpt, r.cfg);
    const auto dataset = sim::read_dataset(f.data);
    r.episode = episode_at(dataset, f.episode);
    if (f.obs < 2 || f.obs > r.episode.frames)
        raise(ErrorKind::Usage, "--obs must be in [2, " + std::to_string(r.episode.frames) + "]");
    if (f.steps < 0) raise(ErrorKind::Usage, "--steps must be >= 0");

    vi::InferOptions io = infer_options_of(f);
    io.record_trajectory = false;
    Rng rng(seed);
    const auto frames = vi::episode_frames(r.episode, 0, f.obs);
    const auto ir = vi::infer(frames, r.state.params, r.cfg, io, rng);
    r.z0 = ir.post.mean.detached();
    r.t_end = f.obs - 1 + f.steps;
    return r;
}

void write_rollout_report(const std::string& dir, const std::vector<ad::Tensor>& imgs,
                          const sim::Episode& ep) {
    json mse = json::array();
    for (size_t t = 0; t < imgs.size(); ++t) {
        if (static_cast<int>(t) >= ep.frames) break;  // no ground truth past the episode
        const ad::Tensor gt = vi::frame_tensor(ep, static_cast<int>(t));
        double ss = 0.0;
        for (size_t i = 0; i < imgs[t].data.size(); ++i) {
            const double d = imgs[t].data[i] - gt.data[i];
            ss += d * d;
        }
        mse.push_back(ss / static_cast<double>(imgs[t].data.size()));
    }
    json report{{"version", kVersionString}, {"steps", imgs.size() - 1}, {"mse", mse}};
    write_text(dir + "/report.json", report.dump(2) + "\n");
}

int cmd_rollout(const RolloutFlags& f) {
    const std::uint64_t seed = effective_seed(f.seed);
    const RolloutRun r = run_clip_inference(f, seed);
    ensure_dir(f.out);

    const auto rr = dyn::rollout(dyn::split_latent(r.z0), r.t_end, r.state.params.interaction,
                                 r.cfg.interaction, f.col_gate, f.chg_gate, true);
    const auto imgs = composite_frames(rr, r.episode.height, r.episode.width, r.state.params);
    for (size_t t = 0; t < imgs.size(); ++t)
        write_text(frame_name(f.out, "frame", static_cast<int>(t)), ppm_bytes(imgs[t]));
    if (f.dump_intermediates) eval::dump_intermediates(rr, f.out + "/intermediates.csv");
    write_rollout_report(f.out, imgs, r.episode);

    json resolved = clip_flags_json(f, seed);
    resolved["obs"] = f.obs;
    resolved["steps"] = f.steps;
    resolved["dump_intermediates"] = f.dump_intermediates;
    write_run_config(f.out + "/run.json", "rollout", resolved);
    std::printf("rolled out %d steps; outputs in %s\n", f.steps, f.out.c_str());
    return 0;
}

struct CounterfactualFlags : RolloutFlags {
    std::string edit;
};

int cmd_counterfactual(const CounterfactualFlags& f) {
    const std::uint64_t seed = effective_seed(f.seed);
    const eval::Intervention iv = parse_edit(f.edit);
    const RolloutRun r = run_clip_inference(f, seed);
    ensure_dir(f.out + "/base");
    ensure_dir(f.out + "/edited");

    eval::CounterfactualOptions co;
    co.n_steps = r.t_end;
    co.col_gate = f.col_gate;
    co.chg_gate = f.chg_gate;
    co.height = r.episode.height;
    co.width = r.episode.width;
    co.decode_frames = false;  // rendering goes through the shared path below
    const auto res = eval::counterfactual(r.z0, iv, r.state.params, r.cfg, co);

    const auto base_imgs =
        composite_frames(res.base, r.episode.height, r.episode.width, r.state.params);
    const auto edit_imgs =
        composite_frames(res.edited, r.episode.height, r.episode.width, r.state.params);
    json pixel_div = json::array();
    for (size_t t = 0; t < base_imgs.size(); ++t) {
        write_text(frame_name(f.out + "/base", "frame", static_cast<int>(t)),
                   ppm_bytes(base_imgs[t]));
        write_text(frame_name(f.out + "/edited", "frame", static_cast<int>(t)),
                   ppm_bytes(edit_imgs[t]));
        double ss = 0.0;
        for (size_t i = 0; i < base_imgs[t].data.size(); ++i) {
            const double d = base_imgs[t].data[i] - edit_imgs[t].data[i];
            ss += d * d;
        }
        pixel_div.push_back(ss / static_cast<double>(base_imgs[t].data.size()));
    }
    write_text(f.out + "/strip.ppm", ppm_bytes(image_strip(base_imgs, edit_imgs)));

    json div{{"version", kVersionString},
             {"edit", f.edit},
             {"latent_divergence", res.latent_divergence},
             {"pixel_divergence", pixel_div}};
    write_text(f.out + "/divergence.json", div.dump(2) + "\n");

    json resolved = clip_flags_json(f, seed);
    resolved["obs"] = f.obs;
    resolved["steps"] = f.steps;
    resolved["edit"] = f.edit;
    write_run_config(f.out + "/run.json", "counterfactual", resolved);
    std::printf("counterfactual '%s' over %d steps; outputs in %s\n", f.edit.c_str(), f.steps,
                f.out.c_str());
    return 0;
}

struct ProbeFlags : ClipFlags {
    std::string metric;
    int frames = 6;
    double calib_fraction = 0.5;
};

int cmd_probe(const ProbeFlags& f) {
    const std::uint64_t seed = effective_seed(f.seed);
    const auto cfg = model_config_of(f);
    const auto state = train::load_checkpoint(f.ckpt, cfg);
    const auto dataset = sim::read_dataset(f.data);

    eval::ProbeOptions po;
    po.infer = infer_options_of(f);
    po.n_frames = f.frames;
    po.calib_fraction = f.calib_fraction;
    Rng rng(seed);

    json report{{"version", kVersionString}, {"metric", f.metric}};
    if (f.metric == "mass") {
        const auto rep = eval::probe_mass(dataset, state.params, cfg, po, rng);
        report["rho"] = rep.rho;
        report["n"] = rep.n_objects;
        report["sign"] = rep.sign;
        report["eval_episodes"] = rep.eval_seeds;
    } else if (f.metric == "charge") {
        const auto rep = eval::probe_charge(dataset, state.params, cfg, po, rng);
        report["accuracy"] = rep.accuracy;
        report["n"] = rep.n_pairs;
        report["sign"] = rep.rule.sign;
        report["threshold"] = rep.rule.threshold;
        report["confusion"] = rep.confusion;
        report["eval_episodes"] = rep.eval_seeds;
    } else {
        raise(ErrorKind::Usage, "--metric must be charge or mass, got '" + f.metric + "'");
    }
    json resolved = clip_flags_json(f, seed);
    resolved["metric"] = f.metric;
    resolved["frames"] = f.frames;
    resolved["calib_fraction"] = f.calib_fraction;
    report["config"] = resolved;

    const std::string text = report.dump(2) + "\n";
    if (!f.out.empty()) write_text(f.out, text);
    std::fputs(text.c_str(), stdout);
    return 0;
}

struct CheckFlags {
    std::string suite = "all";
    std::uint64_t seed = 1;
    int trials = 100;
};

int check_autodiff(const CheckFlags& f) {
    double max_err = 0.0;
    for (int i = 0; i < f.trials; ++i)
        max_err = std::max(max_err, ad::random_graph_grad_error(derive_seed({f.seed, std::uint64_t(i)})));
    std::printf("autodiff: max finite-difference relative error %.3e over %d graphs\n", max_err,
                f.trials);
    return max_err <= 1e-4 ? 0 : 1;
}

int check_conservation(const CheckFlags& f) {
    Rng rng(derive_seed({f.seed, 0xC0A5EULL}));
    sim::PhysicsConfig pc;
    double max_dp = 0.0, max_dke = 0.0, max_pair = 0.0;
    int resolved = 0;
    for (int n = 0; n < 10 * f.trials; ++n) {
        sim::WorldObject a, b;
        a.pos = {rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0)};
        a.vel = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        a.mass = rng.bernoulli(0.5) ? 1.0 : 5.0;
        a.radius = rng.uniform(0.4, 0.9);
        a.charge = rng.bernoulli(0.5) ? (rng.bernoulli(0.5) ? 1.0 : -1.0) : 0.0;
        const double ang = rng.uniform(0.0, 6.283185307179586);
        b.radius = rng.uniform(0.4, 0.9);
        const double d = rng.uniform(0.2, 0.95) * (a.radius + b.radius);
        b.pos = {a.pos.x + d * std::cos(ang), a.pos.y + d * std::sin(ang)};
        b.vel = {rng.uniform(-3.0, 3.0), rng.uniform(-3.0, 3.0)};
        b.mass = rng.bernoulli(0.5) ? 1.0 : 5.0;
        b.charge = rng.bernoulli(0.5) ? (rng.bernoulli(0.5) ? 1.0 : -1.0) : 0.0;

        const auto [va, vb] = sim::resolve_collision(a, b, pc.restitution);
        if (va.x != a.vel.x || va.y != a.vel.y) {
            ++resolved;
            const sim::Vec2 p0 = a.vel * a.mass + b.vel * b.mass;
            const sim::Vec2 p1 = va * a.mass + vb * b.mass;
            max_dp = std::max({max_dp, std::fabs(p1.x - p0.x), std::fabs(p1.y - p0.y)});
            const double ke0 = 0.5 * a.mass * a.vel.dot(a.vel) + 0.5 * b.mass * b.vel.dot(b.vel);
            const double ke1 = 0.5 * a.mass * va.dot(va) + 0.5 * b.mass * vb.dot(vb);
            max_dke = std::max(max_dke, std::fabs(ke1 - ke0));
        }
        const sim::Vec2 fab = sim::coulomb_force(a, b, pc);
        const sim::Vec2 fba = sim::coulomb_force(b, a, pc);
        max_pair = std::max({max_pair, std::fabs(fab.x + fba.x), std::fabs(fab.y + fba.y)});
    }
    std::printf(
        "conservation: %d collisions, max |dP| %.3e, max |dKE| %.3e, max pair-force residual "
        "%.3e\n",
        resolved, max_dp, max_dke, max_pair);
    return (resolved > 0 && max_dp < 1e-12 && max_dke < 1e-9 && max_pair == 0.0) ? 0 : 1;
}

int check_invariants(const CheckFlags& f) {
    Rng rng(derive_seed({f.seed, 0x14A417ULL}));
    const model::ModelConfig cfg;
    const auto params = model::ModelParams::init(cfg, rng);
    int failures = 0;

    {
        // Decoded masks are a softmax over slots: each pixel sums to one.
        ad::Tensor ctx = ad::Tensor::zeros({4, dyn::kCtxDim});
        for (double& v : ctx.data) v = rng.uniform(-0.5, 0.5);
        const auto d = dec::decode(ctx, 16, 24, params.decoder);
        double worst = 0.0;
        for (int y = 0; y < 16; ++y) {
            for (int x = 0; x < 24; ++x) {
                double s = 0.0;
                for (int k = 0; k < 4; ++k) s += d.masks.at({k, y, x});
                worst = std::max(worst, std::fabs(s - 1.0));
            }
        }
        std::printf("invariants: mask sums within %.3e of 1\n", worst);
        if (worst > 1e-6) ++failures;
    }
    {
        // Mixture likelihood ignores slot order exactly.
        ad::Tensor ctx = ad::Tensor::zeros({3, dyn::kCtxDim});
        for (double& v : ctx.data) v = rng.uniform(-0.5, 0.5);
        ad::Tensor perm = ad::Tensor::zeros({3, dyn::kCtxDim});
        const int order[3] = {2, 0, 1};
        for (int s = 0; s < 3; ++s)
            for (int j = 0; j < dyn::kCtxDim; ++j)
                perm.data[order[s] * dyn::kCtxDim + j] = ctx.data[s * dyn::kCtxDim + j];
        ad::Tensor img = ad::Tensor::zeros({10, 14, 3});
        for (double& v : img.data) v = rng.uniform();
        const double a =
            dec::mixture_log_likelihood(img, dec::decode(ctx, 10, 14, params.decoder), cfg.decoder.sigma)
                .value();
        const double b =
            dec::mixture_log_likelihood(img, dec::decode(perm, 10, 14, params.decoder), cfg.decoder.sigma)
                .value();
        std::printf("invariants: slot permutation likelihood delta %.3e\n", std::fabs(a - b));
        if (a != b) ++failures;
    }
    {
        // Zero charge latents produce exactly zero charge force.
        ad::Tensor z = ad::Tensor::zeros({3, dyn::kLatentDim});
        for (double& v : z.data) v = rng.uniform(-0.5, 0.5);
        for (int s = 0; s < 3; ++s) z.data[s * dyn::kLatentDim + dyn::kChargeOff] = 0.0;
        const auto fc = dyn::charge_forces(dyn::split_latent(z), params.interaction);
        double worst = 0.0;
        for (double v : fc.data) worst = std::max(worst, std::fabs(v));
        std::printf("invariants: zero-charge force magnitude %.3e\n", worst);
        if (worst != 0.0) ++failures;
    }
    {
        // Closed gates freeze dyn, m, and c through a rollout.
        ad::Tensor z = ad::Tensor::zeros({3, dyn::kLatentDim});
        for (double& v : z.data) v = rng.uniform(-0.5, 0.5);
        const auto rr = dyn::rollout(dyn::split_latent(z), 5, params.interaction, cfg.interaction,
                                     0.0, 0.0);
        bool moved = false;
        const auto& first = rr.steps.front();
        const auto& last = rr.steps.back();
        for (int i = 0; i < first.dyn.size(); ++i)
            if (first.dyn.data[i] != last.dyn.data[i]) moved = true;
        for (int i = 0; i < first.m.size(); ++i) {
            if (first.m.data[i] != last.m.data[i]) moved = true;
            if (first.c.data[i] != last.c.data[i]) moved = true;
        }
        std::printf("invariants: closed gates %s dyn/m/c\n", moved ? "MOVED" : "froze");
        if (moved) ++failures;
    }
    return failures;
}

int cmd_check(const CheckFlags& f) {
    std::printf("%s\n", kVersionString);
    int failures = 0;
    if (f.suite == "autodiff" || f.suite == "all") failures += check_autodiff(f);
    if (f.suite == "conservation" || f.suite == "all") failures += check_conservation(f);
    if (f.suite == "invariants" || f.suite == "all") failures += check_invariants(f);
    if (f.suite != "autodiff" && f.suite != "conservation" && f.suite != "invariants" &&
        f.suite != "all")
        raise(ErrorKind::Usage, "--suite must be autodiff, conservation, invariants, or all");
    if (failures > 0)
        raise(ErrorKind::Invariant, std::to_string(failures) + " check suite(s) failed");
    std::printf("all checks passed\n");
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"object-centric physical concept discovery from synthetic video"};
    app.set_version_flag("--version", std::string(kVersionString));
    app.require_subcommand(1);
    int threads = 1;
    app.add_option("--threads", threads, "worker pool size (1 keeps runs reproducible)");

    GenDataFlags gd;
    auto* c_gd = app.add_subcommand("gen-data", "generate an episode dataset");
    c_gd->add_option("--out", gd.out, "output dataset path (.phyd)")->required();
    c_gd->add_option("--counts", gd.counts, "episodes per category, comma separated");
    c_gd->add_option("--seed", gd.seed, "generation seed");
    c_gd->add_option("--width", gd.width, "frame width in pixels");
    c_gd->add_option("--height", gd.height, "frame height in pixels");
    c_gd->add_option("--frames", gd.frames, "frames per episode");
    c_gd->add_option("--min-objects", gd.min_objects, "minimum objects per scene");
    c_gd->add_option("--max-objects", gd.max_objects, "maximum objects per scene");

    TrainFlags tf;
    auto* c_tr = app.add_subcommand("train", "run the staged curriculum");
    c_tr->add_option("--config", tf.config, "train config JSON");
    c_tr->add_option("--data", tf.data, "dataset file (.phyd)")->required();
    c_tr->add_option("--out", tf.out, "output directory")->required();
    c_tr->add_option("--resume", tf.resume, "checkpoint to resume from");
    c_tr->add_option("--ablation", tf.ablation, "no-b2u or no-interaction");
    c_tr->add_option("--stage", tf.stage, "train through this stage only");
    c_tr->add_option("--seed", tf.seed, "training seed")->each([&](const std::string&) {
        tf.seed_set = true;
    });

    InferFlags inf;
    auto* c_in = app.add_subcommand("infer", "variational inference on one clip");
    add_clip_flags(c_in, inf);
    c_in->add_option("--frames", inf.frames, "observed frames");

    RolloutFlags rf;
    auto* c_ro = app.add_subcommand("rollout", "infer then predict future frames");
    add_clip_flags(c_ro, rf);
    c_ro->add_option("--obs", rf.obs, "observed frames");
    c_ro->add_option("--steps", rf.steps, "future steps to roll out");
    c_ro->add_flag("--dump-intermediates", rf.dump_intermediates,
                   "write per-pair interaction terms as CSV");

    CounterfactualFlags cf;
    auto* c_cf = app.add_subcommand("counterfactual", "rollout with an edited latent");
    add_clip_flags(c_cf, cf);
    c_cf->add_option("--obs", cf.obs, "observed frames");
    c_cf->add_option("--steps", cf.steps, "future steps to roll out");
    c_cf->add_option("--edit", cf.edit, "identity or <charge|mass|dyn>:slot=<k>:<action>")
        ->required();

    ProbeFlags pf;
    auto* c_pr = app.add_subcommand("probe", "latent-to-ground-truth probes");
    c_pr->add_option("--metric", pf.metric, "charge or mass")->required();
    c_pr->add_option("--ckpt", pf.ckpt, "model checkpoint (.phyc)")->required();
    c_pr->add_option("--data", pf.data, "dataset file (.phyd)")->required();
    c_pr->add_option("--config", pf.config, "train config JSON (model dims)");
    c_pr->add_option("--out", pf.out, "report path (stdout always)");
    c_pr->add_option("--frames", pf.frames, "frames per episode inference");
    c_pr->add_option("--slots", pf.slots, "posterior slots K");
    c_pr->add_option("--seed", pf.seed, "rng seed");
    c_pr->add_option("--calib-fraction", pf.calib_fraction, "calibration split fraction");
    c_pr->add_option("--phase-steps", pf.phase_steps, "refinement outer steps per phase");
    c_pr->add_option("--inner-steps", pf.inner_steps, "Adam updates per outer step");
    c_pr->add_option("--lr", pf.lr, "refinement learning rate");
    c_pr->add_option("--beta", pf.beta, "KL weight");
    c_pr->add_flag("--fixed-eps", pf.fixed_eps, "use the posterior mean instead of sampling");

    CheckFlags ck;
    auto* c_ck = app.add_subcommand("check", "verification suites");
    c_ck->add_option("--suite", ck.suite, "autodiff, conservation, invariants, or all");
    c_ck->add_option("--seed", ck.seed, "suite seed");
    c_ck->add_option("--trials", ck.trials, "graphs per autodiff run");

    try {
        app.parse(argc, argv);
        if (threads != 1)
            std::fprintf(stderr, "note: --threads %d requested; running single-threaded\n",
                         threads);
        if (c_gd->parsed()) return cmd_gen_data(gd);
        if (c_tr->parsed()) return cmd_train(tf);
        if (c_in->parsed()) return cmd_infer(inf);
        if (c_ro->parsed()) return cmd_rollout(rf);
        if (c_cf->parsed()) return cmd_counterfactual(cf);
        if (c_pr->parsed()) return cmd_probe(pf);
        if (c_ck->parsed()) return cmd_check(ck);
        return 0;
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : 1;
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e.kind());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 3;
    }
}
