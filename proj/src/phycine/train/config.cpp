#include "phycine/train/config.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "phycine/common/error.hpp"
#include "phycine/common/rng.hpp"

namespace phycine::train {

using nlohmann::json;

namespace {

json stage_to_json(const StageConfig& s) {
    return json{{"categories", s.categories},   {"horizon", s.horizon},
                {"collision_prob", s.collision_prob}, {"charge_enabled", s.charge_enabled},
                {"iterations", s.iterations},   {"batch_size", s.batch_size}};
}

StageConfig stage_from_json(const json& j, const StageConfig& base) {
    StageConfig s = base;
    if (j.contains("categories")) s.categories = j.at("categories").get<std::vector<int>>();
    if (j.contains("horizon")) s.horizon = j.at("horizon").get<int>();
    if (j.contains("collision_prob")) s.collision_prob = j.at("collision_prob").get<double>();
    if (j.contains("charge_enabled")) s.charge_enabled = j.at("charge_enabled").get<bool>();
    if (j.contains("iterations")) s.iterations = j.at("iterations").get<int>();
    if (j.contains("batch_size")) s.batch_size = j.at("batch_size").get<int>();
    return s;
}

}  // namespace

std::string to_json(const TrainConfig& cfg) {
    json j;
    j["model"] = {{"decoder_hidden", cfg.model.decoder.hidden},
                  {"sigma", cfg.model.decoder.sigma},
                  {"attn_hidden", cfg.model.interaction.attn_hidden},
                  {"product_of_sums", cfg.model.interaction.product_of_sums}};
    j["stages"] = json::array();
    for (const StageConfig& s : cfg.stages) j["stages"].push_back(stage_to_json(s));
    j["lr"] = cfg.lr;
    j["beta"] = cfg.beta;
    j["seed"] = cfg.seed;
    j["slots"] = cfg.slots;
    j["mc_samples"] = cfg.mc_samples;
    j["fixed_eps"] = cfg.fixed_eps;
    j["refine"] = {{"phase_steps", cfg.refine_phase_steps},
                   {"inner_steps", cfg.refine_inner_steps},
                   {"lr", cfg.refine_lr}};
    j["checkpoint_every"] = cfg.checkpoint_every;
    j["ablation"] = cfg.ablation;
    return j.dump(2);
}

TrainConfig config_from_json(const std::string& text) {
    TrainConfig cfg;
    json j;
    try {
        j = json::parse(text);
        if (j.contains("model")) {
            const json& m = j.at("model");
            if (m.contains("decoder_hidden")) cfg.model.decoder.hidden = m.at("decoder_hidden").get<int>();
            if (m.contains("sigma")) cfg.model.decoder.sigma = m.at("sigma").get<double>();
            if (m.contains("attn_hidden"))
                cfg.model.interaction.attn_hidden = m.at("attn_hidden").get<int>();
            if (m.contains("product_of_sums"))
                cfg.model.interaction.product_of_sums = m.at("product_of_sums").get<bool>();
        }
        if (j.contains("stages")) {
            const json& st = j.at("stages");
            if (!st.is_array() || st.size() != 3)
                raise(ErrorKind::Data, "train config: stages must be an array of 3");
            for (int i = 0; i < 3; ++i) cfg.stages[i] = stage_from_json(st[i], cfg.stages[i]);
        }
        if (j.contains("lr")) cfg.lr = j.at("lr").get<double>();
        if (j.contains("beta")) cfg.beta = j.at("beta").get<double>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("slots")) cfg.slots = j.at("slots").get<int>();
        if (j.contains("mc_samples")) cfg.mc_samples = j.at("mc_samples").get<int>();
        if (j.contains("fixed_eps")) cfg.fixed_eps = j.at("fixed_eps").get<bool>();
        if (j.contains("refine")) {
            const json& r = j.at("refine");
            if (r.contains("phase_steps")) {
                auto v = r.at("phase_steps").get<std::vector<int>>();
                if (v.size() != 4)
                    raise(ErrorKind::Data, "train config: refine.phase_steps needs 4 entries");
                std::copy(v.begin(), v.end(), cfg.refine_phase_steps.begin());
            }
            if (r.contains("inner_steps")) cfg.refine_inner_steps = r.at("inner_steps").get<int>();
            if (r.contains("lr")) cfg.refine_lr = r.at("lr").get<double>();
        }
        if (j.contains("checkpoint_every")) cfg.checkpoint_every = j.at("checkpoint_every").get<int>();
        if (j.contains("ablation")) cfg.ablation = j.at("ablation").get<std::string>();
    } catch (const json::exception& e) {
        raise(ErrorKind::Data, std::string("train config: ") + e.what());
    }
    validate(cfg);
    return cfg;
}

TrainConfig load_train_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) raise(ErrorKind::Data, "train config: cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return config_from_json(ss.str());
}

void save_train_config(const std::string& path, const TrainConfig& cfg) {
    std::ofstream out(path);
    if (!out) raise(ErrorKind::Data, "train config: cannot write " + path);
    out << to_json(cfg) << "\n";
}

void validate(const TrainConfig& cfg) {
    auto subset_of = [](const std::vector<int>& cats, std::vector<int> allowed) {
        return std::all_of(cats.begin(), cats.end(), [&](int c) {
            return std::find(allowed.begin(), allowed.end(), c) != allowed.end();
        });
    };
    for (const StageConfig& s : cfg.stages) {
        if (s.categories.empty()) raise(ErrorKind::Data, "train config: stage with no categories");
        if (!subset_of(s.categories, {1, 2, 3, 4, 5}))
            raise(ErrorKind::Data, "train config: categories must lie in [1,5]");
        if (s.horizon < 1 || s.iterations < 0 || s.batch_size < 1)
            raise(ErrorKind::Data, "train config: bad stage dimensions");
    }
    if (!subset_of(cfg.stages[0].categories, {1}))
        raise(ErrorKind::Data, "train config: stage 1 may use only category 1");
    if (!subset_of(cfg.stages[1].categories, {1, 2}))
        raise(ErrorKind::Data, "train config: stage 2 may use only categories 1-2");
    if (cfg.lr <= 0.0 || cfg.refine_lr < 0.0)
        raise(ErrorKind::Data, "train config: learning rates must be positive");
    if (cfg.slots < 1 || cfg.mc_samples < 1)
        raise(ErrorKind::Data, "train config: slots and mc_samples must be >= 1");
    for (int ps : cfg.refine_phase_steps)
        if (ps < 0) raise(ErrorKind::Data, "train config: negative refine phase steps");
    if (cfg.refine_inner_steps < 1)
        raise(ErrorKind::Data, "train config: refine inner_steps must be >= 1");
    if (!cfg.ablation.empty() && cfg.ablation != "no-b2u" && cfg.ablation != "no-interaction")
        raise(ErrorKind::Data, "train config: unknown ablation '" + cfg.ablation + "'");
}

std::uint64_t config_hash(const TrainConfig& cfg) {
    std::uint64_t h = 0xC0F1600DULL;
    for (char c : to_json(cfg)) h = hash_mix(h, static_cast<std::uint64_t>(c));
    return h;
}

}  // namespace phycine::train
