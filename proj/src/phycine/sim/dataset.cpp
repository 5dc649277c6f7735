#include "phycine/sim/dataset.hpp"

#include <fstream>

#include <json.hpp>

#include "phycine/common/binio.hpp"
#include "phycine/common/error.hpp"
#include "phycine/common/rng.hpp"

namespace phycine::sim {

namespace {

constexpr char kMagic[5] = "PHYD";
constexpr std::uint32_t kVersion = 1;

void write_episode(BinWriter& w, const Episode& ep) {
    w.u32(static_cast<std::uint32_t>(ep.category));
    w.u64(ep.seed);
    w.u32(static_cast<std::uint32_t>(ep.frames));
    w.u32(static_cast<std::uint32_t>(ep.height));
    w.u32(static_cast<std::uint32_t>(ep.width));
    const int n = ep.object_count();
    w.u32(static_cast<std::uint32_t>(n));
    w.f64(ep.bounds.xmin);
    w.f64(ep.bounds.ymin);
    w.f64(ep.bounds.xmax);
    w.f64(ep.bounds.ymax);
    // Static object table, then per-frame kinematic state.
    for (int k = 0; k < n; ++k) {
        const WorldObject& o = ep.states[0].objects[k];
        w.f64(o.mass);
        w.f64(o.charge);
        w.f64(o.radius);
        w.i32(o.color_id);
        w.i32(static_cast<std::int32_t>(o.shape));
    }
    for (const WorldState& s : ep.states)
        for (const WorldObject& o : s.objects) {
            w.f64(o.pos.x);
            w.f64(o.pos.y);
            w.f64(o.vel.x);
            w.f64(o.vel.y);
        }
    w.u32(static_cast<std::uint32_t>(ep.events.size()));
    for (const CollisionEvent& e : ep.events) {
        w.u32(static_cast<std::uint32_t>(e.frame));
        w.u32(static_cast<std::uint32_t>(e.i));
        w.u32(static_cast<std::uint32_t>(e.j));
    }
    for (int h : ep.wall_hits) w.u32(static_cast<std::uint32_t>(h));
    w.bytes(ep.rgb.data(), ep.rgb.size() * sizeof(float));
    w.bytes(ep.masks.data(), ep.masks.size());
}

Episode read_episode(BinReader& r) {
    Episode ep;
    ep.category = static_cast<int>(r.u32());
    ep.seed = r.u64();
    ep.frames = static_cast<int>(r.u32());
    ep.height = static_cast<int>(r.u32());
    ep.width = static_cast<int>(r.u32());
    const int n = static_cast<int>(r.u32());
    if (ep.frames <= 0 || ep.frames > 100000 || ep.height <= 0 || ep.width <= 0 || n < 0 || n > 64)
        raise(ErrorKind::Data, "implausible episode header");
    ep.bounds.xmin = r.f64();
    ep.bounds.ymin = r.f64();
    ep.bounds.xmax = r.f64();
    ep.bounds.ymax = r.f64();
    std::vector<WorldObject> proto(n);
    for (int k = 0; k < n; ++k) {
        proto[k].mass = r.f64();
        proto[k].charge = r.f64();
        proto[k].radius = r.f64();
        proto[k].color_id = r.i32();
        proto[k].shape = static_cast<Shape>(r.i32());
    }
    ep.states.resize(ep.frames);
    for (int t = 0; t < ep.frames; ++t) {
        WorldState& s = ep.states[t];
        s.bounds = ep.bounds;
        s.time_index = t;
        s.objects = proto;
        for (int k = 0; k < n; ++k) {
            s.objects[k].pos.x = r.f64();
            s.objects[k].pos.y = r.f64();
            s.objects[k].vel.x = r.f64();
            s.objects[k].vel.y = r.f64();
        }
    }
    const std::uint32_t n_events = r.u32();
    if (n_events > 1u << 20) raise(ErrorKind::Data, "implausible event count");
    ep.events.resize(n_events);
    for (CollisionEvent& e : ep.events) {
        e.frame = static_cast<int>(r.u32());
        e.i = static_cast<int>(r.u32());
        e.j = static_cast<int>(r.u32());
    }
    ep.wall_hits.resize(ep.frames);
    for (int& h : ep.wall_hits) h = static_cast<int>(r.u32());
    ep.rgb.resize(static_cast<std::size_t>(ep.frames) * ep.height * ep.width * 3);
    r.bytes(ep.rgb.data(), ep.rgb.size() * sizeof(float));
    ep.masks.resize(static_cast<std::size_t>(ep.frames) * n * ep.height * ep.width);
    r.bytes(ep.masks.data(), ep.masks.size());
    return ep;
}

}  // namespace

std::string manifest_path(const std::string& dataset_path) {
    return dataset_path + ".manifest.json";
}

void write_dataset(const std::string& path, const std::vector<Episode>& episodes,
                   const GenConfig& cfg) {
    BinWriter w(path);
    w.magic(kMagic);
    w.u32(kVersion);
    w.u32(static_cast<std::uint32_t>(episodes.size()));
    w.u32(0);  // reserved

    nlohmann::json manifest;
    manifest["version"] = kVersion;
    manifest["count"] = episodes.size();
    manifest["physics"] = {
        {"dt", cfg.physics.dt},
        {"restitution", cfg.physics.restitution},
        {"coulomb_k", cfg.physics.coulomb_k},
        {"unit_charge", cfg.physics.unit_charge},
        {"r_min_factor", cfg.physics.r_min_factor},
    };
    manifest["generation"] = {
        {"width", cfg.width},
        {"height", cfg.height},
        {"frames", cfg.frames},
        {"min_objects", cfg.min_objects},
        {"max_objects", cfg.max_objects},
        {"bounds", {cfg.bounds.xmin, cfg.bounds.ymin, cfg.bounds.xmax, cfg.bounds.ymax}},
        {"min_radius", cfg.min_radius},
        {"max_radius", cfg.max_radius},
        {"mass_light", cfg.mass_light},
        {"mass_heavy", cfg.mass_heavy},
        {"speed_min_collision", cfg.speed_min_collision},
        {"speed_max_collision", cfg.speed_max_collision},
        {"speed_min_charge", cfg.speed_min_charge},
        {"speed_max_charge", cfg.speed_max_charge},
        {"square_prob", cfg.square_prob},
        {"charge_signal_min", cfg.charge_signal_min},
    };
    auto& eps = manifest["episodes"] = nlohmann::json::array();
    for (const Episode& ep : episodes) {
        const std::uint64_t offset = w.tell();
        write_episode(w, ep);
        eps.push_back({{"category", ep.category},
                       {"seed", ep.seed},
                       {"offset", offset},
                       {"frames", ep.frames},
                       {"objects", ep.object_count()}});
    }
    w.close();

    std::ofstream mf(manifest_path(path));
    if (!mf) raise(ErrorKind::Data, "cannot write manifest for " + path);
    mf << manifest.dump(2) << "\n";
}

std::vector<Episode> read_dataset(const std::string& path) {
    BinReader r(path);
    r.expect_magic(kMagic, "PHYD dataset");
    const std::uint32_t version = r.u32();
    if (version != kVersion)
        raise(ErrorKind::Data, "unsupported PHYD version " + std::to_string(version));
    const std::uint32_t count = r.u32();
    if (count > 1u << 20) raise(ErrorKind::Data, "implausible episode count");
    r.u32();  // reserved
    std::vector<Episode> out;
    out.reserve(count);
    for (std::uint32_t i = 0; i < count; ++i) out.push_back(read_episode(r));
    if (!r.at_eof()) raise(ErrorKind::Data, "trailing bytes in " + path);
    return out;
}

GenConfig read_dataset_config(const std::string& path) {
    std::ifstream mf(manifest_path(path));
    if (!mf) raise(ErrorKind::Data, "missing manifest: " + manifest_path(path));
    nlohmann::json m;
    try {
        mf >> m;
    } catch (const std::exception& e) {
        raise(ErrorKind::Data, "bad manifest JSON: " + std::string(e.what()));
    }
    GenConfig cfg;
    try {
        const auto& p = m.at("physics");
        cfg.physics.dt = p.at("dt");
        cfg.physics.restitution = p.at("restitution");
        cfg.physics.coulomb_k = p.at("coulomb_k");
        cfg.physics.unit_charge = p.at("unit_charge");
        cfg.physics.r_min_factor = p.at("r_min_factor");
        const auto& g = m.at("generation");
        cfg.width = g.at("width");
        cfg.height = g.at("height");
        cfg.frames = g.at("frames");
        cfg.min_objects = g.at("min_objects");
        cfg.max_objects = g.at("max_objects");
        cfg.bounds.xmin = g.at("bounds").at(0);
        cfg.bounds.ymin = g.at("bounds").at(1);
        cfg.bounds.xmax = g.at("bounds").at(2);
        cfg.bounds.ymax = g.at("bounds").at(3);
        cfg.min_radius = g.at("min_radius");
        cfg.max_radius = g.at("max_radius");
        cfg.mass_light = g.at("mass_light");
        cfg.mass_heavy = g.at("mass_heavy");
        cfg.speed_min_collision = g.at("speed_min_collision");
        cfg.speed_max_collision = g.at("speed_max_collision");
        cfg.speed_min_charge = g.at("speed_min_charge");
        cfg.speed_max_charge = g.at("speed_max_charge");
        cfg.square_prob = g.at("square_prob");
        cfg.charge_signal_min = g.at("charge_signal_min");
    } catch (const nlohmann::json::exception& e) {
        raise(ErrorKind::Data, "manifest missing fields: " + std::string(e.what()));
    }
    return cfg;
}

std::vector<Episode> generate_dataset(const GenConfig& cfg, const std::vector<int>& counts,
                                      std::uint64_t seed) {
    if (counts.size() != kNumCategories)
        raise(ErrorKind::Usage, "expected 5 per-category episode counts");
    std::vector<Episode> out;
    for (int c = 0; c < kNumCategories; ++c)
        for (int i = 0; i < counts[c]; ++i)
            out.push_back(generate_episode(
                cfg, c + 1, derive_seed({seed, static_cast<std::uint64_t>(c + 1),
                                         static_cast<std::uint64_t>(i)})));
    return out;
}

}  // namespace phycine::sim
