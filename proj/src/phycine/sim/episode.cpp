#include "phycine/sim/episode.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "phycine/common/error.hpp"
#include "phycine/common/rng.hpp"
#include "phycine/sim/render.hpp"

namespace phycine::sim {

CategoryFlags category_flags(int category) {
    switch (category) {
        case 1: return {false, true, 0};
        case 2: return {false, true, 1};
        case 3: return {true, false, 2};
        case 4: return {true, true, 0};
        case 5: return {true, true, 1};
    }
    raise(ErrorKind::Usage, "unknown data category " + std::to_string(category));
}

bool Episode::operator==(const Episode& other) const {
    if (category != other.category || seed != other.seed || width != other.width ||
        height != other.height || frames != other.frames)
        return false;
    if (states.size() != other.states.size() || rgb != other.rgb || masks != other.masks)
        return false;
    if (wall_hits != other.wall_hits) return false;
    if (events.size() != other.events.size()) return false;
    for (std::size_t e = 0; e < events.size(); ++e)
        if (events[e].frame != other.events[e].frame || events[e].i != other.events[e].i ||
            events[e].j != other.events[e].j)
            return false;
    for (std::size_t t = 0; t < states.size(); ++t) {
        const WorldState& a = states[t];
        const WorldState& b = other.states[t];
        if (a.objects.size() != b.objects.size()) return false;
        for (std::size_t k = 0; k < a.objects.size(); ++k) {
            const WorldObject& x = a.objects[k];
            const WorldObject& y = b.objects[k];
            if (x.pos.x != y.pos.x || x.pos.y != y.pos.y || x.vel.x != y.vel.x ||
                x.vel.y != y.vel.y || x.mass != y.mass || x.charge != y.charge ||
                x.radius != y.radius || x.color_id != y.color_id || x.shape != y.shape)
                return false;
        }
    }
    return true;
}

namespace {

// Radial velocity of pair (i, j): d|r|/dt, positive when separating.
double radial_velocity(const WorldState& s, int i, int j) {
    const Vec2 r = s.objects[i].pos - s.objects[j].pos;
    const Vec2 v = s.objects[i].vel - s.objects[j].vel;
    const double d = r.norm();
    return d < 1e-12 ? 0.0 : r.dot(v) / d;
}

struct Attempt {
    std::vector<WorldState> states;
    std::vector<CollisionEvent> events;
    std::vector<int> wall_hits;
    std::vector<std::set<int>> wall_hit_objects;  // per frame
};

Attempt simulate(WorldState s, int frames, const PhysicsConfig& phys) {
    Attempt a;
    a.states.push_back(s);
    a.wall_hits.push_back(0);
    a.wall_hit_objects.emplace_back();
    for (int t = 1; t < frames; ++t) {
        StepEvents ev;
        s = step(s, phys, &ev);
        a.states.push_back(s);
        a.wall_hits.push_back(ev.wall_hits);
        a.wall_hit_objects.emplace_back(ev.wall_hit_objects.begin(), ev.wall_hit_objects.end());
        for (auto [i, j] : ev.collisions) a.events.push_back({t, i, j});
    }
    return a;
}

WorldState sample_initial_state(const GenConfig& cfg, const CategoryFlags& flags, Rng& rng) {
    WorldState s;
    s.bounds = cfg.bounds;
    const int n = cfg.min_objects + rng.uniform_int(cfg.max_objects - cfg.min_objects + 1);

    // Distinct colors keep slot-object identification unambiguous.
    std::vector<int> colors;
    while (static_cast<int>(colors.size()) < n) {
        const int c = rng.uniform_int(kPaletteSize);
        if (std::find(colors.begin(), colors.end(), c) == colors.end()) colors.push_back(c);
    }

    std::vector<double> masses(n, cfg.mass_light);
    if (flags.mass_mode == 1 || (flags.mass_mode == 2 && rng.bernoulli(0.5))) {
        bool has_light = false, has_heavy = false;
        while (!(has_light && has_heavy)) {
            has_light = has_heavy = false;
            for (int k = 0; k < n; ++k) {
                masses[k] = rng.bernoulli(0.5) ? cfg.mass_heavy : cfg.mass_light;
                (masses[k] == cfg.mass_heavy ? has_heavy : has_light) = true;
            }
        }
    }

    std::vector<double> charges(n, 0.0);
    if (flags.charge) {
        // Exactly one charged pair; signs independent so both like and unlike
        // pairs occur.
        int i = rng.uniform_int(n);
        int j = rng.uniform_int(n - 1);
        if (j >= i) ++j;
        charges[i] = rng.bernoulli(0.5) ? cfg.physics.unit_charge : -cfg.physics.unit_charge;
        charges[j] = rng.bernoulli(0.5) ? cfg.physics.unit_charge : -cfg.physics.unit_charge;
    }

    const double speed_lo = flags.collision ? cfg.speed_min_collision : cfg.speed_min_charge;
    const double speed_hi = flags.collision ? cfg.speed_max_collision : cfg.speed_max_charge;

    for (int k = 0; k < n; ++k) {
        WorldObject o;
        o.radius = rng.uniform(cfg.min_radius, cfg.max_radius);
        o.mass = masses[k];
        o.charge = charges[k];
        o.color_id = colors[k];
        o.shape = rng.bernoulli(cfg.square_prob) ? Shape::Square : Shape::Disk;
        const double inset = o.radius + 0.4;
        for (int tries = 0; tries < 64; ++tries) {
            o.pos.x = rng.uniform(cfg.bounds.xmin + inset, cfg.bounds.xmax - inset);
            o.pos.y = rng.uniform(cfg.bounds.ymin + inset, cfg.bounds.ymax - inset);
            bool clear = true;
            for (const WorldObject& other : s.objects)
                if ((o.pos - other.pos).norm() < o.radius + other.radius + 0.3) clear = false;
            if (clear) break;
        }
        const double speed = rng.uniform(speed_lo, speed_hi);
        const double angle = rng.uniform(0.0, 6.283185307179586477);
        o.vel = {speed * std::cos(angle), speed * std::sin(angle)};
        s.objects.push_back(o);
    }

    // Collision categories: aim one object roughly at another so the
    // rejection loop converges quickly.
    if (flags.collision && n >= 2) {
        const int a = rng.uniform_int(n);
        int b = rng.uniform_int(n - 1);
        if (b >= a) ++b;
        const Vec2 d = s.objects[b].pos - s.objects[a].pos;
        const double dist = d.norm();
        if (dist > 1e-9) {
            const double speed = rng.uniform(std::max(speed_lo, 1.5), speed_hi);
            const double jitter = rng.uniform(-0.35, 0.35);
            const double base = std::atan2(d.y, d.x) + jitter;
            s.objects[a].vel = {speed * std::cos(base), speed * std::sin(base)};
        }
    }
    return s;
}

bool flags_hold(const GenConfig& cfg, const CategoryFlags& flags, const Attempt& a,
                const WorldState& init) {
    const int frames = static_cast<int>(a.states.size());
    if (flags.collision) {
        // First contact well inside the clip so training windows can cover it.
        int first = -1;
        for (const CollisionEvent& e : a.events)
            if (first < 0 || e.frame < first) first = e.frame;
        if (first < 2 || first > frames - 4) return false;
    } else if (!a.events.empty()) {
        return false;
    }
    if (flags.charge) {
        int ci = -1, cj = -1;
        const int n = static_cast<int>(init.objects.size());
        for (int k = 0; k < n; ++k)
            if (init.objects[k].charge != 0.0) (ci < 0 ? ci : cj) = k;
        if (cj < 0) return false;
        if (!flags.collision) {
            // Keep the charged pair's radial trend clean: no wall kicks, and a
            // visible Coulomb signature.
            for (int t = 0; t < frames; ++t)
                if (a.wall_hit_objects[t].count(ci) || a.wall_hit_objects[t].count(cj))
                    return false;
            double lo = 1e9, hi = -1e9;
            for (const WorldState& s : a.states) {
                const double rv = radial_velocity(s, ci, cj);
                lo = std::min(lo, rv);
                hi = std::max(hi, rv);
            }
            if (hi - lo < cfg.charge_signal_min) return false;
        }
    }
    return true;
}

void render_episode(Episode& ep) {
    const int n = ep.object_count();
    ep.rgb.assign(static_cast<std::size_t>(ep.frames) * ep.height * ep.width * 3, 0.0f);
    ep.masks.assign(static_cast<std::size_t>(ep.frames) * n * ep.height * ep.width, 0);
    for (int t = 0; t < ep.frames; ++t) {
        render_frame(ep.states[t], ep.width, ep.height,
                     &ep.rgb[static_cast<std::size_t>(t) * ep.height * ep.width * 3]);
        render_masks(ep.states[t], ep.width, ep.height,
                     &ep.masks[static_cast<std::size_t>(t) * n * ep.height * ep.width]);
    }
}

}  // namespace

Episode generate_episode(const GenConfig& cfg, int category, std::uint64_t seed) {
    const CategoryFlags flags = category_flags(category);
    if (cfg.frames < 8) raise(ErrorKind::Usage, "episode needs at least 8 frames");
    for (int attempt = 0; attempt < cfg.max_attempts; ++attempt) {
        Rng rng(derive_seed({seed, static_cast<std::uint64_t>(category),
                             static_cast<std::uint64_t>(attempt), 0xE915ULL}));
        WorldState init = sample_initial_state(cfg, flags, rng);
        Attempt a = simulate(init, cfg.frames, cfg.physics);
        if (!flags_hold(cfg, flags, a, init)) continue;
        Episode ep;
        ep.category = category;
        ep.seed = seed;
        ep.width = cfg.width;
        ep.height = cfg.height;
        ep.frames = cfg.frames;
        ep.bounds = cfg.bounds;
        ep.states = std::move(a.states);
        ep.events = std::move(a.events);
        ep.wall_hits = std::move(a.wall_hits);
        render_episode(ep);
        return ep;
    }
    raise(ErrorKind::Data, "episode generation exhausted " + std::to_string(cfg.max_attempts) +
                               " attempts for category " + std::to_string(category) + ", seed " +
                               std::to_string(seed));
}

Episode make_static_scene(const GenConfig& cfg, std::uint64_t seed) {
    Rng rng(derive_seed({seed, 0x57A71CULL}));
    WorldState s;
    s.bounds = cfg.bounds;
    WorldObject o;
    o.radius = rng.uniform(cfg.min_radius, cfg.max_radius);
    o.color_id = rng.uniform_int(kPaletteSize);
    o.shape = rng.bernoulli(cfg.square_prob) ? Shape::Square : Shape::Disk;
    const double inset = o.radius + 0.6;
    o.pos.x = rng.uniform(cfg.bounds.xmin + inset, cfg.bounds.xmax - inset);
    o.pos.y = rng.uniform(cfg.bounds.ymin + inset, cfg.bounds.ymax - inset);
    s.objects.push_back(o);

    Episode ep;
    ep.category = 0;
    ep.seed = seed;
    ep.width = cfg.width;
    ep.height = cfg.height;
    ep.frames = cfg.frames;
    ep.bounds = cfg.bounds;
    ep.states.assign(cfg.frames, s);
    for (int t = 0; t < cfg.frames; ++t) ep.states[t].time_index = t;
    ep.wall_hits.assign(cfg.frames, 0);
    render_episode(ep);
    return ep;
}

std::vector<CollisionEvent> recheck_collision_events(const Episode& ep, const PhysicsConfig& cfg) {
    std::vector<CollisionEvent> found;
    const int n = ep.object_count();
    for (std::size_t t = 0; t + 1 < ep.states.size(); ++t) {
        const WorldState& before = ep.states[t];
        const WorldState& after = ep.states[t + 1];
        // Impulse each object received beyond what Coulomb forces explain.
        std::vector<Vec2> force(n);
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                const Vec2 f = coulomb_force(before.objects[i], before.objects[j], cfg);
                force[i] += f;
                force[j] -= f;
            }
        std::vector<Vec2> extra(n);
        std::vector<bool> at_wall(n, false);
        for (int i = 0; i < n; ++i) {
            const WorldObject& a = before.objects[i];
            const WorldObject& b = after.objects[i];
            extra[i] = (b.vel - a.vel) * a.mass - force[i] * cfg.dt;
            const Bounds& bb = after.bounds;
            at_wall[i] = b.pos.x - b.radius < bb.xmin + 0.55 || b.pos.x + b.radius > bb.xmax - 0.55 ||
                         b.pos.y - b.radius < bb.ymin + 0.55 || b.pos.y + b.radius > bb.ymax - 0.55;
        }
        for (int i = 0; i < n; ++i)
            for (int j = i + 1; j < n; ++j) {
                if (extra[i].norm() < 1e-6 || extra[j].norm() < 1e-6) continue;
                if ((extra[i] + extra[j]).norm() > 1e-6 * std::max(1.0, extra[i].norm())) continue;
                const double gap = (after.objects[i].pos - after.objects[j].pos).norm() -
                                   after.objects[i].radius - after.objects[j].radius;
                if (gap > 1.0) continue;  // equal-and-opposite wall kicks, not contact
                found.push_back({static_cast<int>(t) + 1, i, j});
            }
        (void)at_wall;
    }
    return found;
}

std::string check_category(const Episode& ep, const GenConfig& cfg) {
    const CategoryFlags flags = category_flags(ep.category);
    const auto rechecked = recheck_collision_events(ep, cfg.physics);
    if (flags.collision && rechecked.empty()) return "expected collisions, detector found none";
    if (!flags.collision && !rechecked.empty()) return "collision-free category has collisions";
    const WorldState& init = ep.states.at(0);
    int charged = 0;
    for (const WorldObject& o : init.objects)
        if (o.charge != 0.0) ++charged;
    if (flags.charge && charged != 2) return "expected exactly one charged pair";
    if (!flags.charge && charged != 0) return "uncharged category has charges";
    std::set<double> masses;
    for (const WorldObject& o : init.objects) masses.insert(o.mass);
    if (flags.mass_mode == 0 && masses.size() != 1) return "identical-mass category has mixed masses";
    if (flags.mass_mode == 1 && masses.size() < 2) return "mixed-mass category has identical masses";
    return {};
}

}  // namespace phycine::sim
