#include "phycine/sim/world.hpp"

#include <algorithm>

#include "phycine/common/error.hpp"

namespace phycine::sim {

Vec2 coulomb_force(const WorldObject& o1, const WorldObject& o2, const PhysicsConfig& cfg) {
    if (o1.charge == 0.0 || o2.charge == 0.0) return {0.0, 0.0};
    const Vec2 r = o1.pos - o2.pos;
    const double dist = r.norm();
    if (dist < 1e-12) return {0.0, 0.0};  // coincident centers: direction undefined
    const double r_min = cfg.r_min_factor * std::min(o1.radius, o2.radius);
    const double d = std::max(dist, r_min);
    const double mag = cfg.coulomb_k * o1.charge * o2.charge / (d * d);
    return r * (mag / dist);
}

std::pair<Vec2, Vec2> resolve_collision(const WorldObject& o1, const WorldObject& o2,
                                        double restitution) {
    const Vec2 r = o1.pos - o2.pos;
    const double dist = r.norm();
    if (dist >= o1.radius + o2.radius || dist < 1e-12) return {o1.vel, o2.vel};
    const Vec2 n = r * (1.0 / dist);
    const double closing = (o1.vel - o2.vel).dot(n);
    if (closing >= 0.0) return {o1.vel, o2.vel};  // separating
    const double j = -(1.0 + restitution) * closing / (1.0 / o1.mass + 1.0 / o2.mass);
    return {o1.vel + n * (j / o1.mass), o2.vel - n * (j / o2.mass)};
}

WorldState step(const WorldState& s, const PhysicsConfig& cfg, StepEvents* events) {
    WorldState next = s;
    const int n = static_cast<int>(next.objects.size());

    std::vector<Vec2> force(n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const Vec2 f = coulomb_force(next.objects[i], next.objects[j], cfg);
            force[i] += f;
            force[j] -= f;
        }
    for (int i = 0; i < n; ++i) {
        WorldObject& o = next.objects[i];
        o.vel += force[i] * (cfg.dt / o.mass);
        o.pos += o.vel * cfg.dt;
    }

    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            WorldObject& a = next.objects[i];
            WorldObject& b = next.objects[j];
            const Vec2 r = a.pos - b.pos;
            const double dist = r.norm();
            if (dist >= a.radius + b.radius || dist < 1e-12) continue;
            if ((a.vel - b.vel).dot(r) >= 0.0) continue;  // already separating
            auto [va, vb] = resolve_collision(a, b, cfg.restitution);
            a.vel = va;
            b.vel = vb;
            // Split the overlap evenly along the contact normal.
            const Vec2 nrm = r * (1.0 / dist);
            const double push = 0.5 * (a.radius + b.radius - dist);
            a.pos += nrm * push;
            b.pos -= nrm * push;
            if (events) events->collisions.emplace_back(i, j);
        }

    const Bounds& bb = next.bounds;
    for (int i = 0; i < n; ++i) {
        WorldObject& o = next.objects[i];
        bool hit = false;
        if (o.pos.x - o.radius < bb.xmin && o.vel.x < 0.0) {
            o.pos.x = 2.0 * (bb.xmin + o.radius) - o.pos.x;
            o.vel.x = -o.vel.x;
            hit = true;
        }
        if (o.pos.x + o.radius > bb.xmax && o.vel.x > 0.0) {
            o.pos.x = 2.0 * (bb.xmax - o.radius) - o.pos.x;
            o.vel.x = -o.vel.x;
            hit = true;
        }
        if (o.pos.y - o.radius < bb.ymin && o.vel.y < 0.0) {
            o.pos.y = 2.0 * (bb.ymin + o.radius) - o.pos.y;
            o.vel.y = -o.vel.y;
            hit = true;
        }
        if (o.pos.y + o.radius > bb.ymax && o.vel.y > 0.0) {
            o.pos.y = 2.0 * (bb.ymax - o.radius) - o.pos.y;
            o.vel.y = -o.vel.y;
            hit = true;
        }
        if (hit && events) {
            ++events->wall_hits;
            events->wall_hit_objects.push_back(i);
        }
    }

    next.time_index = s.time_index + 1;
    return next;
}

double total_kinetic_energy(const WorldState& s) {
    double e = 0.0;
    for (const WorldObject& o : s.objects) e += 0.5 * o.mass * o.vel.dot(o.vel);
    return e;
}

Vec2 total_momentum(const WorldState& s) {
    Vec2 p;
    for (const WorldObject& o : s.objects) p += o.vel * o.mass;
    return p;
}

double coulomb_potential(const WorldState& s, const PhysicsConfig& cfg) {
    double u = 0.0;
    const int n = static_cast<int>(s.objects.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const WorldObject& a = s.objects[i];
            const WorldObject& b = s.objects[j];
            if (a.charge == 0.0 || b.charge == 0.0) continue;
            const double r_min = cfg.r_min_factor * std::min(a.radius, b.radius);
            const double d = std::max((a.pos - b.pos).norm(), r_min);
            u += cfg.coulomb_k * a.charge * b.charge / d;
        }
    return u;
}

std::vector<std::pair<int, int>> detect_collisions(const WorldState& s) {
    std::vector<std::pair<int, int>> out;
    const int n = static_cast<int>(s.objects.size());
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            const WorldObject& a = s.objects[i];
            const WorldObject& b = s.objects[j];
            const Vec2 r = a.pos - b.pos;
            const double dist = r.norm();
            if (dist < a.radius + b.radius && (a.vel - b.vel).dot(r) < 0.0)
                out.emplace_back(i, j);
        }
    return out;
}

}  // namespace phycine::sim
