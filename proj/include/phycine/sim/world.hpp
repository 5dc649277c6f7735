#pragma once

#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

namespace phycine::sim {

struct Vec2 {
    double x = 0.0, y = 0.0;

    Vec2 operator+(const Vec2& o) const { return {x + o.x, y + o.y}; }
    Vec2 operator-(const Vec2& o) const { return {x - o.x, y - o.y}; }
    Vec2 operator*(double s) const { return {x * s, y * s}; }
    Vec2 operator-() const { return {-x, -y}; }
    Vec2& operator+=(const Vec2& o) {
        x += o.x;
        y += o.y;
        return *this;
    }
    Vec2& operator-=(const Vec2& o) {
        x -= o.x;
        y -= o.y;
        return *this;
    }
    double dot(const Vec2& o) const { return x * o.x + y * o.y; }
    double norm() const { return std::sqrt(x * x + y * y); }
};

enum class Shape : std::int32_t { Disk = 0, Square = 1 };

struct WorldObject {
    Vec2 pos;
    Vec2 vel;
    double mass = 1.0;
    double charge = 0.0;  // in {-q0, 0, +q0}
    double radius = 0.5;  // disks: radius; squares: half side
    std::int32_t color_id = 0;
    Shape shape = Shape::Disk;
};

struct Bounds {
    double xmin = 0.0, ymin = 0.0, xmax = 12.0, ymax = 8.0;
    double width() const { return xmax - xmin; }
    double height() const { return ymax - ymin; }
};

struct WorldState {
    std::vector<WorldObject> objects;
    Bounds bounds;
    int time_index = 0;
};

struct PhysicsConfig {
    double dt = 0.1;
    double restitution = 1.0;
    double coulomb_k = 0.5;
    double unit_charge = 1.0;
    // Coulomb distance clamp: r_min = r_min_factor * min pair radius.
    double r_min_factor = 2.0;
};

// Force exerted on o1 by o2. Computed once per pair and applied with exact
// negation, so pair forces sum to zero bit-for-bit.
Vec2 coulomb_force(const WorldObject& o1, const WorldObject& o2, const PhysicsConfig& cfg);

// Impulse-based elastic response for an overlapping, approaching pair.
// Returns the post-collision velocities; a separating or disjoint pair is
// returned unchanged.
std::pair<Vec2, Vec2> resolve_collision(const WorldObject& o1, const WorldObject& o2,
                                        double restitution);

struct StepEvents {
    std::vector<std::pair<int, int>> collisions;  // object index pairs, i < j
    int wall_hits = 0;
    std::vector<int> wall_hit_objects;
};

// Symplectic Euler: v += (F/m) dt, then x += v dt; then pairwise collision
// resolution with positional de-penetration; then boundary reflection.
WorldState step(const WorldState& s, const PhysicsConfig& cfg, StepEvents* events = nullptr);

double total_kinetic_energy(const WorldState& s);
Vec2 total_momentum(const WorldState& s);

// Coulomb potential energy with the same distance clamp the force uses.
double coulomb_potential(const WorldState& s, const PhysicsConfig& cfg);

// Independent detector: scans a stored trajectory for overlapping,
// approaching pairs. Used to re-check category flags after generation.
std::vector<std::pair<int, int>> detect_collisions(const WorldState& s);

}  // namespace phycine::sim
