#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "phycine/sim/world.hpp"

namespace phycine::sim {

// Data categories. Flags: charge force present / object collisions present /
// identical masses.
//   1: no charge, collisions, identical mass
//   2: no charge, collisions, mixed mass
//   3: charge, no collisions, any mass
//   4: charge, collisions, identical mass
//   5: charge, collisions, mixed mass
inline constexpr int kNumCategories = 5;

struct CategoryFlags {
    bool charge = false;
    bool collision = false;
    int mass_mode = 0;  // 0 identical, 1 mixed, 2 any
};

CategoryFlags category_flags(int category);  // category in [1,5]

struct GenConfig {
    int width = 48;
    int height = 32;
    int frames = 24;  // stored states are the physics steps, one per frame
    int min_objects = 2;
    int max_objects = 3;
    Bounds bounds;
    PhysicsConfig physics;
    double min_radius = 0.5;
    double max_radius = 0.9;
    double mass_light = 1.0;
    double mass_heavy = 5.0;
    // Collision-driven categories launch faster than charge-only scenes so
    // Coulomb bending stays visible against ballistic motion.
    double speed_min_collision = 1.0;
    double speed_max_collision = 3.0;
    double speed_min_charge = 0.4;
    double speed_max_charge = 1.5;
    double square_prob = 0.3;
    // Charge-only scenes must show at least this much spread in the charged
    // pair's radial velocity over the clip.
    double charge_signal_min = 0.25;
    int max_attempts = 400;
};

struct CollisionEvent {
    int frame = 0;  // state index the impulse lands on
    int i = 0, j = 0;
};

struct Episode {
    int category = 0;
    std::uint64_t seed = 0;
    int width = 0, height = 0, frames = 0;
    Bounds bounds;
    std::vector<WorldState> states;         // frames entries
    std::vector<CollisionEvent> events;     // object-object collisions
    std::vector<int> wall_hits;             // per frame
    std::vector<float> rgb;                 // frames*H*W*3, [0,1]
    std::vector<std::uint8_t> masks;        // frames*K*H*W, binary

    int object_count() const {
        return states.empty() ? 0 : static_cast<int>(states[0].objects.size());
    }
    const float* frame_rgb(int t) const { return &rgb[static_cast<std::size_t>(t) * height * width * 3]; }
    const std::uint8_t* frame_mask(int t, int k) const {
        return &masks[(static_cast<std::size_t>(t) * object_count() + k) * height * width];
    }
    bool operator==(const Episode& other) const;
};

// Rejection-samples initial conditions until the category flags hold on the
// simulated trajectory. Raises a Data error when the attempt budget runs out.
Episode generate_episode(const GenConfig& cfg, int category, std::uint64_t seed);

// One object at rest in the middle of the scene; used by static-scene probes.
Episode make_static_scene(const GenConfig& cfg, std::uint64_t seed);

// Cross-checks a stored trajectory against the physics model: impulses not
// explained by Coulomb forces must come in near-wall pairs (collision) or at
// the boundary (wall hit). Returns detected object-object collision events.
std::vector<CollisionEvent> recheck_collision_events(const Episode& ep, const PhysicsConfig& cfg);

// Validates the episode against its category flags using the independent
// detector above. Returns an empty string when consistent, else a reason.
std::string check_category(const Episode& ep, const GenConfig& cfg);

}  // namespace phycine::sim
