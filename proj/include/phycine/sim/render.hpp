#pragma once

#include <array>
#include <cstdint>

#include "phycine/sim/world.hpp"

namespace phycine::sim {

inline constexpr int kPaletteSize = 6;
std::array<float, 3> palette_color(int color_id);

// Anti-aliased painter's-order composite, H*W*3 row-major in [0,1].
// Pixel centers sample the world through the state bounds; +y is up.
void render_frame(const WorldState& s, int width, int height, float* rgb);

// Per-object binary coverage masks, K*H*W.
void render_masks(const WorldState& s, int width, int height, std::uint8_t* masks);

}  // namespace phycine::sim
