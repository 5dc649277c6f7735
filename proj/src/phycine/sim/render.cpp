#include "phycine/sim/render.hpp"

#include <algorithm>
#include <cmath>

namespace phycine::sim {

namespace {

constexpr float kBackground[3] = {0.05f, 0.05f, 0.08f};

constexpr std::array<std::array<float, 3>, kPaletteSize> kPalette = {{
    {0.85f, 0.20f, 0.20f},
    {0.20f, 0.80f, 0.25f},
    {0.25f, 0.40f, 0.90f},
    {0.90f, 0.85f, 0.20f},
    {0.85f, 0.30f, 0.85f},
    {0.25f, 0.80f, 0.85f},
}};

// Signed distance to the object boundary; negative inside.
double boundary_distance(const WorldObject& o, double wx, double wy) {
    const double dx = wx - o.pos.x;
    const double dy = wy - o.pos.y;
    if (o.shape == Shape::Square) return std::max(std::abs(dx), std::abs(dy)) - o.radius;
    return std::sqrt(dx * dx + dy * dy) - o.radius;
}

double coverage(const WorldObject& o, double wx, double wy, double px) {
    const double d = boundary_distance(o, wx, wy);
    return std::clamp(0.5 - d / px, 0.0, 1.0);
}

}  // namespace

std::array<float, 3> palette_color(int color_id) {
    return kPalette[static_cast<std::size_t>(color_id % kPaletteSize)];
}

void render_frame(const WorldState& s, int width, int height, float* rgb) {
    const Bounds& b = s.bounds;
    const double px = b.width() / width;
    const double py = b.height() / height;
    for (int r = 0; r < height; ++r) {
        const double wy = b.ymax - (r + 0.5) * py;
        for (int c = 0; c < width; ++c) {
            const double wx = b.xmin + (c + 0.5) * px;
            float col[3] = {kBackground[0], kBackground[1], kBackground[2]};
            for (const WorldObject& o : s.objects) {
                const float cov = static_cast<float>(coverage(o, wx, wy, px));
                if (cov <= 0.0f) continue;
                const auto oc = kPalette[static_cast<std::size_t>(o.color_id % kPaletteSize)];
                for (int ch = 0; ch < 3; ++ch) col[ch] = (1.0f - cov) * col[ch] + cov * oc[ch];
            }
            float* out = rgb + (static_cast<std::size_t>(r) * width + c) * 3;
            out[0] = col[0];
            out[1] = col[1];
            out[2] = col[2];
        }
    }
}

void render_masks(const WorldState& s, int width, int height, std::uint8_t* masks) {
    const Bounds& b = s.bounds;
    const double px = b.width() / width;
    const double py = b.height() / height;
    const int n = static_cast<int>(s.objects.size());
    for (int k = 0; k < n; ++k) {
        std::uint8_t* m = masks + static_cast<std::size_t>(k) * height * width;
        for (int r = 0; r < height; ++r) {
            const double wy = b.ymax - (r + 0.5) * py;
            for (int c = 0; c < width; ++c) {
                const double wx = b.xmin + (c + 0.5) * px;
                m[r * width + c] = coverage(s.objects[k], wx, wy, px) > 0.5 ? 1 : 0;
            }
        }
    }
}

}  // namespace phycine::sim
