#pragma once

#include <array>
#include <string>
#include <vector>

#include "phycine/dec/decoder.hpp"
#include "phycine/eval/binding.hpp"
#include "phycine/model/model.hpp"

namespace phycine::eval {

// Latent edit applied to an inferred lambda^0 mean before re-rollout.
struct Intervention {
    enum class Kind { Identity, FlipCharge, SetCharge, ScaleMassLatent, SetDynComponent };
    Kind kind = Kind::Identity;
    int slot = -1;       // ignored by Identity
    double value = 0.0;  // SetCharge target, ScaleMassLatent factor, SetDynComponent target
    int component = 0;   // dyn axis for SetDynComponent
};

// Edited detached copy of a K x 16 latent. Identity returns the input bits
// untouched; FlipCharge negates, so applying it twice restores them.
ad::Tensor apply_intervention(const ad::Tensor& z0, const Intervention& iv);

// Object index -> slot index through a binding; Data error when unbound.
int resolve_slot(const SlotBinding& binding, int object);

struct CounterfactualOptions {
    int n_steps = 6;
    double col_gate = 1.0;
    double chg_gate = 1.0;
    int height = 32;
    int width = 48;
    bool decode_frames = true;  // pixel divergence and centroids need decoded frames
};

struct CounterfactualResult {
    dyn::RolloutResult base;
    dyn::RolloutResult edited;
    std::vector<double> latent_divergence;       // per step, RMS over the K x 16 block
    std::vector<double> pixel_divergence;        // per step, MSE over the composite image
    std::vector<dec::SlotDecode> base_frames;    // empty unless decode_frames
    std::vector<dec::SlotDecode> edited_frames;
};

CounterfactualResult counterfactual(const ad::Tensor& z0, const Intervention& iv,
                                    const model::ModelParams& params,
                                    const model::ModelConfig& cfg,
                                    const CounterfactualOptions& opt);

// Mask-weighted mean pixel coordinate of one slot; components in pixel units.
std::array<double, 2> mask_centroid(const dec::SlotDecode& frame, int slot);

// Least-squares slope of the centroid distance between two slots over time.
// Positive: separating; negative: approaching.
double radial_velocity_trend(const std::vector<dec::SlotDecode>& frames, int slot_i, int slot_j);

// One CSV row per (step, ordered pair): gate, force direction, intensity, and
// the source slot's post-update dyn and mass. Requires a rollout recorded
// with breakdowns. Values round-trip through float32.
std::string intermediates_csv(const dyn::RolloutResult& rr);
void dump_intermediates(const dyn::RolloutResult& rr, const std::string& path);

}  // namespace phycine::eval
