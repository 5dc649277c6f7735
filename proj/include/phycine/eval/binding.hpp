#pragma once

#include <vector>

#include "phycine/sim/episode.hpp"
#include "phycine/vi/refine.hpp"

namespace phycine::eval {

// Slot-to-object assignment by mask overlap at frame 0. slot_of_object[o] is
// -1 when no slot overlaps object o enough to count as bound.
struct SlotBinding {
    std::vector<int> slot_of_object;
    std::vector<double> iou;
};

// Greedy maximum-IoU matching between decoded slot masks (argmax per pixel)
// and ground-truth instance masks.
SlotBinding bind_slots(const dec::SlotDecode& frame0, const sim::Episode& ep,
                       double min_iou = 0.1);

struct BoundLatents {
    ad::Tensor z;  // K x 16 posterior mean
    SlotBinding binding;
};

// Inference followed by slot binding against the episode's frame-0 masks.
BoundLatents infer_and_bind(const sim::Episode& ep, int n_frames,
                            const model::ModelParams& params, const model::ModelConfig& cfg,
                            const vi::InferOptions& opt, Rng& rng);

}  // namespace phycine::eval
