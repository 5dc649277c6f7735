#include "phycine/eval/binding.hpp"

#include <algorithm>

#include "phycine/common/error.hpp"
#include "phycine/dec/decoder.hpp"
#include "phycine/vi/elbo.hpp"

namespace phycine::eval {

SlotBinding bind_slots(const dec::SlotDecode& frame0, const sim::Episode& ep,
                       double min_iou) {
    const int k = frame0.mask_logits.shape[0];
    const int h = frame0.mask_logits.shape[1];
    const int w = frame0.mask_logits.shape[2];
    if (h != ep.height || w != ep.width)
        raise(ErrorKind::Shape, "bind_slots: decoded mask is " + std::to_string(h) + "x" +
                                    std::to_string(w) + " but episode frames are " +
                                    std::to_string(ep.height) + "x" + std::to_string(ep.width));
    const int n_obj = ep.object_count();

    // Hard slot assignment: each pixel belongs to the slot with the largest mask.
    std::vector<int> owner(static_cast<size_t>(h) * w, 0);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            int best = 0;
            double best_v = frame0.masks.at({0, y, x});
            for (int s = 1; s < k; ++s) {
                const double v = frame0.masks.at({s, y, x});
                if (v > best_v) {
                    best_v = v;
                    best = s;
                }
            }
            owner[static_cast<size_t>(y) * w + x] = best;
        }
    }

    // IoU between slot-owned pixels and each object's ground-truth mask.
    std::vector<double> iou(static_cast<size_t>(n_obj) * k, 0.0);
    for (int o = 0; o < n_obj; ++o) {
        const uint8_t* gt = ep.frame_mask(0, o);
        for (int s = 0; s < k; ++s) {
            int inter = 0, uni = 0;
            for (int p = 0; p < h * w; ++p) {
                const bool in_gt = gt[p] != 0;
                const bool in_slot = owner[p] == s;
                inter += (in_gt && in_slot) ? 1 : 0;
                uni += (in_gt || in_slot) ? 1 : 0;
            }
            iou[static_cast<size_t>(o) * k + s] = uni > 0 ? static_cast<double>(inter) / uni : 0.0;
        }
    }

    SlotBinding b;
    b.slot_of_object.assign(n_obj, -1);
    b.iou.assign(n_obj, 0.0);
    std::vector<bool> slot_used(k, false);
    for (int step = 0; step < n_obj; ++step) {
        int best_o = -1, best_s = -1;
        double best_v = min_iou;
        for (int o = 0; o < n_obj; ++o) {
            if (b.slot_of_object[o] >= 0) continue;
            for (int s = 0; s < k; ++s) {
                if (slot_used[s]) continue;
                const double v = iou[static_cast<size_t>(o) * k + s];
                if (v > best_v) {
                    best_v = v;
                    best_o = o;
                    best_s = s;
                }
            }
        }
        if (best_o < 0) break;
        b.slot_of_object[best_o] = best_s;
        b.iou[best_o] = best_v;
        slot_used[best_s] = true;
    }
    return b;
}

BoundLatents infer_and_bind(const sim::Episode& ep, int n_frames,
                            const model::ModelParams& params, const model::ModelConfig& cfg,
                            const vi::InferOptions& opt, Rng& rng) {
    const auto frames = vi::episode_frames(ep, 0, n_frames);
    auto ir = vi::infer(frames, params, cfg, opt, rng);

    const auto state = dyn::split_latent(ir.post.mean);
    const auto decoded = dec::decode(state.ctx, ep.height, ep.width, params.decoder);

    BoundLatents out;
    out.z = ir.post.mean;
    out.binding = bind_slots(decoded, ep);
    return out;
}

}  // namespace phycine::eval
