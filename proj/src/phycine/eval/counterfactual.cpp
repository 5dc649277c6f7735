#include "phycine/eval/counterfactual.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "phycine/common/error.hpp"

namespace phycine::eval {

ad::Tensor apply_intervention(const ad::Tensor& z0, const Intervention& iv) {
    if (z0.shape.size() != 2 || z0.shape[1] != dyn::kLatentDim)
        raise(ErrorKind::Shape,
              "apply_intervention: latent must be K x " + std::to_string(dyn::kLatentDim) +
                  ", got " + ad::shape_str(z0.shape));
    ad::Tensor z = z0.detached();
    if (iv.kind == Intervention::Kind::Identity) return z;

    const int k = z.shape[0];
    if (iv.slot < 0 || iv.slot >= k)
        raise(ErrorKind::Usage, "apply_intervention: slot " + std::to_string(iv.slot) +
                                    " out of range for " + std::to_string(k) + " slots");
    double* row = z.data.data() + static_cast<size_t>(iv.slot) * dyn::kLatentDim;
    switch (iv.kind) {
        case Intervention::Kind::FlipCharge:
            row[dyn::kChargeOff] = -row[dyn::kChargeOff];
            break;
        case Intervention::Kind::SetCharge:
            row[dyn::kChargeOff] = iv.value;
            break;
        case Intervention::Kind::ScaleMassLatent:
            row[dyn::kMassOff] *= iv.value;
            break;
        case Intervention::Kind::SetDynComponent:
            if (iv.component < 0 || iv.component >= dyn::kDynDim)
                raise(ErrorKind::Usage, "apply_intervention: dyn component " +
                                            std::to_string(iv.component) + " out of range");
            row[dyn::kDynOff + iv.component] = iv.value;
            break;
        case Intervention::Kind::Identity:
            break;
    }
    return z;
}

int resolve_slot(const SlotBinding& binding, int object) {
    if (object < 0 || object >= static_cast<int>(binding.slot_of_object.size()))
        raise(ErrorKind::Usage, "resolve_slot: object " + std::to_string(object) +
                                    " out of range for " +
                                    std::to_string(binding.slot_of_object.size()) + " objects");
    const int slot = binding.slot_of_object[object];
    if (slot < 0)
        raise(ErrorKind::Data, "resolve_slot: object " + std::to_string(object) +
                                   " is unbound (no slot mask overlaps it)");
    return slot;
}

static std::vector<dec::SlotDecode> decode_steps(const dyn::RolloutResult& rr, int h, int w,
                                                 const model::ModelParams& params) {
    std::vector<dec::SlotDecode> out;
    out.reserve(rr.steps.size());
    for (const auto& s : rr.steps) out.push_back(dec::decode(s.ctx, h, w, params.decoder));
    return out;
}

CounterfactualResult counterfactual(const ad::Tensor& z0, const Intervention& iv,
                                    const model::ModelParams& params,
                                    const model::ModelConfig& cfg,
                                    const CounterfactualOptions& opt) {
    if (opt.n_steps < 0) raise(ErrorKind::Usage, "counterfactual: n_steps must be >= 0");
    const ad::Tensor base_z = z0.detached();
    const ad::Tensor edit_z = apply_intervention(z0, iv);

    CounterfactualResult r;
    r.base = dyn::rollout(dyn::split_latent(base_z), opt.n_steps, params.interaction,
                          cfg.interaction, opt.col_gate, opt.chg_gate);
    r.edited = dyn::rollout(dyn::split_latent(edit_z), opt.n_steps, params.interaction,
                            cfg.interaction, opt.col_gate, opt.chg_gate);

    const int k = base_z.shape[0];
    for (size_t t = 0; t < r.base.steps.size(); ++t) {
        const ad::Tensor a = dyn::join_latent(r.base.steps[t]);
        const ad::Tensor b = dyn::join_latent(r.edited.steps[t]);
        double ss = 0.0;
        for (size_t i = 0; i < a.data.size(); ++i) {
            const double d = a.data[i] - b.data[i];
            ss += d * d;
        }
        r.latent_divergence.push_back(std::sqrt(ss / (static_cast<double>(k) * dyn::kLatentDim)));
    }

    if (opt.decode_frames) {
        r.base_frames = decode_steps(r.base, opt.height, opt.width, params);
        r.edited_frames = decode_steps(r.edited, opt.height, opt.width, params);
        for (size_t t = 0; t < r.base_frames.size(); ++t) {
            const ad::Tensor a = dec::composite_image(r.base_frames[t]);
            const ad::Tensor b = dec::composite_image(r.edited_frames[t]);
            double ss = 0.0;
            for (size_t i = 0; i < a.data.size(); ++i) {
                const double d = a.data[i] - b.data[i];
                ss += d * d;
            }
            r.pixel_divergence.push_back(ss / static_cast<double>(a.data.size()));
        }
    }
    return r;
}

std::array<double, 2> mask_centroid(const dec::SlotDecode& frame, int slot) {
    const int k = frame.masks.shape[0];
    const int h = frame.masks.shape[1];
    const int w = frame.masks.shape[2];
    if (slot < 0 || slot >= k)
        raise(ErrorKind::Usage, "mask_centroid: slot " + std::to_string(slot) +
                                    " out of range for " + std::to_string(k) + " slots");
    double wx = 0.0, wy = 0.0, total = 0.0;
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double m = frame.masks.at({slot, y, x});
            wx += m * x;
            wy += m * y;
            total += m;
        }
    }
    if (total <= 0.0)
        raise(ErrorKind::Numeric, "mask_centroid: slot " + std::to_string(slot) +
                                      " has zero total mask weight");
    return {wx / total, wy / total};
}

double radial_velocity_trend(const std::vector<dec::SlotDecode>& frames, int slot_i, int slot_j) {
    if (frames.size() < 2)
        raise(ErrorKind::Usage, "radial_velocity_trend: need at least 2 frames");
    const int n = static_cast<int>(frames.size());
    // Slope of d_t against t by least squares.
    double sum_t = 0.0, sum_d = 0.0, sum_tt = 0.0, sum_td = 0.0;
    for (int t = 0; t < n; ++t) {
        const auto ci = mask_centroid(frames[t], slot_i);
        const auto cj = mask_centroid(frames[t], slot_j);
        const double d = std::hypot(ci[0] - cj[0], ci[1] - cj[1]);
        sum_t += t;
        sum_d += d;
        sum_tt += static_cast<double>(t) * t;
        sum_td += t * d;
    }
    const double denom = n * sum_tt - sum_t * sum_t;
    return (n * sum_td - sum_t * sum_d) / denom;
}

std::string intermediates_csv(const dyn::RolloutResult& rr) {
    if (rr.steps.size() > 1 && rr.breakdown.empty())
        raise(ErrorKind::Usage, "intermediates_csv: rollout was not recorded with breakdowns");
    std::string out = "step,i,j,attn,fd_x,fd_y,f_i,dyn_x,dyn_y,m\n";
    char buf[256];
    for (size_t t = 0; t < rr.breakdown.size(); ++t) {
        const auto& bd = rr.breakdown[t];
        for (const auto& pr : bd.pairs) {
            // %.9g round-trips float32 exactly.
            std::snprintf(buf, sizeof(buf), "%zu,%d,%d,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g,%.9g\n", t,
                          pr.i, pr.j, pr.attn, pr.fd_x, pr.fd_y, pr.f_i, bd.dyn[pr.i][0],
                          bd.dyn[pr.i][1], bd.mass[pr.i]);
            out += buf;
        }
    }
    return out;
}

void dump_intermediates(const dyn::RolloutResult& rr, const std::string& path) {
    const std::string csv = intermediates_csv(rr);
    std::ofstream f(path, std::ios::binary);
    if (!f) raise(ErrorKind::Data, "dump_intermediates: cannot open " + path);
    f.write(csv.data(), static_cast<std::streamsize>(csv.size()));
    if (!f) raise(ErrorKind::Data, "dump_intermediates: write failed for " + path);
}

}  // namespace phycine::eval
