#include "phycine/eval/oracle.hpp"

#include <algorithm>
#include <cmath>

#include "phycine/common/error.hpp"
#include "phycine/vi/elbo.hpp"

namespace phycine::eval {

namespace {

// Solves A x = b for a 3x3 symmetric system by Gaussian elimination.
std::array<double, 3> solve3(std::array<std::array<double, 3>, 3> a, std::array<double, 3> b) {
    for (int col = 0; col < 3; ++col) {
        int piv = col;
        for (int r = col + 1; r < 3; ++r)
            if (std::fabs(a[r][col]) > std::fabs(a[piv][col])) piv = r;
        if (std::fabs(a[piv][col]) < 1e-12)
            raise(ErrorKind::Data,
                  "oracle velocity fit is singular (calibration needs varied velocities)");
        std::swap(a[col], a[piv]);
        std::swap(b[col], b[piv]);
        for (int r = col + 1; r < 3; ++r) {
            const double f = a[r][col] / a[col][col];
            for (int c = col; c < 3; ++c) a[r][c] -= f * a[col][c];
            b[r] -= f * b[col];
        }
    }
    std::array<double, 3> x{};
    for (int r = 2; r >= 0; --r) {
        double s = b[r];
        for (int c = r + 1; c < 3; ++c) s -= a[r][c] * x[c];
        x[r] = s / a[r][r];
    }
    return x;
}

}  // namespace

OracleMaps fit_oracle_maps_from(const std::vector<CalibObs>& obs) {
    if (obs.size() < 3)
        raise(ErrorKind::Data, "fit_oracle_maps: only " + std::to_string(obs.size()) +
                                   " bound objects; need at least 3");

    OracleMaps maps;
    {
        // Normal equations for [vx, vy, 1] -> dyn_d, shared design matrix.
        std::array<std::array<double, 3>, 3> a{};
        std::array<double, 3> b0{}, b1{};
        for (const CalibObs& o : obs) {
            const std::array<double, 3> row = {o.vx, o.vy, 1.0};
            for (int r = 0; r < 3; ++r) {
                for (int c = 0; c < 3; ++c) a[r][c] += row[r] * row[c];
                b0[r] += row[r] * o.dyn0;
                b1[r] += row[r] * o.dyn1;
            }
        }
        const auto x0 = solve3(a, b0);
        const auto x1 = solve3(a, b1);
        maps.w_dyn = {x0[0], x0[1], x1[0], x1[1]};
        maps.b_dyn = {x0[2], x1[2]};
    }
    {
        double mm = 0.0, mz = 0.0;
        for (const CalibObs& o : obs) {
            mm += o.mass;
            mz += o.zm;
        }
        mm /= static_cast<double>(obs.size());
        mz /= static_cast<double>(obs.size());
        double var = 0.0, cov = 0.0;
        for (const CalibObs& o : obs) {
            var += (o.mass - mm) * (o.mass - mm);
            cov += (o.mass - mm) * (o.zm - mz);
        }
        if (var > 0.0) {
            maps.a_m = cov / var;
            maps.b_m = mz - maps.a_m * mm;
        } else {
            maps.a_m = 0.0;  // single mass level: constant map
            maps.b_m = mz;
        }
    }
    {
        double s = 0.0;
        int n = 0;
        for (const CalibObs& o : obs) {
            if (o.charge == 0.0) continue;
            s += std::fabs(o.zc);
            ++n;
        }
        if (n > 0) maps.chg_magnitude = s / n;
    }
    return maps;
}

OracleMaps fit_oracle_maps(const std::vector<sim::Episode>& calib,
                           const model::ModelParams& params, const model::ModelConfig& cfg,
                           const OracleOptions& opt, Rng& rng) {
    if (calib.empty()) raise(ErrorKind::Usage, "fit_oracle_maps: calibration split is empty");

    std::vector<CalibObs> obs;
    const uint64_t base = rng.next_u64();
    for (const auto& ep : calib) {
        Rng ep_rng(derive_seed({base, ep.seed}));
        const int n_frames = std::min(opt.fit_frames, ep.frames);
        vi::InferOptions io = opt.infer;
        io.slots = opt.slots;
        io.record_trajectory = false;
        const BoundLatents bl = infer_and_bind(ep, n_frames, params, cfg, io, ep_rng);
        const auto st = dyn::split_latent(bl.z);
        for (int o = 0; o < ep.object_count(); ++o) {
            const int s = bl.binding.slot_of_object[o];
            if (s < 0) continue;  // unbound objects carry no calibration signal
            const auto& obj = ep.states[0].objects[o];
            CalibObs co;
            co.vx = obj.vel.x;
            co.vy = obj.vel.y;
            co.dyn0 = st.dyn.at({s, 0});
            co.dyn1 = st.dyn.at({s, 1});
            co.mass = obj.mass;
            co.zm = st.m.at({s, 0});
            co.charge = obj.charge;
            co.zc = st.c.at({s, 0});
            obs.push_back(co);
        }
    }
    return fit_oracle_maps_from(obs);
}

OracleLatents inject_oracle(const sim::Episode& ep, const OracleMaps& maps,
                            const model::ModelParams& params, const model::ModelConfig& cfg,
                            const OracleOptions& opt, Rng& rng) {
    const int n_obj = ep.object_count();
    if (opt.slots < n_obj)
        raise(ErrorKind::Usage, "inject_oracle: " + std::to_string(opt.slots) +
                                    " slots cannot bind " + std::to_string(n_obj) + " objects");

    vi::Posterior post = vi::init_posterior(opt.slots, rng);
    vi::RefineOptions ro;
    ro.steps = opt.ctx_steps;
    ro.inner_steps = opt.ctx_inner;
    ro.lr = opt.lr;
    ro.mask = vi::ctx_mask();
    ro.elbo = opt.infer.elbo;
    ro.elbo.fixed_eps = true;  // best-iterate selection needs a deterministic loss
    ro.record_trajectory = false;
    ro.keep_best = true;
    const std::vector<ad::Tensor> frame0 = {vi::frame_tensor(ep, 0)};
    const vi::RefineResult rr = vi::refine(post, frame0, params, cfg, ro, rng);

    const auto st = dyn::split_latent(rr.post.mean);
    const auto decoded = dec::decode(st.ctx, ep.height, ep.width, params.decoder);

    OracleLatents out;
    out.binding = bind_slots(decoded, ep);
    for (int o = 0; o < n_obj; ++o)
        if (out.binding.slot_of_object[o] < 0)
            raise(ErrorKind::Data, "inject_oracle: object " + std::to_string(o) +
                                       " failed to bind (episode seed " +
                                       std::to_string(ep.seed) + ")");

    double lightest = ep.states[0].objects[0].mass;
    for (const auto& obj : ep.states[0].objects) lightest = std::min(lightest, obj.mass);

    ad::Tensor z = rr.post.mean.detached();
    std::vector<bool> bound(opt.slots, false);
    for (int o = 0; o < n_obj; ++o) {
        const int s = out.binding.slot_of_object[o];
        bound[s] = true;
        const auto& obj = ep.states[0].objects[o];
        const auto d = maps.dyn_of_velocity(obj.vel.x, obj.vel.y);
        double* row = z.data.data() + static_cast<size_t>(s) * dyn::kLatentDim;
        row[dyn::kDynOff] = d[0];
        row[dyn::kDynOff + 1] = d[1];
        row[dyn::kMassOff] = maps.m_of_mass(obj.mass);
        row[dyn::kChargeOff] = maps.c_of_charge(obj.charge);
    }
    for (int s = 0; s < opt.slots; ++s) {
        if (bound[s]) continue;
        const auto d = maps.dyn_of_velocity(0.0, 0.0);
        double* row = z.data.data() + static_cast<size_t>(s) * dyn::kLatentDim;
        row[dyn::kDynOff] = d[0];
        row[dyn::kDynOff + 1] = d[1];
        row[dyn::kMassOff] = maps.m_of_mass(lightest);
        row[dyn::kChargeOff] = 0.0;
    }
    out.z = z;
    return out;
}

}  // namespace phycine::eval
