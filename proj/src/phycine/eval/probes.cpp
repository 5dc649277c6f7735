#include "phycine/eval/probes.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "phycine/common/error.hpp"
#include "phycine/vi/elbo.hpp"

namespace phycine::eval {

namespace {

std::vector<double> avg_ranks(const std::vector<double>& v) {
    const int n = static_cast<int>(v.size());
    std::vector<int> idx(n);
    std::iota(idx.begin(), idx.end(), 0);
    std::sort(idx.begin(), idx.end(), [&](int a, int b) { return v[a] < v[b]; });
    std::vector<double> ranks(n, 0.0);
    int i = 0;
    while (i < n) {
        int j = i;
        while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
        const double r = 0.5 * (i + j) + 1.0;  // average rank of the tie run
        for (int k = i; k <= j; ++k) ranks[idx[k]] = r;
        i = j + 1;
    }
    return ranks;
}

double pearson(const std::vector<double>& a, const std::vector<double>& b) {
    const int n = static_cast<int>(a.size());
    double ma = 0.0, mb = 0.0;
    for (int i = 0; i < n; ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0, sab = 0.0;
    for (int i = 0; i < n; ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
        sab += (a[i] - ma) * (b[i] - mb);
    }
    if (saa <= 0.0 || sbb <= 0.0) return 0.0;  // a constant column carries no ordering
    return sab / std::sqrt(saa * sbb);
}

double image_mse(const ad::Tensor& a, const ad::Tensor& b) {
    double ss = 0.0;
    for (size_t i = 0; i < a.data.size(); ++i) {
        const double d = a.data[i] - b.data[i];
        ss += d * d;
    }
    return ss / static_cast<double>(a.data.size());
}

struct PairObs {
    double product;  // z_c_i * z_c_j
    int label;       // 0 attract, 1 none, 2 repel
};

double split_key(const sim::Episode& ep, uint64_t salt) {
    const uint64_t h = hash_mix(salt, ep.seed);
    return static_cast<double>(h % 4096) / 4096.0;
}

}  // namespace

int classify_charge(double product, const ChargeRule& rule) {
    if (std::fabs(product) <= rule.threshold) return 1;
    return rule.sign * product > 0.0 ? 2 : 0;
}

ChargeRule fit_charge_rule(const std::vector<double>& products, const std::vector<int>& labels) {
    if (products.size() != labels.size()) raise(ErrorKind::Usage, "fit_charge_rule: size mismatch");
    if (products.empty()) raise(ErrorKind::Usage, "fit_charge_rule: no calibration pairs");

    // Threshold candidates: 0, midpoints between sorted |product| values, and
    // one past the maximum (classify everything as none).
    std::vector<double> mags;
    mags.reserve(products.size());
    for (double p : products) mags.push_back(std::fabs(p));
    std::sort(mags.begin(), mags.end());
    std::vector<double> cands = {0.0};
    for (size_t i = 0; i + 1 < mags.size(); ++i)
        if (mags[i] < mags[i + 1]) cands.push_back(0.5 * (mags[i] + mags[i + 1]));
    cands.push_back(mags.back() + 1.0);

    ChargeRule best;
    int best_correct = -1;
    for (const int sign : {1, -1}) {
        for (const double tau : cands) {
            const ChargeRule rule{sign, tau};
            int correct = 0;
            for (size_t i = 0; i < products.size(); ++i)
                if (classify_charge(products[i], rule) == labels[i]) ++correct;
            if (correct > best_correct) {
                best_correct = correct;
                best = rule;
            }
        }
    }
    return best;
}

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
    if (a.size() != b.size()) raise(ErrorKind::Usage, "spearman: size mismatch");
    if (a.size() < 2) raise(ErrorKind::Usage, "spearman: need at least 2 points");
    return pearson(avg_ranks(a), avg_ranks(b));
}

double median(std::vector<double> v) {
    if (v.empty()) raise(ErrorKind::Usage, "median of empty set");
    std::sort(v.begin(), v.end());
    const size_t n = v.size();
    return n % 2 == 1 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

bool in_calibration_split(const sim::Episode& ep, const ProbeOptions& opt) {
    return split_key(ep, opt.split_salt) < opt.calib_fraction;
}

ChargeProbeReport probe_charge(const std::vector<sim::Episode>& episodes,
                               const model::ModelParams& params, const model::ModelConfig& cfg,
                               const ProbeOptions& opt, Rng& rng) {
    std::vector<PairObs> calib;
    struct EvalEp {
        uint64_t seed;
        std::vector<PairObs> pairs;
    };
    std::vector<EvalEp> eval;

    // Per-episode streams keyed by the episode seed keep scores independent
    // of the order episodes are listed in.
    const uint64_t base = rng.next_u64();
    int n_calib_eps = 0, n_eval_eps = 0;
    for (const auto& ep : episodes) {
        const bool is_calib = in_calibration_split(ep, opt);
        (is_calib ? n_calib_eps : n_eval_eps) += 1;

        Rng ep_rng(derive_seed({base, ep.seed}));
        vi::InferOptions io = opt.infer;
        io.record_trajectory = false;
        const int n_frames = std::min(opt.n_frames, ep.frames);
        const BoundLatents bl = infer_and_bind(ep, n_frames, params, cfg, io, ep_rng);
        const auto st = dyn::split_latent(bl.z);

        std::vector<PairObs> obs;
        const int n_obj = ep.object_count();
        for (int o1 = 0; o1 < n_obj; ++o1) {
            for (int o2 = o1 + 1; o2 < n_obj; ++o2) {
                const int s1 = bl.binding.slot_of_object[o1];
                const int s2 = bl.binding.slot_of_object[o2];
                if (s1 < 0 || s2 < 0) continue;
                const double qq = ep.states[0].objects[o1].charge * ep.states[0].objects[o2].charge;
                PairObs po;
                po.product = st.c.at({s1, 0}) * st.c.at({s2, 0});
                po.label = qq < 0.0 ? 0 : (qq > 0.0 ? 2 : 1);
                obs.push_back(po);
            }
        }
        if (is_calib) {
            calib.insert(calib.end(), obs.begin(), obs.end());
        } else {
            eval.push_back({ep.seed, std::move(obs)});
        }
    }
    if (n_calib_eps == 0 || n_eval_eps == 0)
        raise(ErrorKind::Data, "probe_charge: empty split (calibration " +
                                   std::to_string(n_calib_eps) + ", eval " +
                                   std::to_string(n_eval_eps) + ")");
    if (calib.empty()) raise(ErrorKind::Data, "probe_charge: no bound pairs in calibration split");

    std::vector<double> products;
    std::vector<int> labels;
    for (const auto& po : calib) {
        products.push_back(po.product);
        labels.push_back(po.label);
    }
    ChargeProbeReport rep;
    rep.rule = fit_charge_rule(products, labels);

    int correct_total = 0;
    for (const auto& ee : eval) {
        int correct = 0;
        for (const auto& po : ee.pairs) {
            const int pred = classify_charge(po.product, rep.rule);
            rep.confusion[po.label][pred] += 1;
            if (pred == po.label) ++correct;
        }
        rep.eval_seeds.push_back(ee.seed);
        rep.per_episode_correct.push_back(correct);
        rep.per_episode_pairs.push_back(static_cast<int>(ee.pairs.size()));
        correct_total += correct;
        rep.n_pairs += static_cast<int>(ee.pairs.size());
    }
    if (rep.n_pairs == 0) raise(ErrorKind::Data, "probe_charge: no bound pairs in eval split");
    rep.accuracy = static_cast<double>(correct_total) / rep.n_pairs;
    return rep;
}

MassProbeReport probe_mass(const std::vector<sim::Episode>& episodes,
                           const model::ModelParams& params, const model::ModelConfig& cfg,
                           const ProbeOptions& opt, Rng& rng) {
    std::vector<double> calib_mass, calib_zm;
    MassProbeReport rep;
    int n_eval_eps = 0;

    const uint64_t base = rng.next_u64();
    for (const auto& ep : episodes) {
        const bool is_calib = in_calibration_split(ep, opt);
        Rng ep_rng(derive_seed({base, ep.seed}));
        vi::InferOptions io = opt.infer;
        io.record_trajectory = false;
        const int n_frames = std::min(opt.n_frames, ep.frames);
        const BoundLatents bl = infer_and_bind(ep, n_frames, params, cfg, io, ep_rng);
        const auto st = dyn::split_latent(bl.z);

        bool counted = false;
        for (int o = 0; o < ep.object_count(); ++o) {
            const int s = bl.binding.slot_of_object[o];
            if (s < 0) continue;
            const double mass = ep.states[0].objects[o].mass;
            const double zm = st.m.at({s, 0});
            if (is_calib) {
                calib_mass.push_back(mass);
                calib_zm.push_back(zm);
            } else {
                rep.eval_mass.push_back(mass);
                rep.eval_zm.push_back(zm);
                counted = true;
            }
        }
        if (!is_calib && counted) {
            rep.eval_seeds.push_back(ep.seed);
            ++n_eval_eps;
        }
    }
    if (calib_mass.size() < 2)
        raise(ErrorKind::Data, "probe_mass: calibration split has " +
                                   std::to_string(calib_mass.size()) + " bound objects");
    if (n_eval_eps < 5)
        raise(ErrorKind::Data, "probe_mass: eval split has " + std::to_string(n_eval_eps) +
                                   " episodes; need at least 5");

    rep.sign = pearson(calib_mass, calib_zm) < 0.0 ? -1 : 1;
    std::vector<double> signed_zm = rep.eval_zm;
    for (double& v : signed_zm) v *= rep.sign;
    rep.rho = spearman(signed_zm, rep.eval_mass);
    rep.n_objects = static_cast<int>(rep.eval_mass.size());
    return rep;
}

RegenReport regenerate(const sim::Episode& ep, int n_frames, const model::ModelParams& params,
                       const model::ModelConfig& cfg, const vi::InferOptions& opt, Rng& rng,
                       double col_gate, double chg_gate) {
    if (n_frames < 2 || n_frames > ep.frames)
        raise(ErrorKind::Usage, "regenerate: n_frames must be in [2, " +
                                    std::to_string(ep.frames) + "], got " +
                                    std::to_string(n_frames));
    const auto frames = vi::episode_frames(ep, 0, n_frames);
    vi::InferOptions io = opt;
    io.record_trajectory = false;
    auto ir = vi::infer(frames, params, cfg, io, rng);

    const auto rr = dyn::rollout(dyn::split_latent(ir.post.mean), n_frames - 1, params.interaction,
                                 cfg.interaction, col_gate, chg_gate);
    RegenReport rep;
    for (int t = 0; t < n_frames; ++t) {
        const auto decoded = dec::decode(rr.steps[t].ctx, ep.height, ep.width, params.decoder);
        ad::Tensor img = dec::composite_image(decoded);
        const double mse = image_mse(img, frames[t]);
        rep.mse.push_back(mse);
        rep.psnr.push_back(mse > 0.0 ? std::min(99.0, 10.0 * std::log10(1.0 / mse)) : 99.0);
        rep.rendered.push_back(std::move(img));
    }
    return rep;
}

PredictReport predict_future(const sim::Episode& ep, int n_obs, int t_end,
                             const model::ModelParams& params, const model::ModelConfig& cfg,
                             const vi::InferOptions& opt, Rng& rng, double col_gate,
                             double chg_gate) {
    if (n_obs < 2) raise(ErrorKind::Usage, "predict_future: need at least 2 observed frames");
    if (t_end >= ep.frames)
        raise(ErrorKind::Data, "predict_future: horizon " + std::to_string(t_end) +
                                   " exceeds episode length " + std::to_string(ep.frames));
    PredictReport rep;
    if (t_end <= n_obs - 1) return rep;  // nothing beyond the observed prefix

    const auto frames = vi::episode_frames(ep, 0, n_obs);
    vi::InferOptions io = opt;
    io.record_trajectory = false;
    auto ir = vi::infer(frames, params, cfg, io, rng);

    const auto rr = dyn::rollout(dyn::split_latent(ir.post.mean), t_end, params.interaction,
                                 cfg.interaction, col_gate, chg_gate);
    for (int t = n_obs; t <= t_end; ++t) {
        const auto decoded = dec::decode(rr.steps[t].ctx, ep.height, ep.width, params.decoder);
        ad::Tensor img = dec::composite_image(decoded);
        rep.mse.push_back(image_mse(img, vi::frame_tensor(ep, t)));
        rep.frames.push_back(std::move(img));
    }
    return rep;
}

std::vector<AblationRow> ablation_suite(const std::vector<AblationArm>& arms,
                                        const std::vector<sim::Episode>& episodes,
                                        const model::ModelConfig& cfg, const AblationOptions& opt,
                                        Rng& rng) {
    if (arms.empty()) raise(ErrorKind::Usage, "ablation_suite: no arms");
    const uint64_t base = rng.next_u64();

    std::vector<AblationRow> rows;
    for (size_t ai = 0; ai < arms.size(); ++ai) {
        const AblationArm& arm = arms[ai];
        ProbeOptions po = opt.probe;
        const double gate = arm.no_interaction ? 0.0 : 1.0;
        po.infer.elbo.col_gate = gate * po.infer.elbo.col_gate;
        po.infer.elbo.chg_gate = gate * po.infer.elbo.chg_gate;

        AblationRow row;
        row.arm = arm.name;
        {
            Rng r(derive_seed({base, ai, 0}));
            std::vector<double> per_ep;
            for (const auto& ep : episodes) {
                const int t_end = std::min(opt.n_obs - 1 + opt.horizon, ep.frames - 1);
                const auto pr = predict_future(ep, opt.n_obs, t_end, arm.params, cfg, po.infer, r,
                                               gate * opt.probe.infer.elbo.col_gate,
                                               gate * opt.probe.infer.elbo.chg_gate);
                if (pr.mse.empty()) continue;
                double s = 0.0;
                for (double v : pr.mse) s += v;
                per_ep.push_back(s / static_cast<double>(pr.mse.size()));
            }
            row.pred_mse_median = median(per_ep);
        }
        if (opt.with_charge) {
            Rng r(derive_seed({base, ai, 1}));
            row.charge_accuracy = probe_charge(episodes, arm.params, cfg, po, r).accuracy;
        }
        if (opt.with_mass) {
            Rng r(derive_seed({base, ai, 2}));
            row.mass_rho = probe_mass(episodes, arm.params, cfg, po, r).rho;
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::string ablation_table(const std::vector<AblationRow>& rows) {
    std::string out = "arm              pred_mse_median  charge_acc  mass_rho\n";
    char buf[128];
    for (const auto& r : rows) {
        std::snprintf(buf, sizeof(buf), "%-16s %15.6g %11.4f %9.4f\n", r.arm.c_str(),
                      r.pred_mse_median, r.charge_accuracy, r.mass_rho);
        out += buf;
    }
    return out;
}

}  // namespace phycine::eval
