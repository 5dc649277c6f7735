#pragma once

#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "phycine/eval/binding.hpp"

namespace phycine::eval {

// Tie-aware Spearman rank correlation (average ranks, Pearson on ranks).
double spearman(const std::vector<double>& a, const std::vector<double>& b);
double median(std::vector<double> v);

struct ProbeOptions {
    vi::InferOptions infer;
    int n_frames = 6;              // frames given to per-episode inference
    double calib_fraction = 0.5;   // split by seed hash, so episode order is irrelevant
    uint64_t split_salt = 0x5EED5A17ULL;
};

// True split membership for an episode; shared by all probes.
bool in_calibration_split(const sim::Episode& ep, const ProbeOptions& opt);

// Pair classes: 0 attract, 1 none, 2 repel.
struct ChargeRule {
    int sign = 1;
    double threshold = 0.0;
};

// |product| <= threshold reads as none; otherwise the sign convention decides
// attract vs repel.
int classify_charge(double product, const ChargeRule& rule);

// Fits the sign convention and none-band threshold by maximizing 3-class
// accuracy over (product, label) pairs.
ChargeRule fit_charge_rule(const std::vector<double>& products, const std::vector<int>& labels);

// Pairwise charge relation classification from inferred latents. The product
// z_c_i * z_c_j is thresholded into {attract, none, repel}; the rule is
// fitted on the calibration split, then scored on the eval split.
struct ChargeProbeReport {
    ChargeRule rule;
    double accuracy = 0.0;  // eval split, pair-weighted
    int n_pairs = 0;
    // Rows: true class; columns: predicted. Order: attract, none, repel.
    std::array<std::array<int, 3>, 3> confusion{};
    std::vector<uint64_t> eval_seeds;        // one entry per eval episode
    std::vector<int> per_episode_correct;    // aligned with eval_seeds
    std::vector<int> per_episode_pairs;
};

ChargeProbeReport probe_charge(const std::vector<sim::Episode>& episodes,
                               const model::ModelParams& params, const model::ModelConfig& cfg,
                               const ProbeOptions& opt, Rng& rng);

// Spearman correlation between inferred z_m and true mass on the eval split,
// with the sign of the mass axis fixed on the calibration split.
struct MassProbeReport {
    int sign = 1;
    double rho = 0.0;
    int n_objects = 0;
    std::vector<uint64_t> eval_seeds;
    std::vector<double> eval_mass;  // pooled (mass, z_m) points the rho is computed from
    std::vector<double> eval_zm;
};

MassProbeReport probe_mass(const std::vector<sim::Episode>& episodes,
                           const model::ModelParams& params, const model::ModelConfig& cfg,
                           const ProbeOptions& opt, Rng& rng);

// Inference on the clip followed by re-rendering the same frames.
struct RegenReport {
    std::vector<double> mse;   // one entry per frame, 0..N
    std::vector<double> psnr;  // 10 log10(1 / mse), capped at 99 dB
    std::vector<ad::Tensor> rendered;
};

RegenReport regenerate(const sim::Episode& ep, int n_frames, const model::ModelParams& params,
                       const model::ModelConfig& cfg, const vi::InferOptions& opt, Rng& rng,
                       double col_gate = 1.0, double chg_gate = 1.0);

// Observe frames 0..n_obs-1, then predict frames n_obs..t_end against ground
// truth. t_end == n_obs - 1 yields an empty report.
struct PredictReport {
    std::vector<ad::Tensor> frames;  // predictions for t = n_obs .. t_end
    std::vector<double> mse;
};

PredictReport predict_future(const sim::Episode& ep, int n_obs, int t_end,
                             const model::ModelParams& params, const model::ModelConfig& cfg,
                             const vi::InferOptions& opt, Rng& rng, double col_gate = 1.0,
                             double chg_gate = 1.0);

// One trained variant under a shared evaluation protocol.
struct AblationArm {
    std::string name;
    model::ModelParams params;
    bool no_interaction = false;  // evaluate with both interaction gates forced to 0
};

struct AblationRow {
    std::string arm;
    double pred_mse_median = 0.0;  // median over episodes of the mean horizon MSE
    double charge_accuracy = std::numeric_limits<double>::quiet_NaN();
    double mass_rho = std::numeric_limits<double>::quiet_NaN();
};

struct AblationOptions {
    ProbeOptions probe;
    int n_obs = 2;
    int horizon = 6;
    // Probes need trained parameters to bind slots; prediction-only runs can
    // switch them off. Skipped columns come back as NaN.
    bool with_charge = true;
    bool with_mass = true;
};

std::vector<AblationRow> ablation_suite(const std::vector<AblationArm>& arms,
                                        const std::vector<sim::Episode>& episodes,
                                        const model::ModelConfig& cfg, const AblationOptions& opt,
                                        Rng& rng);

std::string ablation_table(const std::vector<AblationRow>& rows);

}  // namespace phycine::eval
