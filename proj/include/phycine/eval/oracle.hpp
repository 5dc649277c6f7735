#pragma once

#include <array>
#include <vector>

#include "phycine/eval/binding.hpp"

namespace phycine::eval {

// Maps from ground-truth object state into the model's own latent space,
// fitted on refined posteriors from a calibration split.
struct OracleMaps {
    // dyn = W * v_true + b, least squares per output axis.
    std::array<double, 4> w_dyn = {1.0, 0.0, 0.0, 1.0};
    std::array<double, 2> b_dyn = {0.0, 0.0};
    // z_m = a * mass + b, monotone by construction.
    double a_m = 0.0;
    double b_m = 0.0;
    // Injected |z_c| for charged objects; uncharged get exactly 0.
    double chg_magnitude = 1.0;

    std::array<double, 2> dyn_of_velocity(double vx, double vy) const {
        return {w_dyn[0] * vx + w_dyn[1] * vy + b_dyn[0],
                w_dyn[2] * vx + w_dyn[3] * vy + b_dyn[1]};
    }
    double m_of_mass(double mass) const { return a_m * mass + b_m; }
    double c_of_charge(double q) const {
        return q > 0.0 ? chg_magnitude : (q < 0.0 ? -chg_magnitude : 0.0);
    }
};

struct OracleOptions {
    int slots = 4;     // posterior size during fitting / injection; needs >= objects + 1
    int ctx_steps = 8; // frame-0 ctx refinement budget for injection
    int ctx_inner = 4;
    double lr = 0.05;
    int fit_frames = 6;  // frames used by the calibration inference
    vi::InferOptions infer;  // schedule for the calibration inference
};

// One bound object's ground truth next to its inferred latent entries.
struct CalibObs {
    double vx = 0.0, vy = 0.0;      // true velocity
    double dyn0 = 0.0, dyn1 = 0.0;  // inferred dyn
    double mass = 0.0;
    double zm = 0.0;
    double charge = 0.0;  // true charge; |z_c| enters the magnitude when nonzero
    double zc = 0.0;
};

// Least-squares fits over calibration observations. Raises a Data error when
// the velocity normal equations are singular or fewer than 3 points exist.
OracleMaps fit_oracle_maps_from(const std::vector<CalibObs>& obs);

// Runs inference on each calibration episode, binds slots, and fits the maps
// against ground truth through fit_oracle_maps_from.
OracleMaps fit_oracle_maps(const std::vector<sim::Episode>& calib,
                           const model::ModelParams& params, const model::ModelConfig& cfg,
                           const OracleOptions& opt, Rng& rng);

struct OracleLatents {
    ad::Tensor z;  // K x 16
    SlotBinding binding;
};

// ctx from a best-iterate frame-0 refinement; dyn, m, c overwritten from the
// episode's ground truth through the fitted maps. Slots left unbound keep
// their refined ctx and get zero velocity, lightest mass, zero charge.
// Raises a Data error when any object fails to bind.
OracleLatents inject_oracle(const sim::Episode& ep, const OracleMaps& maps,
                            const model::ModelParams& params, const model::ModelConfig& cfg,
                            const OracleOptions& opt, Rng& rng);

}  // namespace phycine::eval
