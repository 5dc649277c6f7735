#pragma once

#include <array>
#include <string>
#include <utility>
#include <vector>

#include "phycine/common/rng.hpp"
#include "phycine/dyn/latent.hpp"

namespace phycine::dyn {

struct InteractionConfig {
    // Hidden width of each pairwise map; 0 means a single linear layer.
    int attn_hidden = 24;
    int dir_hidden = 0;
    int inten_hidden = 0;
    int chg_hidden = 0;
    // Aggregation of per-pair collision forces. The default multiplies the
    // normalized direction by its own pair's gated intensity before summing;
    // the alternative couples the summed directions to the summed intensities.
    bool product_of_sums = false;
};

// Linear map with an optional tanh hidden layer.
struct PairMap {
    ad::Tensor w1, b1;  // in -> (hidden or out)
    ad::Tensor w2, b2;  // hidden -> out; unused when hidden == 0
    int hidden = 0;

    ad::Tensor apply(const ad::Tensor& x) const;
    static PairMap init(int in, int out, int hidden, Rng& rng);
    void collect(const std::string& prefix,
                 std::vector<std::pair<std::string, ad::Tensor*>>& out);
};

struct InteractionParams {
    PairMap trans;  // dyn (2) -> ctx residual (12), always linear
    PairMap attn;   // [ctx_i;dyn_i;ctx_j;dyn_j] (28) -> gate logit (1)
    PairMap dir;    // (28) -> force direction (2), l2-normalized
    PairMap inten;  // [m_i;dyn_i;m_j;dyn_j] (6) -> intensity (1)
    PairMap chg;    // [ctx_i;ctx_j] (24) -> charge force basis (2)

    static InteractionParams init(const InteractionConfig& cfg, Rng& rng);
    std::vector<std::pair<std::string, ad::Tensor*>> named_tensors();
};

// z_ctx' = FC(z_dyn) + z_ctx; dyn/m/c pass through unchanged.
LatentState transition(const LatentState& s, const InteractionParams& p);

// Net collision force per slot (K x 2): for each ordered pair, a normalized
// direction scaled by a sigmoid attention gate and a mass/dyn intensity,
// summed over partners.
ad::Tensor collision_forces(const LatentState& s, const InteractionParams& p,
                            const InteractionConfig& cfg);

// Net charge force per slot (K x 2): a ctx-pair basis vector scaled by the
// product z_c_i * z_c_j, summed over partners. Zero product, zero force.
ad::Tensor charge_forces(const LatentState& s, const InteractionParams& p);

// dyn' = dyn + col_gate * F_col + chg_gate * F_chg. Gates are 0/1 per clip.
LatentState apply_forces(const LatentState& s, const ad::Tensor& f_col, const ad::Tensor& f_chg,
                         double col_gate, double chg_gate);

struct PairRecord {
    int i = 0, j = 0;
    double attn = 0.0;
    double fd_x = 0.0, fd_y = 0.0;
    double f_i = 0.0;
};

struct StepBreakdown {
    std::vector<PairRecord> pairs;
    std::vector<std::array<double, 2>> f_collision;  // per slot
    std::vector<std::array<double, 2>> f_charge;
    std::vector<std::array<double, 2>> dyn;  // post-update dyn
    std::vector<double> mass;                // z_m per slot
};

struct RolloutResult {
    std::vector<LatentState> steps;  // n_steps + 1 entries, [0] is the input
    std::vector<StepBreakdown> breakdown;
};

// Unrolls the interaction dynamics. When a gate is 0 the corresponding force
// is never evaluated, so disabled modules receive exactly zero gradient.
// Raises a Numeric error naming the step if a latent goes non-finite.
RolloutResult rollout(const LatentState& z0, int n_steps, const InteractionParams& p,
                      const InteractionConfig& cfg, double col_gate, double chg_gate,
                      bool record_breakdown = false);

}  // namespace phycine::dyn
