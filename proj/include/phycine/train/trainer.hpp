#pragma once

#include <string>
#include <vector>

#include "phycine/sim/dataset.hpp"
#include "phycine/train/checkpoint.hpp"
#include "phycine/train/config.hpp"

namespace phycine::train {

struct MetricRow {
    int stage = 0;
    int iteration = 0;
    double loss = 0.0;   // training objective (mean over the batch)
    double recon = 0.0;  // reconstruction NLL share
    double kl = 0.0;
    int horizon = 0;
    double col_gate = 0.0;  // batch mean of the per-clip gates
    double chg_gate = 0.0;
    double wall_ms = 0.0;
};

std::string metrics_jsonl(const std::vector<MetricRow>& rows);

struct StageRun {
    int stage_id = 1;
    StageConfig sc;
};

// Stage schedule after the ablation flag: "no-b2u" collapses to one stage-3
// run with the summed iteration budget; "no-interaction" keeps the schedule
// but zeroes both force gates everywhere.
std::vector<StageRun> make_plan(const TrainConfig& cfg);

// Uniform over valid windows, except half the draws land the clip on an
// object-object collision event when the episode has one.
int pick_clip_start(const sim::Episode& ep, int horizon, Rng& rng);

// Indices of episodes in the allowed categories. Every allowed category must
// be present in the dataset.
std::vector<int> eligible_episodes(const std::vector<sim::Episode>& dataset,
                                   const StageConfig& sc, int stage_id);

// Advances st.iteration to run.sc.iterations, updating st.params in place.
// Backprop uses a first-order truncated unroll: model gradients flow through
// the loss at the last two refinement iterates, with the iterates as
// constants. Writes periodic checkpoints into out_dir when configured.
void train_stage(const StageRun& run, const std::vector<sim::Episode>& dataset,
                 const TrainConfig& cfg, TrainState& st, std::vector<MetricRow>& metrics,
                 const std::string& out_dir = "");

struct TrainResult {
    TrainState state;
    std::vector<MetricRow> metrics;
};

// Runs the staged curriculum (or its ablation) end to end, optionally
// resuming: randomness is keyed by (seed, stage, iteration), so a resumed run
// reproduces the uninterrupted one bitwise. max_stage > 0 stops after that
// stage without touching the config (or its hash), so the run stays
// resumable under the full config.
TrainResult train_full(const std::vector<sim::Episode>& dataset, const TrainConfig& cfg,
                       const std::string& out_dir = "", const TrainState* resume = nullptr,
                       int max_stage = 0);

}  // namespace phycine::train
