#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "phycine/model/model.hpp"

namespace phycine::train {

struct StageConfig {
    std::vector<int> categories;
    int horizon = 6;              // N: clip length is horizon + 1 frames
    double collision_prob = 1.0;  // per-clip collision-module activation
    bool charge_enabled = false;
    int iterations = 200;
    int batch_size = 4;
};

struct TrainConfig {
    model::ModelConfig model;
    std::array<StageConfig, 3> stages = {
        StageConfig{{1}, 3, 0.5, false, 200, 4},
        StageConfig{{1, 2}, 6, 1.0, false, 200, 4},
        StageConfig{{1, 2, 3, 4, 5}, 6, 1.0, true, 200, 4},
    };
    double lr = 3e-4;
    double beta = 100.0;
    std::uint64_t seed = 1;
    int slots = 4;
    int mc_samples = 1;
    bool fixed_eps = false;
    // Short refinement schedule used inside the training loop (5 updates
    // total); evaluation-time inference uses its own richer schedule.
    std::array<int, 4> refine_phase_steps = {2, 1, 1, 1};
    int refine_inner_steps = 1;
    double refine_lr = 0.05;
    int checkpoint_every = 0;  // 0: checkpoint only at stage boundaries
    std::string ablation;      // "", "no-b2u", "no-interaction"
};

// Canonical JSON round trip; unknown ablation names and schedule violations
// (stage 1 beyond category 1, stage 2 beyond {1,2}) are rejected.
std::string to_json(const TrainConfig& cfg);
TrainConfig config_from_json(const std::string& text);
TrainConfig load_train_config(const std::string& path);
void save_train_config(const std::string& path, const TrainConfig& cfg);
void validate(const TrainConfig& cfg);

// Hash of the canonical JSON form; stored in checkpoints to guard resumes.
std::uint64_t config_hash(const TrainConfig& cfg);

}  // namespace phycine::train
