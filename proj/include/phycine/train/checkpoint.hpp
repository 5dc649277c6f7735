#pragma once

#include <cstdint>
#include <string>

#include "phycine/model/model.hpp"
#include "phycine/opt/adam.hpp"

namespace phycine::train {

struct TrainState {
    model::ModelParams params;
    opt::Adam adam;
    int stage = 1;
    int iteration = 0;  // within the current stage
    std::uint64_t seed = 0;
    std::uint64_t config_hash = 0;
};

// Binary checkpoint, magic "PHYC" version 1: tensor directory (name, shape,
// f64 data), Adam step count and moments, stage/iteration/seed/config hash.
// Deterministic writer, so save -> load -> save is byte-identical.
void save_checkpoint(const std::string& path, const TrainState& state);

// Shapes must match the config's parameter layout; mismatches, bad magic,
// version skew and trailing bytes are Data errors.
TrainState load_checkpoint(const std::string& path, const model::ModelConfig& cfg);

}  // namespace phycine::train
