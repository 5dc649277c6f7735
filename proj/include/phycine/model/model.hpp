#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "phycine/ad/tape.hpp"
#include "phycine/dec/decoder.hpp"
#include "phycine/dyn/interaction.hpp"

namespace phycine::model {

struct ModelConfig {
    dec::DecoderConfig decoder;
    dyn::InteractionConfig interaction;
};

struct ModelParams {
    dec::DecoderParams decoder;
    dyn::InteractionParams interaction;

    static ModelParams init(const ModelConfig& cfg, Rng& rng);
    // Stable name -> tensor order; checkpoints and optimizers index into it.
    std::vector<std::pair<std::string, ad::Tensor*>> named_tensors();
    // Hash over all parameter bits; pure evaluation must leave it unchanged.
    std::uint64_t content_hash() const;
};

// Copy with every tensor registered on the tape, for gradient steps on the
// model itself.
ModelParams watch_params(ad::Tape& tape, const ModelParams& params);

}  // namespace phycine::model
