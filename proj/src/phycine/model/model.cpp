#include "phycine/model/model.hpp"

#include <bit>
#include <cstring>

#include "phycine/common/rng.hpp"

namespace phycine::model {

ModelParams ModelParams::init(const ModelConfig& cfg, Rng& rng) {
    ModelParams p{dec::DecoderParams::init(cfg.decoder, rng),
                  dyn::InteractionParams::init(cfg.interaction, rng)};
    return p;
}

std::vector<std::pair<std::string, ad::Tensor*>> ModelParams::named_tensors() {
    auto out = decoder.named_tensors();
    for (auto& [name, t] : interaction.named_tensors()) out.emplace_back(name, t);
    return out;
}

std::uint64_t ModelParams::content_hash() const {
    std::uint64_t h = 0x9e3779b97f4a7c15ULL;
    auto& self = const_cast<ModelParams&>(*this);
    for (auto& [name, t] : self.named_tensors()) {
        for (char c : name) h = hash_mix(h, static_cast<std::uint64_t>(c));
        for (double d : t->data) h = hash_mix(h, std::bit_cast<std::uint64_t>(d));
    }
    return h;
}

ModelParams watch_params(ad::Tape& tape, const ModelParams& params) {
    ModelParams out = params;
    for (auto& [name, t] : out.named_tensors()) *t = tape.watch(*t);
    return out;
}

}  // namespace phycine::model
