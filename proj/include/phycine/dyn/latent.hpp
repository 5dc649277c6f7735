#pragma once

#include "phycine/ad/ops.hpp"

namespace phycine::dyn {

// Per-slot latent layout: [ctx 0..11 | dyn 12..13 | m 14 | c 15].
inline constexpr int kCtxDim = 12;
inline constexpr int kDynDim = 2;
inline constexpr int kMassDim = 1;
inline constexpr int kChargeDim = 1;
inline constexpr int kLatentDim = kCtxDim + kDynDim + kMassDim + kChargeDim;
inline constexpr int kCtxOff = 0;
inline constexpr int kDynOff = kCtxDim;
inline constexpr int kMassOff = kCtxDim + kDynDim;
inline constexpr int kChargeOff = kMassOff + kMassDim;

// Named views over a K x 16 latent block. Slices share the tape of their
// source, so gradients flow back through join/split.
struct LatentState {
    ad::Tensor ctx;  // K x 12
    ad::Tensor dyn;  // K x 2
    ad::Tensor m;    // K x 1
    ad::Tensor c;    // K x 1

    int slots() const { return ctx.shape.empty() ? 0 : ctx.shape[0]; }
};

LatentState split_latent(const ad::Tensor& z);
ad::Tensor join_latent(const LatentState& s);

}  // namespace phycine::dyn
