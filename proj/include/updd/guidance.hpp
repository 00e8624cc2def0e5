#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <string>

#include "updd/model_config.hpp"
#include "updd/params.hpp"
#include "updd/tensor.hpp"

namespace updd {

// Per-pedestrian conditioning: [history part | neighbor part].
struct GuidanceContext {
    Tensor embedding;  // [N, d_history + d_neighbor]
    Tensor history;    // [N, d_history]
    Tensor neighbor;   // [N, d_neighbor]
};

void init_guidance_params(ParamStore& params, const ModelConfig& config, std::mt19937_64& rng);

// Temporal pipeline shared by both encoders (separate weights under `prefix`):
// T parallel causal convolutions of C channels, the last step of each map as
// one of T tokens, one single-head self-attention block with a residual, then
// a linear projection of the flattened tokens. seq: [N, T, 2] -> [N, out_dim].
Tensor encode_sequence(const Tensor& seq, const ParamStore& params, const std::string& prefix,
                       const ModelConfig& config);

// observed: [N, T, 2] displacements -> [N, d_history]
Tensor encode_history(const Tensor& observed, const ParamStore& params, const ModelConfig& config);

// Row-normalized [N, N] averaging operator over each row's neighbors; rows
// without neighbors are zero.
Tensor neighbor_mean_operator(std::span<const uint8_t> mask, int64_t N);

// Masked mean of the neighbors' displacements at every step: [N, T, 2].
Tensor aggregate_neighbors(const Tensor& observed, std::span<const uint8_t> mask);

// observed: [N, T, 2], mask: [N, N] -> [N, d_neighbor]
Tensor encode_neighbors(const Tensor& observed, std::span<const uint8_t> mask, const ParamStore& params,
                        const ModelConfig& config);

GuidanceContext build_guidance(const Tensor& history, const Tensor& neighbor);

}  // namespace updd
