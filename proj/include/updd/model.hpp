#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "updd/checkpoint.hpp"
#include "updd/data.hpp"
#include "updd/diffusion.hpp"
#include "updd/distribution.hpp"
#include "updd/guidance.hpp"
#include "updd/model_config.hpp"
#include "updd/params.hpp"

namespace updd {

// Everything inference needs: Θ plus the frozen constants.
struct Model {
    ModelConfig config;
    ParamStore params;
    Normalization norm;
    Schedule schedule;

    // Θ = {φ, ψ, converter, θ} initialized from `seed`; identity normalization.
    static Model init(const ModelConfig& config, const Schedule& schedule, uint64_t seed);

    void save(Container& c) const;
    static Model load(const Container& c);
};

// Several windows stacked along the pedestrian axis. The neighbor mask is
// block diagonal, so windows never see each other.
struct Batch {
    int n_windows = 0;
    int rows = 0;
    Tensor observed;  // [rows, T, 2]
    Tensor future;    // [rows, T', 2]
    std::vector<uint8_t> mask;
    std::vector<int> window_of_row;
};

Batch make_batch(std::span<const SceneWindow> windows);
Batch make_batch(std::span<const SceneWindow> windows, std::span<const size_t> indices);

GuidanceContext guidance_for(const Model& model, const Tensor& observed, std::span<const uint8_t> mask);

// Normalization of the converter output: displacement channels from the
// ground-truth futures, sigma/rho channels from the current converter with
// their scale floored at `shape_floor`.
Normalization fit_normalization(const Model& model, std::span<const SceneWindow> windows, double shape_floor = 1.0);

}  // namespace updd
