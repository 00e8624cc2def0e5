#pragma once

#include <json.hpp>

namespace updd {

// Layer sizes of the four trainable parts. Defaults are desk scale.
struct ModelConfig {
    int T = 8;
    int T_future = 12;

    // history / neighbor encoders
    int enc_channels = 32;
    int enc_kernel = 3;
    int d_history = 32;
    int d_neighbor = 32;

    // trajectory -> statistics converter
    int conv_hidden = 32;
    int conv_kernel = 3;

    // denoiser
    int step_embed = 32;
    int denoiser_width = 128;
    int denoiser_blocks = 3;

    int guidance_width() const { return d_history + d_neighbor; }
    int stats_width() const { return T_future * 5; }
};

void to_json(nlohmann::json& j, const ModelConfig& c);
void from_json(const nlohmann::json& j, ModelConfig& c);

}  // namespace updd
