#include "updd/guidance.hpp"

#include "updd/ops.hpp"

namespace updd {

namespace {

void init_sequence(ParamStore& p, const std::string& prefix, int out_dim, const ModelConfig& c,
                   std::mt19937_64& rng) {
    const int64_t C = c.enc_channels, T = c.T, K = c.enc_kernel;
    p.add_weight(prefix + "conv.w", {K, 2, T * C}, K * 2, T * C, rng);
    p.add_zeros(prefix + "conv.b", {T * C});
    for (const char* m : {"attn.q", "attn.k", "attn.v", "attn.o"}) p.add_weight(prefix + m, {C, C}, C, C, rng);
    p.add_weight(prefix + "proj.w", {T * C, out_dim}, T * C, out_dim, rng);
    p.add_zeros(prefix + "proj.b", {out_dim});
}

}  // namespace

void to_json(nlohmann::json& j, const ModelConfig& c) {
    j = {{"T", c.T},
         {"T_future", c.T_future},
         {"enc_channels", c.enc_channels},
         {"enc_kernel", c.enc_kernel},
         {"d_history", c.d_history},
         {"d_neighbor", c.d_neighbor},
         {"conv_hidden", c.conv_hidden},
         {"conv_kernel", c.conv_kernel},
         {"step_embed", c.step_embed},
         {"denoiser_width", c.denoiser_width},
         {"denoiser_blocks", c.denoiser_blocks}};
}

void from_json(const nlohmann::json& j, ModelConfig& c) {
    j.at("T").get_to(c.T);
    j.at("T_future").get_to(c.T_future);
    j.at("enc_channels").get_to(c.enc_channels);
    j.at("enc_kernel").get_to(c.enc_kernel);
    j.at("d_history").get_to(c.d_history);
    j.at("d_neighbor").get_to(c.d_neighbor);
    j.at("conv_hidden").get_to(c.conv_hidden);
    j.at("conv_kernel").get_to(c.conv_kernel);
    j.at("step_embed").get_to(c.step_embed);
    j.at("denoiser_width").get_to(c.denoiser_width);
    j.at("denoiser_blocks").get_to(c.denoiser_blocks);
}

void init_guidance_params(ParamStore& params, const ModelConfig& config, std::mt19937_64& rng) {
    init_sequence(params, "history.", config.d_history, config, rng);
    init_sequence(params, "neighbor.", config.d_neighbor, config, rng);
}

Tensor encode_sequence(const Tensor& seq, const ParamStore& p, const std::string& prefix, const ModelConfig& c) {
    const int64_t N = seq.dim(0), T = c.T, C = c.enc_channels;
    if (seq.rank() != 3 || seq.dim(1) != T || seq.dim(2) != 2)
        throw ShapeError("sequence encoder expects [N, " + std::to_string(T) + ", 2], got " + shape_str(seq.shape()));
    Tensor maps = tanh(add(conv1d(seq, p[prefix + "conv.w"], Padding::Causal), p[prefix + "conv.b"]));
    Tensor tokens = reshape(slice(maps, 1, T - 1, T), {N, T, C});
    Tensor q = matmul(tokens, p[prefix + "attn.q"]);
    Tensor k = matmul(tokens, p[prefix + "attn.k"]);
    Tensor v = matmul(tokens, p[prefix + "attn.v"]);
    Tensor attended = add(tokens, matmul(scaled_dot_attention(q, k, v), p[prefix + "attn.o"]));
    return add(matmul(reshape(attended, {N, T * C}), p[prefix + "proj.w"]), p[prefix + "proj.b"]);
}

Tensor encode_history(const Tensor& observed, const ParamStore& params, const ModelConfig& config) {
    return encode_sequence(observed, params, "history.", config);
}

Tensor neighbor_mean_operator(std::span<const uint8_t> mask, int64_t N) {
    if (static_cast<int64_t>(mask.size()) != N * N) throw ShapeError("neighbor mask must be N x N");
    std::vector<Scalar> op(static_cast<size_t>(N * N), Scalar(0));
    for (int64_t i = 0; i < N; ++i) {
        if (mask[i * N + i]) throw std::invalid_argument("neighbor mask diagonal must be false");
        int64_t count = 0;
        for (int64_t j = 0; j < N; ++j) count += mask[i * N + j] ? 1 : 0;
        for (int64_t j = 0; j < N; ++j)
            if (mask[i * N + j]) op[i * N + j] = Scalar(1) / static_cast<Scalar>(count);
    }
    return Tensor::from({N, N}, std::move(op));
}

Tensor aggregate_neighbors(const Tensor& observed, std::span<const uint8_t> mask) {
    const int64_t N = observed.dim(0), T = observed.dim(1), D = observed.dim(2);
    Tensor flat = reshape(observed, {N, T * D});
    return reshape(matmul(neighbor_mean_operator(mask, N), flat), {N, T, D});
}

Tensor encode_neighbors(const Tensor& observed, std::span<const uint8_t> mask, const ParamStore& params,
                        const ModelConfig& config) {
    return encode_sequence(aggregate_neighbors(observed, mask), params, "neighbor.", config);
}

GuidanceContext build_guidance(const Tensor& history, const Tensor& neighbor) {
    if (history.rank() != 2 || neighbor.rank() != 2 || history.dim(0) != neighbor.dim(0))
        throw ShapeError("guidance parts disagree on N: " + shape_str(history.shape()) + " vs " +
                         shape_str(neighbor.shape()));
    return GuidanceContext{concat({history, neighbor}, 1), history, neighbor};
}

}  // namespace updd
