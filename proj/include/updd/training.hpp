#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "updd/model.hpp"

namespace updd {

struct TrainConfig {
    double lambda1 = 1.0;  // diffusion
    double lambda2 = 1.0;  // likelihood
    double lambda3 = 1.0;  // consistency
    double lr = 1e-3;
    double clip_norm = 5.0;
    int batch_size = 16;
    int epochs = 1;
    int64_t max_steps = 0;  // 0 = run all epochs
    uint64_t seed = 1;

    int K = 200;
    double beta_start = 1e-4;
    double beta_end = 0.05;
    int S = 100;
    GammaMode gamma_mode = GammaMode::Deterministic;

    ModelConfig model;
    int64_t checkpoint_every = 0;  // steps; 0 = final checkpoint only
    bool log_timing = false;       // wall_ms column is 0 otherwise
    double shape_norm_floor = 1.0;

    void validate() const;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossReport {
    double total = 0;
    double diffusion = 0;
    double likelihood = 0;
    double consistency = 0;
    double grad_norm = 0;
};

// One diffusion step per window (shared by its rows) and unit Gaussian noise.
struct DiffusionDraw {
    std::vector<int> steps;  // per row
    Tensor eps;
};

DiffusionDraw draw_diffusion_noise(const Shape& shape, std::span<const int> window_of_row, int n_windows,
                                   const Schedule& schedule, std::mt19937_64& rng);

using DenoiseFn = std::function<Tensor(const Tensor& noisy, std::span<const int> steps)>;

// Squared norm of denoise(Y_k) - eps summed over rows and divided by n_windows,
// Y_k from the closed-form marginal.
Tensor loss_diffusion(const Tensor& Y0, const DiffusionDraw& draw, const Schedule& schedule, const DenoiseFn& denoise,
                      int n_windows);

// -sum over rows and steps of log N(future; stats) divided by n_windows.
Tensor loss_likelihood(const Tensor& future, const Tensor& raw_stats, int n_windows);

// Mean over rows of the squared distance between the first future step and its mean.
Tensor loss_consistency(const Tensor& future, const Tensor& raw_stats);

struct LossTerms {
    Tensor total;
    Tensor diffusion;
    Tensor likelihood;
    Tensor consistency;
};

// Full objective on one batch; differentiable when a tape is active.
LossTerms objective(const Model& model, const Batch& batch, const TrainConfig& config, std::mt19937_64& rng);

// Forward, backward and one optimizer update.
LossReport train_step(Model& model, Adam& optimizer, const Batch& batch, const TrainConfig& config,
                      std::mt19937_64& rng);

// Generator driving step `step`; resumption relies on this being a pure function.
std::mt19937_64 step_rng(uint64_t seed, int64_t step);

struct TrainState {
    Model model;
    Adam optimizer;
    int64_t step = 0;
};

// Fresh model: parameters from the seed and normalization frozen from one
// pass over the training windows.
TrainState init_training(std::span<const SceneWindow> windows, const TrainConfig& config);

void save_training(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path,
                   const nlohmann::json& extra = {});
TrainState load_training(const std::filesystem::path& path, const TrainConfig& config);

struct FitResult {
    std::filesystem::path checkpoint;
    std::filesystem::path log;
    LossReport last;
    int64_t steps = 0;
};

struct FitOptions {
    std::filesystem::path out_dir;
    std::optional<std::filesystem::path> resume;
    nlohmann::json extra_metadata;  // copied into every checkpoint
    std::function<void(int64_t step, const LossReport&)> on_step;
};

int64_t total_steps(size_t n_windows, const TrainConfig& config);

// Epoch loop over shuffled batches; writes train_log.csv and model.updd.
FitResult fit(std::span<const SceneWindow> windows, const TrainConfig& config, const FitOptions& options);

}  // namespace updd
