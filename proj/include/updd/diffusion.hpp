#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <random>
#include <span>
#include <vector>

#include "updd/checkpoint.hpp"
#include "updd/distribution.hpp"
#include "updd/model_config.hpp"
#include "updd/params.hpp"
#include "updd/tensor.hpp"

namespace updd {

enum class GammaMode {
    Deterministic,  // gamma = 0
    DdpmMatching,   // variance that reproduces the Markovian chain
};

std::string_view gamma_mode_name(GammaMode mode);
GammaMode parse_gamma_mode(std::string_view name);

// Diffusion constants. alpha is the cumulative product: alpha[0] = 1,
// alpha[k] = prod_{i<=k} (1 - beta_i).
struct Schedule {
    int K = 0;
    double beta_start = 0;
    double beta_end = 0;
    GammaMode gamma_mode = GammaMode::Deterministic;
    std::vector<double> alpha;  // K + 1
    std::vector<double> gamma;  // K; gamma[k - 1] drives the step k -> k - 1
    std::vector<int> tau;       // strictly increasing, ends at K

    int S() const { return static_cast<int>(tau.size()); }
    // Reverse-step noise scale for a jump from `from` down to `to`.
    double gamma_between(int from, int to) const;
    // Same constants, execution sub-sequence of length S.
    Schedule with_steps(int S) const;
    Schedule with_gamma(GammaMode mode) const;
    void validate() const;

    void save(Container& c) const;
    static Schedule load(const Container& c);
};

// S evenly spaced steps in 1..K ending at K.
std::vector<int> even_subsequence(int K, int S);

Schedule build_schedule(int K, double beta_start, double beta_end, int S, GammaMode mode);

struct NoisySample {
    Tensor value;
    int step = 0;
};

// sqrt(alpha[k]) Y0 + sqrt(1 - alpha[k]) eps
NoisySample forward_marginal(const Tensor& Y0, int k, const Tensor& eps, const Schedule& schedule);

// Row-wise variant for training: row n of Y0 ([P, ...]) is noised to steps[n].
Tensor forward_marginal_rows(const Tensor& Y0, std::span<const int> steps, const Tensor& eps,
                             const Schedule& schedule);

// Sinusoidal embedding [rows, dim] of the given diffusion steps.
Tensor step_embedding(std::span<const int> steps, int dim);

void init_denoiser_params(ParamStore& params, const ModelConfig& config, std::mt19937_64& rng);

// Predicted noise for states [P, T', 5] at per-row steps, conditioned on
// guidance rows [P, G]. Per-row residual network plus sqrt(1 - alpha[k]) Y_k;
// rows never mix.
Tensor denoiser_apply(const Tensor& state, std::span<const int> steps, const Tensor& guidance,
                      const Schedule& schedule, const ParamStore& params, const ModelConfig& config);
Tensor denoiser_apply(const NoisySample& state, const Tensor& guidance, const Schedule& schedule,
                      const ParamStore& params, const ModelConfig& config);

// (Y_k - sqrt(1 - alpha[k]) eps_hat) / sqrt(alpha[k])
std::vector<Scalar> reconstruct_clean(std::span<const Scalar> Yk, std::span<const Scalar> eps_hat, int k,
                                      const Schedule& schedule);

// Non-Markovian reverse transition from k_from to k_to < k_from with an
// explicit noise scale. Throws std::invalid_argument if gamma² > 1 - alpha[k_to].
std::vector<Scalar> posterior_step(std::span<const Scalar> Yk, std::span<const Scalar> Yhat0, int k_from, int k_to,
                                   const Schedule& schedule, double gamma, std::mt19937_64& rng);
// Noise scale taken from the schedule.
std::vector<Scalar> posterior_step(std::span<const Scalar> Yk, std::span<const Scalar> Yhat0, int k_from, int k_to,
                                   const Schedule& schedule, std::mt19937_64& rng);

// Predicts normalized noise for a batch of states at one step.
using NoisePredictor = std::function<Tensor(const Tensor& state, int step)>;

struct ReverseOptions {
    int n_runs = 1;
    // Draws the initial noise of every run.
    uint64_t seed = 0;
    // Seeds the per-step noise when gamma > 0; unset means fresh entropy.
    std::optional<uint64_t> chain_seed;
};

// Runs the accelerated reverse chain down tau for `n_runs` independent runs
// over the same N conditioning rows, denormalizes and returns raw statistics.
// Run r's initial noise depends only on (seed, r).
std::vector<StatsField> reverse_generate(const NoisePredictor& predict, int N, const ModelConfig& config,
                                         const Schedule& schedule, const Normalization& norm,
                                         const ReverseOptions& options);

std::vector<StatsField> reverse_generate(const Tensor& guidance, const Schedule& schedule, const ParamStore& params,
                                         const ModelConfig& config, const Normalization& norm,
                                         const ReverseOptions& options);

}  // namespace updd
