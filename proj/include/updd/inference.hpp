#pragma once

#include <cstdint>
#include <optional>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "updd/data.hpp"
#include "updd/distribution.hpp"
#include "updd/model.hpp"

namespace updd {

enum class Strategy {
    A,  // R1 reverse runs, pick one per pedestrian, its mean plus R2 draws
    B,  // R reverse runs, one draw each
    C,  // one reverse run, R draws
};

enum class Selection {
    GtAde,           // smallest ADE of the mean trajectory against ground truth
    SelfLikelihood,  // largest log density of each field's own mean
};

// How many candidates strategy A contributes to Best-of-N.
enum class Accounting {
    PostSelection,  // selected mean + R2 draws
    AllRuns,        // all R1 means + R2 draws
};

Strategy parse_strategy(std::string_view s);
std::string_view strategy_name(Strategy s);
Selection parse_selection(std::string_view s);
std::string_view selection_name(Selection s);
Accounting parse_accounting(std::string_view s);
std::string_view accounting_name(Accounting a);

struct SamplingConfig {
    Strategy strategy = Strategy::A;
    int r1 = 10;
    int r2 = 10;
    int r = 10;  // B and C
    Selection selection = Selection::GtAde;
    Accounting accounting = Accounting::PostSelection;
    int budget = 0;  // caps M when > 0

    int reverse_runs() const;
    int candidates() const;
};

struct Provenance {
    int run = 0;
    int draw = -1;  // -1: the field's mean trajectory
};

// Candidates [N, M, T'] in absolute meters.
struct PredictionSet {
    int N = 0;
    int M = 0;
    int T_future = 0;
    std::vector<Vec2> candidates;
    std::vector<Provenance> provenance;  // [N, M]

    std::span<const Vec2> candidate(int n, int m) const;
    const Provenance& source(int n, int m) const { return provenance[static_cast<size_t>(n) * M + m]; }
};

double ade(std::span<const Vec2> pred, std::span<const Vec2> gt);
double fde(std::span<const Vec2> pred, std::span<const Vec2> gt);

// Index of the best field for pedestrian n. Ties go to the lowest index.
size_t select_best(std::span<const StatsField> fields, int n, Selection criterion, Vec2 origin,
                   const std::vector<Vec2>* gt = nullptr);

// Absolute positions of one draw: independent per-step displacements, summed from origin.
std::vector<Vec2> sample_trajectory(const StatsField& field, int n, Vec2 origin, std::mt19937_64& rng);

// Turns reverse-diffusion outputs into candidates. `fields` must hold
// config.reverse_runs() entries. `gt` holds absolute futures per pedestrian.
PredictionSet assemble_candidates(std::span<const StatsField> fields, std::span<const Vec2> origins,
                                  const SamplingConfig& config, std::mt19937_64& rng,
                                  const std::vector<std::vector<Vec2>>* gt = nullptr);

struct SampleOptions {
    SamplingConfig sampling;
    uint64_t seed = 0;  // initial noise and Gaussian draws
    std::optional<uint64_t> chain_seed;
};

// Guidance, reverse diffusion and candidate assembly for one window.
PredictionSet hybrid_sample(const Model& model, const Schedule& schedule, const SceneWindow& window,
                            const SampleOptions& options, const std::vector<std::vector<Vec2>>* gt = nullptr);

struct EvalProtocol {
    SamplingConfig sampling;
    int steps = 0;  // S override; 0 keeps the checkpoint's
    std::optional<GammaMode> gamma;
    uint64_t seed = 0;
    std::optional<uint64_t> chain_seed;
    bool inject_oracle = false;  // adds the ground truth as a candidate
    size_t max_windows = 0;      // 0 = all
};

struct SceneMetrics {
    std::string scene;
    double ade = 0;
    double fde = 0;
    int windows = 0;
    int pedestrians = 0;
};

struct EvalReport {
    std::vector<SceneMetrics> scenes;
    double avg_ade = 0;
    double avg_fde = 0;
    int candidates = 0;
};

// Schedule actually used for a protocol on a model.
Schedule protocol_schedule(const Model& model, const EvalProtocol& protocol);

// Seed for window `index` derived from a root seed.
uint64_t window_seed(uint64_t root, uint64_t index);

// Best-of-N per pedestrian (FDE from ADE's argmin), averaged per scene; AVG
// is the unweighted mean over scenes.
EvalReport evaluate_best_of_n(const Model& model, std::span<const SceneWindow> windows, const EvalProtocol& protocol);

// Best-of-N over a prediction set: per pedestrian (ade, fde) of ADE's argmin.
std::vector<std::pair<double, double>> best_of_n(const PredictionSet& set, const std::vector<std::vector<Vec2>>& gt);

std::vector<Vec2> constant_velocity(const SceneWindow& window, int n);
EvalReport evaluate_constant_velocity(std::span<const SceneWindow> windows);

std::vector<std::vector<Vec2>> ground_truth(const SceneWindow& window);

}  // namespace updd
