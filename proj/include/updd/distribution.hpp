#pragma once

#include <array>
#include <random>
#include <span>
#include <vector>

#include <json.hpp>

#include "updd/data.hpp"
#include "updd/model_config.hpp"
#include "updd/params.hpp"
#include "updd/tensor.hpp"

namespace updd {

inline constexpr double kSigmaFloor = 1e-4;
inline constexpr double kRhoCap = 0.99;

// Sufficient statistics of a bi-variate Gaussian over one displacement.
struct Gaussian5 {
    double mu1 = 0;
    double mu2 = 0;
    double sigma1 = 1;
    double sigma2 = 1;
    double rho = 0;

    // Throws std::invalid_argument unless sigmas > 0 and |rho| <= 0.99.
    void validate() const;
    double covariance_determinant() const { return sigma1 * sigma1 * sigma2 * sigma2 * (1 - rho * rho); }
};

double log_pdf(Vec2 y, const Gaussian5& g);

// Cholesky draw: x1 = mu1 + s1 u, x2 = mu2 + s2 (rho u + sqrt(1 - rho²) v).
Vec2 sample_location(const Gaussian5& g, std::mt19937_64& rng);

// Constraint map of one raw 5-vector: means pass through, sigmas through
// softplus plus the floor, rho through 0.99 tanh.
Gaussian5 constrain(std::span<const Scalar, 5> raw);

// Raw (unconstrained) statistics for N pedestrians over T' steps.
struct StatsField {
    int N = 0;
    int T_future = 0;
    std::vector<Scalar> raw;  // [N, T', 5]

    Gaussian5 at(int n, int t) const;
    // Absolute positions from cumulative means anchored at `origin`.
    std::vector<Vec2> mean_trajectory(int n, Vec2 origin) const;
    Tensor tensor() const;
    static StatsField from_tensor(const Tensor& raw);
};

// Differentiable constraint map over a [N, T', 5] raw tensor.
struct ConstrainedStats {
    Tensor mu;     // [N, T', 2]
    Tensor sigma;  // [N, T', 2]
    Tensor rho;    // [N, T', 1]
};

ConstrainedStats constrain(const Tensor& raw);

// Element-wise bi-variate log density of y [N, T', 2]; result [N, T', 1].
Tensor gaussian_log_pdf(const Tensor& y, const ConstrainedStats& g);

void init_converter_params(ParamStore& params, const ModelConfig& config, std::mt19937_64& rng);

// future displacements [N, T', 2] -> raw statistics [N, T', 5]
Tensor convert_trajectory(const Tensor& future, const ParamStore& params, const ModelConfig& config);

// Per-channel affine map of raw statistics to roughly unit scale.
struct Normalization {
    std::array<double, 5> mean{0, 0, 0, 0, 0};
    std::array<double, 5> scale{1, 1, 1, 1, 1};

    // Per-channel moments of rows of 5 values; `min_scale` floors each scale.
    static Normalization fit(std::span<const Scalar> rows, double min_scale = 1e-6);

    void validate() const;
    Tensor apply(const Tensor& raw) const;   // (raw - mean) / scale, differentiable
    Tensor invert(const Tensor& norm) const;  // norm * scale + mean
    std::vector<Scalar> apply(std::span<const Scalar> raw) const;
    std::vector<Scalar> invert(std::span<const Scalar> norm) const;
};

void to_json(nlohmann::json& j, const Normalization& n);
void from_json(const nlohmann::json& j, Normalization& n);

}  // namespace updd
