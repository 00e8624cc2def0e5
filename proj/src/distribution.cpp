#include "updd/distribution.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "updd/ops.hpp"

namespace updd {

void Gaussian5::validate() const {
    if (!(sigma1 > 0) || !(sigma2 > 0)) throw std::invalid_argument("Gaussian5 sigmas must be positive");
    if (!(std::abs(rho) <= kRhoCap)) throw std::invalid_argument("Gaussian5 |rho| must be <= 0.99");
    if (!std::isfinite(mu1) || !std::isfinite(mu2) || !std::isfinite(sigma1) || !std::isfinite(sigma2))
        throw std::invalid_argument("Gaussian5 must be finite");
}

double log_pdf(Vec2 y, const Gaussian5& g) {
    g.validate();
    const double d1 = (y.x - g.mu1) / g.sigma1;
    const double d2 = (y.y - g.mu2) / g.sigma2;
    const double one_minus = 1 - g.rho * g.rho;
    const double z = d1 * d1 + d2 * d2 - 2 * g.rho * d1 * d2;
    return -std::log(2 * std::numbers::pi * g.sigma1 * g.sigma2 * std::sqrt(one_minus)) - z / (2 * one_minus);
}

Vec2 sample_location(const Gaussian5& g, std::mt19937_64& rng) {
    std::normal_distribution<double> normal(0.0, 1.0);
    const double u = normal(rng);
    const double v = normal(rng);
    return {g.mu1 + g.sigma1 * u, g.mu2 + g.sigma2 * (g.rho * u + std::sqrt(1 - g.rho * g.rho) * v)};
}

namespace {

double softplus_d(double x) { return x > 20 ? x : std::log1p(std::exp(x)); }

}  // namespace

Gaussian5 constrain(std::span<const Scalar, 5> r) {
    Gaussian5 g;
    g.mu1 = r[0];
    g.mu2 = r[1];
    g.sigma1 = softplus_d(r[2]) + kSigmaFloor;
    g.sigma2 = softplus_d(r[3]) + kSigmaFloor;
    g.rho = kRhoCap * std::tanh(static_cast<double>(r[4]));
    return g;
}

Gaussian5 StatsField::at(int n, int t) const {
    const size_t i = (static_cast<size_t>(n) * T_future + t) * 5;
    return constrain(std::span<const Scalar, 5>(raw.data() + i, 5));
}

std::vector<Vec2> StatsField::mean_trajectory(int n, Vec2 origin) const {
    std::vector<Vec2> out(T_future);
    Vec2 p = origin;
    for (int t = 0; t < T_future; ++t) {
        const size_t i = (static_cast<size_t>(n) * T_future + t) * 5;
        p = {p.x + raw[i], p.y + raw[i + 1]};
        out[t] = p;
    }
    return out;
}

Tensor StatsField::tensor() const { return Tensor::from({N, T_future, 5}, raw); }

StatsField StatsField::from_tensor(const Tensor& raw) {
    if (raw.rank() != 3 || raw.dim(2) != 5) throw ShapeError("stats field must be [N, T', 5]");
    return StatsField{static_cast<int>(raw.dim(0)), static_cast<int>(raw.dim(1)), raw.to_vector()};
}

ConstrainedStats constrain(const Tensor& raw) {
    if (raw.rank() != 3 || raw.dim(2) != 5) throw ShapeError("raw statistics must be [N, T', 5]");
    ConstrainedStats s;
    s.mu = slice(raw, 2, 0, 2);
    s.sigma = add(softplus(slice(raw, 2, 2, 4)), Tensor::scalar(static_cast<Scalar>(kSigmaFloor)));
    s.rho = scale(tanh(slice(raw, 2, 4, 5)), static_cast<Scalar>(kRhoCap));
    return s;
}

Tensor gaussian_log_pdf(const Tensor& y, const ConstrainedStats& g) {
    if (y.shape() != g.mu.shape()) throw ShapeError("locations " + shape_str(y.shape()) + " vs means " +
                                                    shape_str(g.mu.shape()));
    Tensor d = div(sub(y, g.mu), g.sigma);  // [N, T', 2]
    Tensor d1 = slice(d, 2, 0, 1);
    Tensor d2 = slice(d, 2, 1, 2);
    Tensor one_minus = sub(Tensor::scalar(1), square(g.rho));
    Tensor z = sub(add(square(d1), square(d2)), scale(mul(mul(g.rho, d1), d2), 2));
    Tensor log_sigmas = sum(log(g.sigma), 2);  // [N, T']
    Tensor log_norm = add(reshape(log_sigmas, g.rho.shape()), scale(log(one_minus), 0.5));
    Tensor quad = div(z, scale(one_minus, 2));
    const auto log_two_pi = static_cast<Scalar>(std::log(2 * std::numbers::pi));
    return scale(add(add(log_norm, quad), Tensor::scalar(log_two_pi)), -1);
}

void init_converter_params(ParamStore& params, const ModelConfig& c, std::mt19937_64& rng) {
    const int64_t K = c.conv_kernel, H = c.conv_hidden;
    params.add_weight("converter.conv1.w", {K, 2, H}, K * 2, K * H, rng);
    params.add_zeros("converter.conv1.b", {H});
    params.add_weight("converter.conv2.w", {K, H, 5}, K * H, K * 5, rng);
    params.add_zeros("converter.conv2.b", {5});
}

Tensor convert_trajectory(const Tensor& future, const ParamStore& p, const ModelConfig& c) {
    if (future.rank() != 3 || future.dim(1) != c.T_future || future.dim(2) != 2)
        throw ShapeError("converter expects [N, " + std::to_string(c.T_future) + ", 2], got " +
                         shape_str(future.shape()));
    Tensor h = tanh(add(conv1d(future, p["converter.conv1.w"], Padding::Same), p["converter.conv1.b"]));
    return add(conv1d(h, p["converter.conv2.w"], Padding::Same), p["converter.conv2.b"]);
}

Normalization Normalization::fit(std::span<const Scalar> rows, double min_scale) {
    if (rows.empty() || rows.size() % 5 != 0) throw std::invalid_argument("normalization needs rows of 5 values");
    const size_t n = rows.size() / 5;
    Normalization norm;
    for (int c = 0; c < 5; ++c) {
        double s = 0, sq = 0;
        for (size_t i = 0; i < n; ++i) s += rows[i * 5 + c];
        const double m = s / static_cast<double>(n);
        for (size_t i = 0; i < n; ++i) sq += (rows[i * 5 + c] - m) * (rows[i * 5 + c] - m);
        norm.mean[c] = m;
        norm.scale[c] = std::max(std::sqrt(sq / static_cast<double>(n)), min_scale);
    }
    return norm;
}

void Normalization::validate() const {
    for (double s : scale)
        if (!(s > 0)) throw std::invalid_argument("normalization scale must be strictly positive");
}

Tensor Normalization::apply(const Tensor& raw) const {
    validate();
    std::vector<Scalar> m(5), inv(5);
    for (int c = 0; c < 5; ++c) m[c] = static_cast<Scalar>(mean[c]), inv[c] = static_cast<Scalar>(1.0 / scale[c]);
    return mul(sub(raw, Tensor::from({5}, m)), Tensor::from({5}, inv));
}

Tensor Normalization::invert(const Tensor& norm) const {
    validate();
    std::vector<Scalar> m(5), s(5);
    for (int c = 0; c < 5; ++c) m[c] = static_cast<Scalar>(mean[c]), s[c] = static_cast<Scalar>(scale[c]);
    return add(mul(norm, Tensor::from({5}, s)), Tensor::from({5}, m));
}

std::vector<Scalar> Normalization::apply(std::span<const Scalar> raw) const {
    validate();
    std::vector<Scalar> out(raw.size());
    for (size_t i = 0; i < raw.size(); ++i)
        out[i] = static_cast<Scalar>((raw[i] - mean[i % 5]) / scale[i % 5]);
    return out;
}

std::vector<Scalar> Normalization::invert(std::span<const Scalar> norm) const {
    validate();
    std::vector<Scalar> out(norm.size());
    for (size_t i = 0; i < norm.size(); ++i) out[i] = static_cast<Scalar>(norm[i] * scale[i % 5] + mean[i % 5]);
    return out;
}

void to_json(nlohmann::json& j, const Normalization& n) { j = {{"mean", n.mean}, {"scale", n.scale}}; }

void from_json(const nlohmann::json& j, Normalization& n) {
    j.at("mean").get_to(n.mean);
    j.at("scale").get_to(n.scale);
}

}  // namespace updd
