#include "updd/diffusion.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

#include "updd/ops.hpp"

namespace updd {

std::string_view gamma_mode_name(GammaMode mode) {
    return mode == GammaMode::Deterministic ? "deterministic" : "ddpm-matching";
}

GammaMode parse_gamma_mode(std::string_view name) {
    if (name == "deterministic" || name == "0") return GammaMode::Deterministic;
    if (name == "ddpm-matching" || name == "ddpm") return GammaMode::DdpmMatching;
    throw std::invalid_argument("unknown gamma mode '" + std::string(name) + "'");
}

std::vector<int> even_subsequence(int K, int S) {
    if (S < 1 || S > K) throw std::invalid_argument("need 1 <= S <= K, got S=" + std::to_string(S) +
                                                    " K=" + std::to_string(K));
    std::vector<int> tau(S);
    for (int i = 1; i <= S; ++i)
        tau[i - 1] = static_cast<int>((static_cast<int64_t>(i) * K + S / 2) / S);
    tau.back() = K;
    return tau;
}

double Schedule::gamma_between(int from, int to) const {
    if (gamma_mode == GammaMode::Deterministic) return 0.0;
    const double a_from = alpha.at(from), a_to = alpha.at(to);
    const double v = (1 - a_to) / (1 - a_from) * (1 - a_from / a_to);
    return std::sqrt(std::max(0.0, v));
}

Schedule Schedule::with_steps(int S) const {
    Schedule s = *this;
    s.tau = even_subsequence(K, S);
    return s;
}

Schedule Schedule::with_gamma(GammaMode mode) const {
    Schedule s = *this;
    s.gamma_mode = mode;
    for (int k = 1; k <= K; ++k) s.gamma[k - 1] = s.gamma_between(k, k - 1);
    return s;
}

void Schedule::validate() const {
    if (K < 1) throw std::invalid_argument("schedule needs K >= 1");
    if (static_cast<int>(alpha.size()) != K + 1 || static_cast<int>(gamma.size()) != K)
        throw std::invalid_argument("schedule arrays have the wrong length");
    if (alpha[0] != 1.0) throw std::invalid_argument("alpha[0] must be 1");
    for (int k = 1; k <= K; ++k)
        if (!(alpha[k] < alpha[k - 1]) || !(alpha[k] > 0))
            throw std::invalid_argument("alpha must be strictly decreasing in (0, 1]");
    for (int k = 1; k <= K; ++k)
        if (gamma[k - 1] * gamma[k - 1] > 1 - alpha[k - 1] + 1e-12)
            throw std::invalid_argument("gamma[" + std::to_string(k) + "]^2 exceeds 1 - alpha[k-1]");
    if (tau.empty() || tau.back() != K) throw std::invalid_argument("tau must end at K");
    for (size_t i = 0; i < tau.size(); ++i)
        if (tau[i] < 1 || (i > 0 && tau[i] <= tau[i - 1]))
            throw std::invalid_argument("tau must be strictly increasing within 1..K");
}

void Schedule::save(Container& c) const {
    auto& m = c.metadata()["schedule"];
    m = {{"K", K}, {"beta_start", beta_start}, {"beta_end", beta_end}, {"S", S()},
         {"gamma_mode", std::string(gamma_mode_name(gamma_mode))}};
    c.put_f64("schedule/alpha", {K + 1}, alpha);
    c.put_f64("schedule/gamma", {K}, gamma);
    std::vector<int64_t> t(tau.begin(), tau.end());
    c.put_i64("schedule/tau", {S()}, t);
}

Schedule Schedule::load(const Container& c) {
    const auto& m = c.metadata().at("schedule");
    Schedule s;
    s.K = m.at("K");
    s.beta_start = m.at("beta_start");
    s.beta_end = m.at("beta_end");
    s.gamma_mode = parse_gamma_mode(m.at("gamma_mode").get<std::string>());
    s.alpha = c.get_f64("schedule/alpha");
    s.gamma = c.get_f64("schedule/gamma");
    for (int64_t t : c.get_i64("schedule/tau")) s.tau.push_back(static_cast<int>(t));
    s.validate();
    return s;
}

Schedule build_schedule(int K, double beta_start, double beta_end, int S, GammaMode mode) {
    if (K < 1) throw std::invalid_argument("K must be >= 1");
    if (!(beta_start > 0) || !(beta_end < 1) || beta_start > beta_end)
        throw std::invalid_argument("need 0 < beta_start <= beta_end < 1");
    Schedule s;
    s.K = K;
    s.beta_start = beta_start;
    s.beta_end = beta_end;
    s.alpha.assign(K + 1, 1.0);
    for (int k = 1; k <= K; ++k) {
        const double frac = K == 1 ? 0.0 : static_cast<double>(k - 1) / (K - 1);
        const double beta = beta_start + (beta_end - beta_start) * frac;
        s.alpha[k] = s.alpha[k - 1] * (1 - beta);
    }
    s.gamma.assign(K, 0.0);
    s.tau = even_subsequence(K, S);
    s = s.with_gamma(mode);
    s.validate();
    return s;
}

NoisySample forward_marginal(const Tensor& Y0, int k, const Tensor& eps, const Schedule& schedule) {
    if (Y0.shape() != eps.shape())
        throw ShapeError("noise " + shape_str(eps.shape()) + " does not match sample " + shape_str(Y0.shape()));
    if (k < 0 || k > schedule.K) throw std::invalid_argument("diffusion step out of range");
    const double a = schedule.alpha[k];
    Tensor value = add(scale(Y0, static_cast<Scalar>(std::sqrt(a))), scale(eps, static_cast<Scalar>(std::sqrt(1 - a))));
    return {value, k};
}

Tensor forward_marginal_rows(const Tensor& Y0, std::span<const int> steps, const Tensor& eps,
                             const Schedule& schedule) {
    if (Y0.shape() != eps.shape()) throw ShapeError("noise does not match sample");
    const int64_t P = Y0.dim(0);
    if (static_cast<int64_t>(steps.size()) != P) throw ShapeError("one step per row required");
    const int64_t width = Y0.numel() / P;
    std::vector<Scalar> ca(static_cast<size_t>(Y0.numel())), cb(ca.size());
    for (int64_t r = 0; r < P; ++r) {
        const double a = schedule.alpha.at(steps[r]);
        std::fill_n(ca.begin() + r * width, width, static_cast<Scalar>(std::sqrt(a)));
        std::fill_n(cb.begin() + r * width, width, static_cast<Scalar>(std::sqrt(1 - a)));
    }
    return add(mul(Y0, Tensor::from(Y0.shape(), std::move(ca))), mul(eps, Tensor::from(Y0.shape(), std::move(cb))));
}

Tensor step_embedding(std::span<const int> steps, int dim) {
    const int half = dim / 2;
    std::vector<Scalar> out(steps.size() * dim, Scalar(0));
    for (size_t r = 0; r < steps.size(); ++r)
        for (int i = 0; i < half; ++i) {
            const double freq = std::exp(-std::log(10000.0) * i / half);
            out[r * dim + i] = static_cast<Scalar>(std::sin(steps[r] * freq));
            out[r * dim + half + i] = static_cast<Scalar>(std::cos(steps[r] * freq));
        }
    return Tensor::from({static_cast<int64_t>(steps.size()), dim}, std::move(out));
}

void init_denoiser_params(ParamStore& p, const ModelConfig& c, std::mt19937_64& rng) {
    const int64_t in = c.stats_width() + c.step_embed + c.guidance_width();
    const int64_t H = c.denoiser_width;
    p.add_weight("denoiser.in.w", {in, H}, in, H, rng);
    p.add_zeros("denoiser.in.b", {H});
    for (int b = 0; b < c.denoiser_blocks; ++b) {
        const std::string pre = "denoiser.block" + std::to_string(b) + ".";
        p.add_weight(pre + "w1", {H, H}, H, H, rng);
        p.add_zeros(pre + "b1", {H});
        p.add_weight(pre + "w2", {H, H}, H, H, rng);
        p.add_zeros(pre + "b2", {H});
    }
    p.add_weight("denoiser.out.w", {H, c.stats_width()}, H, c.stats_width(), rng);
    p.add_zeros("denoiser.out.b", {c.stats_width()});
}

Tensor denoiser_apply(const Tensor& state, std::span<const int> steps, const Tensor& guidance,
                      const Schedule& schedule, const ParamStore& p, const ModelConfig& c) {
    const int64_t P = state.dim(0);
    if (state.numel() != P * c.stats_width())
        throw ShapeError("denoiser state must be [P, " + std::to_string(c.T_future) + ", 5], got " +
                         shape_str(state.shape()));
    if (guidance.rank() != 2 || guidance.dim(0) != P || guidance.dim(1) != c.guidance_width())
        throw ShapeError("guidance " + shape_str(guidance.shape()) + " does not match " + std::to_string(P) +
                         " state rows");
    if (static_cast<int64_t>(steps.size()) != P) throw ShapeError("one step per state row required");
    Tensor x = concat({reshape(state, {P, c.stats_width()}), step_embedding(steps, c.step_embed), guidance}, 1);
    Tensor h = add(matmul(x, p["denoiser.in.w"]), p["denoiser.in.b"]);
    for (int b = 0; b < c.denoiser_blocks; ++b) {
        const std::string pre = "denoiser.block" + std::to_string(b) + ".";
        Tensor u = tanh(add(matmul(tanh(h), p[pre + "w1"]), p[pre + "b1"]));
        h = add(h, add(matmul(u, p[pre + "w2"]), p[pre + "b2"]));
    }
    Tensor out = add(matmul(h, p["denoiser.out.w"]), p["denoiser.out.b"]);
    // at high noise the answer is close to the input itself, so pass it through
    // scaled by sqrt(1 - alpha[k]) and let the network learn the remainder
    std::vector<Scalar> skip(static_cast<size_t>(state.numel()));
    const int64_t width = c.stats_width();
    for (int64_t r = 0; r < P; ++r)
        std::fill_n(skip.begin() + r * width, width, static_cast<Scalar>(std::sqrt(1 - schedule.alpha.at(steps[r]))));
    return add(reshape(out, state.shape()), mul(state, Tensor::from(state.shape(), std::move(skip))));
}

Tensor denoiser_apply(const NoisySample& state, const Tensor& guidance, const Schedule& schedule,
                      const ParamStore& params, const ModelConfig& config) {
    std::vector<int> steps(static_cast<size_t>(state.value.dim(0)), state.step);
    return denoiser_apply(state.value, steps, guidance, schedule, params, config);
}

std::vector<Scalar> reconstruct_clean(std::span<const Scalar> Yk, std::span<const Scalar> eps_hat, int k,
                                      const Schedule& schedule) {
    if (Yk.size() != eps_hat.size()) throw ShapeError("noise prediction does not match state");
    const double a = schedule.alpha.at(k);
    const double sa = std::sqrt(a), sb = std::sqrt(1 - a);
    std::vector<Scalar> out(Yk.size());
    for (size_t i = 0; i < Yk.size(); ++i) out[i] = static_cast<Scalar>((Yk[i] - sb * eps_hat[i]) / sa);
    return out;
}

std::vector<Scalar> posterior_step(std::span<const Scalar> Yk, std::span<const Scalar> Yhat0, int k_from, int k_to,
                                   const Schedule& schedule, double gamma, std::mt19937_64& rng) {
    if (Yk.size() != Yhat0.size()) throw ShapeError("clean estimate does not match state");
    if (k_to < 0 || k_to > k_from || k_from > schedule.K || k_from < 1)
        throw std::invalid_argument("posterior step needs 0 <= k_to <= k_from <= K");
    const double a_from = schedule.alpha[k_from];
    const double a_to = schedule.alpha[k_to];
    const double rest = 1 - a_to - gamma * gamma;
    if (rest < -1e-12)
        throw std::invalid_argument("gamma^2 = " + std::to_string(gamma * gamma) + " exceeds 1 - alpha[k_to] = " +
                                    std::to_string(1 - a_to));
    const double c_clean = std::sqrt(a_to);
    const double c_dir = std::sqrt(std::max(0.0, rest)) / std::sqrt(1 - a_from);
    const double s_from = std::sqrt(a_from);
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Scalar> out(Yk.size());
    for (size_t i = 0; i < Yk.size(); ++i) {
        double v = c_clean * Yhat0[i];
        if (c_dir != 0) v += c_dir * (Yk[i] - s_from * Yhat0[i]);
        if (gamma > 0) v += gamma * normal(rng);
        out[i] = static_cast<Scalar>(v);
    }
    return out;
}

std::vector<Scalar> posterior_step(std::span<const Scalar> Yk, std::span<const Scalar> Yhat0, int k_from, int k_to,
                                   const Schedule& schedule, std::mt19937_64& rng) {
    return posterior_step(Yk, Yhat0, k_from, k_to, schedule, schedule.gamma_between(k_from, k_to), rng);
}

std::vector<StatsField> reverse_generate(const NoisePredictor& predict, int N, const ModelConfig& config,
                                         const Schedule& schedule, const Normalization& norm,
                                         const ReverseOptions& options) {
    if (options.n_runs < 1) throw std::invalid_argument("reverse_generate needs n_runs >= 1");
    schedule.validate();
    const int R = options.n_runs;
    const int64_t width = config.stats_width();
    const int64_t run_size = static_cast<int64_t>(N) * width;
    const Shape shape{static_cast<int64_t>(R) * N, config.T_future, 5};

    std::vector<Scalar> state(static_cast<size_t>(R * run_size));
    std::vector<std::mt19937_64> chain;
    std::random_device entropy;
    for (int r = 0; r < R; ++r) {
        std::seed_seq seq{options.seed, static_cast<uint64_t>(r), uint64_t{0x5eed}};
        std::mt19937_64 rng(seq);
        std::normal_distribution<double> normal(0.0, 1.0);
        for (int64_t i = 0; i < run_size; ++i) state[r * run_size + i] = static_cast<Scalar>(normal(rng));
        if (options.chain_seed) {
            std::seed_seq cs{*options.chain_seed, static_cast<uint64_t>(r), uint64_t{0xc4a1}};
            chain.emplace_back(cs);
        } else {
            std::seed_seq cs{uint64_t{entropy()}, uint64_t{entropy()}, static_cast<uint64_t>(r)};
            chain.emplace_back(cs);
        }
    }

    for (int i = schedule.S() - 1; i >= 0; --i) {
        const int from = schedule.tau[i];
        const int to = i > 0 ? schedule.tau[i - 1] : 0;
        const Tensor eps_hat = predict(Tensor::from(shape, state), from);
        const auto clean = reconstruct_clean(state, eps_hat.data(), from, schedule);
        const double gamma = schedule.gamma_between(from, to);
        for (int r = 0; r < R; ++r) {
            const auto a = static_cast<size_t>(r * run_size);
            auto next = posterior_step(std::span<const Scalar>(state).subspan(a, run_size),
                                       std::span<const Scalar>(clean).subspan(a, run_size), from, to, schedule, gamma,
                                       chain[r]);
            std::copy(next.begin(), next.end(), state.begin() + a);
        }
        for (size_t j = 0; j < state.size(); ++j)
            if (!std::isfinite(state[j]))
                throw NumericError("non-finite diffusion state after reverse step " + std::to_string(from) + " -> " +
                                   std::to_string(to));
    }

    std::vector<StatsField> fields;
    for (int r = 0; r < R; ++r) {
        std::span<const Scalar> run(state.data() + r * run_size, static_cast<size_t>(run_size));
        fields.push_back(StatsField{N, config.T_future, norm.invert(run)});
    }
    return fields;
}

std::vector<StatsField> reverse_generate(const Tensor& guidance, const Schedule& schedule, const ParamStore& params,
                                         const ModelConfig& config, const Normalization& norm,
                                         const ReverseOptions& options) {
    const int N = static_cast<int>(guidance.dim(0));
    std::vector<Tensor> copies(static_cast<size_t>(options.n_runs), guidance.detach());
    const Tensor tiled = options.n_runs == 1 ? copies[0] : concat(copies, 0);
    auto predict = [&](const Tensor& state, int step) {
        std::vector<int> steps(static_cast<size_t>(state.dim(0)), step);
        return denoiser_apply(state, steps, tiled, schedule, params, config);
    };
    return reverse_generate(predict, N, config, schedule, norm, options);
}

}  // namespace updd
