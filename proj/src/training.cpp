#include "updd/training.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "updd/errors.hpp"
#include "updd/ops.hpp"

namespace updd {

void TrainConfig::validate() const {
    if (lambda1 < 0 || lambda2 < 0 || lambda3 < 0) throw std::invalid_argument("loss weights must be non-negative");
    if (lambda1 + lambda2 + lambda3 <= 0) throw std::invalid_argument("at least one loss weight must be positive");
    if (batch_size < 1) throw std::invalid_argument("batch_size must be >= 1");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
    if (!(lr > 0)) throw std::invalid_argument("lr must be positive");
    if (S < 1 || S > K) throw std::invalid_argument("need 1 <= S <= K");
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
    j = {{"lambda1", c.lambda1},
         {"lambda2", c.lambda2},
         {"lambda3", c.lambda3},
         {"lr", c.lr},
         {"clip_norm", c.clip_norm},
         {"batch_size", c.batch_size},
         {"epochs", c.epochs},
         {"max_steps", c.max_steps},
         {"seed", c.seed},
         {"K", c.K},
         {"beta_start", c.beta_start},
         {"beta_end", c.beta_end},
         {"S", c.S},
         {"gamma_mode", std::string(gamma_mode_name(c.gamma_mode))},
         {"model", c.model},
         {"checkpoint_every", c.checkpoint_every},
         {"shape_norm_floor", c.shape_norm_floor}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
    j.at("lambda1").get_to(c.lambda1);
    j.at("lambda2").get_to(c.lambda2);
    j.at("lambda3").get_to(c.lambda3);
    j.at("lr").get_to(c.lr);
    j.at("clip_norm").get_to(c.clip_norm);
    j.at("batch_size").get_to(c.batch_size);
    j.at("epochs").get_to(c.epochs);
    j.at("max_steps").get_to(c.max_steps);
    j.at("seed").get_to(c.seed);
    j.at("K").get_to(c.K);
    j.at("beta_start").get_to(c.beta_start);
    j.at("beta_end").get_to(c.beta_end);
    j.at("S").get_to(c.S);
    c.gamma_mode = parse_gamma_mode(j.at("gamma_mode").get<std::string>());
    j.at("model").get_to(c.model);
    j.at("checkpoint_every").get_to(c.checkpoint_every);
    j.at("shape_norm_floor").get_to(c.shape_norm_floor);
}

DiffusionDraw draw_diffusion_noise(const Shape& shape, std::span<const int> window_of_row, int n_windows,
                                   const Schedule& schedule, std::mt19937_64& rng) {
    const int64_t rows = shape.at(0);
    if (static_cast<int64_t>(window_of_row.size()) != rows) throw ShapeError("window_of_row must cover every row");
    std::uniform_int_distribution<int> pick(0, schedule.S() - 1);
    std::vector<int> window_step(static_cast<size_t>(n_windows));
    for (auto& k : window_step) k = schedule.tau[pick(rng)];
    DiffusionDraw d;
    for (int w : window_of_row) d.steps.push_back(window_step.at(w));
    std::normal_distribution<double> normal(0.0, 1.0);
    std::vector<Scalar> eps(static_cast<size_t>(shape_numel(shape)));
    for (auto& e : eps) e = static_cast<Scalar>(normal(rng));
    d.eps = Tensor::from(shape, std::move(eps));
    return d;
}

Tensor loss_diffusion(const Tensor& Y0, const DiffusionDraw& draw, const Schedule& schedule, const DenoiseFn& denoise,
                      int n_windows) {
    if (n_windows < 1) throw std::invalid_argument("n_windows must be >= 1");
    const Tensor noisy = forward_marginal_rows(Y0, draw.steps, draw.eps, schedule);
    const Tensor pred = denoise(noisy, draw.steps);
    if (pred.shape() != draw.eps.shape())
        throw ShapeError("denoiser output " + shape_str(pred.shape()) + " does not match noise " +
                         shape_str(draw.eps.shape()));
    return scale(sum(square(sub(pred, draw.eps))), static_cast<Scalar>(1.0 / n_windows));
}

Tensor loss_likelihood(const Tensor& future, const Tensor& raw_stats, int n_windows) {
    if (future.rank() != 3 || future.dim(2) != 2 || raw_stats.rank() != 3 || raw_stats.dim(2) != 5 ||
        future.dim(0) != raw_stats.dim(0) || future.dim(1) != raw_stats.dim(1))
        throw ShapeError("likelihood needs future [N,T',2] and stats [N,T',5], got " + shape_str(future.shape()) +
                         " and " + shape_str(raw_stats.shape()));
    if (n_windows < 1) throw std::invalid_argument("n_windows must be >= 1");
    return scale(sum(gaussian_log_pdf(future, constrain(raw_stats))), static_cast<Scalar>(-1.0 / n_windows));
}

Tensor loss_consistency(const Tensor& future, const Tensor& raw_stats) {
    if (future.rank() != 3 || raw_stats.rank() != 3 || future.dim(0) != raw_stats.dim(0))
        throw ShapeError("consistency needs matching future and stats");
    const Tensor y = slice(future, 1, 0, 1);
    const Tensor mu = slice(slice(raw_stats, 1, 0, 1), 2, 0, 2);
    return scale(sum(square(sub(y, mu))), static_cast<Scalar>(1.0 / static_cast<double>(future.dim(0))));
}

LossTerms objective(const Model& model, const Batch& batch, const TrainConfig& config, std::mt19937_64& rng) {
    const Tensor raw = convert_trajectory(batch.future, model.params, model.config);
    const Tensor Y0 = model.norm.apply(raw);
    const GuidanceContext g = guidance_for(model, batch.observed, batch.mask);
    const DiffusionDraw draw = draw_diffusion_noise(Y0.shape(), batch.window_of_row, batch.n_windows, model.schedule, rng);
    auto denoise = [&](const Tensor& noisy, std::span<const int> steps) {
        return denoiser_apply(noisy, steps, g.embedding, model.schedule, model.params, model.config);
    };
    LossTerms t;
    t.diffusion = loss_diffusion(Y0, draw, model.schedule, denoise, batch.n_windows);
    t.likelihood = loss_likelihood(batch.future, raw, batch.n_windows);
    t.consistency = loss_consistency(batch.future, raw);
    t.total = add(add(scale(t.diffusion, static_cast<Scalar>(config.lambda1)),
                      scale(t.likelihood, static_cast<Scalar>(config.lambda2))),
                  scale(t.consistency, static_cast<Scalar>(config.lambda3)));
    return t;
}

LossReport train_step(Model& model, Adam& optimizer, const Batch& batch, const TrainConfig& config,
                      std::mt19937_64& rng) {
    Tape tape;
    LossTerms t;
    GradientMap grads;
    {
        TapeScope scope(tape);
        t = objective(model, batch, config, rng);
        grads = tape.backward(t.total);
    }
    LossReport r;
    r.total = t.total.item();
    r.diffusion = t.diffusion.item();
    r.likelihood = t.likelihood.item();
    r.consistency = t.consistency.item();
    r.grad_norm = optimizer.step(model.params, grads);
    if (!std::isfinite(r.grad_norm)) throw NumericError("non-finite gradient norm");
    return r;
}

std::mt19937_64 step_rng(uint64_t seed, int64_t step) {
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(step),
                      static_cast<uint32_t>(static_cast<uint64_t>(step) >> 32), 0x7a1bu};
    return std::mt19937_64(seq);
}

static std::vector<size_t> epoch_order(size_t n, uint64_t seed, int64_t epoch) {
    std::vector<size_t> order(n);
    std::iota(order.begin(), order.end(), size_t{0});
    std::seed_seq seq{static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32), static_cast<uint32_t>(epoch),
                      0x5f1eu};
    std::mt19937_64 rng(seq);
    std::shuffle(order.begin(), order.end(), rng);
    return order;
}

static AdamConfig adam_config(const TrainConfig& c) {
    AdamConfig a;
    a.lr = c.lr;
    a.clip_norm = c.clip_norm;
    return a;
}

TrainState init_training(std::span<const SceneWindow> windows, const TrainConfig& config) {
    config.validate();
    if (windows.empty()) throw DataError("training set is empty");
    const Schedule schedule = build_schedule(config.K, config.beta_start, config.beta_end, config.S, config.gamma_mode);
    TrainState s{Model::init(config.model, schedule, config.seed), Adam(adam_config(config)), 0};
    s.model.norm = fit_normalization(s.model, windows, config.shape_norm_floor);
    return s;
}

void save_training(const TrainState& state, const TrainConfig& config, const std::filesystem::path& path,
                   const nlohmann::json& extra) {
    Container c;
    c.metadata()["format"] = "updd-checkpoint";
    c.metadata()["train"] = config;
    c.metadata()["step"] = state.step;
    if (extra.is_object())
        for (auto it = extra.begin(); it != extra.end(); ++it) c.metadata()[it.key()] = it.value();
    state.model.save(c);
    state.optimizer.save(c);
    c.save(path);
}

TrainState load_training(const std::filesystem::path& path, const TrainConfig& config) {
    const Container c = Container::load(path);
    TrainState s{Model::load(c), Adam::load(c, adam_config(config)), c.metadata().value("step", int64_t{0})};
    return s;
}

int64_t total_steps(size_t n_windows, const TrainConfig& config) {
    const int64_t per_epoch = (static_cast<int64_t>(n_windows) + config.batch_size - 1) / config.batch_size;
    int64_t total = per_epoch * config.epochs;
    if (config.max_steps > 0) total = std::min(total, config.max_steps);
    return total;
}

FitResult fit(std::span<const SceneWindow> windows, const TrainConfig& config, const FitOptions& options) {
    config.validate();
    if (windows.empty()) throw DataError("training set is empty");
    std::filesystem::create_directories(options.out_dir);

    TrainState state = options.resume ? load_training(*options.resume, config) : init_training(windows, config);

    FitResult result;
    result.log = options.out_dir / "train_log.csv";
    const bool append = options.resume.has_value() && std::filesystem::exists(result.log);
    std::ofstream log(result.log, append ? std::ios::app : std::ios::trunc);
    if (!log) throw DataError("cannot write " + result.log.string());
    if (!append) log << "step,total,diffusion,likelihood,consistency,wall_ms\n";

    const int64_t per_epoch = (static_cast<int64_t>(windows.size()) + config.batch_size - 1) / config.batch_size;
    const int64_t total = total_steps(windows.size(), config);
    int64_t cached_epoch = -1;
    std::vector<size_t> order;
    char line[256];
    while (state.step < total) {
        const int64_t epoch = state.step / per_epoch;
        if (epoch != cached_epoch) order = epoch_order(windows.size(), config.seed, epoch), cached_epoch = epoch;
        const size_t begin = static_cast<size_t>((state.step % per_epoch) * config.batch_size);
        const size_t end = std::min(order.size(), begin + static_cast<size_t>(config.batch_size));
        const std::vector<size_t> idx(order.begin() + static_cast<std::ptrdiff_t>(begin),
                                      order.begin() + static_cast<std::ptrdiff_t>(end));

        const auto t0 = std::chrono::steady_clock::now();
        auto rng = step_rng(config.seed, state.step);
        LossReport r;
        try {
            r = train_step(state.model, state.optimizer, make_batch(windows, idx), config, rng);
        } catch (const NumericError& e) {
            throw NumericError("training step " + std::to_string(state.step) + ": " + e.what());
        }
        const double ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
        ++state.step;
        std::snprintf(line, sizeof line, "%lld,%.9g,%.9g,%.9g,%.9g,%.3f\n", static_cast<long long>(state.step),
                      r.total, r.diffusion, r.likelihood, r.consistency, config.log_timing ? ms : 0.0);
        log << line;
        result.last = r;
        if (options.on_step) options.on_step(state.step, r);
        if (config.checkpoint_every > 0 && state.step % config.checkpoint_every == 0 && state.step < total) {
            std::snprintf(line, sizeof line, "checkpoint_step_%06lld.updd", static_cast<long long>(state.step));
            save_training(state, config, options.out_dir / line, options.extra_metadata);
        }
    }
    result.checkpoint = options.out_dir / "model.updd";
    save_training(state, config, result.checkpoint, options.extra_metadata);
    result.steps = state.step;
    return result;
}

}  // namespace updd
