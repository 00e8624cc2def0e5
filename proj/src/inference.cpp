#include "updd/inference.hpp"

#include <cmath>
#include <map>
#include <stdexcept>

#include "updd/errors.hpp"

namespace updd {

Strategy parse_strategy(std::string_view s) {
    if (s == "A" || s == "a") return Strategy::A;
    if (s == "B" || s == "b") return Strategy::B;
    if (s == "C" || s == "c") return Strategy::C;
    throw std::invalid_argument("unknown strategy '" + std::string(s) + "' (expected A, B or C)");
}

std::string_view strategy_name(Strategy s) { return s == Strategy::A ? "A" : s == Strategy::B ? "B" : "C"; }

Selection parse_selection(std::string_view s) {
    if (s == "gt-ade") return Selection::GtAde;
    if (s == "self-likelihood") return Selection::SelfLikelihood;
    throw std::invalid_argument("unknown selection '" + std::string(s) + "' (expected gt-ade or self-likelihood)");
}

std::string_view selection_name(Selection s) { return s == Selection::GtAde ? "gt-ade" : "self-likelihood"; }

Accounting parse_accounting(std::string_view s) {
    if (s == "post") return Accounting::PostSelection;
    if (s == "all") return Accounting::AllRuns;
    throw std::invalid_argument("unknown accounting '" + std::string(s) + "' (expected post or all)");
}

std::string_view accounting_name(Accounting a) { return a == Accounting::PostSelection ? "post" : "all"; }

int SamplingConfig::reverse_runs() const {
    switch (strategy) {
        case Strategy::A: return r1;
        case Strategy::B: return r;
        case Strategy::C: return 1;
    }
    return 1;
}

int SamplingConfig::candidates() const {
    int m = 0;
    switch (strategy) {
        case Strategy::A: m = (accounting == Accounting::AllRuns ? r1 : 1) + r2; break;
        case Strategy::B:
        case Strategy::C: m = r; break;
    }
    return budget > 0 ? std::min(m, budget) : m;
}

std::span<const Vec2> PredictionSet::candidate(int n, int m) const {
    return std::span<const Vec2>(candidates).subspan((static_cast<size_t>(n) * M + m) * T_future, T_future);
}

static void check_lengths(std::span<const Vec2> a, std::span<const Vec2> b) {
    if (a.size() != b.size() || a.empty())
        throw std::invalid_argument("trajectory lengths differ: " + std::to_string(a.size()) + " vs " +
                                    std::to_string(b.size()));
}

double ade(std::span<const Vec2> pred, std::span<const Vec2> gt) {
    check_lengths(pred, gt);
    double s = 0;
    for (size_t t = 0; t < pred.size(); ++t) s += std::hypot(pred[t].x - gt[t].x, pred[t].y - gt[t].y);
    return s / static_cast<double>(pred.size());
}

double fde(std::span<const Vec2> pred, std::span<const Vec2> gt) {
    check_lengths(pred, gt);
    return std::hypot(pred.back().x - gt.back().x, pred.back().y - gt.back().y);
}

size_t select_best(std::span<const StatsField> fields, int n, Selection criterion, Vec2 origin,
                   const std::vector<Vec2>* gt) {
    if (fields.empty()) throw std::invalid_argument("select_best needs at least one field");
    if (criterion == Selection::GtAde && gt == nullptr)
        throw std::invalid_argument("gt-ade selection requires ground truth");
    size_t best = 0;
    double best_score = 0;
    for (size_t i = 0; i < fields.size(); ++i) {
        double score = 0;
        if (criterion == Selection::GtAde) {
            score = -ade(fields[i].mean_trajectory(n, origin), *gt);
        } else {
            for (int t = 0; t < fields[i].T_future; ++t) {
                const Gaussian5 g = fields[i].at(n, t);
                score += log_pdf({g.mu1, g.mu2}, g);
            }
        }
        if (i == 0 || score > best_score) best = i, best_score = score;
    }
    return best;
}

std::vector<Vec2> sample_trajectory(const StatsField& field, int n, Vec2 origin, std::mt19937_64& rng) {
    std::vector<Vec2> out(field.T_future);
    Vec2 p = origin;
    for (int t = 0; t < field.T_future; ++t) {
        const Vec2 d = sample_location(field.at(n, t), rng);
        p = {p.x + d.x, p.y + d.y};
        out[t] = p;
    }
    return out;
}

PredictionSet assemble_candidates(std::span<const StatsField> fields, std::span<const Vec2> origins,
                                  const SamplingConfig& config, std::mt19937_64& rng,
                                  const std::vector<std::vector<Vec2>>* gt) {
    if (static_cast<int>(fields.size()) != config.reverse_runs())
        throw std::invalid_argument("strategy " + std::string(strategy_name(config.strategy)) + " needs " +
                                    std::to_string(config.reverse_runs()) + " reverse runs, got " +
                                    std::to_string(fields.size()));
    if (config.selection == Selection::GtAde && config.strategy == Strategy::A && gt == nullptr)
        throw std::invalid_argument("gt-ade selection requires ground truth");
    PredictionSet set;
    set.N = fields[0].N;
    set.T_future = fields[0].T_future;
    set.M = config.candidates();
    if (set.M < 1) throw std::invalid_argument("sampling configuration yields no candidates");
    if (static_cast<int>(origins.size()) != set.N) throw ShapeError("one origin per pedestrian required");

    for (int n = 0; n < set.N; ++n) {
        std::vector<std::pair<Provenance, std::vector<Vec2>>> cands;
        const Vec2 o = origins[n];
        switch (config.strategy) {
            case Strategy::A: {
                const size_t best = select_best(fields, n, config.selection, o, gt ? &(*gt)[n] : nullptr);
                if (config.accounting == Accounting::AllRuns) {
                    for (size_t i = 0; i < fields.size(); ++i)
                        cands.push_back({{static_cast<int>(i), -1}, fields[i].mean_trajectory(n, o)});
                } else {
                    cands.push_back({{static_cast<int>(best), -1}, fields[best].mean_trajectory(n, o)});
                }
                for (int d = 0; d < config.r2; ++d)
                    cands.push_back({{static_cast<int>(best), d}, sample_trajectory(fields[best], n, o, rng)});
                break;
            }
            case Strategy::B:
                for (int i = 0; i < config.r; ++i) cands.push_back({{i, 0}, sample_trajectory(fields[i], n, o, rng)});
                break;
            case Strategy::C:
                for (int d = 0; d < config.r; ++d) cands.push_back({{0, d}, sample_trajectory(fields[0], n, o, rng)});
                break;
        }
        for (int m = 0; m < set.M; ++m) {
            set.provenance.push_back(cands[m].first);
            set.candidates.insert(set.candidates.end(), cands[m].second.begin(), cands[m].second.end());
        }
    }
    return set;
}

static Tensor observed_tensor(const SceneWindow& w) {
    return Tensor::from({w.N, w.T, 2}, std::vector<Scalar>(w.observed.begin(), w.observed.end()));
}

static std::vector<Vec2> origins_of(const SceneWindow& w) {
    std::vector<Vec2> o(w.N);
    for (int n = 0; n < w.N; ++n) o[n] = {w.origin[2 * n], w.origin[2 * n + 1]};
    return o;
}

uint64_t window_seed(uint64_t root, uint64_t index) {
    std::seed_seq seq{static_cast<uint32_t>(root), static_cast<uint32_t>(root >> 32), static_cast<uint32_t>(index),
                      static_cast<uint32_t>(index >> 32), 0x3d1fu};
    std::mt19937_64 rng(seq);
    return rng();
}

PredictionSet hybrid_sample(const Model& model, const Schedule& schedule, const SceneWindow& window,
                            const SampleOptions& options, const std::vector<std::vector<Vec2>>* gt) {
    if (window.T != model.config.T || window.T_future != model.config.T_future)
        throw ShapeError("window horizons do not match the model");
    const GuidanceContext g = guidance_for(model, observed_tensor(window), window.neighbor_mask);
    ReverseOptions ro;
    ro.n_runs = options.sampling.reverse_runs();
    ro.seed = options.seed;
    ro.chain_seed = options.chain_seed;
    const auto fields = reverse_generate(g.embedding, schedule, model.params, model.config, model.norm, ro);
    std::mt19937_64 rng(window_seed(options.seed, 0xd4a3ull));
    const auto origins = origins_of(window);
    return assemble_candidates(fields, origins, options.sampling, rng, gt);
}

std::vector<std::vector<Vec2>> ground_truth(const SceneWindow& window) {
    std::vector<std::vector<Vec2>> gt(window.N);
    for (int n = 0; n < window.N; ++n) gt[n] = window.future_absolute(n);
    return gt;
}

std::vector<std::pair<double, double>> best_of_n(const PredictionSet& set, const std::vector<std::vector<Vec2>>& gt) {
    if (static_cast<int>(gt.size()) != set.N) throw ShapeError("ground truth must cover every pedestrian");
    std::vector<std::pair<double, double>> out;
    for (int n = 0; n < set.N; ++n) {
        double best = 0, best_fde = 0;
        for (int m = 0; m < set.M; ++m) {
            const double a = ade(set.candidate(n, m), gt[n]);
            if (m == 0 || a < best) best = a, best_fde = fde(set.candidate(n, m), gt[n]);
        }
        out.emplace_back(best, best_fde);
    }
    return out;
}

Schedule protocol_schedule(const Model& model, const EvalProtocol& protocol) {
    Schedule s = model.schedule;
    if (protocol.steps > 0) {
        if (protocol.steps > s.K)
            throw std::invalid_argument("requested " + std::to_string(protocol.steps) + " steps but the checkpoint has K=" +
                                        std::to_string(s.K));
        s = s.with_steps(protocol.steps);
    }
    if (protocol.gamma) s = s.with_gamma(*protocol.gamma);
    return s;
}

static PredictionSet with_oracle(const PredictionSet& set, const std::vector<std::vector<Vec2>>& gt) {
    PredictionSet out;
    out.N = set.N;
    out.M = set.M + 1;
    out.T_future = set.T_future;
    for (int n = 0; n < set.N; ++n) {
        for (int m = 0; m < set.M; ++m) {
            auto c = set.candidate(n, m);
            out.candidates.insert(out.candidates.end(), c.begin(), c.end());
            out.provenance.push_back(set.source(n, m));
        }
        out.candidates.insert(out.candidates.end(), gt[n].begin(), gt[n].end());
        out.provenance.push_back({-1, -1});
    }
    return out;
}

namespace {

struct SceneAccumulator {
    std::vector<std::string> order;
    std::map<std::string, SceneMetrics> scenes;
    std::map<std::string, std::pair<double, double>> sums;

    void add(const SceneWindow& w, const std::vector<std::pair<double, double>>& errors) {
        if (!scenes.count(w.scene_id)) order.push_back(w.scene_id), scenes[w.scene_id].scene = w.scene_id;
        auto& m = scenes[w.scene_id];
        auto& s = sums[w.scene_id];
        ++m.windows;
        for (const auto& [a, f] : errors) s.first += a, s.second += f, ++m.pedestrians;
    }

    EvalReport finish() {
        if (order.empty()) throw DataError("evaluation set is empty");
        EvalReport r;
        for (const auto& name : order) {
            auto m = scenes[name];
            m.ade = sums[name].first / m.pedestrians;
            m.fde = sums[name].second / m.pedestrians;
            r.avg_ade += m.ade;
            r.avg_fde += m.fde;
            r.scenes.push_back(m);
        }
        r.avg_ade /= static_cast<double>(order.size());
        r.avg_fde /= static_cast<double>(order.size());
        return r;
    }
};

}  // namespace

EvalReport evaluate_best_of_n(const Model& model, std::span<const SceneWindow> windows, const EvalProtocol& protocol) {
    const Schedule schedule = protocol_schedule(model, protocol);
    const size_t n = protocol.max_windows > 0 ? std::min(windows.size(), protocol.max_windows) : windows.size();
    SceneAccumulator acc;
    int candidates = 0;
    for (size_t i = 0; i < n; ++i) {
        const auto& w = windows[i];
        const auto gt = ground_truth(w);
        SampleOptions opt{protocol.sampling, window_seed(protocol.seed, i), std::nullopt};
        if (protocol.chain_seed) opt.chain_seed = window_seed(*protocol.chain_seed, i);
        PredictionSet set = hybrid_sample(model, schedule, w, opt, &gt);
        if (protocol.inject_oracle) set = with_oracle(set, gt);
        candidates = set.M;
        acc.add(w, best_of_n(set, gt));
    }
    EvalReport r = acc.finish();
    r.candidates = candidates;
    return r;
}

std::vector<Vec2> constant_velocity(const SceneWindow& window, int n) {
    const Vec2 d = window.observed_disp(n, window.T - 1);
    std::vector<Vec2> out(window.T_future);
    for (int t = 0; t < window.T_future; ++t)
        out[t] = {window.origin[2 * n] + (t + 1) * d.x, window.origin[2 * n + 1] + (t + 1) * d.y};
    return out;
}

EvalReport evaluate_constant_velocity(std::span<const SceneWindow> windows) {
    SceneAccumulator acc;
    for (const auto& w : windows) {
        const auto gt = ground_truth(w);
        std::vector<std::pair<double, double>> errors;
        for (int n = 0; n < w.N; ++n) {
            const auto p = constant_velocity(w, n);
            errors.emplace_back(ade(p, gt[n]), fde(p, gt[n]));
        }
        acc.add(w, errors);
    }
    EvalReport r = acc.finish();
    r.candidates = 1;
    return r;
}

}  // namespace updd
