#include "updd/model.hpp"

#include <random>

#include "updd/errors.hpp"

namespace updd {

Model Model::init(const ModelConfig& config, const Schedule& schedule, uint64_t seed) {
    Model m;
    m.config = config;
    m.schedule = schedule;
    std::mt19937_64 rng(seed);
    init_guidance_params(m.params, config, rng);
    init_converter_params(m.params, config, rng);
    init_denoiser_params(m.params, config, rng);
    return m;
}

void Model::save(Container& c) const {
    c.metadata()["model"] = config;
    c.metadata()["normalization"] = norm;
    schedule.save(c);
    params.save(c);
}

Model Model::load(const Container& c) {
    Model m;
    if (!c.metadata().contains("model")) throw DataError("checkpoint has no model section");
    m.config = c.metadata().at("model").get<ModelConfig>();
    m.norm = c.metadata().at("normalization").get<Normalization>();
    m.norm.validate();
    m.schedule = Schedule::load(c);
    m.params = ParamStore::load(c);
    return m;
}

Batch make_batch(std::span<const SceneWindow> windows) {
    std::vector<size_t> all(windows.size());
    for (size_t i = 0; i < all.size(); ++i) all[i] = i;
    return make_batch(windows, all);
}

Batch make_batch(std::span<const SceneWindow> windows, std::span<const size_t> indices) {
    if (indices.empty()) throw std::invalid_argument("batch needs at least one window");
    const int T = windows[indices[0]].T, Tf = windows[indices[0]].T_future;
    Batch b;
    b.n_windows = static_cast<int>(indices.size());
    std::vector<Scalar> obs, fut;
    for (size_t i : indices) {
        if (i >= windows.size()) throw std::out_of_range("window index out of range");
        const auto& w = windows[i];
        if (w.T != T || w.T_future != Tf) throw ShapeError("windows in a batch must share horizons");
        obs.insert(obs.end(), w.observed.begin(), w.observed.end());
        fut.insert(fut.end(), w.future.begin(), w.future.end());
        b.rows += w.N;
    }
    const int R = b.rows;
    b.mask.assign(static_cast<size_t>(R) * R, 0);
    int offset = 0;
    for (size_t wi = 0; wi < indices.size(); ++wi) {
        const auto& w = windows[indices[wi]];
        for (int i = 0; i < w.N; ++i) {
            b.window_of_row.push_back(static_cast<int>(wi));
            for (int j = 0; j < w.N; ++j)
                b.mask[static_cast<size_t>(offset + i) * R + offset + j] = w.neighbor_mask[static_cast<size_t>(i) * w.N + j];
        }
        offset += w.N;
    }
    b.observed = Tensor::from({R, T, 2}, std::move(obs));
    b.future = Tensor::from({R, Tf, 2}, std::move(fut));
    return b;
}

GuidanceContext guidance_for(const Model& model, const Tensor& observed, std::span<const uint8_t> mask) {
    return build_guidance(encode_history(observed, model.params, model.config),
                          encode_neighbors(observed, mask, model.params, model.config));
}

Normalization fit_normalization(const Model& model, std::span<const SceneWindow> windows, double shape_floor) {
    if (windows.empty()) throw DataError("cannot fit normalization on an empty dataset");
    std::vector<Scalar> rows;
    for (size_t start = 0; start < windows.size(); start += 64) {
        const size_t end = std::min(windows.size(), start + 64);
        std::vector<size_t> idx;
        for (size_t i = start; i < end; ++i) idx.push_back(i);
        const Batch b = make_batch(windows, idx);
        const Tensor raw = convert_trajectory(b.future, model.params, model.config);
        auto r = raw.data();
        auto f = b.future.data();
        for (size_t i = 0; i < r.size() / 5; ++i) {
            rows.push_back(f[i * 2]);
            rows.push_back(f[i * 2 + 1]);
            rows.push_back(r[i * 5 + 2]);
            rows.push_back(r[i * 5 + 3]);
            rows.push_back(r[i * 5 + 4]);
        }
    }
    Normalization norm = Normalization::fit(rows, 1e-3);
    for (int c = 2; c < 5; ++c) norm.scale[c] = std::max(norm.scale[c], shape_floor);
    return norm;
}

}  // namespace updd
