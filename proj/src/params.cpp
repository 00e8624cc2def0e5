#include "updd/params.hpp"

#include <cmath>

namespace updd {

void ParamStore::add_weight(const std::string& name, Shape shape, int64_t fan_in, int64_t fan_out,
                            std::mt19937_64& rng) {
    const double bound = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    std::uniform_real_distribution<double> dist(-bound, bound);
    std::vector<Scalar> values(static_cast<size_t>(shape_numel(shape)));
    for (auto& v : values) v = static_cast<Scalar>(dist(rng));
    params_[name] = Tensor::from(std::move(shape), std::move(values), true);
}

void ParamStore::add_zeros(const std::string& name, Shape shape) {
    params_[name] = Tensor::zeros(std::move(shape)).as_parameter();
}

void ParamStore::set(const std::string& name, Tensor value) {
    params_[name] = value.requires_grad() ? std::move(value) : value.as_parameter();
}

const Tensor& ParamStore::operator[](const std::string& name) const {
    auto it = params_.find(name);
    if (it == params_.end()) throw std::out_of_range("no parameter named '" + name + "'");
    return it->second;
}

int64_t ParamStore::count() const { return count(""); }

int64_t ParamStore::count(const std::string& prefix) const {
    int64_t n = 0;
    for (const auto& [name, t] : params_)
        if (name.rfind(prefix, 0) == 0) n += t.numel();
    return n;
}

void ParamStore::save(Container& c, const std::string& prefix) const {
    for (const auto& [name, t] : params_) c.put_tensor(prefix + name, t);
}

ParamStore ParamStore::load(const Container& c, const std::string& prefix) {
    ParamStore store;
    for (const auto& name : c.names())
        if (name.rfind(prefix, 0) == 0) store.params_[name.substr(prefix.size())] = c.get_tensor(name).as_parameter();
    return store;
}

double Adam::step(ParamStore& params, const GradientMap& grads) {
    double sq = 0;
    std::map<std::string, Tensor> g;
    for (const auto& [name, p] : params.all()) {
        g[name] = grads[p];
        for (Scalar v : g[name].data()) sq += static_cast<double>(v) * v;
    }
    const double norm = std::sqrt(sq);
    const double clip = (config_.clip_norm > 0 && norm > config_.clip_norm) ? config_.clip_norm / norm : 1.0;

    ++steps_;
    const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(steps_));
    const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(steps_));
    for (const auto& [name, p] : params.all()) {
        auto& m = m_[name];
        auto& v = v_[name];
        const auto n = static_cast<size_t>(p.numel());
        if (m.size() != n) m.assign(n, 0.0), v.assign(n, 0.0);
        auto values = p.to_vector();
        auto gd = g[name].data();
        for (size_t i = 0; i < n; ++i) {
            const double gi = gd[i] * clip;
            m[i] = config_.beta1 * m[i] + (1 - config_.beta1) * gi;
            v[i] = config_.beta2 * v[i] + (1 - config_.beta2) * gi * gi;
            const double update = config_.lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.eps);
            values[i] = static_cast<Scalar>(values[i] - update);
        }
        params.set(name, Tensor::from(p.shape(), std::move(values)));
    }
    return norm;
}

void Adam::save(Container& c) const {
    c.metadata()["adam_steps"] = steps_;
    for (const auto& [name, m] : m_) {
        c.put_f64("adam_m/" + name, {static_cast<int64_t>(m.size())}, m);
        c.put_f64("adam_v/" + name, {static_cast<int64_t>(m.size())}, v_.at(name));
    }
}

Adam Adam::load(const Container& c, AdamConfig config) {
    Adam adam(config);
    adam.steps_ = c.metadata().value("adam_steps", int64_t{0});
    for (const auto& name : c.names()) {
        if (name.rfind("adam_m/", 0) == 0) adam.m_[name.substr(7)] = c.get_f64(name);
        if (name.rfind("adam_v/", 0) == 0) adam.v_[name.substr(7)] = c.get_f64(name);
    }
    return adam;
}

}  // namespace updd
