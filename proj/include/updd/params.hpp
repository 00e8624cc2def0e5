#pragma once

#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "updd/checkpoint.hpp"
#include "updd/tensor.hpp"

namespace updd {

// Named learnable tensors. Values are replaced wholesale on update.
class ParamStore {
   public:
    // Glorot-uniform over (fan_in, fan_out); biases start at zero.
    void add_weight(const std::string& name, Shape shape, int64_t fan_in, int64_t fan_out, std::mt19937_64& rng);
    void add_zeros(const std::string& name, Shape shape);
    void set(const std::string& name, Tensor value);

    const Tensor& operator[](const std::string& name) const;
    bool has(const std::string& name) const { return params_.count(name) != 0; }
    const std::map<std::string, Tensor>& all() const { return params_; }
    int64_t count() const;
    // Parameters whose name starts with `prefix`.
    int64_t count(const std::string& prefix) const;

    void save(Container& c, const std::string& prefix = "param/") const;
    static ParamStore load(const Container& c, const std::string& prefix = "param/");

   private:
    std::map<std::string, Tensor> params_;
};

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double clip_norm = 5.0;  // global gradient-norm clip; <= 0 disables
};

// First-order adaptive-moment optimizer with global norm clipping.
class Adam {
   public:
    explicit Adam(AdamConfig config = {}) : config_(config) {}

    // Returns the pre-clip global gradient norm.
    double step(ParamStore& params, const GradientMap& grads);

    int64_t steps() const { return steps_; }
    const AdamConfig& config() const { return config_; }

    void save(Container& c) const;
    static Adam load(const Container& c, AdamConfig config);

   private:
    AdamConfig config_;
    int64_t steps_ = 0;
    std::map<std::string, std::vector<double>> m_, v_;
};

}  // namespace updd
