#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "updd/tensor.hpp"

namespace updd {

struct GradCheckReport {
    double max_relative_error = 0;
    bool pass = false;
    // Location of the worst element.
    size_t worst_param = 0;
    size_t worst_index = 0;
    double worst_analytic = 0;
    double worst_numeric = 0;
};

using ScalarFn = std::function<Tensor(std::span<const Tensor> params)>;

// Compares backward() against central differences element by element.
// Relative error is |a - n| / max(|a|, |n|, 1e-6). Throws std::logic_error
// when two evaluations at the same point disagree.
GradCheckReport finite_difference_check(const ScalarFn& f, std::span<const Tensor> params, double step,
                                        double tolerance);

std::string describe(const GradCheckReport& report);

}  // namespace updd
