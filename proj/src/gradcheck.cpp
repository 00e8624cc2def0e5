#include "updd/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace updd {

GradCheckReport finite_difference_check(const ScalarFn& f, std::span<const Tensor> params, double step,
                                        double tolerance) {
    std::vector<Tensor> base;
    base.reserve(params.size());
    for (const auto& p : params) base.push_back(p.as_parameter());

    GradientMap grads;
    double f0 = 0;
    {
        Tape tape;
        TapeScope scope(tape);
        Tensor loss = f(base);
        f0 = loss.item();
        grads = tape.backward(loss);
    }
    const double again = f(base).item();
    if (again != f0) throw std::logic_error("finite_difference_check: function is not deterministic");

    GradCheckReport report;
    for (size_t p = 0; p < base.size(); ++p) {
        const Tensor analytic = grads[base[p]];
        const auto values = base[p].to_vector();
        for (size_t i = 0; i < values.size(); ++i) {
            // The representable perturbation, not the requested one, sets the divisor.
            const auto up = static_cast<Scalar>(values[i] + step);
            const auto down = static_cast<Scalar>(values[i] - step);
            auto eval = [&](Scalar x) {
                std::vector<Tensor> shifted = base;
                auto v = values;
                v[i] = x;
                shifted[p] = Tensor::from(base[p].shape(), std::move(v));
                return static_cast<double>(f(shifted).item());
            };
            const double numeric = (eval(up) - eval(down)) / (static_cast<double>(up) - static_cast<double>(down));
            const double a = analytic.data()[i];
            const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
            const double rel = std::abs(a - numeric) / denom;
            if (rel > report.max_relative_error || (p == 0 && i == 0)) {
                report.max_relative_error = rel;
                report.worst_param = p;
                report.worst_index = i;
                report.worst_analytic = a;
                report.worst_numeric = numeric;
            }
        }
    }
    report.pass = report.max_relative_error <= tolerance;
    return report;
}

std::string describe(const GradCheckReport& report) {
    std::ostringstream os;
    os << (report.pass ? "pass" : "FAIL") << " max_rel_err=" << report.max_relative_error << " at param "
       << report.worst_param << "[" << report.worst_index << "] analytic=" << report.worst_analytic
       << " numeric=" << report.worst_numeric;
    return os.str();
}

}  // namespace updd
