#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "updd/distribution.hpp"
#include "updd/errors.hpp"
#include "updd/ops.hpp"

using namespace updd;

TEST_CASE("log density at the mode") {
    CHECK(log_pdf({0, 0}, {0, 0, 1, 1, 0}) == doctest::Approx(-std::log(2 * std::numbers::pi)).epsilon(1e-12));
    CHECK(log_pdf({1, 2}, {1, 2, 1, 1, 0.5}) == doctest::Approx(-1.694036).epsilon(1e-6));
    CHECK(log_pdf({0, 0}, {0, 0, 1, 1, 0}) == doctest::Approx(-1.837877).epsilon(1e-6));
}

TEST_CASE("log density matches the textbook bi-variate form off the mode") {
    const Gaussian5 g{0.3, -0.2, 0.7, 1.9, -0.6};
    const double x = 1.1, y = 0.4;
    // Inverse covariance route.
    const double s11 = g.sigma1 * g.sigma1, s22 = g.sigma2 * g.sigma2, s12 = g.rho * g.sigma1 * g.sigma2;
    const double det = s11 * s22 - s12 * s12;
    const double dx = x - g.mu1, dy = y - g.mu2;
    const double q = (s22 * dx * dx - 2 * s12 * dx * dy + s11 * dy * dy) / det;
    const double expected = -std::log(2 * std::numbers::pi) - 0.5 * std::log(det) - 0.5 * q;
    CHECK(log_pdf({x, y}, g) == doctest::Approx(expected).epsilon(1e-12));
}

TEST_CASE("density integrates to one on a fine grid") {
    const Gaussian5 g{0.5, -1, 0.8, 1.3, 0.6};
    const double h = 0.02;
    double total = 0;
    for (double x = g.mu1 - 8 * g.sigma1; x < g.mu1 + 8 * g.sigma1; x += h)
        for (double y = g.mu2 - 8 * g.sigma2; y < g.mu2 + 8 * g.sigma2; y += h) total += std::exp(log_pdf({x, y}, g));
    CHECK(std::abs(total * h * h - 1) < 1e-3);
}

TEST_CASE("invalid Gaussian parameters are rejected") {
    CHECK_THROWS(log_pdf({0, 0}, {0, 0, 0, 1, 0}));
    CHECK_THROWS(log_pdf({0, 0}, {0, 0, 1, 1, 0.995}));
}

TEST_CASE("vanishing variance samples sit on the mean") {
    std::mt19937_64 rng(1);
    for (double rho : {-0.99, 0.0, 0.7}) {
        const Gaussian5 g{2, 3, kSigmaFloor, kSigmaFloor, rho};
        for (int i = 0; i < 100; ++i) {
            const Vec2 s = sample_location(g, rng);
            CHECK(std::abs(s.x - 2) < 1e-3);
            CHECK(std::abs(s.y - 3) < 1e-3);
        }
    }
}

TEST_CASE("empirical covariance of Cholesky draws") {
    const Gaussian5 g{1, -1, 2, 1, 0.5};
    std::mt19937_64 rng(7);
    const int n = 100000;
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    for (int i = 0; i < n; ++i) {
        const Vec2 s = sample_location(g, rng);
        sx += s.x, sy += s.y, sxx += s.x * s.x, syy += s.y * s.y, sxy += s.x * s.y;
    }
    const double mx = sx / n, my = sy / n;
    const double cxx = sxx / n - mx * mx, cyy = syy / n - my * my, cxy = sxy / n - mx * my;
    CHECK(std::abs(cxx - 4) / 4 < 0.05);
    CHECK(std::abs(cyy - 1) / 1 < 0.05);
    CHECK(std::abs(cxy - 1) / 1 < 0.05);
    CHECK(std::abs(mx - 1) < 3 * 2 / std::sqrt(n));
    CHECK(std::abs(my + 1) < 3 * 1 / std::sqrt(n));
}

TEST_CASE("fixed seed gives the same draw") {
    const Gaussian5 g{0, 0, 1, 1, 0.2};
    std::mt19937_64 a(5), b(5);
    const Vec2 x = sample_location(g, a), y = sample_location(g, b);
    CHECK(x.x == y.x);
    CHECK(x.y == y.y);
}

TEST_CASE("constraint map always yields valid Gaussians") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> d(0, 30);
    for (int i = 0; i < 1000; ++i) {
        std::array<Scalar, 5> raw;
        for (auto& r : raw) r = static_cast<Scalar>(d(rng));
        const Gaussian5 g = constrain(std::span<const Scalar, 5>(raw));
        CHECK_NOTHROW(g.validate());
        CHECK(g.covariance_determinant() > 0);
    }
}

TEST_CASE("tensor log density agrees with the scalar one") {
    std::mt19937_64 rng(4);
    std::normal_distribution<double> d(0, 1);
    std::vector<Scalar> raw(2 * 3 * 5), y(2 * 3 * 2);
    for (auto& r : raw) r = static_cast<Scalar>(d(rng));
    for (auto& v : y) v = static_cast<Scalar>(d(rng));
    Tensor lp = gaussian_log_pdf(Tensor::from({2, 3, 2}, y), constrain(Tensor::from({2, 3, 5}, raw)));
    StatsField f{2, 3, raw};
    for (int n = 0; n < 2; ++n)
        for (int t = 0; t < 3; ++t) {
            const size_t i = static_cast<size_t>(n * 3 + t);
            CHECK(lp.data()[i] == doctest::Approx(log_pdf({y[i * 2], y[i * 2 + 1]}, f.at(n, t))).epsilon(1e-5));
        }
}

TEST_CASE("converter output shape and determinism") {
    ModelConfig c;
    ParamStore p;
    std::mt19937_64 rng(1);
    init_converter_params(p, c, rng);
    std::vector<Scalar> fut(3 * 12 * 2);
    for (size_t i = 0; i < fut.size(); ++i) fut[i] = static_cast<Scalar>(0.1 * std::sin(i));
    // rows 0 and 2 identical
    for (size_t i = 0; i < 24; ++i) fut[48 + i] = fut[i];
    Tensor raw = convert_trajectory(Tensor::from({3, 12, 2}, fut), p, c);
    CHECK(raw.shape() == Shape{3, 12, 5});
    for (size_t i = 0; i < 60; ++i) CHECK(raw.data()[i] == raw.data()[120 + i]);
    CHECK(raw.same_values(convert_trajectory(Tensor::from({3, 12, 2}, fut), p, c)));
    const StatsField f = StatsField::from_tensor(raw);
    for (int n = 0; n < 3; ++n)
        for (int t = 0; t < 12; ++t) CHECK_NOTHROW(f.at(n, t).validate());
}

TEST_CASE("normalization identity, inverse and moments") {
    Normalization id;
    Tensor x = Tensor::from({1, 5}, {1, 2, 3, 4, 5});
    CHECK(id.apply(x).same_values(x));

    std::mt19937_64 rng(2);
    std::normal_distribution<double> d(0, 1);
    std::vector<Scalar> rows(5 * 4000);
    for (size_t i = 0; i < rows.size(); ++i) rows[i] = static_cast<Scalar>(3.0 * (i % 5 + 1) * d(rng) - 2.0 * (i % 5));
    const Normalization n = Normalization::fit(rows);
    const auto z = n.apply(rows);
    for (int c = 0; c < 5; ++c) {
        double m = 0, v = 0;
        for (size_t i = c; i < z.size(); i += 5) m += z[i];
        m /= 4000;
        for (size_t i = c; i < z.size(); i += 5) v += (z[i] - m) * (z[i] - m);
        v /= 4000;
        CHECK(std::abs(m) < 0.05);
        CHECK(std::abs(v - 1) < 0.05);
    }
    const auto back = n.invert(z);
    double worst = 0;
    for (size_t i = 0; i < rows.size(); ++i) worst = std::max(worst, std::abs(static_cast<double>(back[i]) - rows[i]) / std::max(1.0, std::abs(static_cast<double>(rows[i]))));
    CHECK(worst < 1e-5);

    Normalization bad;
    bad.scale[2] = 0;
    CHECK_THROWS(bad.apply(x));
}
