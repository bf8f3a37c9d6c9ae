#include <cmath>
#include <vector>

#include "doctest.h"
#include "lbe/kernel.hpp"
#include "oracle.hpp"

using namespace lbe;

namespace {

ModelParams with_lambda(double l) {
    ModelParams mp;
    mp.lambda = l;
    return mp;
}

const std::vector<double> kLambdas{1.0, 0.3, 0.1, 0.03, 0.01};
const std::vector<double> kMomenta{0, 0.5, -0.5, 1, -1, 2, -2, 5, -5, 10, -10, 20, -20, 50, -50};

double rel(double a, double b) { return std::abs(a - b) / std::max(std::abs(b), 1e-300); }

}  // namespace

TEST_CASE("coupling constant gives friction one half") {
    CHECK(kEta == doctest::Approx(std::sqrt(2.0 * M_PI) / 32.0).epsilon(1e-16));
    CHECK(8.0 * kEta * std::sqrt(2.0 / M_PI) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("model parameters are validated") {
    ModelParams mp;
    mp.lambda = -0.1;
    CHECK_THROWS(mp.validate());
    mp.lambda = 1.5;
    CHECK_THROWS(mp.validate());
    mp.lambda = 0.0;
    CHECK_NOTHROW(mp.validate());
}

TEST_CASE("jump rate vanishes without a kick and is even") {
    CHECK(jump_rate(with_lambda(0.5), 0.0, 0.0) == 0.0);
    for (double l : kLambdas)
        for (double p : {-7.0, -1.0, 0.3, 4.0})
            for (double pp : {-5.0, -0.2, 0.0, 2.5, 9.0})
                CHECK(jump_rate(with_lambda(l), p, pp) == doctest::Approx(jump_rate(with_lambda(l), -p, -pp)).epsilon(1e-15));
}

TEST_CASE("jump rate matches the independent formula") {
    for (double l : kLambdas)
        for (double p : {-3.0, 0.0, 6.0})
            for (double pp : {-4.0, 1.0, 7.5})
                CHECK(rel(jump_rate(with_lambda(l), p, pp), oracle::rate(l, p, pp)) < 1e-14);
}

TEST_CASE("weighted detailed balance") {
    for (double l : kLambdas)
        for (double p : {-6.0, -1.5, 0.0, 0.7, 3.0, 12.0})
            for (double pp : {-8.0, -2.0, 0.4, 1.1, 5.0}) {
                const auto mp = with_lambda(l);
                const double lhs = std::exp(-0.5 * l * p * p) * jump_rate(mp, p, pp);
                const double rhs = std::exp(-0.5 * l * pp * pp) * jump_rate(mp, pp, p);
                if (lhs == 0.0 && rhs == 0.0) continue;
                CHECK(rel(lhs, rhs) < 1e-12);
            }
}

TEST_CASE("closed forms agree with the quadrature oracle") {
    for (double l : kLambdas)
        for (double p : kMomenta) {
            const auto mp = with_lambda(l);
            const double e = oracle::against_rate(l, p, [](double) { return 1.0; });
            const double d = oracle::against_rate(l, p, [p](double pp) { return pp - p; });
            const double m2 = oracle::against_rate(l, p, [p](double pp) { return (pp - p) * (pp - p); });
            CHECK(rel(escape_rate(mp, p), e) < 1e-8);
            if (p == 0.0)
                CHECK(std::abs(jump_drift(mp, p)) < 1e-15);
            else
                CHECK(rel(jump_drift(mp, p), d) < 1e-8);
            CHECK(rel(jump_second_moment(mp, p), m2) < 1e-8);
        }
}

TEST_CASE("escape rate anchors") {
    for (double l : {0.0, 0.01, 0.3, 1.0})
        CHECK(std::abs(escape_rate(with_lambda(l), 0.0) - 1.0 / (8.0 * (1.0 + l))) < 1e-15);
    for (double p : {-30.0, -1.0, 0.0, 2.0, 17.0}) {
        CHECK(std::abs(escape_rate(with_lambda(0.0), p) - 0.125) < 1e-15);
        CHECK(rel(oracle::against_rate(0.0, p, [](double) { return 1.0; }), 0.125) < 1e-9);
    }
}

TEST_CASE("escape rate grows with |p|") {
    for (double l : kLambdas) {
        double prev = escape_rate(with_lambda(l), 0.0);
        for (double p = 0.01; p < 60.0; p += 0.01) {
            const double e = escape_rate(with_lambda(l), p);
            CHECK_MESSAGE(e >= prev, "lambda=" << l << " p=" << p);
            prev = e;
        }
    }
}

TEST_CASE("drift anchors") {
    for (double l : kLambdas) CHECK(jump_drift(with_lambda(l), 0.0) == 0.0);
    const double d = oracle::against_rate(0.1, 7.0, [](double pp) { return pp - 7.0; });
    CHECK(rel(jump_drift(with_lambda(0.1), 7.0), d) < 1e-8);
    for (double l : kLambdas)
        for (double p : kMomenta)
            CHECK(jump_drift(with_lambda(l), p) == doctest::Approx(-jump_drift(with_lambda(l), -p)).epsilon(1e-15));
}

TEST_CASE("jump moments") {
    for (double l : kLambdas)
        for (double p : {0.0, 3.0, -12.0}) {
            const auto mp = with_lambda(l);
            CHECK(jump_moment(mp, p, 0) == escape_rate(mp, p));
            CHECK(jump_moment(mp, p, 1) == jump_drift(mp, p));
            for (int m : {3, 4, 6}) {
                const double o = oracle::against_rate(l, p, [p, m](double pp) { return std::pow(pp - p, m); });
                if (std::abs(o) < 1e-12) CHECK(std::abs(jump_moment(mp, p, m)) < 1e-10);
                else CHECK(rel(jump_moment(mp, p, m), o) < 1e-8);
            }
            CHECK(jump_moment(mp, p, 4) == doctest::Approx(jump_moment(mp, -p, 4)).epsilon(1e-9));
        }
    for (double p : {-40.0, -2.0, 0.0, 1.0, 25.0}) CHECK(std::abs(jump_second_moment(with_lambda(0.0), p) - 1.0) < 1e-14);
    CHECK_THROWS(jump_moment(with_lambda(0.1), 1.0, 13));
    CHECK_THROWS(jump_moment(with_lambda(0.1), 1.0, -1));
}

TEST_CASE("q variance anchors and definition") {
    for (double p : {-20.0, 0.0, 3.0, 44.0}) CHECK(std::abs(q_variance(with_lambda(0.0), p) - 1.0) < 1e-12);
    for (double l : kLambdas) CHECK(std::abs(q_variance(with_lambda(l), 0.0) - 1.0 / std::pow(1.0 + l, 3)) < 1e-12);
    for (double l : kLambdas)
        for (double p : kMomenta) {
            const auto mp = with_lambda(l);
            const double def = jump_second_moment(mp, p) - std::pow(jump_drift(mp, p), 2) / escape_rate(mp, p);
            CHECK(rel(q_variance(mp, p), def) < 1e-9);
            CHECK(q_variance(mp, p) > 0.0);
        }
}

TEST_CASE("lambda zero kernel is a convolution") {
    const auto mp = with_lambda(0.0);
    for (double p : {-9.0, -1.0, 0.0, 2.0, 30.0})
        for (double pp : {-10.0, -0.5, 0.0, 1.0, 4.0, 31.0}) {
            const double a = jump_rate(mp, p, pp), b = idealized_rate(pp - p);
            CHECK(std::abs(a - b) <= 1e-12 * std::max(1e-300, std::abs(b)));
        }
}

TEST_CASE("sampler moments") {
    const auto mp = with_lambda(0.1);
    const double p = 5.0;
    Rng rng(derive_seed(11, StreamTag::test, 1));
    const int n = 1000000;
    double s1 = 0, s2 = 0, s11 = 0, s22 = 0;
    long proposals = 0;
    for (int i = 0; i < n; ++i) {
        const double d = sample_jump(mp, p, rng) - p;
        proposals += last_sample_proposals();
        s1 += d;
        s11 += d * d;
        s2 += d * d;
        s22 += d * d * d * d;
    }
    const double m1 = s1 / n, v1 = s11 / n - m1 * m1;
    const double m2 = s2 / n, v2 = s22 / n - m2 * m2;
    const double e = escape_rate(mp, p);
    CHECK(std::abs(m1 - jump_drift(mp, p) / e) < 4.0 * std::sqrt(v1 / n));
    CHECK(std::abs(m2 - jump_second_moment(mp, p) / e) < 4.0 * std::sqrt(v2 / n));
    // expected proposals: 1 + |a| / (2 g(0)) plus slack
    CHECK(static_cast<double>(proposals) / n < 1.0 + 0.5 / (2.0 * 0.3989422804014327) + 0.5);
}

TEST_CASE("sampler is symmetric at rest") {
    const auto mp = with_lambda(0.3);
    Rng rng(derive_seed(12, StreamTag::test, 2));
    const int n = 200000;
    std::vector<double> xs(n);
    double m = 0;
    for (int i = 0; i < n; ++i) { xs[i] = sample_jump(mp, 0.0, rng); m += xs[i]; }
    m /= n;
    double m2 = 0, m3 = 0, m6 = 0;
    for (double x : xs) { m2 += (x - m) * (x - m); m3 += std::pow(x - m, 3); m6 += std::pow(x - m, 6); }
    m2 /= n; m3 /= n; m6 /= n;
    const double skew = m3 / std::pow(m2, 1.5);
    const double skew_se = std::sqrt(m6 / std::pow(m2, 3) / n);
    CHECK(std::abs(skew) < 4.0 * skew_se);
}
