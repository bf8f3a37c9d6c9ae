#include <cmath>
#include <vector>

#include "doctest.h"
#include "lbe/energy.hpp"
#include "lbe/kernel.hpp"
#include "lbe/rng.hpp"
#include "oracle.hpp"

using namespace lbe;

namespace {

ModelParams with_lambda(double l) {
    ModelParams mp;
    mp.lambda = l;
    return mp;
}

double close(double a, double b, double abs_floor) { return std::abs(a - b) <= 1e-7 * std::max(std::abs(b), abs_floor); }

}  // namespace

TEST_CASE("energy functionals agree with the quadrature oracle") {
    const auto pot = PotentialSpec::cosine(1.0);
    for (double l : {0.3, 0.1, 0.01})
        for (double x : {0.0, 0.2, 0.5})
            for (double p : {0.0, 0.4, -1.3, 3.0, -12.0, 35.0}) {
                const auto mp = with_lambda(l);
                const double v = pot.value(x);
                auto root = [v](double pp) { return std::sqrt(0.5 * pp * pp + v); };
                const double rh = root(p);
                const std::vector<double> kinks{0.0, p, -p};
                const double a = oracle::against_rate(l, p, [&](double pp) { return std::sqrt(2.0) * (root(pp) - rh); }, kinks);
                const double e = oracle::against_rate(l, p, [](double) { return 1.0; });
                for (int n : {1, 2}) {
                    const auto ef = energy_functionals(mp, pot, x, p, n);
                    const double vn = oracle::against_rate(
                        l, p, [&](double pp) { return std::pow(std::sqrt(2.0) * (root(pp) - rh) - a / e, 2 * n); }, kinks);
                    const double kn = oracle::against_rate(l, p, [&](double pp) { return std::pow(std::abs(root(pp) - rh), n); }, kinks);
                    const double ks = oracle::against_rate(
                        l, p, [&](double pp) { return std::abs(pp) > std::abs(p) ? std::pow(std::abs(root(pp) - rh), n) : 0.0; },
                        kinks);
                    CHECK_MESSAGE(close(ef.A, a, 1e-8), "l=" << l << " x=" << x << " p=" << p);
                    CHECK(close(ef.V_n, vn, 1e-10));
                    CHECK(close(ef.K_n, kn, 1e-10));
                    CHECK(close(ef.K_star_n, ks, 1e-10));
                    CHECK(ef.A_plus - ef.A_minus == ef.A);
                    CHECK(ef.A_plus >= 0.0);
                    CHECK(ef.A_minus >= 0.0);
                    CHECK(ef.K_star_n <= ef.K_n * (1 + 1e-12));
                }
            }
}

TEST_CASE("energy functionals respect the symmetries of the cosine potential") {
    const auto pot = PotentialSpec::cosine(1.0);
    const auto mp = with_lambda(0.1);
    for (double x : {0.1, 0.3})
        for (double p : {0.5, 4.0}) {
            const auto a = energy_functionals(mp, pot, x, p, 1);
            const auto b = energy_functionals(mp, pot, x, -p, 1);
            const auto c = energy_functionals(mp, pot, 1.0 - x, p, 1);
            CHECK(a.A == doctest::Approx(b.A).epsilon(1e-9));
            CHECK(a.V_n == doctest::Approx(b.V_n).epsilon(1e-9));
            CHECK(a.A == doctest::Approx(c.A).epsilon(1e-9));
        }
}

TEST_CASE("flat potential: drift of |p| is independent of position") {
    const auto pot = PotentialSpec::cosine(0.0);
    const auto mp = with_lambda(0.05);
    for (double p : {0.0, 2.0, 9.0}) {
        const auto a = energy_functionals(mp, pot, 0.0, p, 1);
        const auto b = energy_functionals(mp, pot, 0.7, p, 1);
        CHECK(a.A == doctest::Approx(b.A).epsilon(1e-12));
        const double o = oracle::against_rate(0.05, p, [p](double pp) { return std::abs(pp) - std::abs(p); }, {0.0});
        CHECK(close(a.A, o, 1e-8));
    }
}

TEST_CASE("energy functionals reject bad orders") {
    CHECK_THROWS(energy_functionals(with_lambda(0.1), PotentialSpec::cosine(1.0), 0.0, 1.0, 0));
    CHECK_THROWS(energy_functionals(with_lambda(0.1), PotentialSpec::cosine(1.0), 0.0, 1.0, 5));
}

TEST_CASE("energy table interpolation") {
    const auto pot = PotentialSpec::cosine(1.0);
    const auto mp = with_lambda(0.1);
    const EnergyTable tab(mp, pot, 30.0);
    CHECK(tab.p_max() == 30.0);
    Rng rng(derive_seed(9, StreamTag::test, 0));
    double worst = 0.0;
    for (int i = 0; i < 400; ++i) {
        const double x = rng.uniform();
        const double p = (i % 2 ? 3.0 : 25.0) * (2.0 * rng.uniform() - 1.0);
        const auto ef = energy_functionals(mp, pot, x, p, 1);
        worst = std::max(worst, std::abs(tab.A(x, p) - ef.A));
        CHECK(std::abs(tab.V(x, p) - ef.V_n) <= 1e-3 * std::max(1.0, ef.V_n));
        CHECK(tab.A_plus(x, p) - tab.A_minus(x, p) == doctest::Approx(tab.A(x, p)));
    }
    MESSAGE("worst table error in A: " << worst);
    CHECK(worst <= 1e-4);
    CHECK(tab.A(1.0 + 0.3, 2.0) == doctest::Approx(tab.A(0.3, 2.0)).epsilon(1e-12));
}
