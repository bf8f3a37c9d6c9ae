#include <cmath>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "lbe/potential.hpp"
#include "lbe/rng.hpp"

using namespace lbe;

namespace {

double simpson_force(const PotentialSpec& pot, const std::vector<State>& mesh, double dt) {
    const std::size_t n = mesh.size() - 1;
    const double h = dt / static_cast<double>(n);
    double s = pot.force(mesh.front().x) + pot.force(mesh.back().x);
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * pot.force(mesh[i].x);
    return s * h / 3.0;
}

}  // namespace

TEST_CASE("cosine potential values") {
    const auto pot = PotentialSpec::cosine(1.0);
    CHECK(pot.value(0.0) == 0.0);
    CHECK(pot.value(0.5) == doctest::Approx(1.0).epsilon(1e-15));
    CHECK(pot.force(0.25) == doctest::Approx(std::numbers::pi).epsilon(1e-15));
    CHECK(pot.sup_V() == 1.0);
    CHECK(pot.sup_dV() == doctest::Approx(std::numbers::pi));
    double s = 0.0;
    for (int i = 0; i < 1024; ++i) s += pot.force(i / 1024.0);
    CHECK(std::abs(s / 1024.0) <= 1e-12);
    for (double x : {0.1, 0.37, 0.9}) {
        CHECK(pot.value(x) == doctest::Approx(pot.value(x + 1.0)).epsilon(1e-12));
        CHECK(pot.value(x) >= 0.0);
    }
    CHECK_THROWS(PotentialSpec::cosine(-1.0));
}

TEST_CASE("custom harmonics are shifted to a zero minimum") {
    const auto pot = PotentialSpec::custom({{-0.5, 0.1}, {0.2, -0.3}, {0.05, 0.0}});
    double vmin = 1e300, vmax = -1e300, fmax = 0.0, fsum = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = i / 20000.0;
        vmin = std::min(vmin, pot.value(x));
        vmax = std::max(vmax, pot.value(x));
        fmax = std::max(fmax, std::abs(pot.force(x)));
        fsum += pot.force(x);
    }
    CHECK(vmin >= -1e-12);
    CHECK(vmin < 1e-6);
    CHECK(pot.sup_V() == doctest::Approx(vmax).epsilon(1e-6));
    CHECK(pot.sup_dV() == doctest::Approx(fmax).epsilon(1e-6));
    CHECK(std::abs(fsum / 20000.0) < 1e-12);
    // derivative consistency
    for (double x : {0.13, 0.5, 0.77}) {
        const double d = 1e-6;
        CHECK(pot.force(x) == doctest::Approx((pot.value(x + d) - pot.value(x - d)) / (2 * d)).epsilon(1e-7));
        CHECK(pot.curvature(x) == doctest::Approx((pot.force(x + d) - pot.force(x - d)) / (2 * d)).epsilon(1e-6));
    }
    const auto cos_as_custom = PotentialSpec::custom({{-0.5, 0.0}});
    for (double x : {0.0, 0.2, 0.5, 0.8})
        CHECK(cos_as_custom.value(x) == doctest::Approx(PotentialSpec::cosine(1.0).value(x)).epsilon(1e-12));
}

TEST_CASE("sublevel area") {
    const auto flat = PotentialSpec::cosine(0.0);
    CHECK(flat.sublevel_area(2.0) == doctest::Approx(4.0).epsilon(1e-12));
    const auto pot = PotentialSpec::cosine(1.0);
    // level above the barrier: area = int 2 sqrt(2(l - V))
    double s = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) s += 2.0 * std::sqrt(2.0 * (2.0 - pot.value((i + 0.5) / n)));
    CHECK(pot.sublevel_area(2.0) == doctest::Approx(s / n).epsilon(1e-8));
    CHECK(pot.sublevel_area(0.0) == 0.0);
}

TEST_CASE("wrap_unit") {
    CHECK(wrap_unit(1.25) == doctest::Approx(0.25));
    CHECK(wrap_unit(-0.25) == doctest::Approx(0.75));
    CHECK(wrap_unit(-1e-18) < 1.0);
    CHECK(wrap_unit(3.0) == 0.0);
}

TEST_CASE("flow rejects negative durations") {
    CHECK_THROWS(flow(PotentialSpec::cosine(1.0), {0.0, 1.0}, -1.0));
}

TEST_CASE("flow conserves energy on random segments") {
    const auto pot = PotentialSpec::cosine(1.0);
    Rng rng(derive_seed(3, StreamTag::test, 0));
    for (int k = 0; k < 300; ++k) {
        const State s{rng.uniform(), 8.0 * rng.normal()};
        const double dt = 3.0 * rng.uniform();
        const auto r = flow(pot, s, dt);
        const double h0 = energy(pot, s);
        CHECK(std::abs(energy(pot, r.state) - h0) / std::max(1.0, h0) <= 1e-10);
        CHECK(r.state.x >= 0.0);
        CHECK(r.state.x < 1.0);
        CHECK(r.delta_p == r.state.p - s.p);
    }
    const auto custom = PotentialSpec::custom({{-0.5, 0.1}, {0.2, -0.3}});
    for (int k = 0; k < 100; ++k) {
        const State s{rng.uniform(), 4.0 * rng.normal()};
        const auto r = flow(custom, s, 2.0 * rng.uniform());
        const double h0 = energy(custom, s);
        CHECK(std::abs(energy(custom, r.state) - h0) / std::max(1.0, h0) <= 1e-10);
    }
}

TEST_CASE("flow through turning points") {
    const auto pot = PotentialSpec::cosine(1.0);
    // H = 0.5 sup_V at x = 0
    const State s{0.0, 1.0};
    std::vector<State> mesh;
    const auto r = flow(pot, s, 10.0, {}, &mesh);
    CHECK(std::abs(energy(pot, r.state) - 0.5) <= 1e-10);
    int sign_changes = 0;
    double xmax = 0.0;
    for (std::size_t i = 1; i < mesh.size(); ++i) {
        if ((mesh[i].p > 0) != (mesh[i - 1].p > 0)) ++sign_changes;
        xmax = std::max(xmax, std::abs(mesh[i].x));
        CHECK(std::abs(0.5 * mesh[i].p * mesh[i].p + pot.value(mesh[i].x) - 0.5) <= 1e-10);
    }
    CHECK(sign_changes >= 4);
    CHECK(xmax < 0.5);  // trapped in the well
    CHECK(xmax == doctest::Approx(0.25).epsilon(1e-4));
}

TEST_CASE("flow is time reversible") {
    const auto pot = PotentialSpec::cosine(1.0);
    for (const State s : {State{0.1, 0.7}, State{0.4, -3.0}, State{0.9, 25.0}}) {
        const auto a = flow(pot, s, 2.3);
        const auto b = flow(pot, {a.state.x, -a.state.p}, 2.3);
        double dx = std::abs(b.state.x - s.x);
        dx = std::min(dx, 1.0 - dx);
        CHECK(dx <= 1e-9);
        CHECK(std::abs(-b.state.p - s.p) <= 1e-9);
    }
}

TEST_CASE("flat potential is free motion") {
    const auto pot = PotentialSpec::cosine(0.0);
    const auto r = flow(pot, {0.3, 2.25}, 1.0);
    CHECK(r.state.x == doctest::Approx(0.55).epsilon(1e-14));
    CHECK(r.state.p == 2.25);
    CHECK(r.delta_p == 0.0);
}

TEST_CASE("integrator is sixth order") {
    const auto pot = PotentialSpec::cosine(1.0);
    const State s{0.2, 1.7};
    FlowOptions fine;
    fine.energy_tol = 1e-12;
    fine.step_scale = 0.25;
    const auto ref = flow(pot, s, 1.0, fine);
    std::vector<double> errs, steps;
    for (double scale : {0.125, 0.0625}) {
        FlowOptions o;
        o.energy_tol = 1.0;
        o.step_scale = scale;
        const auto r = flow(pot, s, 1.0, o);
        errs.push_back(std::abs(r.state.p - ref.state.p));
        steps.push_back(static_cast<double>(r.substeps));
    }
    const double order = std::log(errs[0] / errs[1]) / std::log(steps[1] / steps[0]);
    CHECK(order > 5.0);
    CHECK(order < 7.5);
}

TEST_CASE("momentum drift bounds along fast flights") {
    const auto pot = PotentialSpec::cosine(1.0);
    SUBCASE("p stays within 2 supV / p0") {
        for (double dt : {0.01, 0.3, 1.0, 7.0, 40.0}) {
            std::vector<State> mesh;
            flow(pot, {0.0, 10.0}, dt, {}, &mesh);
            for (const auto& m : mesh) CHECK(std::abs(m.p - 10.0) <= 0.2);
        }
    }
    SUBCASE("force integral against the potential difference") {
        for (double p0 : {10.0, 30.0, 100.0})
            for (double t : {1.0, 5.0}) {
                const State s{0.0, p0};
                std::vector<State> mesh;
                const auto r = flow(pot, s, t, {}, &mesh);
                const double fint = simpson_force(pot, mesh, t);
                const double bound = 2.0 * t * pot.sup_dV() * pot.sup_V() / (p0 * p0);
                const double lhs = std::abs(fint - (pot.value(r.state.x) - pot.value(s.x)) / p0);
                CHECK_MESSAGE(lhs <= bound, "p0=" << p0 << " t=" << t);
                // the drift increment is minus the force integral
                const double lhs_d = std::abs(-r.delta_p - (pot.value(r.state.x) - pot.value(s.x)) / p0);
                CHECK(lhs_d <= bound);
                CHECK(std::abs(r.delta_p + fint) <= 1e-2 * bound);
            }
    }
}

TEST_CASE("uniformization at an exponential stop") {
    const auto pot = PotentialSpec::cosine(1.0);
    Rng rng(derive_seed(5, StreamTag::test, 0));
    const int n = 10000;
    const double p0 = 50.0;
    double s = 0.0;
    for (int i = 0; i < n; ++i) {
        const auto r = flow(pot, {0.0, p0}, rng.exponential());
        s += std::cos(2.0 * std::numbers::pi * r.state.x);
    }
    CHECK(std::abs(s / n) <= 1.0 / p0 + 10.0 / (p0 * p0));
}
