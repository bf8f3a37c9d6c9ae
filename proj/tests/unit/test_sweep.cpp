#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"
#include "lbe/sweep.hpp"
#include "oracle.hpp"

using namespace lbe;

namespace {

// integral over p of max(A, 0) for V = 0, with A from the oracle rate
double flat_drift_plus_oracle(double lambda) {
    auto a = [&](double p) {
        return oracle::against_rate(lambda, p, [p](double pp) { return std::abs(pp) - std::abs(p); }, {0.0, -p});
    };
    // A decreases through zero once on p > 0; bisect for the crossing
    double lo = 0.0, hi = 1.0;
    while (a(hi) > 0.0) hi *= 2.0;
    for (int k = 0; k < 200 && hi - lo > 1e-13; ++k) {
        const double mid = 0.5 * (lo + hi);
        (a(mid) > 0.0 ? lo : hi) = mid;
    }
    return 2.0 * oracle::qagp(a, {0.0, 0.5 * (lo + hi)}, 1e-10);
}

}  // namespace

TEST_CASE("sweep items have unique ids and unknown ids are rejected") {
    const auto& ids = sweep_item_ids();
    CHECK(ids.size() == 37);
    CHECK(std::set<std::string>(ids.begin(), ids.end()).size() == ids.size());
    SweepOptions o;
    o.only = {"no_such_item"};
    CHECK_THROWS(run_inequality_sweeps(o));
    o.only = {};
    o.density = 2;
    CHECK_THROWS(run_inequality_sweeps(o));
}

TEST_CASE("kernel inequality sweeps pass with stable constants") {
    SweepOptions o;
    o.only = {"escape_floor", "escape_growth", "escape_linear", "drift_linear", "drift_escape", "qvar_linear",
              "qvar_floor", "qvar_escape", "even_moment_m1", "even_moment_m2", "even_moment_m3",
              "overshoot_inside_m1", "overshoot_inside_m2", "overshoot_outside_m1", "overshoot_outside_m2"};
    const auto rep = run_inequality_sweeps(o);
    REQUIRE(rep.items.size() == o.only.size());
    for (const auto& it : rep.items) {
        CHECK_MESSAGE(it.pass, it.id << ": " << it.reason << " C " << it.constant_refined << " drift " << it.drift);
        CHECK(it.n_points > 0);
        CHECK(it.n_skipped < it.n_points);
    }
    // the escape floor is attained at p = 0
    CHECK(rep.items[0].constant_refined == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(rep.pass);
}

TEST_CASE("energy-functional sweeps pass on a coarse grid") {
    SweepOptions o;
    o.density = 10;
    for (const auto& id : sweep_item_ids())
        if (id.find("moment_n") != std::string::npos || id.find("variance") != std::string::npos ||
            id.find("drift_minus") != std::string::npos || id == "drift_plus_decay" || id == "drift_over_escape" ||
            id == "k2_window")
            o.only.push_back(id);
    const auto rep = run_inequality_sweeps(o);
    CHECK(rep.items.size() == 21);
    for (const auto& it : rep.items) CHECK_MESSAGE(it.pass, it.id << ": " << it.reason << " drift " << it.drift);
    const auto j = rep.to_json();
    CHECK(j.at("schema_version") == 1);
    for (const char* f : {"id", "statement", "kind", "constant", "constant_refined", "drift", "at", "n_points", "pass"})
        CHECK(j.at("items").at(0).contains(f));
}

TEST_CASE("integrated A+ matches an independent quadrature for a flat potential") {
    for (double l : {0.3, 0.1}) {
        ModelParams mp;
        mp.lambda = l;
        const double got = integrated_drift_plus(mp, PotentialSpec::cosine(0.0), 1e-9, 0.05);
        CHECK(got == doctest::Approx(flat_drift_plus_oracle(l)).epsilon(1e-7));
    }
    ModelParams a, b;
    a.lambda = 0.1;
    b.lambda = 0.01;
    const double ia = integrated_drift_plus(a, PotentialSpec::cosine(0.0), 1e-7, 0.1);
    const double ib = integrated_drift_plus(b, PotentialSpec::cosine(0.0), 1e-7, 0.1);
    CHECK(std::abs(ib - 1.0) < std::abs(ia - 1.0));
    CHECK(ib < 1.0);
}
