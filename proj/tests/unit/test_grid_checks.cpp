#include <algorithm>
#include <set>

#include "doctest.h"
#include "lbe/grid_checks.hpp"

using namespace lbe;

namespace {

GridModel small_grid(double lambda, long samples) {
    ModelParams mp;
    mp.lambda = lambda;
    GridSpec spec;
    spec.samples_per_cell = samples;
    return build_grid_chain(mp, PotentialSpec::cosine(1.0), spec, 31);
}

}  // namespace

TEST_CASE("grid check driver: identities hold on a coarse grid") {
    const GridModel gm = small_grid(0.2, 1000);
    const int mid = mid_energy_cell(gm);
    REQUIRE(mid >= 0);
    CHECK(gm.energy_center(mid) > gm.mino.level);
    CHECK(gm.p_center(mid) > 0.0);

    GridCheckOptions opt;
    opt.n_cycles = 40000;
    opt.visit_runs = 10000;
    const GridCheckReport rep = run_grid_checks(gm, opt);
    for (const auto& c : rep.checks)
        if (c.group != "ergodicity") CHECK_MESSAGE(c.pass, c.group << ": " << c.name << " " << c.value << " vs " << c.target);
    for (const char* g : {"structure", "splitting", "martingale", "continuum"}) CHECK(rep.group_pass(g));
    CHECK_FALSE(rep.group_pass("no_such_group"));

    // splitting: two cycle identities, point-mass difference, covariance, two visit counts, three modulated bounds
    CHECK(std::count_if(rep.checks.begin(), rep.checks.end(), [](const GridCheck& c) { return c.group == "splitting"; }) == 9);
    const auto floor = std::find_if(rep.checks.begin(), rep.checks.end(),
                                    [](const GridCheck& c) { return c.name == "one-step low-set return floor"; });
    REQUIRE(floor != rep.checks.end());
    CHECK(floor->pass == (rep.ergodicity.low_set_return_floor > 0.0));
    CHECK(rep.ergodicity.slem < 1.0);
    CHECK(rep.modulated_gap_min < 0.0);

    const auto j = rep.to_json();
    CHECK(j.at("schema_version") == 1);
    for (const char* f : {"group", "name", "value", "target", "se", "tolerance", "relation", "pass"})
        CHECK(j.at("checks").at(0).contains(f));
    std::set<std::string> names;
    for (const auto& c : rep.checks) names.insert(c.group + c.name);
    CHECK(names.size() == rep.checks.size());

    opt.n_cycles = 10;
    CHECK_THROWS_AS(run_grid_checks(gm, opt), std::invalid_argument);
}

TEST_CASE("fractional moment check across two grids") {
    const GridModel a = small_grid(0.3, 300), b = small_grid(0.15, 300);
    const FracMomentCheck fc = check_fractional_moments({&a, &b}, 0.4, 20000, 5);
    REQUIRE(fc.report.rows.size() == 2);
    CHECK(fc.checks.size() == 4);
    CHECK(fc.checks[0].pass);
    CHECK(fc.checks[1].pass);
    // the exact cycle length grows as lambda shrinks
    CHECK(fc.report.rows[1].exact_mean > fc.report.rows[0].exact_mean);
    CHECK(fc.report.slope_fit.slope < 0.0);
    CHECK(fc.to_json().at("rows").size() == 2);
    CHECK_THROWS_AS(check_fractional_moments({&a}, 0.4, 1000, 5), std::invalid_argument);
}
