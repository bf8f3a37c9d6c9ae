#include <algorithm>
#include <cmath>
#include <filesystem>
#include <numbers>
#include <vector>

#include "doctest.h"
#include "lbe/grid.hpp"
#include "lbe/stats.hpp"

using namespace lbe;

namespace {

GridModel make_grid(double lambda, long samples, std::uint64_t seed) {
    ModelParams mp;
    mp.lambda = lambda;
    GridSpec spec;
    spec.samples_per_cell = samples;
    return build_grid_chain(mp, PotentialSpec::cosine(1.0), spec, seed);
}

// Default spec at lambda = 0.1, shared by most cases.
const GridModel& grid01() {
    static const GridModel gm = make_grid(0.1, GridSpec{}.samples_per_cell, 2024);
    return gm;
}

// Two states whose rows are both nu, so h = 1 is an exact minorization.
GridModel toy_chain() {
    GridModel gm;
    gm.spec.n_x = 1;
    gm.spec.n_p = 2;
    gm.T.resize(2, 2);
    gm.T << 0.4, 0.6, 0.4, 0.6;
    gm.pi = stationary_vector(gm.T);
    gm.mino.low_set = {0, 1};
    gm.mino.nu = Eigen::Vector2d(0.4, 0.6);
    gm.mino.h = Eigen::Vector2d(1.0, 1.0);
    gm.mino.epsilon = 1.0;
    return gm;
}

Eigen::VectorXd indicator(int n, int i) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    g[i] = 1.0;
    return g;
}

// a mid-energy cell: H between the low level and twice it
int mid_cell(const GridModel& gm) {
    for (int i = 0; i < gm.n_cells(); ++i) {
        const double H = gm.energy_center(i);
        if (H > gm.mino.level && H < 2.0 * gm.mino.level && gm.p_center(i) > 0.0) return i;
    }
    return -1;
}

}  // namespace

TEST_CASE("grid geometry") {
    ModelParams mp;
    mp.lambda = 0.1;
    const GridSpec spec;
    const GridModel gm = grid_geometry(mp, PotentialSpec::cosine(1.0), spec);
    REQUIRE(gm.p_edges.size() == static_cast<std::size_t>(spec.n_p + 1));
    CHECK(gm.p_edges.back() == doctest::Approx(12.0 / std::sqrt(0.1)));
    for (std::size_t k = 0; k < gm.p_edges.size(); ++k) {
        CHECK(gm.p_edges[k] == doctest::Approx(-gm.p_edges[gm.p_edges.size() - 1 - k]).epsilon(1e-12));
        if (k > 0) CHECK(gm.p_edges[k] > gm.p_edges[k - 1]);
    }
    // core cells of the declared width around p = 0
    const int half = spec.n_p / 2;
    for (int k = 0; k < 3; ++k) CHECK(gm.p_edges[half + k + 1] - gm.p_edges[half + k] == doctest::Approx(1.0));
    // cell lookup and mirror
    const int i = gm.cell_of(0.3, 1.5);
    CHECK(gm.ix_of(i) == 2);
    CHECK(gm.p_edges[gm.ip_of(i)] <= 1.5);
    CHECK(gm.p_edges[gm.ip_of(i) + 1] > 1.5);
    CHECK(gm.cell_of(-0.3, -1.5) == gm.mirror(i));
    CHECK(gm.cell_of(0.0, 1e6) == gm.cell_index(0, spec.n_p - 1));
    double area = 0.0;
    for (int c = 0; c < gm.n_cells(); ++c) area += gm.measure(c);
    CHECK(area == doctest::Approx(2.0 * gm.p_edges.back()));

    GridSpec bad = spec;
    bad.n_p = 7;
    CHECK_THROWS_AS(grid_geometry(mp, PotentialSpec::cosine(1.0), bad), std::invalid_argument);
    bad = spec;
    bad.n_x = 3;
    CHECK_THROWS_AS(grid_geometry(mp, PotentialSpec::cosine(1.0), bad), std::invalid_argument);
    bad = spec;
    bad.p_max = 2.0;  // low-energy set not interior
    CHECK_THROWS_AS(grid_geometry(mp, PotentialSpec::cosine(1.0), bad), std::invalid_argument);
    mp.lambda = 0.0;
    CHECK_THROWS_AS(grid_geometry(mp, PotentialSpec::cosine(1.0), spec), std::invalid_argument);
}

TEST_CASE("grid chain is row-stochastic with a stationary vector") {
    const GridModel& gm = grid01();
    for (int i = 0; i < gm.n_cells(); ++i) CHECK(std::abs(gm.T.row(i).sum() - 1.0) <= 1e-12);
    CHECK(gm.T.minCoeff() >= 0.0);
    CHECK(gm.pi.minCoeff() >= 0.0);
    CHECK(std::abs(gm.pi.sum() - 1.0) <= 1e-12);
    CHECK(stationary_residual(gm.T, gm.pi) <= 1e-12);
    CHECK(gm.leakage < gm.spec.max_leakage);
    // the cached window integral of one is E[tau] = 1
    const auto& one = gm.observable("one");
    for (int i = 0; i < gm.n_cells(); ++i) CHECK(std::abs(one[i] - 1.0) < 6.0 * gm.ghat_se[0][i]);
}

TEST_CASE("grid chain is mirror symmetric for the cosine potential") {
    const SymmetryCheck sc = mirror_symmetry(grid01());
    MESSAGE("pairs " << sc.pairs << ", max z " << sc.max_z);
    CHECK(sc.pairs > 1000);
    CHECK(sc.over_5 == 0);
}

TEST_CASE("stationary vector against Maxwell-Boltzmann") {
    const GridModel& gm = grid01();
    const Eigen::VectorXd mb = maxwell_boltzmann_cells(gm);
    CHECK(std::abs(mb.sum() - 1.0) < 1e-12);
    const double tv = total_variation(gm.pi, mb);
    MESSAGE("TV(pi, MB) = " << tv);
    CHECK(tv <= 0.05);
}

TEST_CASE("minorization holds exhaustively and residual rows are probabilities") {
    const GridModel& gm = grid01();
    const auto& m = gm.mino;
    CHECK(m.level == doctest::Approx(2.0));
    CHECK(m.epsilon > 0.0);
    CHECK(m.nu.sum() == doctest::Approx(1.0));
    long violations = 0;
    for (int i = 0; i < gm.n_cells(); ++i)
        for (int j = 0; j < gm.n_cells(); ++j)
            if (gm.T(i, j) < m.h[i] * m.nu[j]) ++violations;
    CHECK(violations == 0);
    for (int i = 0; i < gm.n_cells(); ++i) {
        const bool low = std::find(m.low_set.begin(), m.low_set.end(), i) != m.low_set.end();
        CHECK((m.h[i] > 0.0) == low);
        CHECK((m.nu[i] > 0.0) == low);
        if (m.h[i] == 0.0) continue;
        const Eigen::VectorXd r = residual_row(gm, i);
        CHECK(r.minCoeff() >= 0.0);
        CHECK(std::abs(r.sum() - 1.0) <= 1e-12);
    }
}

TEST_CASE("minorization constant is positive across lambda and stable under refinement") {
    for (double lambda : {0.3, 0.03}) {
        const GridModel gm = make_grid(lambda, GridSpec{}.samples_per_cell, 77);
        MESSAGE("lambda " << lambda << ": epsilon " << gm.mino.epsilon);
        CHECK(gm.mino.epsilon > 0.0);
    }
    const double fine = grid01().mino.epsilon;
    const double coarse = make_grid(0.1, GridSpec{}.samples_per_cell / 4, 2024).mino.epsilon;
    MESSAGE("epsilon " << coarse << " -> " << fine << " under 4x samples");
    CHECK(std::abs(fine - coarse) / fine < 0.25);
}

TEST_CASE("zero transition estimates in the low block are rejected") {
    GridModel gm = grid01();
    gm.T(gm.mino.low_set.front(), gm.mino.low_set.back()) = 0.0;
    CHECK_THROWS_AS(minorization(gm), std::runtime_error);
}

TEST_CASE("degenerate atom: every cycle has length one") {
    const GridModel gm = toy_chain();
    Rng rng(1);
    const auto cycles = split_cycle_sampler(gm, 1000, rng, {Eigen::Vector2d(1.0, 1.0)});
    for (const auto& c : cycles) {
        CHECK(c.n_tilde_1 == 0);
        CHECK(c.sums[0] == 1.0);
    }
}

TEST_CASE("cycle length and occupation match the stationary identities") {
    const GridModel& gm = grid01();
    const double pih = gm.pi.dot(gm.mino.h);
    const int j = mid_cell(gm);
    REQUIRE(j >= 0);
    Rng rng(derive_seed(5, StreamTag::test, 1));
    const auto cycles = split_cycle_sampler(gm, 100000, rng, {indicator(gm.n_cells(), j)});
    std::vector<double> len, occ;
    for (const auto& c : cycles) {
        len.push_back(static_cast<double>(c.n_tilde_1) + 1.0);
        occ.push_back(c.sums[0]);
    }
    const MeanSE l = mean_se(len), o = mean_se(occ);
    MESSAGE("cycle length " << l.mean << " +- " << l.se << " vs " << 1.0 / pih);
    CHECK(std::abs(l.mean - 1.0 / pih) < 4.0 * l.se);
    MESSAGE("cell occupation " << o.mean << " +- " << o.se << " vs " << gm.pi[j] / pih);
    CHECK(std::abs(o.mean - gm.pi[j] / pih) < 4.0 * o.se);
}

TEST_CASE("reduced resolvent") {
    const GridModel& gm = grid01();
    const Eigen::VectorXd zero = Eigen::VectorXd::Zero(gm.n_cells());
    CHECK(chain_reduced_resolvent(gm, zero).cwiseAbs().maxCoeff() == 0.0);
    for (const auto& name : gm.ghat_names) {
        const Eigen::VectorXd& g = gm.observable(name);
        const Eigen::VectorXd u = chain_reduced_resolvent(gm, g);
        CHECK(reduced_resolvent_residual(gm, g, u) <= 1e-10);
        CHECK(std::abs(gm.pi.dot(u)) <= 1e-10 * (1.0 + u.cwiseAbs().maxCoeff()));
    }
    // odd observable of an odd-symmetric chain: u is odd under the mirror
    const Eigen::VectorXd u = chain_reduced_resolvent(gm, gm.observable("p"));
    CHECK(std::abs(u[0] + u[gm.mirror(0)]) < 0.2 * std::abs(u[0]));

    GridModel split = grid01();
    split.T = Eigen::MatrixXd::Identity(gm.n_cells(), gm.n_cells());
    CHECK_THROWS_AS(chain_reduced_resolvent(split, gm.observable("p2")), std::runtime_error);
}

TEST_CASE("cycle sums from a point mass differ by the reduced resolvent") {
    const GridModel& gm = grid01();
    const Eigen::VectorXd& g = gm.observable("p2");
    const Eigen::VectorXd r = g - Eigen::VectorXd::Constant(g.size(), gm.pi.dot(g));
    const Eigen::VectorXd u = chain_reduced_resolvent(gm, g);
    const int s1 = gm.mino.low_set.front();
    const int s2 = mid_cell(gm);
    Rng rng(derive_seed(5, StreamTag::test, 2));
    std::vector<double> a, b;
    for (const auto& c : split_cycle_sampler(gm, 100000, rng, {r}, s1)) a.push_back(c.sums[0]);
    for (const auto& c : split_cycle_sampler(gm, 100000, rng, {r}, s2)) b.push_back(c.sums[0]);
    const MeanSE ma = mean_se(a), mb = mean_se(b);
    const double diff = ma.mean - mb.mean, se = std::hypot(ma.se, mb.se);
    MESSAGE("difference " << diff << " +- " << se << " vs " << u[s1] - u[s2]);
    CHECK(std::abs(diff - (u[s1] - u[s2])) < 4.0 * se);
    // the point-mass cycle sum itself is u - nu(u)
    const double nu_u = gm.mino.nu.dot(u);
    CHECK(std::abs(ma.mean - (u[s1] - nu_u)) < 4.0 * ma.se);
}

TEST_CASE("cycle covariance matches the stationary resolvent pairing") {
    const GridModel& gm = grid01();
    const Eigen::VectorXd& g = gm.observable("p2");
    const Eigen::VectorXd r = g - Eigen::VectorXd::Constant(g.size(), gm.pi.dot(g));
    const Eigen::VectorXd u = chain_reduced_resolvent(gm, g);
    const double target = gm.pi.dot(r.cwiseProduct(u)) / gm.pi.dot(gm.mino.h);
    Rng rng(derive_seed(5, StreamTag::test, 3));
    const auto cycles = split_cycle_sampler(gm, 200000, rng, {r});
    std::vector<double> q;
    for (std::size_t k = 0; k + 1 < cycles.size(); k += 2)
        q.push_back(cycles[k].ordered[0] + cycles[k].sums[0] * cycles[k + 1].sums[0]);
    const MeanSE m = mean_se(q);
    MESSAGE("cycle covariance " << m.mean << " +- " << m.se << " vs " << target);
    CHECK(std::abs(m.mean - target) < 4.0 * m.se);
}

TEST_CASE("expected atom visits") {
    const GridModel& gm = grid01();
    for (int s : {gm.mino.low_set.front(), 0}) {
        Rng rng(derive_seed(5, StreamTag::test, 4 + static_cast<std::uint64_t>(s)));
        const MeanSE m = mean_se(atom_visit_counts(gm, s, 200, 20000, rng));
        const double exact = expected_atom_visits(gm, s, 200);
        MESSAGE("start " << s << ": " << m.mean << " +- " << m.se << " vs " << exact);
        CHECK(std::abs(m.mean - exact) < 4.0 * m.se);
    }
}

TEST_CASE("state-modulated resolvent") {
    const GridModel& gm = grid01();
    const int n = gm.n_cells();
    const Eigen::VectorXd& g = gm.observable("low");
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(n);
    CHECK((state_modulated_resolvent(gm, g, ones) - gm.T * g).cwiseAbs().maxCoeff() <= 1e-14);

    const Eigen::VectorXd h = Eigen::VectorXd::Constant(n, 0.05) + gm.mino.h;
    const Eigen::VectorXd direct = state_modulated_resolvent(gm, g, h);
    Eigen::VectorXd term = gm.T * g, series = term;
    const Eigen::VectorXd keep = ones - h;
    for (int k = 1; k < 1000; ++k) {
        term = gm.T * keep.cwiseProduct(term);
        series += term;
    }
    CHECK((direct - series).cwiseAbs().maxCoeff() <= 1e-8);

    CHECK(modulated_spectral_radius(gm.T, gm.mino.h) < 1.0);
    CHECK(modulated_spectral_radius(gm.T, Eigen::VectorXd::Constant(n, 0.1)) == doctest::Approx(0.9));
    CHECK_THROWS_AS(state_modulated_resolvent(gm, g, Eigen::VectorXd::Zero(n)), std::runtime_error);
}

TEST_CASE("state-modulated resolvent bounds the split first cycle") {
    const GridModel& gm = grid01();
    const Eigen::VectorXd& g = gm.observable("low");
    const Eigen::VectorXd U = state_modulated_resolvent(gm, g, gm.mino.h);
    const Eigen::VectorXd exact = split_first_cycle_sum(gm, g);
    const Eigen::VectorXd gap = U - exact;
    MESSAGE("min over cells of U g - exact split sum: " << gap.minCoeff() << " (U up to " << U.maxCoeff() << ")");
    for (int s : {gm.mino.low_set.front(), mid_cell(gm), 0}) {
        Rng rng(derive_seed(5, StreamTag::test, 100 + static_cast<std::uint64_t>(s)));
        std::vector<double> tail;
        for (const auto& c : split_cycle_sampler(gm, 100000, rng, {g}, s)) tail.push_back(c.sums[0] - g[s]);
        const MeanSE m = mean_se(tail);
        MESSAGE("cell " << s << ": U g = " << U[s] << ", sampled " << m.mean << " +- " << m.se << ", exact "
                        << exact[s]);
        CHECK(std::abs(m.mean - exact[s]) < 4.0 * m.se);
        CHECK(U[s] >= m.mean - 4.0 * m.se);
    }
}

TEST_CASE("life-cycle martingale increments") {
    const GridModel& gm = grid01();
    Rng rng(derive_seed(5, StreamTag::test, 6));
    const LifecycleReport rep = lifecycle_martingale_check(gm, gm.observable("p2"), 100000, rng);
    MESSAGE("increment mean " << rep.increment.mean << " +- " << rep.increment.se << ", upsilon " << rep.upsilon);
    CHECK(std::abs(rep.increment.mean) < 4.0 * rep.increment.se);
    const double v1 = rep.block_var_per_cycle[0], s1 = rep.block_var_se[0];
    for (std::size_t k = 1; k < rep.block_sizes.size(); ++k) {
        const double d = rep.block_var_per_cycle[k] - v1;
        CHECK(std::abs(d) < 3.0 * std::hypot(rep.block_var_se[k], s1));
    }
    Rng rng0(1);
    const LifecycleReport zero = lifecycle_martingale_check(gm, Eigen::VectorXd::Zero(gm.n_cells()), 1000, rng0);
    CHECK(zero.all_zero);
}

TEST_CASE("fractional moment report on one grid") {
    const GridModel& gm = grid01();
    const FracMomentReport rep = fractional_moment_report({&gm}, 0.4, 50000, 9);
    REQUIRE(rep.rows.size() == 1);
    const auto& row = rep.rows[0];
    CHECK(row.exact_mean == doctest::Approx(1.0 / gm.pi.dot(gm.mino.h) - 1.0));
    CHECK(std::abs(row.sampled_plus_one.mean - (row.exact_mean + 1.0)) < 4.0 * row.sampled_plus_one.se);
    CHECK(row.frac_moment.mean > 0.0);
    CHECK_THROWS_AS(fractional_moment_report({&gm}, 0.5, 10, 1), std::invalid_argument);
}

TEST_CASE("ergodicity diagnostics") {
    const GridModel& gm = grid01();
    const ErgodicityReport er = ergodicity_report(gm);
    MESSAGE("slem " << er.slem << ", TV rate " << er.tv_decay_rate << " vs " << er.spectral_rate
                    << ", one-step return floor " << er.low_set_return_floor << ", " << er.return_steps
                    << "-step floor " << er.return_floor_n);
    CHECK(er.slem < 1.0);
    CHECK(std::abs(er.tv_decay_rate - er.spectral_rate) <= 0.3 * er.spectral_rate);
    CHECK(er.tv_curve.front() == doctest::Approx(1.0).epsilon(1e-3));
    CHECK(er.return_steps > 0);
    CHECK(er.return_floor_n > 0.0);
}

TEST_CASE("grid files round-trip") {
    const GridModel& gm = grid01();
    const auto dir = std::filesystem::temp_directory_path() / "lbe_grid_roundtrip";
    std::filesystem::remove_all(dir);
    save_grid(gm, dir.string());
    const GridModel back = load_grid(dir.string());
    CHECK(back.T == gm.T);
    CHECK(back.T_se == gm.T_se);
    CHECK(back.pi == gm.pi);
    CHECK(back.mino.h == gm.mino.h);
    CHECK(back.mino.nu == gm.mino.nu);
    CHECK(back.mino.low_set == gm.mino.low_set);
    CHECK(back.mino.epsilon == gm.mino.epsilon);
    CHECK(back.p_edges == gm.p_edges);
    CHECK(back.ghat_names == gm.ghat_names);
    for (std::size_t k = 0; k < gm.ghat.size(); ++k) CHECK(back.ghat[k] == gm.ghat[k]);
    std::filesystem::remove_all(dir);
}

TEST_CASE("grid build is independent of the worker count") {
    ModelParams mp;
    mp.lambda = 0.2;
    GridSpec spec;
    spec.samples_per_cell = 40;
    const GridModel a = estimate_grid_chain(mp, PotentialSpec::cosine(1.0), spec, 3, 1);
    const GridModel b = estimate_grid_chain(mp, PotentialSpec::cosine(1.0), spec, 3, 4);
    CHECK(a.T == b.T);
    CHECK(a.ghat[2] == b.ghat[2]);
}
