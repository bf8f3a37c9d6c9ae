#include "lbe/grid_checks.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace lbe {

using nlohmann::json;

namespace {

GridCheck exact_le(std::string group, std::string name, double value, double target) {
    return {std::move(group), std::move(name), value, target, 0.0, 0.0, "<=", value <= target};
}

GridCheck exact_ge(std::string group, std::string name, double value, double target) {
    return {std::move(group), std::move(name), value, target, 0.0, 0.0, ">=", value >= target};
}

GridCheck within(std::string group, std::string name, const MeanSE& m, double target, double n_sigma) {
    const double tol = n_sigma * m.se;
    return {std::move(group), std::move(name), m.mean, target, m.se, tol, "==", std::abs(m.mean - target) <= tol};
}

Eigen::VectorXd indicator(int n, int i) {
    Eigen::VectorXd g = Eigen::VectorXd::Zero(n);
    g[i] = 1.0;
    return g;
}

bool mirror_even(const PotentialSpec& pot) {
    for (double x : {0.1, 0.23, 0.37, 0.41})
        if (std::abs(pot.value(x) - pot.value(1.0 - x)) > 1e-12) return false;
    return true;
}

}  // namespace

json grid_check_to_json(const GridCheck& c) {
    return {{"group", c.group},         {"name", c.name}, {"value", c.value},       {"target", c.target},
            {"se", c.se},               {"tolerance", c.tolerance}, {"relation", c.relation}, {"pass", c.pass}};
}

int mid_energy_cell(const GridModel& gm) {
    for (int i = 0; i < gm.n_cells(); ++i) {
        const double H = gm.energy_center(i);
        if (H > gm.mino.level && H < 2.0 * gm.mino.level && gm.p_center(i) > 0.0) return i;
    }
    return -1;
}

bool GridCheckReport::group_pass(const std::string& group) const {
    bool any = false;
    for (const auto& c : checks)
        if (c.group == group) {
            any = true;
            if (!c.pass) return false;
        }
    return any;
}

json GridCheckReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["checks"] = json::array();
    for (const auto& c : checks) j["checks"].push_back(grid_check_to_json(c));
    j["ergodicity"] = {{"slem", ergodicity.slem},
                       {"spectral_rate", ergodicity.spectral_rate},
                       {"tv_decay_rate", ergodicity.tv_decay_rate},
                       {"low_set_return_floor", ergodicity.low_set_return_floor},
                       {"return_steps", ergodicity.return_steps},
                       {"return_floor_n", ergodicity.return_floor_n},
                       {"tv_starts", ergodicity.tv_starts}};
    j["modulated_gap_min"] = modulated_gap_min;
    j["pass"] = pass;
    return j;
}

GridCheckReport run_grid_checks(const GridModel& gm, const GridCheckOptions& opt) {
    if (opt.n_cycles < 100 || opt.visit_runs < 100 || opt.visit_steps < 1)
        throw std::invalid_argument("grid checks need at least 100 cycles and runs");
    GridCheckReport rep;
    auto& out = rep.checks;
    const int n = gm.n_cells();
    const double ns = opt.n_sigma;
    auto rng_for = [&](std::uint64_t k) { return Rng(derive_seed(opt.seed, StreamTag::cycles, k)); };

    // structure
    double row_err = 0.0, min_entry = std::numeric_limits<double>::infinity(), mino_gap = min_entry;
    for (int i = 0; i < n; ++i) {
        row_err = std::max(row_err, std::abs(gm.T.row(i).sum() - 1.0));
        for (int j = 0; j < n; ++j) {
            min_entry = std::min(min_entry, gm.T(i, j));
            mino_gap = std::min(mino_gap, gm.T(i, j) - gm.mino.h[i] * gm.mino.nu[j]);
        }
    }
    out.push_back(exact_le("structure", "max |row sum - 1|", row_err, 1e-12));
    out.push_back(exact_ge("structure", "min transition entry", min_entry, 0.0));
    out.push_back(exact_ge("structure", "min of T[i,j] - h[i] nu[j]", mino_gap, 0.0));
    out.push_back(exact_le("structure", "stationary residual", stationary_residual(gm.T, gm.pi), 1e-12));
    out.push_back(exact_ge("structure", "min stationary weight", gm.pi.minCoeff(), 0.0));
    double res_min = std::numeric_limits<double>::infinity(), res_sum = 0.0;
    for (int i = 0; i < n; ++i)
        if (gm.mino.h[i] > 0.0) {
            const Eigen::VectorXd r = residual_row(gm, i);
            res_min = std::min(res_min, r.minCoeff());
            res_sum = std::max(res_sum, std::abs(r.sum() - 1.0));
        }
    out.push_back(exact_ge("structure", "min residual-row entry", res_min, 0.0));
    out.push_back(exact_le("structure", "max |residual-row sum - 1|", res_sum, 1e-12));
    double rr = 0.0;
    for (const auto& name : gm.ghat_names) {
        const Eigen::VectorXd& g = gm.observable(name);
        rr = std::max(rr, reduced_resolvent_residual(gm, g, chain_reduced_resolvent(gm, g)));
    }
    out.push_back(exact_le("structure", "max reduced-resolvent residual", rr, 1e-10));
    out.push_back(exact_le("structure", "stationary leakage", gm.leakage, gm.spec.max_leakage));
    if (gm.potential.shape() == PotentialShape::cosine || mirror_even(gm.potential))
        out.push_back(exact_le("structure", "mirror pairs beyond 5 se", static_cast<double>(mirror_symmetry(gm).over_5), 0.0));
    out.push_back(exact_le("continuum", "TV(pi, Maxwell-Boltzmann)", total_variation(gm.pi, maxwell_boltzmann_cells(gm)), 0.05));

    // splitting identities
    const double pih = gm.pi.dot(gm.mino.h);
    const int mid = mid_energy_cell(gm);
    if (mid < 0) throw std::runtime_error("grid has no mid-energy cell");
    const int low0 = gm.mino.low_set.front();
    {
        Rng rng = rng_for(1);
        const auto cycles = split_cycle_sampler(gm, opt.n_cycles, rng, {indicator(n, mid)});
        std::vector<double> len, occ;
        for (const auto& c : cycles) {
            len.push_back(static_cast<double>(c.n_tilde_1) + 1.0);
            occ.push_back(c.sums[0]);
        }
        out.push_back(within("splitting", "cycle length vs 1/pi(h)", mean_se(len), 1.0 / pih, ns));
        out.push_back(within("splitting", "cycle occupation of a mid-energy cell vs pi(g)/pi(h)", mean_se(occ),
                             gm.pi[mid] / pih, ns));
    }
    const Eigen::VectorXd& g2 = gm.observable("p2");
    const Eigen::VectorXd r2 = g2 - Eigen::VectorXd::Constant(n, gm.pi.dot(g2));
    const Eigen::VectorXd u2 = chain_reduced_resolvent(gm, g2);
    {
        Rng rng = rng_for(2);
        std::vector<double> a, b;
        for (const auto& c : split_cycle_sampler(gm, opt.n_cycles, rng, {r2}, low0)) a.push_back(c.sums[0]);
        for (const auto& c : split_cycle_sampler(gm, opt.n_cycles, rng, {r2}, mid)) b.push_back(c.sums[0]);
        const MeanSE ma = mean_se(a), mb = mean_se(b);
        MeanSE d;
        d.mean = ma.mean - mb.mean;
        d.se = std::hypot(ma.se, mb.se);
        d.n = ma.n;
        out.push_back(within("splitting", "point-mass cycle-sum difference vs u(s1) - u(s2)", d, u2[low0] - u2[mid], ns));
    }
    {
        Rng rng = rng_for(3);
        const auto cycles = split_cycle_sampler(gm, 2 * opt.n_cycles, rng, {r2});
        std::vector<double> q;
        for (std::size_t k = 0; k + 1 < cycles.size(); k += 2)
            q.push_back(cycles[k].ordered[0] + cycles[k].sums[0] * cycles[k + 1].sums[0]);
        out.push_back(within("splitting", "cycle covariance vs pi(g u)/pi(h)", mean_se(q),
                             gm.pi.dot(r2.cwiseProduct(u2)) / pih, ns));
    }
    for (int s : {low0, 0}) {
        Rng rng = rng_for(4 + static_cast<std::uint64_t>(s));
        const MeanSE m = mean_se(atom_visit_counts(gm, s, opt.visit_steps, opt.visit_runs, rng));
        out.push_back(within("splitting", "atom visits from cell " + std::to_string(s) + " vs sum of T^n h", m,
                             expected_atom_visits(gm, s, opt.visit_steps), ns));
    }
    {
        const Eigen::VectorXd& g = gm.observable("low");
        const Eigen::VectorXd U = state_modulated_resolvent(gm, g, gm.mino.h);
        rep.modulated_gap_min = (U - split_first_cycle_sum(gm, g)).minCoeff();
        for (int s : {low0, mid, 0}) {
            Rng rng = rng_for(100 + static_cast<std::uint64_t>(s));
            std::vector<double> tail;
            for (const auto& c : split_cycle_sampler(gm, opt.n_cycles, rng, {g}, s)) tail.push_back(c.sums[0] - g[s]);
            const MeanSE m = mean_se(tail);
            const double tol = ns * m.se;
            out.push_back({"splitting", "modulated resolvent at cell " + std::to_string(s) + " >= split first-cycle sum",
                           U[s], m.mean, m.se, tol, ">=", U[s] >= m.mean - tol});
        }
    }

    // life-cycle martingale
    {
        Rng rng = rng_for(6);
        const LifecycleReport lc = lifecycle_martingale_check(gm, g2, opt.n_cycles, rng);
        out.push_back(within("martingale", "mean cycle increment", lc.increment, 0.0, ns));
        for (std::size_t k = 1; k < lc.block_sizes.size(); ++k) {
            const double se = std::hypot(lc.block_var_se[k], lc.block_var_se[0]);
            const double d = lc.block_var_per_cycle[k] - lc.block_var_per_cycle[0];
            out.push_back({"martingale", "block variance per cycle, size " + std::to_string(lc.block_sizes[k]),
                           lc.block_var_per_cycle[k], lc.block_var_per_cycle[0], se, 3.0 * se, "==",
                           std::abs(d) <= 3.0 * se});
        }
    }

    // ergodicity
    rep.ergodicity = ergodicity_report(gm);
    const auto& er = rep.ergodicity;
    out.push_back({"ergodicity", "second-largest eigenvalue modulus", er.slem, 1.0, 0.0, 0.0, "<", er.slem < 1.0});
    out.push_back({"ergodicity", "one-step low-set return floor", er.low_set_return_floor, 0.0, 0.0, 0.0, ">",
                   er.low_set_return_floor > 0.0});
    const double rate_tol = 0.3 * er.spectral_rate;
    out.push_back({"ergodicity", "TV decay rate vs -log slem", er.tv_decay_rate, er.spectral_rate, 0.0, rate_tol, "==",
                   std::abs(er.tv_decay_rate - er.spectral_rate) <= rate_tol});

    rep.pass = std::all_of(out.begin(), out.end(), [](const GridCheck& c) { return c.pass; });
    return rep;
}

json FracMomentCheck::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["alpha"] = report.alpha;
    j["rows"] = json::array();
    for (const auto& r : report.rows)
        j["rows"].push_back({{"lambda", r.lambda},
                             {"pi_h", r.pi_h},
                             {"exact_mean", r.exact_mean},
                             {"sampled_mean", r.sampled_mean.mean},
                             {"sampled_mean_se", r.sampled_mean.se},
                             {"sampled_plus_one", r.sampled_plus_one.mean},
                             {"sampled_plus_one_se", r.sampled_plus_one.se},
                             {"frac_moment", r.frac_moment.mean},
                             {"frac_moment_se", r.frac_moment.se}});
    j["slope"] = report.slope_fit.slope;
    j["slope_se"] = report.slope_fit.slope_se;
    j["frac_spread"] = report.frac_spread;
    j["checks"] = json::array();
    for (const auto& c : checks) j["checks"].push_back(grid_check_to_json(c));
    j["pass"] = pass;
    return j;
}

FracMomentCheck check_fractional_moments(const std::vector<const GridModel*>& grids, double alpha, long n_cycles,
                                         std::uint64_t seed, double slope, double slope_tol, double max_spread) {
    if (grids.size() < 2) throw std::invalid_argument("fractional moment check needs at least two grids");
    FracMomentCheck fc;
    fc.report = fractional_moment_report(grids, alpha, n_cycles, seed);
    for (const auto& r : fc.report.rows) {
        const double tol = 4.0 * r.sampled_plus_one.se;
        fc.checks.push_back({"fractional", "E[n1 + 1] vs 1/pi(h) at lambda " + std::to_string(r.lambda),
                             r.sampled_plus_one.mean, 1.0 / r.pi_h, r.sampled_plus_one.se, tol, "==",
                             std::abs(r.sampled_plus_one.mean - 1.0 / r.pi_h) <= tol});
    }
    const double s = fc.report.slope_fit.slope;
    fc.checks.push_back({"fractional", "slope of log E[n1] in log lambda", s, slope, 0.0, slope_tol, "==",
                         std::abs(s - slope) <= slope_tol});
    fc.checks.push_back({"fractional", "relative spread of E[n1^alpha]", fc.report.frac_spread, max_spread, 0.0, 0.0, "<",
                         fc.report.frac_spread < max_spread});
    fc.pass = std::all_of(fc.checks.begin(), fc.checks.end(), [](const GridCheck& c) { return c.pass; });
    return fc;
}

}  // namespace lbe
