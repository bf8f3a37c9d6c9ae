#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbe/grid.hpp"

namespace lbe {

// Sampler-versus-linear-algebra checks on one surrogate chain, plus its
// structural invariants and ergodicity diagnostics.

struct GridCheck {
    std::string group;       // structure, splitting, martingale, ergodicity, continuum
    std::string name;
    double value = 0.0;
    double target = 0.0;
    double se = 0.0;         // Monte Carlo standard error of value (0 for exact checks)
    double tolerance = 0.0;  // absolute allowance used by relation
    std::string relation;    // "==", "<=", ">=", ">"
    bool pass = false;
};

struct GridCheckOptions {
    long n_cycles = 100000;
    long visit_runs = 20000;
    int visit_steps = 200;
    double n_sigma = 4.0;
    std::uint64_t seed = 1;
};

struct GridCheckReport {
    std::vector<GridCheck> checks;
    ErgodicityReport ergodicity;
    double modulated_gap_min = 0.0;   // min over cells of U g - exact split sum
    bool pass = false;

    bool group_pass(const std::string& group) const;
    nlohmann::json to_json() const;
};

// First cell with positive momentum whose center energy lies between the low level and twice it.
int mid_energy_cell(const GridModel& gm);

GridCheckReport run_grid_checks(const GridModel& gm, const GridCheckOptions& opt = {});

struct FracMomentCheck {
    FracMomentReport report;
    std::vector<GridCheck> checks;
    bool pass = false;

    nlohmann::json to_json() const;
};

// Exact cycle-length cross-check per grid, log-log slope of E[n_tilde_1] in lambda, spread of E[n_tilde_1^alpha].
FracMomentCheck check_fractional_moments(const std::vector<const GridModel*>& grids, double alpha, long n_cycles,
                                         std::uint64_t seed, double slope = -0.5, double slope_tol = 0.1,
                                         double max_spread = 0.5);

nlohmann::json grid_check_to_json(const GridCheck& c);

}  // namespace lbe
