#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "lbe/model.hpp"
#include "lbe/potential.hpp"

namespace lbe {

// Fitted-constant checks of the kernel and energy-functional inequalities.
// Each item is a witness ratio whose sup (upper bounds) or inf (lower bounds)
// over a (lambda, x, p) grid is the fitted constant; the grid is then refined
// 2x and the constant must move by at most max_drift.

enum class BoundKind { upper, lower };

struct SweepOptions {
    PotentialSpec potential;
    double quad_rel_tol = 1e-10;
    int density = 24;            // positive geometric p nodes on the base grid
    double max_drift = 0.1;
    std::vector<std::string> only;  // empty: every item
};

struct SweepLambdaRow {
    double lambda = 0.0;
    double constant = 0.0;       // per-lambda sup / inf on the refined grid
};

struct SweepItem {
    std::string id;
    std::string statement;
    BoundKind kind = BoundKind::upper;
    double cap = 0.0;            // required bound on the constant (upper: <= cap, lower: >= cap); 0 for none
    double constant = 0.0;       // base grid
    double constant_refined = 0.0;
    double drift = 0.0;          // relative change under refinement
    double at_lambda = 0.0, at_x = 0.0, at_p = 0.0;  // where the refined extremum sits
    long n_points = 0;           // refined grid
    long n_skipped = 0;          // refined points with no representable ratio
    std::vector<SweepLambdaRow> per_lambda;
    bool pass = false;
    std::string reason;          // empty on pass
};

struct SweepReport {
    std::vector<SweepItem> items;
    bool pass = false;

    nlohmann::json to_json() const;
};

const std::vector<std::string>& sweep_item_ids();
SweepReport run_inequality_sweeps(const SweepOptions& opt = {});

// Integral of A+ over the torus times the line, by nested adaptive quadrature.
double integrated_drift_plus(const ModelParams& mp, const PotentialSpec& pot, double rel_tol = 1e-8,
                             double scan_step = 0.05);

}  // namespace lbe
