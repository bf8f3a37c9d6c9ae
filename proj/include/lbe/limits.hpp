#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "lbe/model.hpp"
#include "lbe/potential.hpp"
#include "lbe/rng.hpp"
#include "lbe/sim.hpp"
#include "lbe/stats.hpp"

namespace lbe {

struct OUParams {
    double gamma = 0.5;
    double diff = 1.0;
    double p_hat0 = 0.0;

    void validate() const;
};

struct Marginal {
    double mean = 0.0;
    double var = 0.0;
};

Marginal ou_marginal(const OUParams& ou, double t);

// Exact-step OU values at the given increasing times (starting from p_hat0 at t = 0).
std::vector<double> ou_exact_path(const OUParams& ou, const std::vector<double>& times, Rng& rng);

// G(h)_t = h_t - (1/2) int_0^t e^{-(t-r)/2} h_r dr on a uniform mesh of step dt, by the trapezoid rule.
std::vector<double> smoothing_map_G(const std::vector<double>& h, double dt);

// Path in macroscopic units: t = lambda * t_phys, P = lambda^{1/2} P, D = lambda^{1/4} D,
// J, M = lambda^{1/2} (J, M), bracket = lambda <M>.
struct ScaledPath {
    std::vector<double> t, P, D, J, M, bracket;
    double P0 = 0.0;
};

ScaledPath to_scaled_path(const TrajectoryResult& traj, double p0);
// Applies the time and field scalings for one factor lambda.
ScaledPath rescale(const ScaledPath& path, double lambda);
// rescale(to_scaled_path(traj), lambda), checking the checkpoints against a macroscopic mesh.
ScaledPath rescale(const TrajectoryResult& traj, double p0, double lambda, const std::vector<double>& macro_mesh);

double ks_statistic_checked(const std::vector<double>& sample, const std::function<double(double)>& cdf);

enum class ExperimentKind { thm_main, drift_bound, energy_sup, occupation, martingale_clt, change_drift, local_time };

const std::vector<std::string>& experiment_kind_names();
ExperimentKind parse_experiment_kind(const std::string& name);
std::string to_string(ExperimentKind kind);

struct ExperimentConfig {
    std::vector<double> lambdas;
    double T = 1.0;
    long n_paths = 1000;
    std::vector<double> p_hat0s{0.0};
    int n_macro = 50;               // checkpoint intervals over [0, T]
    std::uint64_t seed = 1;
    int workers = 0;
    PotentialSpec potential;
    double quad_rel_tol = 1e-10;
    FlowOptions flow;

    // tolerances
    double ks_target = 0.05;          // KS at the smallest lambda
    double ks_slack = 0.014;          // one KS standard error for monotonicity
    double drift_ratio = 1.5;         // m(lambda_min) <= ratio * m(lambda_max)
    double energy_slope = 1.0, energy_slope_tol = 0.2;
    double occupation_slope = 0.5, occupation_slope_tol = 0.15;
    double slope_se_mult = 2.0;       // slope +- mult * se must contain the exponent
    double bracket_target = 0.1;
    double bracket_lambda = 0.02;     // where the bracket target applies
    double lindeberg_eps = 0.5;
    double change_drift_ratio = 2.0;
    double ltlb_lambda = 0.05;

    void validate() const;
};

// Settings of the acceptance runs for each kind.
ExperimentConfig default_experiment_config(ExperimentKind kind);

struct ExperimentCheck {
    std::string name;
    double value = 0.0;
    std::string relation;   // "<=", ">=", "nonincreasing", "in"
    double target = 0.0;
    double tolerance = 0.0;
    bool pass = false;
};

struct ExperimentRow {
    double lambda = 0.0;
    double p_hat0 = 0.0;
    long n_paths = 0;
    std::map<std::string, MeanSE> estimates;
    std::map<std::string, double> values;
};

struct ExperimentReport {
    ExperimentKind kind = ExperimentKind::thm_main;
    nlohmann::json inputs;
    std::vector<ExperimentRow> rows;
    std::map<std::string, LineFit> fits;
    std::vector<ExperimentCheck> checks;
    bool pass = false;

    nlohmann::json to_json() const;
};

// Ensembles for one kind, keyed by (lambda, p_hat0); kinds that share observables can share data.
struct EnsembleData {
    double lambda = 0.0;
    double p_hat0 = 0.0;
    std::vector<TrajectoryResult> paths;
};

// Paths for (lambda, p_hat0) use a seed derived from those values, so kinds sharing them share paths.
SimConfig experiment_sim_config(const ExperimentConfig& cfg, double lambda, double p_hat0,
                                const std::vector<ExperimentKind>& kinds);
std::vector<EnsembleData> collect_ensembles(const ExperimentConfig& cfg, const std::vector<ExperimentKind>& kinds);
ExperimentReport analyze_experiment(ExperimentKind kind, const ExperimentConfig& cfg,
                                    const std::vector<EnsembleData>& data);

ExperimentReport run_experiment(ExperimentKind kind, const ExperimentConfig& cfg);

}  // namespace lbe
