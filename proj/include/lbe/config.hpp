#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "lbe/grid.hpp"
#include "lbe/grid_checks.hpp"
#include "lbe/limits.hpp"
#include "lbe/model.hpp"
#include "lbe/potential.hpp"
#include "lbe/sim.hpp"
#include "lbe/sweep.hpp"

namespace lbe {

struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

const std::vector<std::string>& command_names();

struct RunConfig {
    std::string command;
    ModelParams model;
    std::string potential_shape = "cosine";
    double v0 = 1.0;
    std::vector<Harmonic> harmonics;
    PotentialSpec potential;   // built from the three fields above

    // simulate, ensemble
    double x0 = 0.0;
    double p0 = 0.0;
    double horizon = 10.0;
    int n_checkpoints = 100;
    long n_paths = 100;
    Observables obs;
    AtomSpec atom;
    double occupation_level = 1.0;
    FlowOptions flow;

    // kernel-table
    std::vector<double> table_lambdas;   // empty: model.lambda
    double table_p_min = -10.0;
    double table_p_max = 10.0;
    int table_n_p = 81;

    SweepOptions sweep;

    GridSpec grid;
    std::string grid_dir;                 // grid-check: load instead of building when set
    GridCheckOptions check;
    std::vector<double> frac_lambdas;     // grid-check: fractional-moment grids, empty to skip
    double frac_alpha = 0.4;
    long frac_cycles = 200000;

    std::vector<ExperimentKind> experiment_kinds{ExperimentKind::thm_main};
    std::vector<std::pair<std::string, std::string>> experiment_overrides;  // key without section, value

    std::uint64_t seed = 1;
    int workers = 0;
    std::string output_dir = ".";

    // Acceptance settings of the kind, then the experiment overrides and the shared model fields.
    ExperimentConfig experiment_config(ExperimentKind kind) const;
    SweepOptions sweep_options() const;
    SimConfig sim_config() const;

    void validate() const;
    // Every configurable key with its effective value, minus the output directory and worker count.
    nlohmann::json to_json() const;
};

struct ConfigKey {
    std::string name;   // section.key
    std::string type;
    std::string help;
};
const std::vector<ConfigKey>& config_keys();

// One key = value assignment, applied in order.
using Assignment = std::pair<std::string, std::string>;

std::vector<Assignment> read_config_file(const std::string& path);
// LBE_OUTPUT_DIR and LBE_WORKERS.
std::vector<Assignment> environment_overrides();

// Defaults, then assignments in order (later wins); throws ConfigError.
RunConfig build_run_config(const std::string& command, const std::vector<Assignment>& assignments);

}  // namespace lbe
