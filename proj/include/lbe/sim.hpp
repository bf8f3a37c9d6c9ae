#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "lbe/energy.hpp"
#include "lbe/model.hpp"
#include "lbe/potential.hpp"
#include "lbe/rng.hpp"
#include "lbe/stats.hpp"

namespace lbe {

struct Observables {
    bool track_D = true;
    bool track_J = true;
    bool track_M_compensator = true;  // integral of the drift rate along the path
    bool track_bracket = true;        // integral of q_variance along the path
    bool track_L = true;              // normalized low-energy occupation
    bool track_A_plus = false;        // integral of A+ (needs an energy table)
    bool track_companion = false;     // linear-drift companion path
    bool track_sup_stats = true;
    bool record_partition_coins = false;
    bool record_events = false;
};

// Low-energy set {H <= level} and the coin probability used on it.
struct AtomSpec {
    double level = -1.0;   // negative: 1 + sup V
    double h_value = 0.1;  // h = h_value on the set, 0 elsewhere
};

struct SimConfig {
    ModelParams model;
    PotentialSpec potential;
    double x0 = 0.0;
    double p0 = 0.0;
    double horizon = 10.0;
    std::vector<double> checkpoints;  // sorted, within [0, horizon]
    Observables obs;
    AtomSpec atom;
    double occupation_level = 1.0;    // exact occupation time of {H <= occupation_level}
    std::uint64_t seed = 1;
    FlowOptions flow;
    std::shared_ptr<const EnergyTable> a_table;
    double low_set_area = -1.0;       // cached area of the atom set; negative: compute

    void validate() const;
    double atom_level() const { return atom.level >= 0.0 ? atom.level : 1.0 + potential.sup_V(); }
};

// Physical initial momentum for a rescaled starting point p_hat0.
double momentum_from_rescaled(double p_hat0, double lambda);

// Uniform checkpoint mesh of n intervals over [0, horizon].
std::vector<double> uniform_checkpoints(double horizon, int n);

struct Checkpoint {
    double t = 0, x = 0, p = 0, H = 0, D = 0, J = 0;
    long N = 0;
    double M_comp = 0;     // integral of the drift rate
    double bracket = 0;    // integral of q_variance
    double L = 0;          // low-set occupation / low-set area
    double A_plus = 0;     // integral of A+
    double occupation = 0; // time with H <= occupation_level
    double h_integral = 0; // integral of h
    long atom_coins = 0;   // partition coins with z = 1
    double companion = 0;  // companion momentum (when tracked)

    double M() const { return J - M_comp; }
};

struct PathStats {
    double sup_H = 0;
    double sup_abs_D = 0;
    double sup_abs_D_rescaled = 0;  // lambda^{1/4} sup |D|
    double max_jump = 0;            // largest |p' - p|
    double sup_companion_gap = 0;   // sup |P' - P| (when tracked)
    long proposals = 0;
    long collisions = 0;
};

struct PartitionRecord {
    double t = 0;
    double h = 0;
    int z = 0;
};

enum class EventKind { start, reject, collision, checkpoint, partition, end };

// State at the start of each flow piece; jump is p_after - p_before.
struct EventRecord {
    double t = 0;
    double x = 0;
    double p = 0;
    EventKind kind = EventKind::start;
    double jump = 0;
};

struct TrajectoryResult {
    std::vector<Checkpoint> checkpoints;
    PathStats stats;
    std::vector<PartitionRecord> coins;
    std::vector<EventRecord> events;
    double lambda = 0;
};

struct NextEvent {
    double dt = 0;
    State pre;  // state just before the collision
    long proposals = 0;
};

// Waiting time to the next collision by thinning against the rate at the
// maximal momentum on the current energy shell.
NextEvent next_event(const ModelParams& mp, const PotentialSpec& pot, const State& s, Rng& rng,
                     const FlowOptions& fo = {});

TrajectoryResult simulate(const SimConfig& cfg);

struct CompanionPath {
    std::vector<double> t;
    std::vector<double> p_companion;
    std::vector<double> p;
    double sup_gap = 0;
};

// One step of P' -> e^{-lambda h / 2} P' + e^{-lambda h / 4} dI for the linear
// drift equation dP' = -(lambda / 2) P' dt + dI, with dI the driving increment.
double companion_step(double p_companion, double lambda, double h, double increment);

// Replays the event log, solving the linear-drift equation by an exponential
// integrator on the flow mesh. Needs record_events.
CompanionPath companion_path(const TrajectoryResult& traj, const SimConfig& cfg);

// Field names for per-checkpoint summaries, in output order.
const std::vector<std::string>& checkpoint_fields();
double checkpoint_field(const Checkpoint& c, const std::string& name);

struct EnsembleSummary {
    std::vector<double> t;
    std::vector<std::string> fields;
    std::vector<std::vector<MeanSE>> per_checkpoint;  // [field][checkpoint]
    std::vector<std::string> stat_fields;
    std::vector<MeanSE> path_stats;

    const MeanSE& at(const std::string& field, std::size_t k) const;
    const MeanSE& stat(const std::string& field) const;
};

struct EnsembleResult {
    std::vector<TrajectoryResult> paths;
    EnsembleSummary summary;
};

// Path i uses seed derive_seed(cfg.seed, path, i); results do not depend on
// the worker count.
EnsembleResult run_ensemble(const SimConfig& cfg, long n_paths, int workers = 0);
// Single-threaded reference.
EnsembleResult run_ensemble_serial(const SimConfig& cfg, long n_paths);
EnsembleSummary summarize(const std::vector<TrajectoryResult>& paths);

}  // namespace lbe
