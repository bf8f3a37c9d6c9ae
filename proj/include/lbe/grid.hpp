#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "lbe/model.hpp"
#include "lbe/potential.hpp"
#include "lbe/rng.hpp"
#include "lbe/stats.hpp"

namespace lbe {

struct GridSpec {
    int n_x = 8;
    int n_p = 32;                 // even; cells are symmetric about p = 0
    double p_max = -1.0;          // negative: min(12 / sqrt(lambda), p_cap)
    double p_cap = 120.0;
    double core_p = 3.0;          // uniform cells of width core_width on |p| <= core_p
    double core_width = 1.0;
    long samples_per_cell = 2000;
    double low_boost = 4.0;       // sample multiplier on low-set rows
    int low_branches = 8;         // low-set windows split this many ways at their first collision
    double flow_tol = 1e-6;
    double max_leakage = 0.01;

    void validate(const ModelParams& mp, const PotentialSpec& pot) const;
    double resolved_p_max(double lambda) const;
};

// Observables with a cached per-cell window integral E_s[int_0^tau g], tau ~ Exp(1).
const std::vector<std::string>& grid_observables();
double grid_observable(const std::string& name, const PotentialSpec& pot, double x, double p, double level);

struct Minorization {
    double level = 0.0;
    std::vector<int> low_set;
    Eigen::VectorXd h;
    Eigen::VectorXd nu;
    double epsilon = 0.0;
};

struct GridModel {
    ModelParams model;
    PotentialSpec potential;
    GridSpec spec;
    std::uint64_t seed = 0;

    std::vector<double> x_edges;
    std::vector<double> p_edges;
    Eigen::MatrixXd T;      // row-stochastic
    Eigen::MatrixXd T_se;   // Monte Carlo standard error per entry
    Eigen::VectorXd pi;
    Minorization mino;
    std::vector<std::string> ghat_names;
    std::vector<Eigen::VectorXd> ghat;
    std::vector<Eigen::VectorXd> ghat_se;
    Eigen::VectorXd row_leakage;  // time fraction spent beyond p_max, per row
    double leakage = 0.0;         // stationary-weighted row leakage

    int n_cells() const { return spec.n_x * spec.n_p; }
    int cell_index(int ix, int ip) const { return ix * spec.n_p + ip; }
    int ix_of(int i) const { return i / spec.n_p; }
    int ip_of(int i) const { return i % spec.n_p; }
    int cell_of(double x, double p) const;  // clamps |p| > p_max
    double x_center(int i) const;
    double p_center(int i) const;
    double measure(int i) const;
    double energy_center(int i) const;
    // cell reached by (x, p) -> (-x, -p)
    int mirror(int i) const;
    const Eigen::VectorXd& observable(const std::string& name) const;
};

// Geometry only (edges, sizes); no transitions.
GridModel grid_geometry(const ModelParams& mp, const PotentialSpec& pot, const GridSpec& spec);

// Estimates every row by simulating Exp(1) windows from uniform starts in the
// cell and depositing the occupation time of the path; then computes pi and
// the minorization. Throws when leakage exceeds spec.max_leakage.
GridModel build_grid_chain(const ModelParams& mp, const PotentialSpec& pot, const GridSpec& spec,
                           std::uint64_t seed, int workers = 0);

// As build_grid_chain, without the minorization.
GridModel estimate_grid_chain(const ModelParams& mp, const PotentialSpec& pot, const GridSpec& spec,
                              std::uint64_t seed, int workers = 0);

// Solves pi (I - T) = 0 with sum(pi) = 1.
Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& T);
double stationary_residual(const Eigen::MatrixXd& T, const Eigen::VectorXd& pi);

// Uniform-by-measure nu on the low set {H <= level}, epsilon from the
// smallest ratio T[i, j] / nu[j] on the low block, h = epsilon on the set.
void minorization(GridModel& gm, double level = -1.0);

// Row i of the split chain's non-atom kernel, (T[i] - h[i] nu) / (1 - h[i]).
Eigen::VectorXd residual_row(const GridModel& gm, int i);

struct CycleSample {
    int start = 0;
    long n_tilde_1 = 0;            // index of the first atom visit (0 when the start is atomic)
    std::vector<double> sums;      // sum over n = 0..n_tilde_1 of each observable
    std::vector<double> ordered;   // sum over n <= m of g(sigma_n) g(sigma_m)
};

// Life cycles of the split chain. With start < 0 the cycles are consecutive
// cycles of one run begun from nu; otherwise each is a first cycle from the
// split point mass at that cell.
std::vector<CycleSample> split_cycle_sampler(const GridModel& gm, long n_cycles, Rng& rng,
                                             const std::vector<Eigen::VectorXd>& observables = {},
                                             int start = -1);

// Number of atom coins z_n = 1 for n = 1..n_steps from the split point mass at start.
std::vector<double> atom_visit_counts(const GridModel& gm, int start, int n_steps, long runs, Rng& rng);
// Sum over n = 1..n_steps of (T^n h)(start).
double expected_atom_visits(const GridModel& gm, int start, int n_steps);

struct FracMomentRow {
    double lambda = 0;
    double pi_h = 0;
    double exact_mean = 0;        // 1 / pi(h) - 1
    MeanSE sampled_mean;
    MeanSE sampled_plus_one;      // of n_tilde_1 + 1
    MeanSE frac_moment;
};

struct FracMomentReport {
    double alpha = 0.4;
    std::vector<FracMomentRow> rows;
    LineFit slope_fit;            // log E[n_tilde_1] against log lambda (exact values)
    double frac_spread = 0;       // (max - min) / min of the fractional moments
};

FracMomentReport fractional_moment_report(const std::vector<const GridModel*>& grids, double alpha,
                                          long n_cycles, std::uint64_t seed);

// u with (I - T) u = g - pi(g) and pi(u) = 0.
Eigen::VectorXd chain_reduced_resolvent(const GridModel& gm, const Eigen::VectorXd& g);
double reduced_resolvent_residual(const GridModel& gm, const Eigen::VectorXd& g, const Eigen::VectorXd& u);

// (I - T diag(1 - h))^{-1} T g.
Eigen::VectorXd state_modulated_resolvent(const GridModel& gm, const Eigen::VectorXd& g,
                                          const Eigen::VectorXd& h);
double modulated_spectral_radius(const Eigen::MatrixXd& T, const Eigen::VectorXd& h);
// Exact value of the split-chain sum over n = 1..n_tilde_1 from the split point
// mass: K (I - K)^{-1} g with K = T - h nu.
Eigen::VectorXd split_first_cycle_sum(const GridModel& gm, const Eigen::VectorXd& g);

struct LifecycleReport {
    long n_cycles = 0;
    MeanSE increment;                 // per-cycle martingale increment
    double upsilon = 0;               // variance per cycle
    std::vector<int> block_sizes;
    std::vector<double> block_var_per_cycle;
    std::vector<double> block_var_se;
    bool all_zero = false;
};

// Increments xi_k = (cycle sum of g - pi(g)) - u(start_k) + u(start_{k+1}).
LifecycleReport lifecycle_martingale_check(const GridModel& gm, const Eigen::VectorXd& g, long n_cycles,
                                           Rng& rng, const std::vector<int>& block_sizes = {1, 4, 16});

struct ErgodicityReport {
    double slem = 0;
    double tv_decay_rate = 0;        // fitted -d log TV / dn
    double spectral_rate = 0;        // -log slem
    double low_set_return_floor = 0; // min_i sum_{j low} T[i, j]
    int return_steps = 0;            // smallest n with min_i (T^n 1_low)(i) > 0, 0 if none up to 200
    double return_floor_n = 0;       // that minimum
    std::vector<int> tv_starts;
    std::vector<double> tv_curve;    // worst start, n = 0..200
};

ErgodicityReport ergodicity_report(const GridModel& gm, int n_max = 200);

// Cell-integrated exp(-lambda H), normalized over the grid.
Eigen::VectorXd maxwell_boltzmann_cells(const GridModel& gm);
double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b);

struct SymmetryCheck {
    long pairs = 0;
    double max_z = 0;   // largest |T[i,j] - T[mi,mj]| / combined se
    long over_5 = 0;
};
SymmetryCheck mirror_symmetry(const GridModel& gm, double min_entry = 1e-3);

// Writes grid.json (parameters and scalars), cells.csv, matrix.csv (nonzero
// entries with standard errors) and vectors.csv into dir.
void save_grid(const GridModel& gm, const std::string& dir);
GridModel load_grid(const std::string& dir);

}  // namespace lbe
