#include "lbe/grid.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <omp.h>

#include "lbe/kernel.hpp"

namespace lbe {

namespace {

double envelope(const ModelParams& mp, const PotentialSpec& pot, const State& s) {
    const double pm = std::max(std::abs(s.p), std::sqrt(2.0 * energy(pot, s)));
    return escape_rate(mp, pm * (1.0 + 1e-9) + 1e-12);
}

std::vector<double> momentum_edges(const GridSpec& spec, double p_max) {
    const int half = spec.n_p / 2;
    int core = static_cast<int>(std::floor(spec.core_p / spec.core_width + 1e-9));
    if (core >= half || spec.core_p >= p_max) core = 0;
    std::vector<double> pos{0.0};
    for (int k = 1; k <= core; ++k) pos.push_back(k * spec.core_width);
    const int m = half - core;
    const double start = pos.back();
    const double span = p_max - start;
    const double w0 = core > 0 ? spec.core_width : span / m;
    if (w0 * m >= span) {
        for (int k = 1; k <= m; ++k) pos.push_back(start + span * k / m);
    } else {
        // widths w0 g^k, k = 1..m, summing to span
        auto total = [&](double g) { return w0 * g * (std::pow(g, m) - 1.0) / (g - 1.0); };
        double lo = 1.0 + 1e-12, hi = 2.0;
        while (total(hi) < span) hi *= 2.0;
        for (int it = 0; it < 200; ++it) {
            const double mid = 0.5 * (lo + hi);
            (total(mid) < span ? lo : hi) = mid;
        }
        const double g = 0.5 * (lo + hi);
        double w = w0, x = start;
        for (int k = 1; k <= m; ++k) {
            w *= g;
            x += w;
            pos.push_back(x);
        }
    }
    pos.back() = p_max;
    std::vector<double> edges;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) edges.push_back(-*it);
    for (std::size_t k = 1; k < pos.size(); ++k) edges.push_back(pos[k]);
    edges[half] = 0.0;
    return edges;
}

struct Scratch {
    std::vector<double> dep;
    std::vector<int> touched;
    std::vector<State> mesh;
};

struct RowAccumulator {
    Eigen::VectorXd sum, sumsq;
    std::vector<double> gsum, gsq;
    double tau_sum = 0, leak = 0;
    long samples = 0;
};

// Occupation time of one Exp(1) window from s, weighted by w. With branches > 1
// the path splits at its first collision into that many continuations of weight
// w / branches, each with a fresh Exp(1) remaining time.
void window(const GridModel& gm, const FlowOptions& fo, State s, double tau, double w, int branches, Rng& rng,
            Scratch& sc, std::vector<double>& gint, double& leak) {
    const ModelParams& mp = gm.model;
    const PotentialSpec& pot = gm.potential;
    const double level = gm.mino.level;
    const double p_max = gm.p_edges.back();
    const double dx_cell = 1.0 / gm.spec.n_x;
    const double dp_cell = 0.25 * gm.spec.core_width;

    auto deposit = [&](double x, double p, double dt) {
        const int c = gm.cell_of(x, p);
        if (sc.dep[c] == 0.0) sc.touched.push_back(c);
        sc.dep[c] += dt;
        if (std::abs(p) > p_max) leak += dt;
        const double c2 = std::cos(2.0 * std::numbers::pi * x);
        const double vals[] = {1.0, p, p * p, c2, 0.5 * p * p + pot.value(x) <= level ? 1.0 : 0.0};
        for (std::size_t k = 0; k < gint.size(); ++k) gint[k] += dt * vals[k];
    };

    double t = 0.0;
    double bound = envelope(mp, pot, s);
    double next_prop = rng.exponential() / bound;
    while (t < tau) {
        const double t_stop = std::min(next_prop, tau);
        const double dt = t_stop - t;
        const FlowResult fr = flow(pot, s, dt, fo, &sc.mesh);
        const double h = w * dt / static_cast<double>(sc.mesh.size() - 1);
        for (std::size_t i = 0; i + 1 < sc.mesh.size(); ++i) {
            const State& a = sc.mesh[i];
            const State& b = sc.mesh[i + 1];
            const double steps = std::max(std::abs(b.x - a.x) / (0.25 * dx_cell), std::abs(b.p - a.p) / dp_cell);
            const int k = std::max(1, static_cast<int>(std::ceil(steps)));
            for (int j = 0; j < k; ++j) {
                const double f = (j + 0.5) / k;
                deposit(a.x + f * (b.x - a.x), a.p + f * (b.p - a.p), h / k);
            }
        }
        s = fr.state;
        t = t_stop;
        if (t == next_prop) {
            if (rng.uniform() < escape_rate(mp, s.p) / bound) {
                if (branches > 1) {
                    for (int b = 0; b < branches; ++b) {
                        State c = s;
                        c.p = sample_jump(mp, s.p, rng);
                        window(gm, fo, c, rng.exponential(), w / branches, 1, rng, sc, gint, leak);
                    }
                    return;
                }
                s.p = sample_jump(mp, s.p, rng);
                bound = envelope(mp, pot, s);
            }
            next_prop = t + rng.exponential() / bound;
        }
    }
}

RowAccumulator estimate_row(const GridModel& gm, int i, long samples, int branches, const FlowOptions& fo,
                            Scratch& sc) {
    const int n = gm.n_cells();
    const std::size_t ng = gm.ghat_names.size();
    RowAccumulator acc;
    acc.sum = Eigen::VectorXd::Zero(n);
    acc.sumsq = Eigen::VectorXd::Zero(n);
    acc.gsum.assign(ng, 0.0);
    acc.gsq.assign(ng, 0.0);
    sc.dep.assign(n, 0.0);
    std::vector<double> gint(ng);
    Rng rng(derive_seed(gm.seed, StreamTag::grid_row, static_cast<std::uint64_t>(i)));
    const int ix = gm.ix_of(i), ip = gm.ip_of(i);
    const double x0 = gm.x_edges[ix], x1 = gm.x_edges[ix + 1];
    const double p0 = gm.p_edges[ip], p1 = gm.p_edges[ip + 1];
    for (long r = 0; r < samples; ++r) {
        const State start{x0 + (x1 - x0) * rng.uniform(), p0 + (p1 - p0) * rng.uniform()};
        const double tau = rng.exponential();
        sc.touched.clear();
        std::fill(gint.begin(), gint.end(), 0.0);
        window(gm, fo, start, tau, 1.0, branches, rng, sc, gint, acc.leak);
        for (int c : sc.touched) {
            acc.sum[c] += sc.dep[c];
            acc.sumsq[c] += sc.dep[c] * sc.dep[c];
            sc.dep[c] = 0.0;
        }
        for (std::size_t k = 0; k < ng; ++k) {
            acc.gsum[k] += gint[k];
            acc.gsq[k] += gint[k] * gint[k];
        }
        acc.tau_sum += tau;
    }
    acc.samples = samples;
    return acc;
}

// Cumulative rows for inverse-CDF sampling.
struct RowSampler {
    std::vector<std::vector<double>> cdf;

    void add(const Eigen::VectorXd& row) {
        std::vector<double> c(row.size());
        double s = 0.0;
        for (Eigen::Index j = 0; j < row.size(); ++j) c[j] = (s += std::max(row[j], 0.0));
        cdf.push_back(std::move(c));
    }
    int draw(std::size_t r, Rng& rng) const {
        const auto& c = cdf[r];
        const double u = rng.uniform() * c.back();
        const auto it = std::upper_bound(c.begin(), c.end(), u);
        return static_cast<int>(std::min<std::ptrdiff_t>(it - c.begin(), static_cast<std::ptrdiff_t>(c.size()) - 1));
    }
};

// Split chain on the surrogate: residual rows where h > 0, plain rows elsewhere, nu for restarts.
struct SplitChain {
    const GridModel& gm;
    RowSampler rows;
    RowSampler nu;

    explicit SplitChain(const GridModel& g) : gm(g) {
        if (gm.mino.h.size() != gm.n_cells()) throw std::invalid_argument("split chain needs a minorization");
        for (int i = 0; i < gm.n_cells(); ++i)
            rows.add(gm.mino.h[i] >= 1.0 ? gm.mino.nu
                     : gm.mino.h[i] > 0.0 ? residual_row(gm, i) : Eigen::VectorXd(gm.T.row(i).transpose()));
        nu.add(gm.mino.nu);
    }
    bool coin(int i, Rng& rng) const { return rng.bernoulli(gm.mino.h[i]); }
    int residual_step(int i, Rng& rng) const { return rows.draw(static_cast<std::size_t>(i), rng); }
    int restart(Rng& rng) const { return nu.draw(0, rng); }
};

}  // namespace

void GridSpec::validate(const ModelParams& mp, const PotentialSpec& pot) const {
    mp.validate();
    if (n_x < 4 || n_p < 4) throw std::invalid_argument("grid needs n_x, n_p >= 4");
    if (n_p % 2 != 0) throw std::invalid_argument("n_p must be even");
    if (samples_per_cell < 1) throw std::invalid_argument("samples_per_cell must be positive");
    if (!(low_boost >= 1.0)) throw std::invalid_argument("low_boost must be >= 1");
    if (low_branches < 1) throw std::invalid_argument("low_branches must be >= 1");
    if (!(core_width > 0.0) || !(core_p >= 0.0)) throw std::invalid_argument("bad core cell geometry");
    if (!(flow_tol > 0.0)) throw std::invalid_argument("flow_tol must be positive");
    if (!(max_leakage > 0.0)) throw std::invalid_argument("max_leakage must be positive");
    if (!(mp.lambda > 0.0) && p_max <= 0.0) throw std::invalid_argument("lambda = 0 needs an explicit p_max");
    const double pm = resolved_p_max(mp.lambda);
    if (!(pm > std::sqrt(2.0 * (1.0 + 2.0 * pot.sup_V()))))
        throw std::invalid_argument("p_max must exceed the momentum range of the low-energy set");
}

double GridSpec::resolved_p_max(double lambda) const {
    if (p_max > 0.0) return p_max;
    return std::min(12.0 / std::sqrt(lambda), p_cap);
}

const std::vector<std::string>& grid_observables() {
    static const std::vector<std::string> names{"one", "p", "p2", "cos2pi_x", "low"};
    return names;
}

double grid_observable(const std::string& name, const PotentialSpec& pot, double x, double p, double level) {
    if (name == "one") return 1.0;
    if (name == "p") return p;
    if (name == "p2") return p * p;
    if (name == "cos2pi_x") return std::cos(2.0 * std::numbers::pi * x);
    if (name == "low") return 0.5 * p * p + pot.value(x) <= level ? 1.0 : 0.0;
    throw std::invalid_argument("unknown grid observable: " + name);
}

int GridModel::cell_of(double x, double p) const {
    const double xw = wrap_unit(x);
    const int ix = std::min(static_cast<int>(xw * spec.n_x), spec.n_x - 1);
    int ip;
    if (p <= p_edges.front()) ip = 0;
    else if (p >= p_edges.back()) ip = spec.n_p - 1;
    else ip = static_cast<int>(std::upper_bound(p_edges.begin(), p_edges.end(), p) - p_edges.begin()) - 1;
    return cell_index(ix, std::clamp(ip, 0, spec.n_p - 1));
}

double GridModel::x_center(int i) const { return 0.5 * (x_edges[ix_of(i)] + x_edges[ix_of(i) + 1]); }
double GridModel::p_center(int i) const { return 0.5 * (p_edges[ip_of(i)] + p_edges[ip_of(i) + 1]); }
double GridModel::measure(int i) const {
    return (x_edges[ix_of(i) + 1] - x_edges[ix_of(i)]) * (p_edges[ip_of(i) + 1] - p_edges[ip_of(i)]);
}
double GridModel::energy_center(int i) const { return energy(potential, {x_center(i), p_center(i)}); }
int GridModel::mirror(int i) const { return cell_index(spec.n_x - 1 - ix_of(i), spec.n_p - 1 - ip_of(i)); }

const Eigen::VectorXd& GridModel::observable(const std::string& name) const {
    for (std::size_t k = 0; k < ghat_names.size(); ++k)
        if (ghat_names[k] == name) return ghat[k];
    throw std::invalid_argument("observable not cached on this grid: " + name);
}

GridModel grid_geometry(const ModelParams& mp, const PotentialSpec& pot, const GridSpec& spec) {
    spec.validate(mp, pot);
    GridModel gm;
    gm.model = mp;
    gm.potential = pot;
    gm.spec = spec;
    for (int k = 0; k <= spec.n_x; ++k) gm.x_edges.push_back(static_cast<double>(k) / spec.n_x);
    gm.p_edges = momentum_edges(spec, spec.resolved_p_max(mp.lambda));
    gm.mino.level = 1.0 + pot.sup_V();
    gm.ghat_names = grid_observables();
    return gm;
}

GridModel estimate_grid_chain(const ModelParams& mp, const PotentialSpec& pot, const GridSpec& spec,
                              std::uint64_t seed, int workers) {
    GridModel gm = grid_geometry(mp, pot, spec);
    gm.seed = seed;
    const int n = gm.n_cells();
    const std::size_t ng = gm.ghat_names.size();
    gm.T = Eigen::MatrixXd::Zero(n, n);
    gm.T_se = Eigen::MatrixXd::Zero(n, n);
    gm.ghat.assign(ng, Eigen::VectorXd::Zero(n));
    gm.ghat_se.assign(ng, Eigen::VectorXd::Zero(n));
    gm.row_leakage = Eigen::VectorXd::Zero(n);
    FlowOptions fo;
    fo.energy_tol = spec.flow_tol;

    const int threads = workers > 0 ? workers : omp_get_max_threads();
#pragma omp parallel num_threads(threads)
    {
        Scratch sc;
#pragma omp for schedule(dynamic, 1)
        for (int i = 0; i < n; ++i) {
            const bool low = gm.energy_center(i) <= gm.mino.level;
            const long samples = low ? static_cast<long>(std::ceil(spec.samples_per_cell * spec.low_boost))
                                     : spec.samples_per_cell;
            const RowAccumulator acc = estimate_row(gm, i, samples, low ? spec.low_branches : 1, fo, sc);
            const double N = static_cast<double>(acc.samples);
            const double total = acc.sum.sum();
            for (int j = 0; j < n; ++j) {
                if (acc.sum[j] == 0.0) continue;
                gm.T(i, j) = acc.sum[j] / total;
                const double mean = acc.sum[j] / N;
                const double var = std::max(acc.sumsq[j] / N - mean * mean, 0.0);
                gm.T_se(i, j) = std::sqrt(var / N) * N / total;
            }
            for (std::size_t k = 0; k < ng; ++k) {
                const double mean = acc.gsum[k] / N;
                gm.ghat[k][i] = mean;
                gm.ghat_se[k][i] = std::sqrt(std::max(acc.gsq[k] / N - mean * mean, 0.0) / N);
            }
            gm.row_leakage[i] = acc.leak / total;
        }
    }
    for (int i = 0; i < n; ++i) gm.T.row(i) /= gm.T.row(i).sum();

    gm.pi = stationary_vector(gm.T);
    gm.leakage = gm.pi.dot(gm.row_leakage);
    if (gm.leakage > spec.max_leakage)
        throw std::runtime_error("grid leakage " + std::to_string(gm.leakage) + " exceeds " +
                                 std::to_string(spec.max_leakage) + "; raise p_max");
    return gm;
}

GridModel build_grid_chain(const ModelParams& mp, const PotentialSpec& pot, const GridSpec& spec,
                           std::uint64_t seed, int workers) {
    GridModel gm = estimate_grid_chain(mp, pot, spec, seed, workers);
    minorization(gm);
    return gm;
}

Eigen::VectorXd stationary_vector(const Eigen::MatrixXd& T) {
    const Eigen::Index n = T.rows();
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - T.transpose();
    A.row(n - 1).setOnes();
    Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
    b[n - 1] = 1.0;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd pi = lu.solve(b);
    for (int it = 0; it < 2; ++it) pi += lu.solve(b - A * pi);
    pi = pi.cwiseMax(0.0);
    pi /= pi.sum();
    if (!pi.allFinite()) throw std::runtime_error("stationary vector: singular chain");
    return pi;
}

double stationary_residual(const Eigen::MatrixXd& T, const Eigen::VectorXd& pi) {
    return (T.transpose() * pi - pi).cwiseAbs().maxCoeff();
}

void minorization(GridModel& gm, double level) {
    Minorization& m = gm.mino;
    if (level > 0.0) m.level = level;
    const int n = gm.n_cells();
    m.low_set.clear();
    for (int i = 0; i < n; ++i)
        if (gm.energy_center(i) <= m.level) m.low_set.push_back(i);
    if (m.low_set.empty()) throw std::runtime_error("minorization: empty low-energy set");
    m.nu = Eigen::VectorXd::Zero(n);
    double area = 0.0;
    for (int i : m.low_set) area += gm.measure(i);
    for (int i : m.low_set) m.nu[i] = gm.measure(i) / area;
    double eps = std::numeric_limits<double>::infinity();
    for (int i : m.low_set)
        for (int j : m.low_set) eps = std::min(eps, gm.T(i, j) / m.nu[j]);
    if (!(eps > 0.0))
        throw std::runtime_error("minorization: zero transition estimate inside the low-energy block; "
                                 "raise samples_per_cell");
    m.epsilon = eps * (1.0 - 1e-12);
    m.h = Eigen::VectorXd::Zero(n);
    for (int i : m.low_set) m.h[i] = m.epsilon;
}

Eigen::VectorXd residual_row(const GridModel& gm, int i) {
    const double h = gm.mino.h[i];
    Eigen::VectorXd r = (gm.T.row(i).transpose() - h * gm.mino.nu) / (1.0 - h);
    return r;
}

std::vector<CycleSample> split_cycle_sampler(const GridModel& gm, long n_cycles, Rng& rng,
                                             const std::vector<Eigen::VectorXd>& observables, int start) {
    const SplitChain chain(gm);
    const std::size_t ng = observables.size();
    std::vector<CycleSample> out;
    out.reserve(static_cast<std::size_t>(n_cycles));
    int s = start >= 0 ? start : chain.restart(rng);
    for (long c = 0; c < n_cycles; ++c) {
        if (start >= 0) s = start;
        CycleSample cs;
        cs.start = s;
        cs.sums.assign(ng, 0.0);
        cs.ordered.assign(ng, 0.0);
        for (long n = 0;; ++n) {
            for (std::size_t k = 0; k < ng; ++k) {
                const double g = observables[k][s];
                cs.sums[k] += g;
                cs.ordered[k] += g * cs.sums[k];
            }
            if (chain.coin(s, rng)) {
                cs.n_tilde_1 = n;
                s = chain.restart(rng);
                break;
            }
            s = chain.residual_step(s, rng);
        }
        out.push_back(std::move(cs));
    }
    return out;
}

std::vector<double> atom_visit_counts(const GridModel& gm, int start, int n_steps, long runs, Rng& rng) {
    const SplitChain chain(gm);
    std::vector<double> counts;
    counts.reserve(static_cast<std::size_t>(runs));
    for (long r = 0; r < runs; ++r) {
        int s = start;
        bool z = chain.coin(s, rng);
        long visits = 0;
        for (int n = 1; n <= n_steps; ++n) {
            s = z ? chain.restart(rng) : chain.residual_step(s, rng);
            z = chain.coin(s, rng);
            visits += z ? 1 : 0;
        }
        counts.push_back(static_cast<double>(visits));
    }
    return counts;
}

double expected_atom_visits(const GridModel& gm, int start, int n_steps) {
    Eigen::VectorXd v = gm.mino.h;
    double total = 0.0;
    for (int n = 1; n <= n_steps; ++n) {
        v = gm.T * v;
        total += v[start];
    }
    return total;
}

FracMomentReport fractional_moment_report(const std::vector<const GridModel*>& grids, double alpha,
                                          long n_cycles, std::uint64_t seed) {
    if (!(alpha > 0.0 && alpha < 0.5)) throw std::invalid_argument("alpha must lie in (0, 1/2)");
    FracMomentReport rep;
    rep.alpha = alpha;
    std::vector<double> lam, mean;
    for (std::size_t g = 0; g < grids.size(); ++g) {
        const GridModel& gm = *grids[g];
        FracMomentRow row;
        row.lambda = gm.model.lambda;
        row.pi_h = gm.pi.dot(gm.mino.h);
        row.exact_mean = 1.0 / row.pi_h - 1.0;
        Rng rng(derive_seed(seed, StreamTag::cycles, g));
        const auto cycles = split_cycle_sampler(gm, n_cycles, rng);
        std::vector<double> n1, n1p, frac;
        for (const auto& c : cycles) {
            const double v = static_cast<double>(c.n_tilde_1);
            n1.push_back(v);
            n1p.push_back(v + 1.0);
            frac.push_back(std::pow(v, alpha));
        }
        row.sampled_mean = mean_se(n1);
        row.sampled_plus_one = mean_se(n1p);
        row.frac_moment = mean_se(frac);
        lam.push_back(row.lambda);
        mean.push_back(row.exact_mean);
        rep.rows.push_back(row);
    }
    if (rep.rows.size() >= 2) {
        rep.slope_fit = fit_loglog(lam, mean);
        double lo = rep.rows.front().frac_moment.mean, hi = lo;
        for (const auto& r : rep.rows) {
            lo = std::min(lo, r.frac_moment.mean);
            hi = std::max(hi, r.frac_moment.mean);
        }
        rep.frac_spread = (hi - lo) / lo;
    }
    return rep;
}

Eigen::VectorXd chain_reduced_resolvent(const GridModel& gm, const Eigen::VectorXd& g) {
    const Eigen::Index n = gm.n_cells();
    const Eigen::VectorXd r = g - Eigen::VectorXd::Constant(n, gm.pi.dot(g));
    Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - gm.T + Eigen::VectorXd::Ones(n) * gm.pi.transpose();
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd u = lu.solve(r);
    for (int it = 0; it < 2; ++it) u += lu.solve(r - A * u);
    u -= Eigen::VectorXd::Constant(n, gm.pi.dot(u));
    if (!u.allFinite() || reduced_resolvent_residual(gm, g, u) > 1e-8)
        throw std::runtime_error("reduced resolvent: singular system (disconnected chain)");
    return u;
}

double reduced_resolvent_residual(const GridModel& gm, const Eigen::VectorXd& g, const Eigen::VectorXd& u) {
    const Eigen::VectorXd r = g - Eigen::VectorXd::Constant(g.size(), gm.pi.dot(g));
    return (gm.T * u - u + r).cwiseAbs().maxCoeff();
}

double modulated_spectral_radius(const Eigen::MatrixXd& T, const Eigen::VectorXd& h) {
    // power iteration on the nonnegative matrix T diag(1 - h)
    const Eigen::VectorXd keep = (Eigen::VectorXd::Ones(h.size()) - h).cwiseMax(0.0);
    Eigen::VectorXd v = Eigen::VectorXd::Ones(h.size());
    double rho = 0.0;
    for (int it = 0; it < 5000; ++it) {
        Eigen::VectorXd w = T * keep.cwiseProduct(v);
        const double norm = w.cwiseAbs().maxCoeff();
        if (norm == 0.0) return 0.0;
        w /= norm;
        const double change = (w - v).cwiseAbs().maxCoeff();
        v = w;
        rho = norm;
        if (change < 1e-13) break;
    }
    return rho;
}

Eigen::VectorXd state_modulated_resolvent(const GridModel& gm, const Eigen::VectorXd& g, const Eigen::VectorXd& h) {
    const Eigen::Index n = gm.n_cells();
    if (modulated_spectral_radius(gm.T, h) >= 1.0 - 1e-12)
        throw std::runtime_error("state-modulated resolvent: series does not converge");
    const Eigen::VectorXd keep = Eigen::VectorXd::Ones(n) - h;
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - gm.T * keep.asDiagonal();
    const Eigen::VectorXd rhs = gm.T * g;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd v = lu.solve(rhs);
    v += lu.solve(rhs - A * v);
    return v;
}

Eigen::VectorXd split_first_cycle_sum(const GridModel& gm, const Eigen::VectorXd& g) {
    const Eigen::Index n = gm.n_cells();
    const Eigen::MatrixXd K = gm.T - gm.mino.h * gm.mino.nu.transpose();
    const Eigen::MatrixXd A = Eigen::MatrixXd::Identity(n, n) - K;
    Eigen::PartialPivLU<Eigen::MatrixXd> lu(A);
    Eigen::VectorXd w = lu.solve(g);
    w += lu.solve(g - A * w);
    return w - g;
}

LifecycleReport lifecycle_martingale_check(const GridModel& gm, const Eigen::VectorXd& g, long n_cycles, Rng& rng,
                                           const std::vector<int>& block_sizes) {
    LifecycleReport rep;
    rep.n_cycles = n_cycles;
    rep.block_sizes = block_sizes;
    const Eigen::VectorXd r = g - Eigen::VectorXd::Constant(g.size(), gm.pi.dot(g));
    const Eigen::VectorXd u = chain_reduced_resolvent(gm, g);
    // one extra cycle supplies the start after the last increment
    const auto cycles = split_cycle_sampler(gm, n_cycles + 1, rng, {r});
    std::vector<double> xi;
    xi.reserve(static_cast<std::size_t>(n_cycles));
    bool zero = true;
    for (long k = 0; k < n_cycles; ++k) {
        const auto& c = cycles[static_cast<std::size_t>(k)];
        const double v = c.sums[0] - u[c.start] + u[cycles[static_cast<std::size_t>(k + 1)].start];
        zero = zero && v == 0.0;
        xi.push_back(v);
    }
    rep.all_zero = zero;
    rep.increment = mean_se(xi);
    rep.upsilon = rep.increment.var;
    for (int b : block_sizes) {
        std::vector<double> sums;
        for (std::size_t k = 0; k + static_cast<std::size_t>(b) <= xi.size(); k += static_cast<std::size_t>(b)) {
            double s = 0.0;
            for (int j = 0; j < b; ++j) s += xi[k + static_cast<std::size_t>(j)];
            sums.push_back(s);
        }
        const MeanSE m = mean_se(sums);
        // variance of a sample variance, from the fourth central moment
        double m4 = 0.0;
        for (double s : sums) m4 += std::pow(s - m.mean, 4);
        m4 /= static_cast<double>(sums.size());
        const double var_se = std::sqrt(std::max(m4 - m.var * m.var, 0.0) / static_cast<double>(sums.size()));
        rep.block_var_per_cycle.push_back(m.var / b);
        rep.block_var_se.push_back(var_se / b);
    }
    return rep;
}

Eigen::VectorXd maxwell_boltzmann_cells(const GridModel& gm) {
    const double lam = gm.model.lambda;
    std::vector<double> wx(gm.spec.n_x), wp(gm.spec.n_p);
    for (int ix = 0; ix < gm.spec.n_x; ++ix) {
        const double a = gm.x_edges[ix], b = gm.x_edges[ix + 1];
        const int m = 64;
        double s = 0.0;
        for (int k = 0; k <= m; ++k) {
            const double w = (k == 0 || k == m) ? 1.0 : (k % 2 ? 4.0 : 2.0);
            s += w * std::exp(-lam * gm.potential.value(a + (b - a) * k / m));
        }
        wx[ix] = s * (b - a) / (3.0 * m);
    }
    for (int ip = 0; ip < gm.spec.n_p; ++ip) {
        if (lam > 0.0) {
            const double c = std::sqrt(0.5 * lam);
            wp[ip] = 0.5 * (std::erf(c * gm.p_edges[ip + 1]) - std::erf(c * gm.p_edges[ip]));
        } else {
            wp[ip] = gm.p_edges[ip + 1] - gm.p_edges[ip];
        }
    }
    Eigen::VectorXd mb(gm.n_cells());
    for (int i = 0; i < gm.n_cells(); ++i) mb[i] = wx[gm.ix_of(i)] * wp[gm.ip_of(i)];
    return mb / mb.sum();
}

double total_variation(const Eigen::VectorXd& a, const Eigen::VectorXd& b) {
    return 0.5 * (a - b).cwiseAbs().sum();
}

ErgodicityReport ergodicity_report(const GridModel& gm, int n_max) {
    ErgodicityReport rep;
    const int n = gm.n_cells();
    Eigen::EigenSolver<Eigen::MatrixXd> es(gm.T, false);
    std::vector<double> mods;
    for (Eigen::Index k = 0; k < es.eigenvalues().size(); ++k) mods.push_back(std::abs(es.eigenvalues()[k]));
    std::sort(mods.begin(), mods.end(), std::greater<>());
    rep.slem = mods.size() > 1 ? mods[1] : 0.0;
    rep.spectral_rate = rep.slem > 0.0 ? -std::log(rep.slem) : std::numeric_limits<double>::infinity();

    // extreme cells: largest |p| at both signs, at the potential maximum and minimum columns
    const int top = gm.spec.n_p - 1;
    rep.tv_starts = {gm.cell_index(0, 0), gm.cell_index(0, top), gm.cell_index(gm.spec.n_x / 2, 0),
                     gm.cell_index(gm.spec.n_x / 2, top)};
    Eigen::MatrixXd dist = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(rep.tv_starts.size()), n);
    for (std::size_t k = 0; k < rep.tv_starts.size(); ++k) dist(static_cast<Eigen::Index>(k), rep.tv_starts[k]) = 1.0;
    const Eigen::RowVectorXd pi = gm.pi.transpose();
    for (int step = 0; step <= n_max; ++step) {
        double worst = 0.0;
        for (Eigen::Index k = 0; k < dist.rows(); ++k)
            worst = std::max(worst, 0.5 * (dist.row(k) - pi).cwiseAbs().sum());
        rep.tv_curve.push_back(worst);
        dist = dist * gm.T;
    }
    std::vector<double> ns, logs;
    for (int step = n_max / 2; step <= n_max; ++step) {
        const double tv = rep.tv_curve[static_cast<std::size_t>(step)];
        if (tv > 1e-13) {
            ns.push_back(step);
            logs.push_back(std::log(tv));
        }
    }
    rep.tv_decay_rate = ns.size() >= 3 ? -fit_line(ns, logs).slope : std::numeric_limits<double>::quiet_NaN();

    Eigen::VectorXd low = Eigen::VectorXd::Zero(n);
    for (int i : gm.mino.low_set) low[i] = 1.0;
    Eigen::VectorXd v = gm.T * low;
    rep.low_set_return_floor = v.minCoeff();
    for (int step = 1; step <= n_max; ++step) {
        if (v.minCoeff() > 0.0) {
            rep.return_steps = step;
            rep.return_floor_n = v.minCoeff();
            break;
        }
        v = gm.T * v;
    }
    return rep;
}

SymmetryCheck mirror_symmetry(const GridModel& gm, double min_entry) {
    SymmetryCheck sc;
    const int n = gm.n_cells();
    for (int i = 0; i < n; ++i) {
        const int mi = gm.mirror(i);
        if (mi < i) continue;
        for (int j = 0; j < n; ++j) {
            const double a = gm.T(i, j), b = gm.T(mi, gm.mirror(j));
            if (std::max(a, b) < min_entry) continue;
            const double se = std::hypot(gm.T_se(i, j), gm.T_se(mi, gm.mirror(j)));
            if (se <= 0.0) continue;
            const double z = std::abs(a - b) / se;
            ++sc.pairs;
            sc.max_z = std::max(sc.max_z, z);
            if (z > 5.0) ++sc.over_5;
        }
    }
    return sc;
}

}  // namespace lbe
