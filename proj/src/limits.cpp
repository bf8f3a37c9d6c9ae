#include "lbe/limits.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "lbe/energy.hpp"
#include "lbe/serialize.hpp"

namespace lbe {

using nlohmann::json;

void OUParams::validate() const {
    if (gamma != 0.5 || diff != 1.0) throw std::invalid_argument("OU friction and diffusion are fixed at 1/2 and 1");
    if (!std::isfinite(p_hat0)) throw std::invalid_argument("p_hat0 must be finite");
}

Marginal ou_marginal(const OUParams& ou, double t) {
    ou.validate();
    if (!(t >= 0.0)) throw std::invalid_argument("ou_marginal: t must be >= 0");
    return {ou.p_hat0 * std::exp(-ou.gamma * t), ou.diff / (2.0 * ou.gamma) * -std::expm1(-2.0 * ou.gamma * t)};
}

std::vector<double> ou_exact_path(const OUParams& ou, const std::vector<double>& times, Rng& rng) {
    ou.validate();
    std::vector<double> out;
    out.reserve(times.size());
    double p = ou.p_hat0, t = 0.0;
    for (double s : times) {
        if (s < t) throw std::invalid_argument("ou_exact_path: times must increase");
        const double d = s - t;
        p = p * std::exp(-ou.gamma * d) + std::sqrt(-std::expm1(-2.0 * ou.gamma * d) * ou.diff / (2.0 * ou.gamma)) * rng.normal();
        out.push_back(p);
        t = s;
    }
    return out;
}

std::vector<double> smoothing_map_G(const std::vector<double>& h, double dt) {
    if (h.empty()) throw std::invalid_argument("smoothing_map_G: empty path");
    if (!(dt > 0.0)) throw std::invalid_argument("smoothing_map_G: dt must be positive");
    std::vector<double> g(h.size());
    const double decay = std::exp(-0.5 * dt);
    double conv = 0.0;  // int_0^t e^{-(t-r)/2} h_r dr
    g[0] = h[0];
    for (std::size_t k = 1; k < h.size(); ++k) {
        conv = decay * conv + 0.5 * dt * (decay * h[k - 1] + h[k]);
        g[k] = h[k] - 0.5 * conv;
    }
    return g;
}

ScaledPath to_scaled_path(const TrajectoryResult& traj, double p0) {
    ScaledPath s;
    s.P0 = p0;
    for (const auto& c : traj.checkpoints) {
        s.t.push_back(c.t);
        s.P.push_back(c.p);
        s.D.push_back(c.D);
        s.J.push_back(c.J);
        s.M.push_back(c.M());
        s.bracket.push_back(c.bracket);
    }
    return s;
}

ScaledPath rescale(const ScaledPath& path, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("rescale: lambda must be positive");
    ScaledPath s = path;
    const double r = std::sqrt(lambda), q = std::sqrt(r);
    for (auto& v : s.t) v *= lambda;
    for (auto& v : s.P) v *= r;
    for (auto& v : s.D) v *= q;
    for (auto& v : s.J) v *= r;
    for (auto& v : s.M) v *= r;
    for (auto& v : s.bracket) v *= lambda;
    s.P0 *= r;
    return s;
}

ScaledPath rescale(const TrajectoryResult& traj, double p0, double lambda, const std::vector<double>& macro_mesh) {
    ScaledPath s = rescale(to_scaled_path(traj, p0), lambda);
    if (s.t.size() != macro_mesh.size()) throw std::invalid_argument("rescale: checkpoint count does not match the mesh");
    for (std::size_t k = 0; k < s.t.size(); ++k)
        if (std::abs(s.t[k] - macro_mesh[k]) > 1e-9 * std::max(1.0, std::abs(macro_mesh[k])))
            throw std::invalid_argument("rescale: checkpoints are not the macroscopic mesh divided by lambda");
    return s;
}

double ks_statistic_checked(const std::vector<double>& sample, const std::function<double(double)>& cdf) {
    return ks_statistic(sample, cdf);
}

const std::vector<std::string>& experiment_kind_names() {
    static const std::vector<std::string> names{"thm_main",       "drift_bound",  "energy_sup", "occupation",
                                                "martingale_clt", "change_drift", "local_time"};
    return names;
}

ExperimentKind parse_experiment_kind(const std::string& name) {
    const auto& names = experiment_kind_names();
    for (std::size_t k = 0; k < names.size(); ++k)
        if (names[k] == name) return static_cast<ExperimentKind>(k);
    throw std::invalid_argument("unknown experiment kind: " + name);
}

std::string to_string(ExperimentKind kind) { return experiment_kind_names().at(static_cast<std::size_t>(kind)); }

void ExperimentConfig::validate() const {
    if (lambdas.empty()) throw std::invalid_argument("experiment needs at least one lambda");
    for (double l : lambdas)
        if (!(l > 0.0 && l <= 1.0)) throw std::invalid_argument("experiment lambdas must lie in (0, 1]");
    if (!(T > 0.0)) throw std::invalid_argument("experiment T must be positive");
    if (n_paths < 2) throw std::invalid_argument("experiment needs at least 2 paths");
    if (p_hat0s.empty()) throw std::invalid_argument("experiment needs at least one p_hat0");
    if (n_macro < 1) throw std::invalid_argument("n_macro must be positive");
}

ExperimentConfig default_experiment_config(ExperimentKind kind) {
    ExperimentConfig c;
    switch (kind) {
        case ExperimentKind::thm_main:
            c.lambdas = {0.1, 0.05, 0.02};
            c.n_paths = 10000;
            c.p_hat0s = {0.0, 1.0};
            c.n_macro = 10;
            break;
        case ExperimentKind::drift_bound:
            c.lambdas = {0.1, 0.05, 0.02};
            c.n_paths = 1000;
            break;
        case ExperimentKind::local_time:
            c.lambdas = {0.1, 0.05, 0.02};
            c.n_paths = 500;
            break;
        default:
            c.lambdas = {0.1, 0.05, 0.02, 0.01};
            c.n_paths = 500;
            break;
    }
    return c;
}

json ExperimentReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["kind"] = lbe::to_string(kind);
    j["inputs"] = inputs;
    j["rows"] = json::array();
    for (const auto& r : rows) {
        json e = {{"lambda", r.lambda}, {"p_hat0", r.p_hat0}, {"n_paths", r.n_paths}};
        e["estimates"] = json::object();
        for (const auto& [k, m] : r.estimates) e["estimates"][k] = {{"mean", m.mean}, {"se", m.se}, {"n", m.n}};
        e["values"] = json::object();
        for (const auto& [k, v] : r.values) e["values"][k] = v;
        j["rows"].push_back(e);
    }
    j["fits"] = json::object();
    for (const auto& [k, f] : fits)
        j["fits"][k] = {{"slope", f.slope}, {"intercept", f.intercept}, {"slope_se", f.slope_se},
                        {"residual_rms", f.residual_rms}};
    j["checks"] = json::array();
    for (const auto& c : checks)
        j["checks"].push_back({{"name", c.name},
                               {"value", c.value},
                               {"relation", c.relation},
                               {"target", c.target},
                               {"tolerance", c.tolerance},
                               {"pass", c.pass}});
    j["pass"] = pass;
    return j;
}

namespace {

bool uses(const std::vector<ExperimentKind>& kinds, ExperimentKind k) {
    return std::find(kinds.begin(), kinds.end(), k) != kinds.end();
}

json inputs_json(const ExperimentConfig& c) {
    return {{"lambdas", c.lambdas},
            {"T", c.T},
            {"n_paths", c.n_paths},
            {"p_hat0s", c.p_hat0s},
            {"n_macro", c.n_macro},
            {"seed", c.seed},
            {"potential", potential_to_json(c.potential)},
            {"quad_rel_tol", c.quad_rel_tol},
            {"flow_energy_tol", c.flow.energy_tol},
            {"flow_step_scale", c.flow.step_scale}};
}

const EnsembleData& find_data(const std::vector<EnsembleData>& data, double lambda, double p_hat0) {
    for (const auto& d : data)
        if (d.lambda == lambda && d.p_hat0 == p_hat0) return d;
    throw std::invalid_argument("missing ensemble for lambda " + std::to_string(lambda));
}

std::vector<double> macro_mesh(const ExperimentConfig& cfg) {
    std::vector<double> m;
    for (int k = 0; k <= cfg.n_macro; ++k) m.push_back(cfg.T * k / cfg.n_macro);
    return m;
}

// lambdas in decreasing order, the direction of the limit
std::vector<double> limit_order(std::vector<double> l) {
    std::sort(l.begin(), l.end(), std::greater<>());
    return l;
}

ExperimentCheck check_le(const std::string& name, double value, double target) {
    return {name, value, "<=", target, 0.0, value <= target};
}

// each value (ordered along decreasing lambda) at most the previous one plus slack
ExperimentCheck check_nonincreasing(const std::string& name, const std::vector<double>& v,
                                    const std::vector<double>& slack) {
    double worst = -std::numeric_limits<double>::infinity();
    bool ok = true;
    for (std::size_t k = 1; k < v.size(); ++k) {
        const double excess = v[k] - v[k - 1] - slack[k];
        worst = std::max(worst, v[k] - v[k - 1]);
        ok = ok && excess <= 0.0;
    }
    const double tol = slack.empty() ? 0.0 : *std::max_element(slack.begin(), slack.end());
    return {name, v.size() > 1 ? worst : 0.0, "nonincreasing", 0.0, tol, ok};
}

ExperimentCheck check_in(const std::string& name, double value, double target, double tol) {
    return {name, value, "in", target, tol, std::abs(value - target) <= tol};
}

MeanSE stat_over_paths(const EnsembleData& d, const std::function<double(const TrajectoryResult&)>& f) {
    std::vector<double> v;
    v.reserve(d.paths.size());
    for (const auto& p : d.paths) v.push_back(f(p));
    return mean_se(v);
}

}  // namespace

SimConfig experiment_sim_config(const ExperimentConfig& cfg, double lambda, double p_hat0,
                                const std::vector<ExperimentKind>& kinds) {
    SimConfig c;
    c.model.lambda = lambda;
    c.model.quad_rel_tol = cfg.quad_rel_tol;
    c.potential = cfg.potential;
    c.x0 = 0.0;
    c.p0 = momentum_from_rescaled(p_hat0, lambda);
    c.horizon = cfg.T / lambda;
    c.checkpoints = uniform_checkpoints(c.horizon, cfg.n_macro);
    c.flow = cfg.flow;
    c.occupation_level = 1.0;
    c.seed = derive_seed(cfg.seed, StreamTag::experiment, std::bit_cast<std::uint64_t>(lambda),
                         std::bit_cast<std::uint64_t>(p_hat0));
    Observables o;
    o.track_D = true;
    o.track_J = true;
    o.track_M_compensator = uses(kinds, ExperimentKind::change_drift);
    o.track_bracket = uses(kinds, ExperimentKind::martingale_clt);
    o.track_L = uses(kinds, ExperimentKind::local_time);
    o.track_A_plus = uses(kinds, ExperimentKind::local_time);
    o.track_companion = uses(kinds, ExperimentKind::change_drift);
    o.track_sup_stats = uses(kinds, ExperimentKind::drift_bound);
    c.obs = o;
    if (o.track_A_plus) {
        ModelParams mp = c.model;
        // lookups clamp at the last node, which is exact for A+ once A is negative there
        auto table = std::make_shared<const EnergyTable>(mp, c.potential, 40.0);
        for (int i = 0; i < table->n_x(); ++i)
            if (table->A((i + 0.5) / table->n_x(), table->p_max()) >= 0.0)
                throw std::runtime_error("A+ table does not reach the region where A < 0");
        c.a_table = table;
    }
    return c;
}

std::vector<EnsembleData> collect_ensembles(const ExperimentConfig& cfg, const std::vector<ExperimentKind>& kinds) {
    cfg.validate();
    std::vector<EnsembleData> out;
    const bool with_p0 = uses(kinds, ExperimentKind::thm_main);
    for (double lambda : cfg.lambdas) {
        std::shared_ptr<const EnergyTable> table;
        for (double p_hat0 : with_p0 ? cfg.p_hat0s : std::vector<double>{cfg.p_hat0s.front()}) {
            SimConfig c = experiment_sim_config(cfg, lambda, p_hat0, kinds);
            if (table) c.a_table = table;
            table = c.a_table;
            EnsembleData d;
            d.lambda = lambda;
            d.p_hat0 = p_hat0;
            d.paths = run_ensemble(c, cfg.n_paths, cfg.workers).paths;
            out.push_back(std::move(d));
        }
    }
    return out;
}

ExperimentReport analyze_experiment(ExperimentKind kind, const ExperimentConfig& cfg,
                                    const std::vector<EnsembleData>& data) {
    cfg.validate();
    ExperimentReport rep;
    rep.kind = kind;
    rep.inputs = inputs_json(cfg);
    const std::vector<double> lams = limit_order(cfg.lambdas);
    const std::vector<double> mesh = macro_mesh(cfg);
    const double p_hat0 = cfg.p_hat0s.front();

    switch (kind) {
        case ExperimentKind::thm_main: {
            for (double p0 : cfg.p_hat0s) {
                OUParams ou;
                ou.p_hat0 = p0;
                const Marginal m = ou_marginal(ou, cfg.T);
                std::vector<double> ks, slack;
                for (double lam : lams) {
                    const auto& d = find_data(data, lam, p0);
                    std::vector<double> sample;
                    for (const auto& p : d.paths) sample.push_back(rescale(p, momentum_from_rescaled(p0, lam), lam, mesh).P.back());
                    const double stat = ks_statistic(sample, [&](double x) { return normal_cdf(x, m.mean, m.var); });
                    ExperimentRow row{lam, p0, static_cast<long>(d.paths.size()), {}, {}};
                    row.estimates["P_hat_T"] = mean_se(sample);
                    row.values["ks"] = stat;
                    row.values["ou_mean"] = m.mean;
                    row.values["ou_var"] = m.var;
                    rep.rows.push_back(row);
                    ks.push_back(stat);
                    slack.push_back(ks.size() > 1 ? cfg.ks_slack : 0.0);
                }
                const std::string tag = "p_hat0=" + format_double(p0);
                rep.checks.push_back(check_nonincreasing("ks nonincreasing in lambda, " + tag, ks, slack));
                rep.checks.push_back(check_le("ks at smallest lambda, " + tag, ks.back(), cfg.ks_target));
            }
            break;
        }
        case ExperimentKind::drift_bound: {
            std::vector<double> m;
            for (double lam : lams) {
                const auto& d = find_data(data, lam, p_hat0);
                const MeanSE s = stat_over_paths(d, [](const TrajectoryResult& t) { return t.stats.sup_abs_D_rescaled; });
                rep.rows.push_back({lam, p_hat0, static_cast<long>(d.paths.size()), {{"sup_abs_D_rescaled", s}}, {}});
                m.push_back(s.mean);
            }
            const double ratio = m.back() / m.front();
            rep.checks.push_back(check_le("m(lambda_min) / m(lambda_max)", ratio, cfg.drift_ratio));
            break;
        }
        case ExperimentKind::energy_sup:
        case ExperimentKind::occupation: {
            std::vector<double> x, y;
            for (double lam : lams) {
                const auto& d = find_data(data, lam, p_hat0);
                ExperimentRow row{lam, p_hat0, static_cast<long>(d.paths.size()), {}, {}};
                if (kind == ExperimentKind::energy_sup) {
                    row.estimates["sup_H"] = stat_over_paths(d, [](const TrajectoryResult& t) { return t.stats.sup_H; });
                    x.push_back(1.0 / lam);
                    y.push_back(row.estimates["sup_H"].mean);
                } else {
                    row.estimates["lambda_occupation"] = stat_over_paths(
                        d, [lam](const TrajectoryResult& t) { return lam * t.checkpoints.back().occupation; });
                    x.push_back(lam);
                    y.push_back(row.estimates["lambda_occupation"].mean);
                }
                rep.rows.push_back(row);
            }
            const LineFit f = fit_loglog(x, y);
            const bool energy = kind == ExperimentKind::energy_sup;
            const double target = energy ? cfg.energy_slope : cfg.occupation_slope;
            const std::string what = energy ? "energy slope" : "occupation slope";
            rep.fits[energy ? "log_sup_H_vs_log_inv_lambda" : "log_lambda_occupation_vs_log_lambda"] = f;
            rep.checks.push_back(check_in(what, f.slope, target, energy ? cfg.energy_slope_tol : cfg.occupation_slope_tol));
            rep.checks.push_back(check_in(what + " residual interval", f.slope, target, cfg.slope_se_mult * f.slope_se));
            break;
        }
        case ExperimentKind::martingale_clt: {
            std::vector<double> dev, dev_slack, lind, lind_slack;
            double at_target = std::numeric_limits<double>::quiet_NaN();
            for (double lam : lams) {
                const auto& d = find_data(data, lam, p_hat0);
                const MeanSE s = stat_over_paths(d, [&](const TrajectoryResult& t) {
                    const ScaledPath sp = rescale(t, momentum_from_rescaled(p_hat0, lam), lam, mesh);
                    double sup = 0.0;
                    for (std::size_t k = 0; k < sp.t.size(); ++k) sup = std::max(sup, std::abs(sp.bracket[k] - sp.t[k]));
                    return sup;
                });
                const MeanSE l = stat_over_paths(d, [&](const TrajectoryResult& t) {
                    return t.stats.max_jump * t.stats.max_jump > cfg.lindeberg_eps / lam ? 1.0 : 0.0;
                });
                rep.rows.push_back({lam, p_hat0, static_cast<long>(d.paths.size()),
                                    {{"sup_bracket_deviation", s}, {"lindeberg_exceedance", l}}, {}});
                if (!dev.empty()) {
                    dev_slack.push_back(2.0 * std::hypot(s.se, rep.rows[rep.rows.size() - 2].estimates["sup_bracket_deviation"].se));
                    lind_slack.push_back(2.0 * std::hypot(l.se, rep.rows[rep.rows.size() - 2].estimates["lindeberg_exceedance"].se));
                } else {
                    dev_slack.push_back(0.0);
                    lind_slack.push_back(0.0);
                }
                dev.push_back(s.mean);
                lind.push_back(l.mean);
                if (lam == cfg.bracket_lambda) at_target = s.mean;
            }
            if (std::isnan(at_target)) at_target = dev.back();
            rep.checks.push_back(check_le("bracket deviation at lambda " + format_double(cfg.bracket_lambda), at_target,
                                          cfg.bracket_target));
            rep.checks.push_back(check_nonincreasing("bracket deviation nonincreasing in lambda (2 se)", dev, dev_slack));
            rep.checks.push_back(check_nonincreasing("lindeberg exceedance nonincreasing in lambda (2 se)", lind, lind_slack));
            rep.checks.push_back({"lindeberg exceedance at smallest lambda below largest", lind.back(), "<", lind.front(),
                                  0.0, lind.size() > 1 && lind.back() < lind.front()});
            break;
        }
        case ExperimentKind::change_drift: {
            std::vector<double> m;
            for (double lam : lams) {
                const auto& d = find_data(data, lam, p_hat0);
                const MeanSE s = stat_over_paths(d, [](const TrajectoryResult& t) { return t.stats.sup_companion_gap; });
                rep.rows.push_back({lam, p_hat0, static_cast<long>(d.paths.size()), {{"sup_companion_gap", s}}, {}});
                m.push_back(s.mean);
            }
            const double ratio = std::max(m.back() / m.front(), m.front() / m.back());
            rep.checks.push_back(check_le("endpoint ratio of mean sup |P' - P|", ratio, cfg.change_drift_ratio));
            break;
        }
        case ExperimentKind::local_time: {
            std::vector<double> dev, slack;
            for (double lam : lams) {
                const auto& d = find_data(data, lam, p_hat0);
                const double r = std::sqrt(lam);
                const MeanSE s = stat_over_paths(d, [r](const TrajectoryResult& t) {
                    double sup = 0.0;
                    for (const auto& c : t.checkpoints) sup = std::max(sup, r * std::abs(c.L - c.A_plus));
                    return sup;
                });
                ExperimentRow row{lam, p_hat0, static_cast<long>(d.paths.size()), {{"sup_local_time_gap", s}}, {}};
                // growth of the A+ integral against sqrt(t)
                std::vector<double> sq, mean_a;
                const std::size_t nck = d.paths.front().checkpoints.size();
                for (std::size_t k = 1; k < nck; ++k) {
                    double acc = 0.0;
                    for (const auto& p : d.paths) acc += p.checkpoints[k].A_plus;
                    sq.push_back(std::sqrt(d.paths.front().checkpoints[k].t));
                    mean_a.push_back(acc / static_cast<double>(d.paths.size()));
                }
                const LineFit f = fit_line(sq, mean_a);
                row.values["A_plus_sqrt_slope"] = f.slope;
                row.values["A_plus_sqrt_slope_se"] = f.slope_se;
                row.values["A_plus_intercept"] = f.intercept;
                rep.fits["A_plus_vs_sqrt_t_lambda_" + format_double(lam)] = f;
                if (lam == cfg.ltlb_lambda)
                    rep.checks.push_back({"A+ growth coefficient c at lambda " + format_double(lam), f.slope, ">=", 0.0,
                                          0.0, f.slope > 0.0});
                slack.push_back(dev.empty() ? 0.0 : 2.0 * std::hypot(s.se, rep.rows.back().estimates["sup_local_time_gap"].se));
                dev.push_back(s.mean);
                rep.rows.push_back(row);
            }
            rep.checks.push_back(check_nonincreasing("local-time gap nonincreasing in lambda (2 se)", dev, slack));
            break;
        }
    }
    rep.pass = std::all_of(rep.checks.begin(), rep.checks.end(), [](const ExperimentCheck& c) { return c.pass; });
    return rep;
}

ExperimentReport run_experiment(ExperimentKind kind, const ExperimentConfig& cfg) {
    return analyze_experiment(kind, cfg, collect_ensembles(cfg, {kind}));
}

}  // namespace lbe
