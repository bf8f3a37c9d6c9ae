#include "lbe/commands.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <map>
#include <ostream>
#include <sstream>

#include "lbe/grid.hpp"
#include "lbe/grid_checks.hpp"
#include "lbe/kernel.hpp"
#include "lbe/serialize.hpp"

namespace lbe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

namespace {

const std::map<std::string, std::pair<std::string, std::string>>& schemas() {
    static const std::map<std::string, std::pair<std::string, std::string>> s{
        {"kernel-table",
         {"Tabulates the collision kernel functionals on a momentum grid.",
          "kernel_table.csv: lambda,p,escape_rate,drift,second_moment,q_variance\n"
          "kernel-table.json: envelope; result {rows}"}},
        {"sweep-inequalities",
         {"Fitted-constant checks of the kernel and energy-functional inequalities under 2x refinement.",
          "sweep.csv: id,kind,cap,constant,constant_refined,drift,at_lambda,at_x,at_p,n_points,n_skipped,pass,reason\n"
          "sweep-inequalities.json: envelope; result {schema_version,items[{id,statement,kind,cap,constant,\n"
          "  constant_refined,drift,at{lambda,x,p},n_points,n_skipped,per_lambda[{lambda,constant}],pass,reason}],pass}"}},
        {"simulate",
         {"One trajectory of the heavy particle with checkpointed observables.",
          "trajectory.csv: t,x,p,H,D,J,N,M_comp,bracket,L\n"
          "simulate.json: envelope; result {stats{sup_H,sup_abs_D,sup_abs_D_rescaled,max_jump,proposals,collisions}}"}},
        {"ensemble",
         {"Independent trajectories; per-checkpoint means and standard errors.",
          "ensemble.csv: t,field,mean,se,n\n"
          "ensemble.json: envelope; result {n_paths,path_stats{<field>{mean,se,n}}}"}},
        {"grid-build",
         {"Estimates the surrogate cell chain, its stationary vector and minorization.",
          "grid/grid.json, grid/cells.csv, grid/matrix.csv, grid/vectors.csv (readable by grid-check)\n"
          "grid-build.json: envelope; result {lambda,n_cells,level,low_set_size,epsilon,pi_h,leakage}"}},
        {"grid-check",
         {"Sampler versus linear-algebra identities, structure and ergodicity checks on one grid;\n"
          "optionally the fractional cycle-moment scaling over several grids.",
          "grid_check.csv: group,name,value,target,se,tolerance,relation,pass\n"
          "grid-check.json: envelope; result {grid{schema_version,checks[{group,name,value,target,se,tolerance,\n"
          "  relation,pass}],ergodicity{...},modulated_gap_min,pass},fractional{alpha,rows[...],slope,slope_se,\n"
          "  frac_spread,checks[...],pass} or null}"}},
        {"limit-experiment",
         {"Ensemble experiments on the rescaled momentum (kinds: thm_main, drift_bound, energy_sup, occupation,\n"
          "martingale_clt, change_drift, local_time, or all).",
          "limit_experiment.csv: kind,lambda,p_hat0,n_paths,quantity,value,se,n\n"
          "limit-experiment.json: envelope; result {reports[{schema_version,kind,inputs,rows[{lambda,p_hat0,\n"
          "  n_paths,estimates{<q>{mean,se,n}},values{<q>}}],fits{<f>{slope,intercept,slope_se,residual_rms}},\n"
          "  checks[{name,value,relation,target,tolerance,pass}],pass}]}"}},
    };
    return s;
}

const char* kEnvelope =
    "Every <command>.json has {schema_version, command, config, pass, failure, artifacts, result}; failure is null\n"
    "or {code, message, failed[]} with code check_failed or computation_error.\n"
    "Exit status: 0 success, 1 failed check or computation error (report written), 2 config error (nothing written).";

std::string num(double v) { return format_double(v); }

class CsvWriter {
public:
    CsvWriter(const fs::path& path, const std::vector<std::string>& header) : out_(path, std::ios::binary) {
        if (!out_) throw std::runtime_error("cannot write " + path.string());
        row(header);
    }
    void row(const std::vector<std::string>& fields) {
        for (std::size_t i = 0; i < fields.size(); ++i) out_ << (i ? "," : "") << csv_field(fields[i]);
        out_ << "\n";
    }

private:
    std::ofstream out_;
};

void write_json(const fs::path& path, const json& j) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw std::runtime_error("cannot write " + path.string());
    out << j.dump(2) << "\n";
}

struct Run {
    json result = json::object();
    std::vector<std::string> artifacts;
    std::vector<std::string> failed;
};

void kernel_table(const RunConfig& c, const fs::path& dir, Run& r) {
    CsvWriter csv(dir / "kernel_table.csv", {"lambda", "p", "escape_rate", "drift", "second_moment", "q_variance"});
    long rows = 0;
    for (double l : c.table_lambdas.empty() ? std::vector<double>{c.model.lambda} : c.table_lambdas) {
        ModelParams mp = c.model;
        mp.lambda = l;
        for (int i = 0; i < c.table_n_p; ++i) {
            const double p = c.table_n_p == 1 ? c.table_p_min
                                              : c.table_p_min + (c.table_p_max - c.table_p_min) * i / (c.table_n_p - 1);
            csv.row({num(l), num(p), num(escape_rate(mp, p)), num(jump_drift(mp, p)), num(jump_second_moment(mp, p)),
                     num(q_variance(mp, p))});
            ++rows;
        }
    }
    r.artifacts.push_back("kernel_table.csv");
    r.result["rows"] = rows;
}

void sweep(const RunConfig& c, const fs::path& dir, Run& r) {
    const SweepReport rep = run_inequality_sweeps(c.sweep_options());
    CsvWriter csv(dir / "sweep.csv", {"id", "kind", "cap", "constant", "constant_refined", "drift", "at_lambda", "at_x",
                                      "at_p", "n_points", "n_skipped", "pass", "reason"});
    for (const auto& it : rep.items) {
        csv.row({it.id, it.kind == BoundKind::upper ? "upper" : "lower", num(it.cap), num(it.constant),
                 num(it.constant_refined), num(it.drift), num(it.at_lambda), num(it.at_x), num(it.at_p),
                 std::to_string(it.n_points), std::to_string(it.n_skipped), it.pass ? "true" : "false", it.reason});
        if (!it.pass) r.failed.push_back(it.id);
    }
    r.artifacts.push_back("sweep.csv");
    r.result = rep.to_json();
}

void simulate_one(const RunConfig& c, const fs::path& dir, Run& r) {
    const TrajectoryResult tr = simulate(c.sim_config());
    CsvWriter csv(dir / "trajectory.csv", {"t", "x", "p", "H", "D", "J", "N", "M_comp", "bracket", "L"});
    for (const auto& k : tr.checkpoints)
        csv.row({num(k.t), num(k.x), num(k.p), num(k.H), num(k.D), num(k.J), std::to_string(k.N), num(k.M_comp),
                 num(k.bracket), num(k.L)});
    r.artifacts.push_back("trajectory.csv");
    const auto& s = tr.stats;
    r.result["stats"] = {{"sup_H", s.sup_H},         {"sup_abs_D", s.sup_abs_D},
                         {"sup_abs_D_rescaled", s.sup_abs_D_rescaled}, {"max_jump", s.max_jump},
                         {"proposals", s.proposals}, {"collisions", s.collisions}};
}

void ensemble(const RunConfig& c, const fs::path& dir, Run& r) {
    const EnsembleResult res = run_ensemble(c.sim_config(), c.n_paths, c.workers);
    const auto& sm = res.summary;
    CsvWriter csv(dir / "ensemble.csv", {"t", "field", "mean", "se", "n"});
    for (std::size_t f = 0; f < sm.fields.size(); ++f)
        for (std::size_t k = 0; k < sm.t.size(); ++k) {
            const MeanSE& m = sm.per_checkpoint[f][k];
            csv.row({num(sm.t[k]), sm.fields[f], num(m.mean), num(m.se), std::to_string(m.n)});
        }
    r.artifacts.push_back("ensemble.csv");
    r.result["n_paths"] = c.n_paths;
    r.result["path_stats"] = json::object();
    for (std::size_t i = 0; i < sm.stat_fields.size(); ++i)
        r.result["path_stats"][sm.stat_fields[i]] = {
            {"mean", sm.path_stats[i].mean}, {"se", sm.path_stats[i].se}, {"n", sm.path_stats[i].n}};
}

json grid_summary(const GridModel& gm) {
    return {{"lambda", gm.model.lambda},
            {"n_cells", gm.n_cells()},
            {"level", gm.mino.level},
            {"low_set_size", gm.mino.low_set.size()},
            {"epsilon", gm.mino.epsilon},
            {"pi_h", gm.pi.dot(gm.mino.h)},
            {"leakage", gm.leakage}};
}

void grid_build(const RunConfig& c, const fs::path& dir, Run& r) {
    const GridModel gm = build_grid_chain(c.model, c.potential, c.grid, c.seed, c.workers);
    save_grid(gm, (dir / "grid").string());
    for (const char* f : {"grid/grid.json", "grid/cells.csv", "grid/matrix.csv", "grid/vectors.csv"})
        r.artifacts.push_back(f);
    r.result = grid_summary(gm);
}

void grid_check(const RunConfig& c, const fs::path& dir, Run& r) {
    const GridModel gm = c.grid_dir.empty() ? build_grid_chain(c.model, c.potential, c.grid, c.seed, c.workers)
                                            : load_grid(c.grid_dir);
    GridCheckOptions opt = c.check;
    opt.seed = c.seed;
    const GridCheckReport rep = run_grid_checks(gm, opt);
    std::vector<GridCheck> all = rep.checks;
    r.result["grid_summary"] = grid_summary(gm);
    r.result["grid"] = rep.to_json();
    r.result["fractional"] = nullptr;
    if (!c.frac_lambdas.empty()) {
        std::vector<GridModel> grids;
        for (double l : c.frac_lambdas) {
            ModelParams mp = c.model;
            mp.lambda = l;
            grids.push_back(build_grid_chain(mp, c.potential, c.grid, c.seed, c.workers));
        }
        std::vector<const GridModel*> ptrs;
        for (const auto& g : grids) ptrs.push_back(&g);
        const FracMomentCheck fc = check_fractional_moments(ptrs, c.frac_alpha, c.frac_cycles, c.seed);
        all.insert(all.end(), fc.checks.begin(), fc.checks.end());
        r.result["fractional"] = fc.to_json();
    }
    CsvWriter csv(dir / "grid_check.csv", {"group", "name", "value", "target", "se", "tolerance", "relation", "pass"});
    for (const auto& k : all) {
        csv.row({k.group, k.name, num(k.value), num(k.target), num(k.se), num(k.tolerance), k.relation,
                 k.pass ? "true" : "false"});
        if (!k.pass) r.failed.push_back(k.group + ": " + k.name);
    }
    r.artifacts.push_back("grid_check.csv");
}

void limit_experiment(const RunConfig& c, const fs::path& dir, Run& r, std::ostream& log) {
    // kinds with identical ensemble settings share paths
    std::vector<std::pair<ExperimentConfig, std::vector<ExperimentKind>>> groups;
    for (auto kind : c.experiment_kinds) {
        const ExperimentConfig e = c.experiment_config(kind);
        auto same = [&](const ExperimentConfig& o) {
            return kind != ExperimentKind::thm_main && o.lambdas == e.lambdas && o.T == e.T && o.n_paths == e.n_paths &&
                   o.p_hat0s == e.p_hat0s && o.n_macro == e.n_macro;
        };
        auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
            return g.second.front() != ExperimentKind::thm_main && same(g.first);
        });
        if (it == groups.end()) groups.push_back({e, {kind}});
        else it->second.push_back(kind);
    }
    std::map<ExperimentKind, ExperimentReport> reports;
    for (const auto& [e, kinds] : groups) {
        const auto data = collect_ensembles(e, kinds);
        for (auto kind : kinds) {
            reports[kind] = analyze_experiment(kind, c.experiment_config(kind), data);
            log << "  " << to_string(kind) << (reports[kind].pass ? " pass" : " FAIL") << "\n";
        }
    }
    CsvWriter csv(dir / "limit_experiment.csv", {"kind", "lambda", "p_hat0", "n_paths", "quantity", "value", "se", "n"});
    r.result["reports"] = json::array();
    for (auto kind : c.experiment_kinds) {
        const ExperimentReport& rep = reports.at(kind);
        const std::string k = to_string(kind);
        for (const auto& row : rep.rows) {
            for (const auto& [q, m] : row.estimates)
                csv.row({k, num(row.lambda), num(row.p_hat0), std::to_string(row.n_paths), q, num(m.mean), num(m.se),
                         std::to_string(m.n)});
            for (const auto& [q, v] : row.values)
                csv.row({k, num(row.lambda), num(row.p_hat0), std::to_string(row.n_paths), q, num(v), "", ""});
        }
        for (const auto& ch : rep.checks)
            if (!ch.pass) r.failed.push_back(k + ": " + ch.name);
        r.result["reports"].push_back(rep.to_json());
    }
    r.artifacts.push_back("limit_experiment.csv");
}

}  // namespace

std::string command_summary(const std::string& command) { return schemas().at(command).first; }

std::string command_schema(const std::string& command) {
    return "Outputs (in run.output_dir):\n" + schemas().at(command).second + "\n" + kEnvelope;
}

CommandOutcome run_command(const RunConfig& cfg, std::ostream& log) {
    const fs::path dir(cfg.output_dir);
    fs::create_directories(dir);
    Run r;
    json failure = nullptr;
    const auto t0 = std::chrono::steady_clock::now();
    try {
        if (cfg.command == "kernel-table") kernel_table(cfg, dir, r);
        else if (cfg.command == "sweep-inequalities") sweep(cfg, dir, r);
        else if (cfg.command == "simulate") simulate_one(cfg, dir, r);
        else if (cfg.command == "ensemble") ensemble(cfg, dir, r);
        else if (cfg.command == "grid-build") grid_build(cfg, dir, r);
        else if (cfg.command == "grid-check") grid_check(cfg, dir, r);
        else if (cfg.command == "limit-experiment") limit_experiment(cfg, dir, r, log);
        else throw std::invalid_argument("unknown command " + cfg.command);
        if (!r.failed.empty())
            failure = {{"code", "check_failed"},
                       {"message", std::to_string(r.failed.size()) + " check(s) failed"},
                       {"failed", r.failed}};
    } catch (const std::exception& e) {
        failure = {{"code", "computation_error"}, {"message", e.what()}, {"failed", json::array()}};
    }
    log << cfg.command << ": " << std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count()
        << " s\n";

    CommandOutcome out;
    const std::string report_name = cfg.command + ".json";
    out.artifacts = r.artifacts;
    out.artifacts.push_back(report_name);
    out.exit_code = failure.is_null() ? kExitOk : kExitFailed;
    out.report = {{"schema_version", 1},     {"command", cfg.command}, {"config", cfg.to_json()},
                  {"pass", failure.is_null()}, {"failure", failure},   {"artifacts", out.artifacts},
                  {"result", r.result}};
    write_json(dir / report_name, out.report);
    return out;
}

}  // namespace lbe
