#include "lbe/config.hpp"

#include <algorithm>
#include <charconv>
#include <cstdlib>
#include <functional>
#include <set>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

namespace lbe {

using nlohmann::json;

const std::vector<std::string>& command_names() {
    static const std::vector<std::string> n{"kernel-table", "sweep-inequalities", "simulate",     "ensemble",
                                            "grid-build",   "grid-check",         "limit-experiment"};
    return n;
}

namespace {

std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t\r\n");
    if (a == std::string::npos) return "";
    const auto b = s.find_last_not_of(" \t\r\n");
    return s.substr(a, b - a + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
    std::vector<std::string> out;
    if (trim(s).empty()) return out;
    std::size_t start = 0;
    while (true) {
        const auto k = s.find(sep, start);
        out.push_back(trim(s.substr(start, k - start)));
        if (k == std::string::npos) break;
        start = k + 1;
    }
    return out;
}

template <class T>
T parse_number(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    T out{};
    const auto res = std::from_chars(v.data(), v.data() + v.size(), out);
    if (v.empty() || res.ec != std::errc() || res.ptr != v.data() + v.size())
        throw ConfigError(key + ": cannot parse '" + raw + "'");
    return out;
}

double parse_double(const std::string& key, const std::string& raw) {
    const double d = parse_number<double>(key, raw);
    if (!std::isfinite(d)) throw ConfigError(key + ": value must be finite");
    return d;
}

bool parse_bool(const std::string& key, const std::string& raw) {
    const std::string v = trim(raw);
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + raw + "'");
}

std::vector<double> parse_doubles(const std::string& key, const std::string& raw) {
    std::vector<double> out;
    for (const auto& f : split(raw, ',')) out.push_back(parse_double(key, f));
    return out;
}

std::vector<Harmonic> parse_harmonics(const std::string& key, const std::string& raw) {
    std::vector<Harmonic> out;
    for (const auto& f : split(raw, ',')) {
        const auto ab = split(f, ':');
        if (ab.size() != 2) throw ConfigError(key + ": expected a:b pairs, got '" + f + "'");
        out.push_back({parse_double(key, ab[0]), parse_double(key, ab[1])});
    }
    return out;
}

std::vector<ExperimentKind> parse_kinds(const std::string& key, const std::string& raw) {
    std::vector<ExperimentKind> out;
    for (const auto& f : split(raw, ',')) {
        if (f == "all") {
            for (const auto& n : experiment_kind_names()) out.push_back(parse_experiment_kind(n));
            continue;
        }
        try {
            out.push_back(parse_experiment_kind(f));
        } catch (const std::exception&) {
            throw ConfigError(key + ": unknown experiment kind '" + f + "'");
        }
    }
    if (out.empty()) throw ConfigError(key + ": empty kind list");
    return out;
}

struct Key {
    ConfigKey info;
    std::function<void(RunConfig&, const std::string&)> set;
    std::function<json(const RunConfig&)> get;
};

#define LBE_DOUBLE(name, field, help)                                                             \
    Key {                                                                                         \
        {name, "number", help}, [](RunConfig& c, const std::string& v) { field = parse_double(name, v); }, \
            [](const RunConfig& c) { return json(field); }                                       \
    }
#define LBE_INT(name, T, field, help)                                                             \
    Key {                                                                                         \
        {name, "integer", help}, [](RunConfig& c, const std::string& v) { field = parse_number<T>(name, v); }, \
            [](const RunConfig& c) { return json(field); }                                       \
    }
#define LBE_BOOL(name, field, help)                                                               \
    Key {                                                                                         \
        {name, "boolean", help}, [](RunConfig& c, const std::string& v) { field = parse_bool(name, v); }, \
            [](const RunConfig& c) { return json(field); }                                       \
    }

// experiment keys are stored as overrides and applied on top of per-kind settings
void apply_experiment_key(ExperimentConfig& e, const std::string& k, const std::string& v) {
    const std::string key = "experiment." + k;
    if (k == "lambdas") e.lambdas = parse_doubles(key, v);
    else if (k == "T") e.T = parse_double(key, v);
    else if (k == "n_paths") e.n_paths = parse_number<long>(key, v);
    else if (k == "p_hat0s") e.p_hat0s = parse_doubles(key, v);
    else if (k == "n_macro") e.n_macro = parse_number<int>(key, v);
    else if (k == "ks_target") e.ks_target = parse_double(key, v);
    else if (k == "ks_slack") e.ks_slack = parse_double(key, v);
    else if (k == "drift_ratio") e.drift_ratio = parse_double(key, v);
    else if (k == "energy_slope") e.energy_slope = parse_double(key, v);
    else if (k == "energy_slope_tol") e.energy_slope_tol = parse_double(key, v);
    else if (k == "occupation_slope") e.occupation_slope = parse_double(key, v);
    else if (k == "occupation_slope_tol") e.occupation_slope_tol = parse_double(key, v);
    else if (k == "slope_se_mult") e.slope_se_mult = parse_double(key, v);
    else if (k == "bracket_target") e.bracket_target = parse_double(key, v);
    else if (k == "bracket_lambda") e.bracket_lambda = parse_double(key, v);
    else if (k == "lindeberg_eps") e.lindeberg_eps = parse_double(key, v);
    else if (k == "change_drift_ratio") e.change_drift_ratio = parse_double(key, v);
    else if (k == "ltlb_lambda") e.ltlb_lambda = parse_double(key, v);
    else throw ConfigError("unknown key " + key);
}

json experiment_to_json(const ExperimentConfig& e) {
    return {{"lambdas", e.lambdas},
            {"T", e.T},
            {"n_paths", e.n_paths},
            {"p_hat0s", e.p_hat0s},
            {"n_macro", e.n_macro},
            {"ks_target", e.ks_target},
            {"ks_slack", e.ks_slack},
            {"drift_ratio", e.drift_ratio},
            {"energy_slope", e.energy_slope},
            {"energy_slope_tol", e.energy_slope_tol},
            {"occupation_slope", e.occupation_slope},
            {"occupation_slope_tol", e.occupation_slope_tol},
            {"slope_se_mult", e.slope_se_mult},
            {"bracket_target", e.bracket_target},
            {"bracket_lambda", e.bracket_lambda},
            {"lindeberg_eps", e.lindeberg_eps},
            {"change_drift_ratio", e.change_drift_ratio},
            {"ltlb_lambda", e.ltlb_lambda}};
}

const std::vector<std::string>& experiment_keys() {
    static const std::vector<std::string> k{"lambdas",          "T",
                                            "n_paths",          "p_hat0s",
                                            "n_macro",          "ks_target",
                                            "ks_slack",         "drift_ratio",
                                            "energy_slope",     "energy_slope_tol",
                                            "occupation_slope", "occupation_slope_tol",
                                            "slope_se_mult",    "bracket_target",
                                            "bracket_lambda",   "lindeberg_eps",
                                            "change_drift_ratio", "ltlb_lambda"};
    return k;
}

const std::vector<Key>& registry() {
    static const std::vector<Key> keys = [] {
        std::vector<Key> k{
            LBE_DOUBLE("model.lambda", c.model.lambda, "mass ratio in [0, 1]"),
            LBE_DOUBLE("model.quad_rel_tol", c.model.quad_rel_tol, "relative tolerance of kernel quadratures"),
            LBE_DOUBLE("model.q_cutoff", c.model.q_cutoff, "truncation of the Gaussian variable"),
            {{"potential.shape", "string", "cosine or harmonics"},
             [](RunConfig& c, const std::string& v) {
                 const std::string s = trim(v);
                 if (s != "cosine" && s != "harmonics") throw ConfigError("potential.shape: expected cosine or harmonics");
                 c.potential_shape = s;
             },
             [](const RunConfig& c) { return json(c.potential_shape); }},
            LBE_DOUBLE("potential.v0", c.v0, "amplitude of the cosine potential"),
            {{"potential.harmonics", "list of a:b", "Fourier modes a cos(2 pi k x) + b sin(2 pi k x), k = 1, 2, ..."},
             [](RunConfig& c, const std::string& v) { c.harmonics = parse_harmonics("potential.harmonics", v); },
             [](const RunConfig& c) {
                 json a = json::array();
                 for (const auto& h : c.harmonics) a.push_back({h.a, h.b});
                 return a;
             }},
            LBE_DOUBLE("sim.x0", c.x0, "initial position"),
            LBE_DOUBLE("sim.p0", c.p0, "initial momentum"),
            LBE_DOUBLE("sim.horizon", c.horizon, "physical time horizon"),
            LBE_INT("sim.n_checkpoints", int, c.n_checkpoints, "checkpoint intervals over [0, horizon]"),
            LBE_INT("sim.n_paths", long, c.n_paths, "ensemble size"),
            LBE_BOOL("sim.track_D", c.obs.track_D, "integrated drift"),
            LBE_BOOL("sim.track_J", c.obs.track_J, "sum of jumps"),
            LBE_BOOL("sim.track_M_compensator", c.obs.track_M_compensator, "integral of the drift rate"),
            LBE_BOOL("sim.track_bracket", c.obs.track_bracket, "integral of the quadratic variation rate"),
            LBE_BOOL("sim.track_L", c.obs.track_L, "normalized low-energy occupation"),
            LBE_DOUBLE("sim.atom_level", c.atom.level, "energy level of the atom set; negative for 1 + sup V"),
            LBE_DOUBLE("sim.h_value", c.atom.h_value, "coin probability on the atom set"),
            LBE_DOUBLE("sim.occupation_level", c.occupation_level, "energy level of the occupation observable"),
            LBE_DOUBLE("sim.energy_tol", c.flow.energy_tol, "relative energy error allowed per flow segment"),
            {{"table.lambdas", "list of numbers", "lambda values of the kernel table; empty for model.lambda"},
             [](RunConfig& c, const std::string& v) { c.table_lambdas = parse_doubles("table.lambdas", v); },
             [](const RunConfig& c) { return json(c.table_lambdas); }},
            LBE_DOUBLE("table.p_min", c.table_p_min, "smallest momentum"),
            LBE_DOUBLE("table.p_max", c.table_p_max, "largest momentum"),
            LBE_INT("table.n_p", int, c.table_n_p, "number of momentum nodes"),
            LBE_INT("sweep.density", int, c.sweep.density, "geometric momentum nodes on the base grid"),
            LBE_DOUBLE("sweep.max_drift", c.sweep.max_drift, "allowed relative change under refinement"),
            {{"sweep.only", "list of ids", "restrict to these items; empty for all"},
             [](RunConfig& c, const std::string& v) { c.sweep.only = split(v, ','); },
             [](const RunConfig& c) { return json(c.sweep.only); }},
            LBE_INT("grid.n_x", int, c.grid.n_x, "position cells"),
            LBE_INT("grid.n_p", int, c.grid.n_p, "momentum cells (even)"),
            LBE_DOUBLE("grid.p_max", c.grid.p_max, "momentum range; negative for min(12 / sqrt(lambda), p_cap)"),
            LBE_DOUBLE("grid.p_cap", c.grid.p_cap, "cap on the automatic momentum range"),
            LBE_DOUBLE("grid.core_p", c.grid.core_p, "uniform cells on |p| <= core_p"),
            LBE_DOUBLE("grid.core_width", c.grid.core_width, "width of the uniform cells"),
            LBE_INT("grid.samples_per_cell", long, c.grid.samples_per_cell, "windows per row"),
            LBE_DOUBLE("grid.low_boost", c.grid.low_boost, "sample multiplier on low-set rows"),
            LBE_INT("grid.low_branches", int, c.grid.low_branches, "branches at the first collision of low-set windows"),
            LBE_DOUBLE("grid.flow_tol", c.grid.flow_tol, "energy tolerance of the window flows"),
            LBE_DOUBLE("grid.max_leakage", c.grid.max_leakage, "allowed stationary time beyond p_max"),
            {{"grid.dir", "path", "grid-check: directory written by grid-build; empty to build"},
             [](RunConfig& c, const std::string& v) { c.grid_dir = trim(v); },
             [](const RunConfig& c) { return json(c.grid_dir); }},
            LBE_INT("check.n_cycles", long, c.check.n_cycles, "sampled cycles per identity"),
            LBE_INT("check.visit_runs", long, c.check.visit_runs, "runs for the atom-visit identity"),
            LBE_INT("check.visit_steps", int, c.check.visit_steps, "steps for the atom-visit identity"),
            LBE_DOUBLE("check.n_sigma", c.check.n_sigma, "Monte Carlo standard errors allowed"),
            {{"check.frac_lambdas", "list of numbers", "grids for the fractional-moment check; empty to skip"},
             [](RunConfig& c, const std::string& v) { c.frac_lambdas = parse_doubles("check.frac_lambdas", v); },
             [](const RunConfig& c) { return json(c.frac_lambdas); }},
            LBE_DOUBLE("check.frac_alpha", c.frac_alpha, "fractional moment exponent"),
            LBE_INT("check.frac_cycles", long, c.frac_cycles, "cycles per grid for the fractional moments"),
            {{"experiment.kind", "list of kinds", "experiment kinds, or all"},
             [](RunConfig& c, const std::string& v) { c.experiment_kinds = parse_kinds("experiment.kind", v); },
             [](const RunConfig& c) {
                 json a = json::array();
                 for (auto k : c.experiment_kinds) a.push_back(to_string(k));
                 return a;
             }},
            {{"run.seed", "integer", "master seed"},
             [](RunConfig& c, const std::string& v) { c.seed = parse_number<std::uint64_t>("run.seed", v); },
             [](const RunConfig& c) { return json(c.seed); }},
            {{"run.workers", "integer", "worker threads, 0 for all cores; never changes results"},
             [](RunConfig& c, const std::string& v) { c.workers = parse_number<int>("run.workers", v); }, nullptr},
            {{"run.output_dir", "path", "directory for artifacts"},
             [](RunConfig& c, const std::string& v) { c.output_dir = trim(v); }, nullptr},
        };
        for (const auto& name : experiment_keys())
            k.push_back({{"experiment." + name, "see limit-experiment --help", "overrides the per-kind setting"},
                         [name](RunConfig& c, const std::string& v) {
                             ExperimentConfig probe;
                             apply_experiment_key(probe, name, v);
                             c.experiment_overrides.emplace_back(name, v);
                         },
                         nullptr});
        return k;
    }();
    return keys;
}

#undef LBE_DOUBLE
#undef LBE_INT
#undef LBE_BOOL

const Key* find_key(const std::string& name) {
    for (const auto& k : registry())
        if (k.info.name == name) return &k;
    return nullptr;
}

}  // namespace

const std::vector<ConfigKey>& config_keys() {
    static const std::vector<ConfigKey> keys = [] {
        std::vector<ConfigKey> out;
        for (const auto& k : registry()) out.push_back(k.info);
        return out;
    }();
    return keys;
}

std::vector<Assignment> read_config_file(const std::string& path) {
    boost::property_tree::ptree tree;
    try {
        boost::property_tree::ini_parser::read_ini(path, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
        throw ConfigError("config file: " + std::string(e.what()));
    }
    std::vector<Assignment> out;
    for (const auto& [section, body] : tree) {
        if (body.empty()) throw ConfigError("config file: key '" + section + "' outside a section");
        for (const auto& [key, value] : body) out.emplace_back(section + "." + key, value.get_value<std::string>());
    }
    return out;
}

std::vector<Assignment> environment_overrides() {
    std::vector<Assignment> out;
    if (const char* d = std::getenv("LBE_OUTPUT_DIR"); d && *d) out.emplace_back("run.output_dir", d);
    if (const char* w = std::getenv("LBE_WORKERS"); w && *w) out.emplace_back("run.workers", w);
    return out;
}

ExperimentConfig RunConfig::experiment_config(ExperimentKind kind) const {
    ExperimentConfig e = default_experiment_config(kind);
    for (const auto& [k, v] : experiment_overrides) apply_experiment_key(e, k, v);
    e.seed = seed;
    e.workers = workers;
    e.potential = potential;
    e.quad_rel_tol = model.quad_rel_tol;
    e.flow = flow;
    return e;
}

SweepOptions RunConfig::sweep_options() const {
    SweepOptions o = sweep;
    o.potential = potential;
    o.quad_rel_tol = model.quad_rel_tol;
    return o;
}

SimConfig RunConfig::sim_config() const {
    SimConfig s;
    s.model = model;
    s.potential = potential;
    s.x0 = x0;
    s.p0 = p0;
    s.horizon = horizon;
    s.checkpoints = uniform_checkpoints(horizon, n_checkpoints);
    s.obs = obs;
    s.atom = atom;
    s.occupation_level = occupation_level;
    s.seed = seed;
    s.flow = flow;
    return s;
}

void RunConfig::validate() const {
    const auto& names = command_names();
    if (std::find(names.begin(), names.end(), command) == names.end()) throw ConfigError("unknown command " + command);
    try {
        model.validate();
        if (workers < 0) throw std::invalid_argument("run.workers must be >= 0");
        if (output_dir.empty()) throw std::invalid_argument("run.output_dir must not be empty");
        if (command == "kernel-table") {
            for (double l : table_lambdas) {
                ModelParams mp = model;
                mp.lambda = l;
                mp.validate();
            }
            if (table_n_p < 1) throw std::invalid_argument("table.n_p must be positive");
            if (!(table_p_max >= table_p_min)) throw std::invalid_argument("table.p_max must be >= table.p_min");
        } else if (command == "sweep-inequalities") {
            if (sweep.density < 3) throw std::invalid_argument("sweep.density must be >= 3");
            if (!(sweep.max_drift > 0.0)) throw std::invalid_argument("sweep.max_drift must be positive");
            const auto& ids = sweep_item_ids();
            for (const auto& id : sweep.only)
                if (std::find(ids.begin(), ids.end(), id) == ids.end())
                    throw std::invalid_argument("sweep.only: unknown item " + id);
        } else if (command == "simulate" || command == "ensemble") {
            if (n_checkpoints < 1) throw std::invalid_argument("sim.n_checkpoints must be positive");
            if (n_paths < 1) throw std::invalid_argument("sim.n_paths must be positive");
            sim_config().validate();
        } else if (command == "grid-build" || command == "grid-check") {
            if (!(model.lambda > 0.0)) throw std::invalid_argument("grids need lambda > 0");
            if (command == "grid-build" || grid_dir.empty()) grid.validate(model, potential);
            if (check.n_cycles < 100 || check.visit_runs < 100 || check.visit_steps < 1 || !(check.n_sigma > 0.0))
                throw std::invalid_argument("check settings out of range");
            if (frac_lambdas.size() == 1) throw std::invalid_argument("check.frac_lambdas needs at least two values");
            for (double l : frac_lambdas) {
                if (!(l > 0.0 && l <= 1.0)) throw std::invalid_argument("check.frac_lambdas must lie in (0, 1]");
                ModelParams mp = model;
                mp.lambda = l;
                grid.validate(mp, potential);
            }
            if (!(frac_alpha > 0.0 && frac_alpha < 1.0)) throw std::invalid_argument("check.frac_alpha must lie in (0, 1)");
            if (frac_cycles < 100) throw std::invalid_argument("check.frac_cycles must be >= 100");
        } else if (command == "limit-experiment") {
            for (auto k : experiment_kinds) experiment_config(k).validate();
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(e.what());
    }
}

json RunConfig::to_json() const {
    json j = json::object();
    j["command"] = command;
    j["model"]["eta"] = ModelParams::eta;
    for (const auto& k : registry()) {
        if (!k.get) continue;
        const auto dot = k.info.name.find('.');
        j[k.info.name.substr(0, dot)][k.info.name.substr(dot + 1)] = k.get(*this);
    }
    json per_kind = json::object();
    for (auto kind : experiment_kinds) per_kind[to_string(kind)] = experiment_to_json(experiment_config(kind));
    j["experiment"]["settings"] = per_kind;
    return j;
}

RunConfig build_run_config(const std::string& command, const std::vector<Assignment>& assignments) {
    RunConfig c;
    c.command = command;
    for (const auto& [name, value] : assignments) {
        if (name == "model.eta") throw ConfigError("model.eta is fixed and cannot be set");
        const Key* k = find_key(name);
        if (!k) throw ConfigError("unknown key " + name);
        k->set(c, value);
    }
    try {
        c.potential = c.potential_shape == "cosine" ? PotentialSpec::cosine(c.v0) : PotentialSpec::custom(c.harmonics);
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("potential: ") + e.what());
    }
    c.validate();
    return c;
}

}  // namespace lbe
