#include "lbe/sim.hpp"

#include <stdexcept>

#include <omp.h>

namespace lbe {

namespace {

SimConfig path_config(const SimConfig& cfg, long i) {
    SimConfig c = cfg;
    c.seed = derive_seed(cfg.seed, StreamTag::path, static_cast<std::uint64_t>(i));
    return c;
}

SimConfig prepared(const SimConfig& cfg) {
    cfg.validate();
    SimConfig c = cfg;
    if (c.low_set_area <= 0.0) c.low_set_area = c.potential.sublevel_area(c.atom_level());
    return c;
}

}  // namespace

const MeanSE& EnsembleSummary::at(const std::string& field, std::size_t k) const {
    for (std::size_t f = 0; f < fields.size(); ++f)
        if (fields[f] == field) return per_checkpoint.at(f).at(k);
    throw std::invalid_argument("unknown summary field: " + field);
}

const MeanSE& EnsembleSummary::stat(const std::string& field) const {
    for (std::size_t f = 0; f < stat_fields.size(); ++f)
        if (stat_fields[f] == field) return path_stats.at(f);
    throw std::invalid_argument("unknown path statistic: " + field);
}

EnsembleSummary summarize(const std::vector<TrajectoryResult>& paths) {
    EnsembleSummary s;
    if (paths.empty()) return s;
    const std::size_t nck = paths.front().checkpoints.size();
    for (const auto& c : paths.front().checkpoints) s.t.push_back(c.t);
    s.fields = checkpoint_fields();
    std::vector<double> buf(paths.size());
    for (const auto& f : s.fields) {
        std::vector<MeanSE> row;
        for (std::size_t k = 0; k < nck; ++k) {
            for (std::size_t i = 0; i < paths.size(); ++i) buf[i] = checkpoint_field(paths[i].checkpoints.at(k), f);
            row.push_back(mean_se(buf));
        }
        s.per_checkpoint.push_back(std::move(row));
    }
    s.stat_fields = {"sup_H", "sup_abs_D", "sup_abs_D_rescaled", "max_jump", "sup_companion_gap", "collisions"};
    auto get = [](const PathStats& p, std::size_t k) {
        switch (k) {
            case 0: return p.sup_H;
            case 1: return p.sup_abs_D;
            case 2: return p.sup_abs_D_rescaled;
            case 3: return p.max_jump;
            case 4: return p.sup_companion_gap;
            default: return static_cast<double>(p.collisions);
        }
    };
    for (std::size_t k = 0; k < s.stat_fields.size(); ++k) {
        for (std::size_t i = 0; i < paths.size(); ++i) buf[i] = get(paths[i].stats, k);
        s.path_stats.push_back(mean_se(buf));
    }
    return s;
}

EnsembleResult run_ensemble_serial(const SimConfig& cfg, long n_paths) {
    if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    const SimConfig base = prepared(cfg);
    EnsembleResult r;
    r.paths.resize(static_cast<std::size_t>(n_paths));
    for (long i = 0; i < n_paths; ++i) r.paths[static_cast<std::size_t>(i)] = simulate(path_config(base, i));
    r.summary = summarize(r.paths);
    return r;
}

EnsembleResult run_ensemble(const SimConfig& cfg, long n_paths, int workers) {
    if (n_paths < 1) throw std::invalid_argument("n_paths must be >= 1");
    const SimConfig base = prepared(cfg);
    EnsembleResult r;
    r.paths.resize(static_cast<std::size_t>(n_paths));
    const int nt = workers > 0 ? workers : omp_get_max_threads();
    std::exception_ptr err = nullptr;
#pragma omp parallel for schedule(dynamic, 4) num_threads(nt)
    for (long i = 0; i < n_paths; ++i) {
        try {
            r.paths[static_cast<std::size_t>(i)] = simulate(path_config(base, i));
        } catch (...) {
#pragma omp critical
            if (!err) err = std::current_exception();
        }
    }
    if (err) std::rethrow_exception(err);
    r.summary = summarize(r.paths);
    return r;
}

}  // namespace lbe
