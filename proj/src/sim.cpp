#include "lbe/sim.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "lbe/kernel.hpp"

namespace lbe {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Rate bound valid on the whole energy shell of s (rates grow with |p|).
double envelope_rate(const ModelParams& mp, const PotentialSpec& pot, const State& s) {
    const double pm = std::max(std::abs(s.p), std::sqrt(2.0 * energy(pot, s)));
    return escape_rate(mp, pm * (1.0 + 1e-9) + 1e-12);
}

double simpson(const std::vector<double>& f, double h) {
    const std::size_t n = f.size() - 1;
    if (n == 0) return 0.0;
    double s = f.front() + f.back();
    for (std::size_t i = 1; i < n; ++i) s += (i % 2 ? 4.0 : 2.0) * f[i];
    return s * h / 3.0;
}

}  // namespace

void SimConfig::validate() const {
    model.validate();
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw std::invalid_argument("horizon must be > 0");
    if (!std::isfinite(x0) || !std::isfinite(p0)) throw std::invalid_argument("initial state must be finite");
    for (std::size_t i = 0; i < checkpoints.size(); ++i) {
        if (checkpoints[i] < 0.0 || checkpoints[i] > horizon)
            throw std::invalid_argument("checkpoints must lie in [0, horizon]");
        if (i > 0 && checkpoints[i] < checkpoints[i - 1]) throw std::invalid_argument("checkpoints must be sorted");
    }
    if (atom.h_value < 0.0 || atom.h_value >= 1.0) throw std::invalid_argument("atom h_value must lie in [0, 1)");
    if (obs.track_A_plus && !a_table) throw std::invalid_argument("track_A_plus needs an energy table");
}

double momentum_from_rescaled(double p_hat0, double lambda) {
    if (!(lambda > 0.0)) throw std::invalid_argument("rescaled initial momentum needs lambda > 0");
    return p_hat0 / std::sqrt(lambda);
}

std::vector<double> uniform_checkpoints(double horizon, int n) {
    std::vector<double> c;
    for (int i = 0; i <= n; ++i) c.push_back(horizon * static_cast<double>(i) / n);
    c.back() = horizon;
    return c;
}

NextEvent next_event(const ModelParams& mp, const PotentialSpec& pot, const State& s0, Rng& rng,
                     const FlowOptions& fo) {
    NextEvent ev;
    State s = s0;
    const double bound = envelope_rate(mp, pot, s0);
    while (true) {
        const double w = rng.exponential() / bound;
        s = flow(pot, s, w, fo).state;
        ev.dt += w;
        ++ev.proposals;
        const double ratio = escape_rate(mp, s.p) / bound;
        if (ratio > 1.0 + 1e-12) throw std::logic_error("next_event: envelope violated");
        if (rng.uniform() < ratio) break;
    }
    ev.pre = s;
    return ev;
}

TrajectoryResult simulate(const SimConfig& cfg) {
    cfg.validate();
    const ModelParams& mp = cfg.model;
    const PotentialSpec& pot = cfg.potential;
    const Observables& obs = cfg.obs;

    Rng rng(derive_seed(cfg.seed, StreamTag::path, 0));
    Rng rng_part(derive_seed(cfg.seed, StreamTag::partition, 0));

    const double atom_level = cfg.atom_level();
    const double low_area = cfg.low_set_area > 0.0 ? cfg.low_set_area : pot.sublevel_area(atom_level);
    const bool need_mesh = obs.track_M_compensator || obs.track_bracket || obs.track_A_plus ||
                           obs.track_sup_stats;

    TrajectoryResult out;
    out.lambda = mp.lambda;
    State s{wrap_unit(cfg.x0), cfg.p0};
    double t = 0.0;
    double H = energy(pot, s);
    Checkpoint acc;  // running functionals
    PathStats& st = out.stats;
    st.sup_H = H;

    double bound = envelope_rate(mp, pot, s);
    double next_prop = rng.exponential() / bound;
    double next_part = obs.record_partition_coins ? rng_part.exponential() : kInf;
    std::size_t ck = 0;

    auto record_checkpoint = [&]() {
        Checkpoint c = acc;
        c.t = t;
        c.x = s.x;
        c.p = s.p;
        c.H = energy(pot, s);
        out.checkpoints.push_back(c);
    };
    auto log_event = [&](EventKind kind, double jump) {
        if (obs.record_events || obs.track_companion) out.events.push_back({t, s.x, s.p, kind, jump});
    };

    log_event(EventKind::start, 0.0);
    while (ck < cfg.checkpoints.size() && cfg.checkpoints[ck] <= 0.0) {
        record_checkpoint();
        ++ck;
    }

    std::vector<State> mesh;
    std::vector<double> fvals;
    while (t < cfg.horizon) {
        const double next_ck = ck < cfg.checkpoints.size() ? cfg.checkpoints[ck] : kInf;
        const double t_stop = std::min({next_prop, next_ck, next_part, cfg.horizon});
        const double dt = t_stop - t;

        // flow piece
        const FlowResult fr = flow(pot, s, dt, cfg.flow, need_mesh ? &mesh : nullptr);
        if (need_mesh && mesh.size() > 1) {
            const double h = dt / static_cast<double>(mesh.size() - 1);
            fvals.resize(mesh.size());
            if (obs.track_M_compensator) {
                for (std::size_t i = 0; i < mesh.size(); ++i) fvals[i] = jump_drift(mp, mesh[i].p);
                acc.M_comp += simpson(fvals, h);
            }
            if (obs.track_bracket) {
                for (std::size_t i = 0; i < mesh.size(); ++i) fvals[i] = q_variance(mp, mesh[i].p);
                acc.bracket += simpson(fvals, h);
            }
            if (obs.track_A_plus) {
                for (std::size_t i = 0; i < mesh.size(); ++i) fvals[i] = cfg.a_table->A_plus(mesh[i].x, mesh[i].p);
                acc.A_plus += simpson(fvals, h);
            }
            if (obs.track_sup_stats) {
                for (const State& m : mesh) st.sup_abs_D = std::max(st.sup_abs_D, std::abs(acc.D + (m.p - s.p)));
            }
        }
        // H is constant along the piece, so these are exact
        if (H <= cfg.occupation_level) acc.occupation += dt;
        if (H <= atom_level) {
            acc.L += dt / low_area;
            acc.h_integral += cfg.atom.h_value * dt;
        }
        acc.D += fr.delta_p;
        s = fr.state;
        t = t_stop;

        bool logged = false;
        if (t == next_part) {
            const double h = energy(pot, s) <= atom_level ? cfg.atom.h_value : 0.0;
            const int z = rng_part.bernoulli(h) ? 1 : 0;
            acc.atom_coins += z;
            out.coins.push_back({t, h, z});
            next_part = t + rng_part.exponential();
        }
        if (t == next_prop) {
            ++st.proposals;
            const double ratio = escape_rate(mp, s.p) / bound;
            if (ratio > 1.0 + 1e-12) throw std::logic_error("simulate: thinning envelope violated");
            if (rng.uniform() < ratio) {
                const double p_new = sample_jump(mp, s.p, rng);
                const double jump = p_new - s.p;
                acc.J += jump;
                ++acc.N;
                ++st.collisions;
                st.max_jump = std::max(st.max_jump, std::abs(jump));
                s.p = p_new;
                H = energy(pot, s);
                st.sup_H = std::max(st.sup_H, H);
                bound = envelope_rate(mp, pot, s);
                log_event(EventKind::collision, jump);
                logged = true;
            }
            next_prop = t + rng.exponential() / bound;
            if (!logged) {
                log_event(EventKind::reject, 0.0);
                logged = true;
            }
        }
        while (ck < cfg.checkpoints.size() && cfg.checkpoints[ck] <= t) {
            record_checkpoint();
            ++ck;
        }
        if (!logged) log_event(t >= cfg.horizon ? EventKind::end : (t == next_ck ? EventKind::checkpoint : EventKind::partition), 0.0);
    }
    if (!out.events.empty() && out.events.back().kind != EventKind::end) log_event(EventKind::end, 0.0);
    st.sup_abs_D_rescaled = std::pow(mp.lambda, 0.25) * st.sup_abs_D;

    if (obs.track_companion) {
        const CompanionPath cp = companion_path(out, cfg);
        st.sup_companion_gap = cp.sup_gap;
        std::size_t j = 0;
        for (auto& c : out.checkpoints) {
            while (j + 1 < cp.t.size() && cp.t[j] < c.t) ++j;
            c.companion = cp.p_companion[j];
        }
        if (!obs.record_events) out.events.clear();
    }
    return out;
}

double companion_step(double p_companion, double lambda, double h, double increment) {
    return std::exp(-0.5 * lambda * h) * p_companion + std::exp(-0.25 * lambda * h) * increment;
}

CompanionPath companion_path(const TrajectoryResult& traj, const SimConfig& cfg) {
    if (traj.events.size() < 2) throw std::invalid_argument("companion_path: trajectory has no event log");
    const ModelParams& mp = cfg.model;
    CompanionPath cp;
    double pc = traj.events.front().p;  // P' starts at P_0
    std::vector<State> mesh;
    cp.t.push_back(traj.events.front().t);
    cp.p_companion.push_back(pc);
    cp.p.push_back(traj.events.front().p);
    for (std::size_t k = 0; k + 1 < traj.events.size(); ++k) {
        const EventRecord& a = traj.events[k];
        const EventRecord& b = traj.events[k + 1];
        const double dt = b.t - a.t;
        flow(cfg.potential, {a.x, a.p}, dt, cfg.flow, &mesh);
        const double h = dt / static_cast<double>(std::max<std::size_t>(mesh.size() - 1, 1));
        for (std::size_t i = 1; i < mesh.size(); ++i) {
            // dD + dM over the substep: flow kick minus the compensator
            const double d_drift = mesh[i].p - mesh[i - 1].p;
            const double d_comp = 0.5 * h * (jump_drift(mp, mesh[i - 1].p) + jump_drift(mp, mesh[i].p));
            pc = companion_step(pc, mp.lambda, h, d_drift - d_comp);
            cp.sup_gap = std::max(cp.sup_gap, std::abs(pc - mesh[i].p));
        }
        if (b.kind == EventKind::collision) pc += b.jump;
        cp.t.push_back(b.t);
        cp.p_companion.push_back(pc);
        cp.p.push_back(b.p);
        cp.sup_gap = std::max(cp.sup_gap, std::abs(pc - b.p));
    }
    return cp;
}

const std::vector<std::string>& checkpoint_fields() {
    static const std::vector<std::string> f{"p", "H", "D", "J", "N", "M", "M_comp", "bracket", "L",
                                            "A_plus", "occupation", "h_integral", "atom_coins", "companion"};
    return f;
}

double checkpoint_field(const Checkpoint& c, const std::string& name) {
    if (name == "t") return c.t;
    if (name == "x") return c.x;
    if (name == "p") return c.p;
    if (name == "H") return c.H;
    if (name == "D") return c.D;
    if (name == "J") return c.J;
    if (name == "N") return static_cast<double>(c.N);
    if (name == "M") return c.M();
    if (name == "M_comp") return c.M_comp;
    if (name == "bracket") return c.bracket;
    if (name == "L") return c.L;
    if (name == "A_plus") return c.A_plus;
    if (name == "occupation") return c.occupation;
    if (name == "h_integral") return c.h_integral;
    if (name == "atom_coins") return static_cast<double>(c.atom_coins);
    if (name == "companion") return c.companion;
    throw std::invalid_argument("unknown checkpoint field: " + name);
}

}  // namespace lbe
