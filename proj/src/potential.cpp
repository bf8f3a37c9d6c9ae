#include "lbe/potential.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <boost/math/tools/minima.hpp>

#include "lbe/quadrature.hpp"

namespace lbe {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Yoshida's sixth-order composition of velocity Verlet (solution A)
constexpr double kW1 = -1.17767998417887;
constexpr double kW2 = 0.235573213359357;
constexpr double kW3 = 0.784513610477560;
constexpr double kW0 = 1.0 - 2.0 * (kW1 + kW2 + kW3);
constexpr double kStages[7] = {kW3, kW2, kW1, kW0, kW1, kW2, kW3};

double raw_harmonic_value(const std::vector<Harmonic>& hs, double x) {
    double v = 0.0;
    for (std::size_t k = 0; k < hs.size(); ++k) {
        const double th = kTwoPi * static_cast<double>(k + 1) * x;
        v += hs[k].a * std::cos(th) + hs[k].b * std::sin(th);
    }
    return v;
}

// maximum of f over one period: dense scan then Brent refinement
template <class F>
double periodic_max(F f) {
    const int n = 4096;
    int best = 0;
    double best_v = -1e300;
    for (int i = 0; i < n; ++i) {
        const double v = f(static_cast<double>(i) / n);
        if (v > best_v) { best_v = v; best = i; }
    }
    const double lo = (best - 1.0) / n, hi = (best + 1.0) / n;
    auto r = boost::math::tools::brent_find_minima([&](double x) { return -f(x); }, lo, hi, 52);
    return std::max(best_v, -r.second);
}

}  // namespace

double wrap_unit(double x) {
    double y = x - std::floor(x);
    if (y >= 1.0) y = 0.0;
    return y;
}

PotentialSpec PotentialSpec::cosine(double v0) {
    if (!(v0 >= 0.0) || !std::isfinite(v0)) throw std::invalid_argument("potential amplitude must be >= 0");
    PotentialSpec s;
    s.shape_ = PotentialShape::cosine;
    s.v0_ = v0;
    s.harmonics_.clear();
    s.offset_ = 0.0;
    s.sup_v_ = v0;
    s.sup_dv_ = std::numbers::pi * v0;
    s.well_freq_ = std::numbers::pi * std::sqrt(2.0 * v0);
    s.spatial_freq_ = kTwoPi;
    return s;
}

PotentialSpec PotentialSpec::custom(std::vector<Harmonic> harmonics) {
    for (const auto& h : harmonics)
        if (!std::isfinite(h.a) || !std::isfinite(h.b)) throw std::invalid_argument("non-finite harmonic");
    PotentialSpec s;
    s.shape_ = PotentialShape::harmonics;
    s.v0_ = 0.0;
    s.harmonics_ = std::move(harmonics);
    const auto& hs = s.harmonics_;
    const double vmax = periodic_max([&](double x) { return raw_harmonic_value(hs, x); });
    const double vmin = -periodic_max([&](double x) { return -raw_harmonic_value(hs, x); });
    s.offset_ = -vmin;
    s.sup_v_ = vmax - vmin;
    s.sup_dv_ = periodic_max([&](double x) { return std::abs(s.force(x)); });
    s.well_freq_ = std::sqrt(periodic_max([&](double x) { return std::abs(s.curvature(x)); }));
    s.spatial_freq_ = kTwoPi * static_cast<double>(std::max<std::size_t>(1, hs.size()));
    return s;
}

double PotentialSpec::value(double x) const {
    if (shape_ == PotentialShape::cosine) return 0.5 * v0_ * (1.0 - std::cos(kTwoPi * x));
    return offset_ + raw_harmonic_value(harmonics_, x);
}

double PotentialSpec::force(double x) const {
    if (shape_ == PotentialShape::cosine) return std::numbers::pi * v0_ * std::sin(kTwoPi * x);
    double f = 0.0;
    for (std::size_t k = 0; k < harmonics_.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k + 1);
        const double th = w * x;
        f += w * (-harmonics_[k].a * std::sin(th) + harmonics_[k].b * std::cos(th));
    }
    return f;
}

double PotentialSpec::curvature(double x) const {
    if (shape_ == PotentialShape::cosine) return 2.0 * std::numbers::pi * std::numbers::pi * v0_ * std::cos(kTwoPi * x);
    double c = 0.0;
    for (std::size_t k = 0; k < harmonics_.size(); ++k) {
        const double w = kTwoPi * static_cast<double>(k + 1);
        const double th = w * x;
        c -= w * w * (harmonics_[k].a * std::cos(th) + harmonics_[k].b * std::sin(th));
    }
    return c;
}

double PotentialSpec::sublevel_area(double level) const {
    auto width = [&](double x) {
        const double k = level - value(x);
        return k > 0.0 ? 2.0 * std::sqrt(2.0 * k) : 0.0;
    };
    // the integrand has square-root edges; a fine composite rule is adequate here
    std::vector<double> br;
    for (int i = 1; i < 64; ++i) br.push_back(i / 64.0);
    return integrate(width, 0.0, 1.0, br, 1e-12);
}

double energy(const PotentialSpec& pot, const State& s) { return 0.5 * s.p * s.p + pot.value(s.x); }

namespace {

struct Attempt {
    State end;
    double max_err;
};

struct CosineField {
    double amp;  // pi * v0
    double half_v0;
    double force(double x) const { return amp * std::sin(kTwoPi * x); }
    double force_value(double x, double& v) const {
        double sn, cs;
        sincos(kTwoPi * x, &sn, &cs);
        v = half_v0 * (1.0 - cs);
        return amp * sn;
    }
};

struct GeneralField {
    const PotentialSpec* pot;
    double force(double x) const { return pot->force(x); }
    double force_value(double x, double& v) const {
        v = pot->value(x);
        return pot->force(x);
    }
};

template <class Field>
Attempt compose(const Field& fld, State s, double h, long n, double h0_energy, double scale,
                std::vector<State>* mesh) {
    double x = s.x, p = s.p;
    double f = fld.force(x);
    double max_err = 0.0;
    if (mesh) {
        mesh->clear();
        mesh->reserve(static_cast<std::size_t>(n) + 1);
        mesh->push_back({x, p});
    }
    for (long i = 0; i < n; ++i) {
        for (int k = 0; k < 6; ++k) {
            const double hw = kStages[k] * h;
            p -= 0.5 * hw * f;
            x += hw * p;
            f = fld.force(x);
            p -= 0.5 * hw * f;
        }
        const double hw = kStages[6] * h;
        p -= 0.5 * hw * f;
        x += hw * p;
        double v;
        f = fld.force_value(x, v);
        p -= 0.5 * hw * f;
        const double err = std::abs(0.5 * p * p + v - h0_energy) / scale;
        if (err > max_err) max_err = err;
        if (mesh) mesh->push_back({x, p});
    }
    return {{x, p}, max_err};
}

Attempt run_composition(const PotentialSpec& pot, State s, double h, long n, double h0_energy,
                        double scale, std::vector<State>* mesh) {
    if (pot.shape() == PotentialShape::cosine)
        return compose(CosineField{std::numbers::pi * pot.v0(), 0.5 * pot.v0()}, s, h, n, h0_energy, scale, mesh);
    return compose(GeneralField{&pot}, s, h, n, h0_energy, scale, mesh);
}

}  // namespace

FlowResult flow(const PotentialSpec& pot, const State& s, double dt, const FlowOptions& opt,
                std::vector<State>* mesh) {
    if (!(dt >= 0.0) || !std::isfinite(dt)) throw std::invalid_argument("flow: dt must be finite and >= 0");
    FlowResult out;
    const double h_in = energy(pot, s);
    const double scale = std::max(1.0, h_in);
    if (dt == 0.0 || pot.is_flat()) {
        // free motion is integrated exactly by any Verlet step
        const long n = dt == 0.0 ? 0 : 2;
        if (mesh) {
            mesh->clear();
            for (long i = 0; i <= n; ++i)
                mesh->push_back({s.x + s.p * dt * static_cast<double>(i) / std::max<long>(n, 1), s.p});
        }
        out.state = {wrap_unit(s.x + s.p * dt), s.p};
        out.delta_p = 0.0;
        out.substeps = n;
        return out;
    }
    // error of the sixth-order scheme scales as (h * rate)^6 * sup_V
    const double rate = pot.spatial_frequency() * std::sqrt(2.0 * std::max(h_in, pot.sup_V())) + pot.well_frequency();
    const double budget = opt.energy_tol * scale / pot.sup_V();
    const double h_guess = opt.step_scale * 6.0 * std::pow(std::min(budget, 1.0), 1.0 / 6.0) / rate;
    long n = static_cast<long>(std::ceil(dt / h_guess));
    if (n < 2) n = 2;
    if (n % 2) ++n;
    int refinements = 0;
    while (true) {
        if (n > opt.max_substeps) throw std::runtime_error("flow: substep cap exceeded");
        const double h = dt / static_cast<double>(n);
        Attempt a = run_composition(pot, s, h, n, h_in, scale, mesh);
        if (a.max_err <= opt.energy_tol) {
            out.state = {wrap_unit(a.end.x), a.end.p};
            out.delta_p = a.end.p - s.p;
            out.substeps = n;
            out.max_energy_error = a.max_err;
            out.refinements = refinements;
            return out;
        }
        n *= 2;
        ++refinements;
    }
}

}  // namespace lbe
