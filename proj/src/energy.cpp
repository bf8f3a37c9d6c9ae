#include "lbe/energy.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lbe/kernel.hpp"

namespace lbe {

namespace {

struct DriftPair {
    double A;
    double V1;
};

DriftPair drift_pair(const ModelParams& mp, const PotentialSpec& pot, double x, double p) {
    const double v = pot.value(x);
    const double q0 = std::numbers::sqrt2 * std::sqrt(0.5 * p * p + v);
    auto q = [v](double pp) { return std::numbers::sqrt2 * std::sqrt(0.5 * pp * pp + v); };
    const std::vector<double> br{0.0, p, -p};
    const double a = integrate_against_rate(mp, p, [&](double pp) { return q(pp) - q0; }, br);
    const double shift = a / escape_rate(mp, p);
    const double v1 = integrate_against_rate(mp, p, [&](double pp) { const double d = q(pp) - q0 - shift; return d * d; }, br);
    return {a, v1};
}

}  // namespace

EnergyFunctionals energy_functionals(const ModelParams& mp, const PotentialSpec& pot, double x,
                                     double p, int n) {
    if (n < 1 || n > 4) throw std::invalid_argument("energy_functionals: n must lie in [1, 4]");
    const double v = pot.value(x);
    const double root_h = std::sqrt(0.5 * p * p + v);
    auto root = [v](double pp) { return std::sqrt(0.5 * pp * pp + v); };
    // sqrt(H') has a kink at p' = 0 when V(x) = 0; |.|^n kinks where H' = H
    const std::vector<double> br{0.0, p, -p};

    EnergyFunctionals out;
    out.A = std::numbers::sqrt2 *
            integrate_against_rate(mp, p, [&](double pp) { return root(pp) - root_h; }, br);
    out.A_plus = std::max(out.A, 0.0);
    out.A_minus = std::max(-out.A, 0.0);
    const double shift = out.A / escape_rate(mp, p);
    out.V_n = integrate_against_rate(
        mp, p,
        [&](double pp) { return std::pow(std::numbers::sqrt2 * (root(pp) - root_h) - shift, 2 * n); }, br);
    out.K_n = integrate_against_rate(mp, p, [&](double pp) { return std::pow(std::abs(root(pp) - root_h), n); }, br);
    const double ap = std::abs(p);
    out.K_star_n =
        integrate_against_rate(mp, p, [&](double pp) { return std::pow(std::abs(root(pp) - root_h), n); }, br,
                               -1e300, -ap) +
        integrate_against_rate(mp, p, [&](double pp) { return std::pow(std::abs(root(pp) - root_h), n); }, br,
                               ap, 1e300);
    return out;
}

EnergyTable::EnergyTable(const ModelParams& mp, const PotentialSpec& pot, double p_max, int n_x,
                         double p_fine, double dp_fine, double growth)
    : n_x_(n_x) {
    if (n_x < 4) throw std::invalid_argument("EnergyTable: n_x must be >= 4");
    for (double p = 0.0; p < std::min(p_fine, p_max); p += dp_fine) p_nodes_.push_back(p);
    double p = std::min(p_fine, p_max);
    double step = dp_fine;
    while (true) {
        p_nodes_.push_back(p);
        if (p >= p_max) break;
        step *= growth;
        p = std::min(p + step, p_max);
    }
    const std::size_t np = p_nodes_.size();
    a_.assign(static_cast<std::size_t>(n_x) * np, 0.0);
    v_.assign(a_.size(), 0.0);
#pragma omp parallel for schedule(dynamic)
    for (int ix = 0; ix < n_x; ++ix) {
        const double x = static_cast<double>(ix) / n_x;
        for (std::size_t ip = 0; ip < np; ++ip) {
            const auto d = drift_pair(mp, pot, x, p_nodes_[ip]);
            a_[ix * np + ip] = d.A;
            v_[ix * np + ip] = d.V1;
        }
    }
}

double EnergyTable::lookup(const std::vector<double>& tab, double x, double p) const {
    if (tab.empty()) throw std::logic_error("EnergyTable: empty table");
    const double ap = std::min(std::abs(p), p_nodes_.back());
    const std::size_t np = p_nodes_.size();
    auto it = std::upper_bound(p_nodes_.begin(), p_nodes_.end(), ap);
    std::size_t j = it == p_nodes_.begin() ? 0 : static_cast<std::size_t>(it - p_nodes_.begin()) - 1;
    if (j + 1 >= np) j = np - 2;
    const double tp = (ap - p_nodes_[j]) / (p_nodes_[j + 1] - p_nodes_[j]);
    const double xs = wrap_unit(x) * n_x_;
    int i0 = static_cast<int>(std::floor(xs));
    if (i0 >= n_x_) i0 = n_x_ - 1;
    const double tx = xs - i0;
    const int i1 = (i0 + 1) % n_x_;
    auto at = [&](int i, std::size_t k) { return tab[static_cast<std::size_t>(i) * np + k]; };
    const double r0 = (1.0 - tp) * at(i0, j) + tp * at(i0, j + 1);
    const double r1 = (1.0 - tp) * at(i1, j) + tp * at(i1, j + 1);
    return (1.0 - tx) * r0 + tx * r1;
}

}  // namespace lbe
