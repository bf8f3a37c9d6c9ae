#include "lbe/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include "lbe/quadrature.hpp"

namespace lbe {

namespace {

constexpr double kG0 = 0.3989422804014327;  // standard normal density at 0
thread_local int g_last_proposals = 0;

// p' as a function of the Gaussian variable q
inline double p_of_q(double lambda, double p, double q) {
    return (2.0 * q - (lambda - 1.0) * p) / (lambda + 1.0);
}

inline double q_of_p(double lambda, double p, double pp) {
    return 0.5 * ((lambda + 1.0) * pp + (lambda - 1.0) * p);
}

}  // namespace

double jump_rate(const ModelParams& mp, double p_from, double p_to) {
    const double l = mp.lambda;
    const double arg = 0.5 * (1.0 - l) * p_from - 0.5 * (1.0 + l) * p_to;
    return kEta * (1.0 + l) * 0.5 * std::abs(p_to - p_from) * gauss_density(arg);
}

double idealized_rate(double v) {
    return 0.5 * kEta * std::abs(v) * gauss_density(0.5 * v);
}

double escape_rate(const ModelParams& mp, double p) {
    const double l = mp.lambda;
    const double a = std::abs(l * p);
    return 2.0 * kEta / (l + 1.0) * (2.0 * gauss_density(a) + a * gauss_window(a));
}

double jump_drift(const ModelParams& mp, double p) {
    const double l = mp.lambda;
    const double w = gauss_window(l * p);
    return -(2.0 * l * p / (l + 1.0)) * escape_rate(mp, p) - 4.0 * kEta / ((l + 1.0) * (l + 1.0)) * w;
}

double jump_second_moment(const ModelParams& mp, double p) {
    const double l = mp.lambda;
    const double a = std::abs(l * p);
    const double c = 8.0 * kEta / ((l + 1.0) * (l + 1.0) * (l + 1.0));
    return c * ((2.0 * a * a + 4.0) * gauss_density(a) + a * (3.0 + a * a) * gauss_window(a));
}

double q_variance(const ModelParams& mp, double p) {
    const double l = mp.lambda;
    const double a = std::abs(l * p);
    const double g = gauss_density(a);
    const double w = gauss_window(a);
    const double l1 = l + 1.0;
    const double e = escape_rate(mp, p);
    const double l13 = l1 * l1 * l1;
    // E*Q = 32 eta g(a) E / (l+1)^3 + 16 eta^2 / (l+1)^4 * w * int_{-a}^{a} (a^2 - q^2) g
    const double window_term = (a * a - 1.0) * w + 2.0 * a * g;
    return 32.0 * kEta * g / l13 + 16.0 * kEta * kEta / (l13 * l1) * w * window_term / e;
}

double integrate_against_rate(const ModelParams& mp, double p,
                              const std::function<double(double)>& f,
                              const std::vector<double>& pprime_breaks, double pprime_lo,
                              double pprime_hi) {
    const double l = mp.lambda;
    const double a = l * p;
    const double pref = 2.0 * kEta / (l + 1.0);
    auto integrand = [&](double q) {
        return pref * std::abs(q - a) * gauss_density(q) * f(p_of_q(l, p, q));
    };
    double lo = -mp.q_cutoff, hi = mp.q_cutoff;
    if (pprime_lo > -1e299) lo = std::max(lo, q_of_p(l, p, pprime_lo));
    if (pprime_hi < 1e299) hi = std::min(hi, q_of_p(l, p, pprime_hi));
    if (!(hi > lo)) return 0.0;
    std::vector<double> br{a, -8.0, 8.0, 0.0};
    for (double pb : pprime_breaks) br.push_back(q_of_p(l, p, pb));
    return integrate(integrand, lo, hi, br, mp.quad_rel_tol);
}

double jump_moment(const ModelParams& mp, double p, int m) {
    if (m < 0 || m > 12) throw std::invalid_argument("jump_moment: order must lie in [0, 12]");
    if (m == 0) return escape_rate(mp, p);
    if (m == 1) return jump_drift(mp, p);
    if (m == 2) return jump_second_moment(mp, p);
    return integrate_against_rate(mp, p, [p, m](double pp) { return std::pow(pp - p, m); });
}

double sample_jump(const ModelParams& mp, double p, Rng& rng) {
    const double l = mp.lambda;
    const double a = l * p;
    const double abs_a = std::abs(a);
    // envelope (|q| + |a|) g(q): mass 2 g(0) on the |q| g(q) part, |a| on the Gaussian part
    const double w_abs = 2.0 * kG0;
    const double p_abs = w_abs / (w_abs + abs_a);
    for (int k = 1; k <= 1000000; ++k) {
        double q;
        if (rng.uniform() < p_abs) {
            const double r = std::sqrt(2.0 * rng.exponential());
            q = rng.uniform() < 0.5 ? -r : r;
        } else {
            q = rng.normal();
        }
        const double denom = std::abs(q) + abs_a;
        if (denom <= 0.0) continue;
        if (rng.uniform() * denom < std::abs(q - a)) {
            g_last_proposals = k;
            return p_of_q(l, p, q);
        }
    }
    throw std::logic_error("sample_jump: proposal guard exceeded");
}

int last_sample_proposals() { return g_last_proposals; }

}  // namespace lbe
