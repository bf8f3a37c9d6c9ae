#pragma once

// Independent reference integrals for the kernel tests: GSL adaptive
// quadrature over p' directly, with the rate density written out again here.

#include <cmath>
#include <algorithm>
#include <functional>
#include <vector>

#include <gsl/gsl_errno.h>
#include <gsl/gsl_integration.h>

namespace oracle {

inline double eta() { return std::sqrt(2.0 * M_PI) / 32.0; }

inline double rate(double lambda, double p, double pp) {
    const double z = 0.5 * (1.0 - lambda) * p - 0.5 * (1.0 + lambda) * pp;
    return eta() * (1.0 + lambda) / 2.0 * std::fabs(pp - p) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
}

struct Ctx {
    std::function<double(double)> f;
};

inline double trampoline(double x, void* c) { return static_cast<Ctx*>(c)->f(x); }

// integral of f over [a, b] with interior singular points
inline double qagp(const std::function<double(double)>& f, std::vector<double> pts, double rel = 1e-12) {
    gsl_set_error_handler_off();
    gsl_integration_workspace* w = gsl_integration_workspace_alloc(4000);
    Ctx c{f};
    gsl_function F;
    F.function = &trampoline;
    F.params = &c;
    double result = 0, err = 0;
    gsl_integration_qagp(&F, pts.data(), pts.size(), 0.0, rel, 4000, w, &result, &err);
    gsl_integration_workspace_free(w);
    return result;
}

// integral over p' of g(p') * rate(p, p'), on a window wide enough for the Gaussian
inline double against_rate(double lambda, double p, const std::function<double(double)>& g,
                           std::vector<double> extra = {}) {
    // the Gaussian factor is centred at p' = (1-lambda) p / (1+lambda), width 2/(1+lambda)
    const double c = (1.0 - lambda) * p / (1.0 + lambda);
    const double w = 2.0 / (1.0 + lambda) * 14.0;
    std::vector<double> pts{c - w, c + w};
    if (p > c - w && p < c + w) pts.push_back(p);
    for (double e : extra)
        if (e > c - w && e < c + w) pts.push_back(e);
    std::sort(pts.begin(), pts.end());
    pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
    return qagp([&](double pp) { return g(pp) * rate(lambda, p, pp); }, pts);
}

}  // namespace oracle
