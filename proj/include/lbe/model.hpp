#pragma once

#include <cmath>
#include <numbers>
#include <stdexcept>

namespace lbe {

// Gas density constant, fixed so that the friction constant is 1/2.
inline constexpr double kEta = 0.07833213358221876;  // sqrt(2*pi)/32

struct ModelParams {
    double lambda = 0.1;         // mass ratio
    double quad_rel_tol = 1e-10;
    double q_cutoff = 40.0;      // truncation of the Gaussian variable

    static constexpr double eta = kEta;

    void validate() const {
        if (!(lambda >= 0.0 && lambda <= 1.0))
            throw std::invalid_argument("lambda must lie in [0, 1]");
        if (!(quad_rel_tol > 0.0 && quad_rel_tol < 1e-2))
            throw std::invalid_argument("quad_rel_tol must lie in (0, 1e-2)");
        if (!(q_cutoff >= 10.0))
            throw std::invalid_argument("q_cutoff must be at least 10");
    }
};

inline double gauss_density(double x) {
    return std::exp(-0.5 * x * x) * (0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
}

// integral of the standard Gaussian density over [-a, a] (signed in a)
inline double gauss_window(double a) { return std::erf(a * (0.5 * std::numbers::sqrt2)); }

}  // namespace lbe
