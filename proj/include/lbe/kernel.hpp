#pragma once

#include <functional>
#include <vector>

#include "lbe/model.hpp"
#include "lbe/rng.hpp"

namespace lbe {

// Rate density for a kick p_from -> p_to.
double jump_rate(const ModelParams& mp, double p_from, double p_to);

// Convolution-form rate of the lambda = 0 kernel, as a function of the kick v.
double idealized_rate(double v);

double escape_rate(const ModelParams& mp, double p);
double jump_drift(const ModelParams& mp, double p);
double jump_second_moment(const ModelParams& mp, double p);

// Pi_m(p) = integral of (p' - p)^m against the rate density; m <= 12.
double jump_moment(const ModelParams& mp, double p, int m);

// Pi_2 - D^2 / E, evaluated through a cancellation-free identity.
double q_variance(const ModelParams& mp, double p);

// Integral of f(p') * rate(p, p') dp', computed in the Gaussian variable
// q = ((lambda+1) p' + (lambda-1) p) / 2 and split at the kink and at any
// extra breakpoints given in p' coordinates.
double integrate_against_rate(const ModelParams& mp, double p,
                              const std::function<double(double)>& f,
                              const std::vector<double>& pprime_breaks = {},
                              double pprime_lo = -1e300, double pprime_hi = 1e300);

// Exact draw from rate(p, .) / escape_rate(p).
double sample_jump(const ModelParams& mp, double p, Rng& rng);

// Number of proposals spent by the most recent sample_jump on this thread.
int last_sample_proposals();

}  // namespace lbe
