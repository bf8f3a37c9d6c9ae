#pragma once

#include <functional>
#include <vector>

namespace lbe {

// Adaptive Gauss-Kronrod integration of f over [a, b], split at the given
// interior breakpoints (points outside (a, b) are ignored).
double integrate(const std::function<double(double)>& f, double a, double b,
                 std::vector<double> breakpoints, double rel_tol);

}  // namespace lbe
