#include "lbe/quadrature.hpp"

#include <algorithm>
#include <cmath>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace lbe {

double integrate(const std::function<double(double)>& f, double a, double b,
                 std::vector<double> breakpoints, double rel_tol) {
    using boost::math::quadrature::gauss_kronrod;
    std::vector<double> pts{a};
    std::sort(breakpoints.begin(), breakpoints.end());
    // near-coincident points would leave slivers whose zero estimate stalls the rule
    const double merge = 1e-12 * std::max({std::abs(a), std::abs(b), b - a});
    for (double c : breakpoints)
        if (c > pts.back() + merge && c < b - merge) pts.push_back(c);
    pts.push_back(b);

    double total = 0.0;
    for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
        double err = 0.0;
        total += gauss_kronrod<double, 31>::integrate(f, pts[i], pts[i + 1], 15, rel_tol, &err);
    }
    return total;
}

}  // namespace lbe
