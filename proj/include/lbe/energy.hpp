#pragma once

#include <vector>

#include "lbe/model.hpp"
#include "lbe/potential.hpp"

namespace lbe {

struct EnergyFunctionals {
    double A = 0.0;
    double A_plus = 0.0;
    double A_minus = 0.0;
    double V_n = 0.0;
    double K_n = 0.0;
    double K_star_n = 0.0;
};

// Mean change of sqrt(2H) per unit time from collisions, its centered 2n-th
// moment, and the n-th absolute moments of the change of sqrt(H); n in 1..4.
EnergyFunctionals energy_functionals(const ModelParams& mp, const PotentialSpec& pot, double x,
                                     double p, int n);

// Tabulated A, A+, A-, V_1 on (x, |p|) with bilinear interpolation.
class EnergyTable {
public:
    EnergyTable() = default;
    EnergyTable(const ModelParams& mp, const PotentialSpec& pot, double p_max, int n_x = 128,
                double p_fine = 4.0, double dp_fine = 0.02, double growth = 1.01);

    double A(double x, double p) const { return lookup(a_, x, p); }
    double A_plus(double x, double p) const { double v = A(x, p); return v > 0.0 ? v : 0.0; }
    double A_minus(double x, double p) const { double v = A(x, p); return v < 0.0 ? -v : 0.0; }
    double V(double x, double p) const { return lookup(v_, x, p); }

    bool empty() const { return a_.empty(); }
    double p_max() const { return p_nodes_.empty() ? 0.0 : p_nodes_.back(); }
    int n_x() const { return n_x_; }
    const std::vector<double>& p_nodes() const { return p_nodes_; }

private:
    double lookup(const std::vector<double>& tab, double x, double p) const;

    int n_x_ = 0;
    std::vector<double> p_nodes_;
    std::vector<double> a_;  // row-major [ix][ip]
    std::vector<double> v_;
};

}  // namespace lbe
