#pragma once

#include <vector>

namespace lbe {

enum class PotentialShape { cosine, harmonics };

// Fourier mode k (1-based): a*cos(2 pi k x) + b*sin(2 pi k x)
struct Harmonic {
    double a = 0.0;
    double b = 0.0;
};

// Periodic potential on the unit torus, shifted so that min V = 0.
class PotentialSpec {
public:
    PotentialSpec() = default;  // cosine with v0 = 1

    static PotentialSpec cosine(double v0);
    static PotentialSpec custom(std::vector<Harmonic> harmonics);

    PotentialShape shape() const { return shape_; }
    double v0() const { return v0_; }
    const std::vector<Harmonic>& harmonics() const { return harmonics_; }

    double value(double x) const;
    // dV/dx; the flow has dp/dt = -force(x)
    double force(double x) const;
    double curvature(double x) const;

    double sup_V() const { return sup_v_; }
    double sup_dV() const { return sup_dv_; }
    // sqrt of max |V''|, the small-oscillation frequency scale
    double well_frequency() const { return well_freq_; }
    // largest spatial angular frequency present
    double spatial_frequency() const { return spatial_freq_; }
    bool is_flat() const { return sup_v_ == 0.0; }

    // area of {(x, p) : H(x, p) <= level}
    double sublevel_area(double level) const;

private:
    PotentialShape shape_ = PotentialShape::cosine;
    double v0_ = 1.0;
    std::vector<Harmonic> harmonics_;
    double offset_ = 0.0;
    double sup_v_ = 1.0;
    double sup_dv_ = 3.14159265358979323846;
    double well_freq_ = 3.14159265358979323846 * 1.41421356237309504880;
    double spatial_freq_ = 2.0 * 3.14159265358979323846;
};

struct State {
    double x = 0.0;  // in [0, 1)
    double p = 0.0;
};

double energy(const PotentialSpec& pot, const State& s);
double wrap_unit(double x);

struct FlowOptions {
    double energy_tol = 1e-10;      // relative to max(1, H)
    int max_substeps = 1 << 20;
    double step_scale = 1.0;        // multiplies the initial step guess
};

struct FlowResult {
    State state;
    double delta_p = 0.0;           // p_out - p_in, the drift increment
    long substeps = 0;
    double max_energy_error = 0.0;  // relative, over the mesh
    int refinements = 0;            // step halvings after the initial guess
};

// Symplectic flow over dt. When mesh is given it receives the states at the
// substep boundaries (an even number of equal substeps, endpoints included,
// positions unwrapped).
FlowResult flow(const PotentialSpec& pot, const State& s, double dt,
                const FlowOptions& opt = {}, std::vector<State>* mesh = nullptr);

}  // namespace lbe
