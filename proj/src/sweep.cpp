#include "lbe/sweep.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>

#include <boost/math/tools/roots.hpp>

#include "lbe/energy.hpp"
#include "lbe/kernel.hpp"
#include "lbe/quadrature.hpp"

namespace lbe {

using nlohmann::json;

namespace {

struct Point {
    double lambda = 0.0, x = 0.0, p = 0.0, aux = 0.0;
};

using Ratio = std::function<std::optional<double>(const ModelParams&, const Point&)>;

struct Def {
    std::string id;
    std::string statement;
    BoundKind kind = BoundKind::upper;
    double cap = 0.0;
    std::function<std::vector<Point>(bool refined)> points;
    Ratio ratio;
};

// n geometric nodes on [lo, hi]; 2n - 1 nodes contain the n-node grid
std::vector<double> geom(double lo, double hi, int n) {
    std::vector<double> v;
    if (n == 1) return {lo};
    for (int k = 0; k < n; ++k) v.push_back(lo * std::pow(hi / lo, static_cast<double>(k) / (n - 1)));
    v.back() = hi;
    return v;
}

std::vector<double> symmetric(const std::vector<double>& pos, bool with_zero) {
    std::vector<double> v;
    for (auto it = pos.rbegin(); it != pos.rend(); ++it) v.push_back(-*it);
    if (with_zero) v.push_back(0.0);
    v.insert(v.end(), pos.begin(), pos.end());
    return v;
}

std::vector<double> x_nodes(bool refined) {
    return refined ? std::vector<double>{0.0, 0.125, 0.25, 0.375, 0.5} : std::vector<double>{0.0, 0.25, 0.5};
}

int nodes(int density, bool refined) { return refined ? 2 * density - 1 : density; }

std::vector<Point> product(const std::vector<double>& lambdas, const std::vector<double>& xs,
                           const std::function<std::vector<double>(double)>& ps) {
    std::vector<Point> out;
    for (double l : lambdas)
        for (double x : xs)
            for (double p : ps(l)) out.push_back({l, x, p, 0.0});
    return out;
}

double min_lin_sq(double l, double p) {
    const double a = l * std::abs(p);
    return std::min(a, a * a);
}

// ratio num / shape, skipping points where the shape vanishes and the numerator is at rounding level
std::optional<double> over(double num, double shape) {
    if (shape > 0.0) return num / shape;
    if (std::abs(num) <= 1e-14) return std::nullopt;
    return std::numeric_limits<double>::infinity();
}

struct Tail {
    double num = 0.0, den = 0.0;
};

// moments of (|p'| - b) over {|p'| >= b}
Tail outer_tail(const ModelParams& mp, double p, double b, int m) {
    Tail t;
    t.num = integrate_against_rate(mp, p, [&](double pp) { return std::pow(pp - b, m); }, {}, b, 1e300) +
            integrate_against_rate(mp, p, [&](double pp) { return std::pow(-pp - b, m); }, {}, -1e300, -b);
    t.den = integrate_against_rate(mp, p, [](double) { return 1.0; }, {}, b, 1e300) +
            integrate_against_rate(mp, p, [](double) { return 1.0; }, {}, -1e300, -b);
    return t;
}

// moments of the undershoot 1/lambda - |p'| over [-1/lambda, 1/lambda]
Tail inner_window(const ModelParams& mp, double p, int m) {
    const double w = 1.0 / mp.lambda;
    Tail t;
    t.num = integrate_against_rate(mp, p, [&](double pp) { return std::pow(w - std::abs(pp), m); }, {0.0}, -w, w);
    t.den = integrate_against_rate(mp, p, [](double) { return 1.0; }, {0.0}, -w, w);
    return t;
}

std::optional<double> tail_ratio(const Tail& t) {
    if (!(t.den > std::numeric_limits<double>::min())) return std::nullopt;
    return t.num / t.den;
}

double drift_only(const ModelParams& mp, const PotentialSpec& pot, double x, double p) {
    const double v = pot.value(x);
    const double r0 = std::sqrt(0.5 * p * p + v);
    return std::numbers::sqrt2 *
           integrate_against_rate(mp, p, [&](double pp) { return std::sqrt(0.5 * pp * pp + v) - r0; }, {0.0, p, -p});
}

std::vector<Def> definitions(const SweepOptions& opt) {
    const PotentialSpec pot = opt.potential;
    const int d = opt.density;
    const std::vector<double> all_l{1.0, 0.3, 0.1, 0.03, 0.01};
    const std::vector<double> sub_l{0.3, 0.1, 0.03, 0.01};
    const std::vector<double> energy_l{0.3, 0.1, 0.03};
    const std::vector<double> small_l{0.1, 0.03, 0.01};
    const std::vector<double> window_l{0.01, 0.003};

    auto kernel_points = [=](bool r) {
        return product(all_l, {0.0}, [&](double) { return symmetric(geom(0.05, 50.0, nodes(d, r)), true); });
    };
    auto energy_points = [=](bool r) {
        return product(energy_l, x_nodes(r), [&](double) { return symmetric(geom(0.05, 50.0, nodes(d, r)), true); });
    };

    std::vector<Def> defs;
    auto add = [&](std::string id, std::string st, BoundKind k, double cap, std::function<std::vector<Point>(bool)> pts,
                   Ratio f) { defs.push_back({std::move(id), std::move(st), k, cap, std::move(pts), std::move(f)}); };

    add("escape_floor", "8 (1 + lambda) E(p) >= 1", BoundKind::lower, 1.0 - 1e-12, kernel_points,
        [](const ModelParams& mp, const Point& pt) { return 8.0 * (1.0 + pt.lambda) * escape_rate(mp, pt.p); });
    add("escape_growth", "8 (1 + lambda) E(p) - 1 <= C min(lambda |p|, lambda^2 p^2)", BoundKind::upper, 0.0,
        kernel_points, [](const ModelParams& mp, const Point& pt) {
            return over(8.0 * (1.0 + pt.lambda) * escape_rate(mp, pt.p) - 1.0, min_lin_sq(pt.lambda, pt.p));
        });
    add("escape_linear", "lambda |p| <= C E(p)", BoundKind::upper, 0.0, kernel_points,
        [](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(pt.lambda * std::abs(pt.p) / escape_rate(mp, pt.p));
        });
    add("drift_linear", "|D(p) + lambda p / (2 (1 + lambda)^2)| <= C lambda^2 p^2", BoundKind::upper, 0.0,
        kernel_points, [](const ModelParams& mp, const Point& pt) {
            const double l = pt.lambda;
            return over(std::abs(jump_drift(mp, pt.p) + l * pt.p / (2.0 * (1.0 + l) * (1.0 + l))), l * l * pt.p * pt.p);
        });
    add("drift_escape", "|D(p) + 2 lambda p E(p) / (1 + lambda)| <= C", BoundKind::upper, 0.0, kernel_points,
        [](const ModelParams& mp, const Point& pt) {
            const double l = pt.lambda;
            return std::optional<double>(std::abs(jump_drift(mp, pt.p) + 2.0 * l * pt.p / (1.0 + l) * escape_rate(mp, pt.p)));
        });
    add("qvar_linear", "|Q(p) - (1 + lambda)^-3| <= C min(lambda |p|, lambda^2 p^2)", BoundKind::upper, 0.0,
        kernel_points, [](const ModelParams& mp, const Point& pt) {
            return over(std::abs(q_variance(mp, pt.p) - std::pow(1.0 + pt.lambda, -3.0)), min_lin_sq(pt.lambda, pt.p));
        });
    add("qvar_floor", "Q(p) >= c > 0", BoundKind::lower, 0.0, kernel_points,
        [](const ModelParams& mp, const Point& pt) { return std::optional<double>(q_variance(mp, pt.p)); });
    add("qvar_escape", "Q(p) <= C E(p)", BoundKind::upper, 0.0, kernel_points,
        [](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(q_variance(mp, pt.p) / escape_rate(mp, pt.p));
        });
    for (int m = 1; m <= 3; ++m)
        add("even_moment_m" + std::to_string(m),
            "Pi_" + std::to_string(2 * m) + "(p) <= C (1 + lambda |p|)^" + std::to_string(2 * m + 1), BoundKind::upper, 0.0,
            kernel_points, [m](const ModelParams& mp, const Point& pt) {
                return std::optional<double>(jump_moment(mp, pt.p, 2 * m) /
                                             std::pow(1.0 + pt.lambda * std::abs(pt.p), 2 * m + 1));
            });

    for (int m = 1; m <= 2; ++m) {
        // b in {1, lambda^-1/2, lambda^-1}, |p| <= b
        add("overshoot_inside_m" + std::to_string(m),
            "E[(|p'| - b)^" + std::to_string(m) + " | |p'| >= b] <= C for |p| <= b <= 1/lambda", BoundKind::upper, 0.0,
            [=](bool r) {
                std::vector<Point> out;
                for (double l : sub_l)
                    for (double b : {1.0, 1.0 / std::sqrt(l), 1.0 / l}) {
                        const int n = 2 * nodes(d, r) + 1;
                        for (int k = 0; k < n; ++k) out.push_back({l, 0.0, -b + 2.0 * b * k / (n - 1), b});
                    }
                return out;
            },
            [m](const ModelParams& mp, const Point& pt) { return tail_ratio(outer_tail(mp, pt.p, pt.aux, m)); });
        // |p| = (1 + delta) / lambda out to where the window mass leaves double range
        add("overshoot_outside_m" + std::to_string(m),
            "E[(1/lambda - |p'|)^" + std::to_string(m) + " | |p'| <= 1/lambda] <= C for |p| > 1/lambda",
            BoundKind::upper, 0.0,
            [=](bool r) {
                return product(sub_l, {0.0}, [&](double l) {
                    std::vector<double> ps;
                    for (double delta : geom(1e-3, 50.0 * l / (1.0 - l), nodes(d, r))) ps.push_back((1.0 + delta) / l);
                    return symmetric(ps, false);
                });
            },
            [m](const ModelParams& mp, const Point& pt) { return tail_ratio(inner_window(mp, pt.p, m)); });
    }

    for (int n = 1; n <= 4; ++n) {
        const std::string ns = std::to_string(n);
        add("abs_moment_n" + ns, "K_" + ns + "(x, p) <= C (1 + lambda |p|)^" + std::to_string(n + 1), BoundKind::upper,
            0.0, energy_points, [=](const ModelParams& mp, const Point& pt) {
                return std::optional<double>(energy_functionals(mp, pot, pt.x, pt.p, n).K_n /
                                             std::pow(1.0 + pt.lambda * std::abs(pt.p), n + 1));
            });
        add("outward_moment_n" + ns, "K*_" + ns + "(x, p) <= C", BoundKind::upper, 0.0, energy_points,
            [=](const ModelParams& mp, const Point& pt) {
                return std::optional<double>(energy_functionals(mp, pot, pt.x, pt.p, n).K_star_n);
            });
        add("variance_growth_n" + ns, "V_" + ns + "(x, p) <= C (1 + lambda |p|)", BoundKind::upper, 0.0, energy_points,
            [=](const ModelParams& mp, const Point& pt) {
                return std::optional<double>(energy_functionals(mp, pot, pt.x, pt.p, n).V_n /
                                             (1.0 + pt.lambda * std::abs(pt.p)));
            });
    }
    add("drift_plus_decay", "A+(x, p) (1 + p^2) <= C", BoundKind::upper, 0.0, energy_points,
        [=](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(std::max(drift_only(mp, pot, pt.x, pt.p), 0.0) * (1.0 + pt.p * pt.p));
        });
    add("variance_floor", "V_1(x, p) >= c > 0", BoundKind::lower, 0.0, energy_points,
        [=](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(energy_functionals(mp, pot, pt.x, pt.p, 1).V_n);
        });

    auto window_points = [=](bool r) {
        return product(window_l, x_nodes(r), [&](double l) {
            return symmetric(geom(std::pow(l, -0.375), std::pow(l, -0.75), nodes(d, r)), false);
        });
    };
    add("drift_minus_window", "|A-(x, p) - lambda |p| / 2| <= C lambda^(5/4) |p| on the window", BoundKind::upper, 0.0,
        window_points, [=](const ModelParams& mp, const Point& pt) {
            const double am = std::max(-drift_only(mp, pot, pt.x, pt.p), 0.0);
            const double ap = std::abs(pt.p);
            return std::optional<double>(std::abs(am - 0.5 * pt.lambda * ap) / (std::pow(pt.lambda, 1.25) * ap));
        });
    add("variance_window", "|V_1(x, p) - 1| <= C lambda^(1/2) on the window", BoundKind::upper, 0.0, window_points,
        [=](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(std::abs(energy_functionals(mp, pot, pt.x, pt.p, 1).V_n - 1.0) /
                                         std::sqrt(pt.lambda));
        });
    add("k2_window", "|2 K_2(x, p) - 1| <= C lambda^(1/2) on the window", BoundKind::upper, 0.0, window_points,
        [=](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(std::abs(2.0 * energy_functionals(mp, pot, pt.x, pt.p, 2).K_n - 1.0) /
                                         std::sqrt(pt.lambda));
        });
    add("drift_minus_vs_drift", "A-(x, p) <= |D(p)|", BoundKind::upper, 1.0 + 1e-8,
        [=](bool r) {
            return product(small_l, x_nodes(r),
                           [&](double l) { return symmetric(geom(0.05, 10.0 / l, nodes(d, r)), false); });
        },
        [=](const ModelParams& mp, const Point& pt) {
            return over(std::max(-drift_only(mp, pot, pt.x, pt.p), 0.0), std::abs(jump_drift(mp, pt.p)));
        });
    add("drift_minus_linear", "A-(x, p) <= C lambda |p| for |p| <= 1/lambda", BoundKind::upper, 0.0,
        [=](bool r) {
            return product(small_l, x_nodes(r), [&](double l) { return symmetric(geom(0.05, 1.0 / l, nodes(d, r)), false); });
        },
        [=](const ModelParams& mp, const Point& pt) {
            return over(std::max(-drift_only(mp, pot, pt.x, pt.p), 0.0), pt.lambda * std::abs(pt.p));
        });
    add("drift_minus_far", "A-(x, p) / E(p) >= c > 0 for |p| >= 1/lambda", BoundKind::lower, 0.0,
        [=](bool r) {
            return product(small_l, x_nodes(r),
                           [&](double l) { return symmetric(geom(1.0 / l, 20.0 / l, nodes(d, r)), false); });
        },
        [=](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(std::max(-drift_only(mp, pot, pt.x, pt.p), 0.0) / escape_rate(mp, pt.p));
        });
    add("drift_over_escape", "|A(x, p) / E(p) + 2 lambda |p| / (1 + lambda)| <= C", BoundKind::upper, 0.0,
        [=](bool r) {
            return product(small_l, x_nodes(r), [&](double l) { return symmetric(geom(0.05, 20.0 / l, nodes(d, r)), true); });
        },
        [=](const ModelParams& mp, const Point& pt) {
            return std::optional<double>(std::abs(drift_only(mp, pot, pt.x, pt.p) / escape_rate(mp, pt.p) +
                                                  2.0 * pt.lambda * std::abs(pt.p) / (1.0 + pt.lambda)));
        });
    // refinement tightens the nested quadrature instead of a grid
    add("drift_plus_integral", "|integral of A+ over the phase space - 1| <= C lambda", BoundKind::upper, 0.0,
        [=](bool r) {
            std::vector<Point> out;
            for (double l : small_l) out.push_back({l, 0.0, 0.0, r ? 1.0 : 0.0});
            return out;
        },
        [=](const ModelParams& mp, const Point& pt) {
            const bool r = pt.aux > 0.0;
            const double integral = integrated_drift_plus(mp, pot, r ? 1e-8 : 1e-6, r ? 0.05 : 0.1);
            return std::optional<double>(std::abs(integral - 1.0) / pt.lambda);
        });
    return defs;
}

struct Extremum {
    double value = std::numeric_limits<double>::quiet_NaN();
    Point at;
    long n = 0, skipped = 0;
    bool finite = true;
    std::vector<SweepLambdaRow> per_lambda;
};

Extremum evaluate(const Def& def, const std::vector<Point>& pts, const SweepOptions& opt) {
    std::vector<std::optional<double>> vals(pts.size());
#pragma omp parallel for schedule(dynamic)
    for (std::size_t i = 0; i < pts.size(); ++i) {
        ModelParams mp;
        mp.lambda = pts[i].lambda;
        mp.quad_rel_tol = opt.quad_rel_tol;
        vals[i] = def.ratio(mp, pts[i]);
    }
    const bool up = def.kind == BoundKind::upper;
    auto better = [up](double a, double b) { return up ? a > b : a < b; };
    Extremum e;
    e.n = static_cast<long>(pts.size());
    for (std::size_t i = 0; i < pts.size(); ++i) {
        if (!vals[i]) {
            ++e.skipped;
            continue;
        }
        const double v = *vals[i];
        if (!std::isfinite(v)) e.finite = false;
        if (std::isnan(e.value) || better(v, e.value)) {
            e.value = v;
            e.at = pts[i];
        }
        auto row = std::find_if(e.per_lambda.begin(), e.per_lambda.end(),
                                [&](const SweepLambdaRow& r) { return r.lambda == pts[i].lambda; });
        if (row == e.per_lambda.end())
            e.per_lambda.push_back({pts[i].lambda, v});
        else if (better(v, row->constant))
            row->constant = v;
    }
    return e;
}

}  // namespace

double integrated_drift_plus(const ModelParams& mp, const PotentialSpec& pot, double rel_tol, double scan_step) {
    mp.validate();
    if (!(mp.lambda > 0.0)) throw std::invalid_argument("integrated_drift_plus: lambda must be positive");
    const double p_end = 6.0 + 6.0 * std::pow(mp.lambda, -0.25);
    ModelParams inner_mp = mp;
    inner_mp.quad_rel_tol = std::min(mp.quad_rel_tol, 1e-3 * rel_tol);
    auto line = [&](double x) {
        auto a = [&](double p) { return drift_only(inner_mp, pot, x, p); };
        std::vector<double> nodes;
        for (double p = 0.0; p < p_end; p += scan_step) nodes.push_back(p);
        nodes.push_back(p_end);
        std::vector<double> vals;
        for (double p : nodes) vals.push_back(a(p));
        if (vals.back() >= 0.0) throw std::runtime_error("integrated_drift_plus: A+ support reaches the scan end");
        // roots between sign changes split the line into pieces of constant sign
        std::vector<double> cuts{0.0};
        for (std::size_t k = 0; k + 1 < nodes.size(); ++k)
            if ((vals[k] > 0.0) != (vals[k + 1] > 0.0)) {
                std::uintmax_t iters = 100;
                const auto root = boost::math::tools::toms748_solve(
                    a, nodes[k], nodes[k + 1], vals[k], vals[k + 1],
                    boost::math::tools::eps_tolerance<double>(50), iters);
                cuts.push_back(0.5 * (root.first + root.second));
            }
        cuts.push_back(p_end);
        double total = 0.0;
        for (std::size_t k = 0; k + 1 < cuts.size(); ++k)
            if (a(0.5 * (cuts[k] + cuts[k + 1])) > 0.0) total += integrate(a, cuts[k], cuts[k + 1], {}, rel_tol);
        return 2.0 * total;
    };
    return integrate(line, 0.0, 1.0, {0.5}, rel_tol);
}

const std::vector<std::string>& sweep_item_ids() {
    static const std::vector<std::string> ids = [] {
        std::vector<std::string> v;
        for (const auto& d : definitions(SweepOptions{})) v.push_back(d.id);
        return v;
    }();
    return ids;
}

SweepReport run_inequality_sweeps(const SweepOptions& opt) {
    if (opt.density < 3) throw std::invalid_argument("sweep density must be at least 3");
    if (!(opt.max_drift > 0.0)) throw std::invalid_argument("max_drift must be positive");
    const auto defs = definitions(opt);
    for (const auto& id : opt.only)
        if (std::none_of(defs.begin(), defs.end(), [&](const Def& d) { return d.id == id; }))
            throw std::invalid_argument("unknown sweep item: " + id);
    SweepReport rep;
    for (const auto& def : defs) {
        if (!opt.only.empty() && std::find(opt.only.begin(), opt.only.end(), def.id) == opt.only.end()) continue;
        const Extremum base = evaluate(def, def.points(false), opt);
        const Extremum fine = evaluate(def, def.points(true), opt);
        SweepItem it;
        it.id = def.id;
        it.statement = def.statement;
        it.kind = def.kind;
        it.cap = def.cap;
        it.constant = base.value;
        it.constant_refined = fine.value;
        it.at_lambda = fine.at.lambda;
        it.at_x = fine.at.x;
        it.at_p = fine.at.p;
        it.n_points = fine.n;
        it.n_skipped = fine.skipped;
        it.per_lambda = fine.per_lambda;
        const bool up = def.kind == BoundKind::upper;
        if (base.value != 0.0) it.drift = up ? (fine.value - base.value) / base.value : (base.value - fine.value) / base.value;
        if (!base.finite || !fine.finite || !std::isfinite(fine.value) || !std::isfinite(base.value))
            it.reason = "ratio is not finite";
        else if (!up && !(fine.value > 0.0))
            it.reason = "lower bound is not positive";
        else if (def.cap != 0.0 && (up ? fine.value > def.cap : fine.value < def.cap))
            it.reason = "constant violates the required bound";
        else if (std::abs(it.drift) > opt.max_drift)
            it.reason = "constant moved under refinement";
        it.pass = it.reason.empty();
        rep.items.push_back(std::move(it));
    }
    rep.pass = std::all_of(rep.items.begin(), rep.items.end(), [](const SweepItem& i) { return i.pass; });
    return rep;
}

json SweepReport::to_json() const {
    json j;
    j["schema_version"] = 1;
    j["items"] = json::array();
    for (const auto& it : items) {
        json e = {{"id", it.id},
                  {"statement", it.statement},
                  {"kind", it.kind == BoundKind::upper ? "upper" : "lower"},
                  {"cap", it.cap},
                  {"constant", it.constant},
                  {"constant_refined", it.constant_refined},
                  {"drift", it.drift},
                  {"at", {{"lambda", it.at_lambda}, {"x", it.at_x}, {"p", it.at_p}}},
                  {"n_points", it.n_points},
                  {"n_skipped", it.n_skipped},
                  {"pass", it.pass},
                  {"reason", it.reason}};
        e["per_lambda"] = json::array();
        for (const auto& r : it.per_lambda) e["per_lambda"].push_back({{"lambda", r.lambda}, {"constant", r.constant}});
        j["items"].push_back(e);
    }
    j["pass"] = pass;
    return j;
}

}  // namespace lbe
