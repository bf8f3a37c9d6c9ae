#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "lbe/grid.hpp"
#include "lbe/serialize.hpp"

namespace lbe {

namespace fs = std::filesystem;
using nlohmann::json;

std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

json potential_to_json(const PotentialSpec& pot) {
    if (pot.shape() == PotentialShape::cosine) return {{"shape", "cosine"}, {"v0", pot.v0()}};
    json hs = json::array();
    for (const auto& h : pot.harmonics()) hs.push_back({h.a, h.b});
    return {{"shape", "harmonics"}, {"harmonics", hs}};
}

PotentialSpec potential_from_json(const json& j) {
    const std::string shape = j.at("shape").get<std::string>();
    if (shape == "cosine") return PotentialSpec::cosine(j.at("v0").get<double>());
    if (shape == "harmonics") {
        std::vector<Harmonic> hs;
        for (const auto& h : j.at("harmonics")) hs.push_back({h.at(0).get<double>(), h.at(1).get<double>()});
        return PotentialSpec::custom(hs);
    }
    throw std::invalid_argument("unknown potential shape: " + shape);
}

json grid_spec_to_json(const GridSpec& s) {
    return {{"n_x", s.n_x},
            {"n_p", s.n_p},
            {"p_max", s.p_max},
            {"p_cap", s.p_cap},
            {"core_p", s.core_p},
            {"core_width", s.core_width},
            {"samples_per_cell", s.samples_per_cell},
            {"low_boost", s.low_boost},
            {"low_branches", s.low_branches},
            {"flow_tol", s.flow_tol},
            {"max_leakage", s.max_leakage}};
}

GridSpec grid_spec_from_json(const json& j) {
    GridSpec s;
    s.n_x = j.at("n_x").get<int>();
    s.n_p = j.at("n_p").get<int>();
    s.p_max = j.at("p_max").get<double>();
    s.p_cap = j.at("p_cap").get<double>();
    s.core_p = j.at("core_p").get<double>();
    s.core_width = j.at("core_width").get<double>();
    s.samples_per_cell = j.at("samples_per_cell").get<long>();
    s.low_boost = j.at("low_boost").get<double>();
    s.low_branches = j.at("low_branches").get<int>();
    s.flow_tol = j.at("flow_tol").get<double>();
    s.max_leakage = j.at("max_leakage").get<double>();
    return s;
}

namespace {

std::vector<std::vector<std::string>> read_csv(const fs::path& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot read " + path.string());
    std::vector<std::vector<std::string>> rows;
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        rows.push_back(std::move(f));
    }
    return rows;
}

double to_d(const std::string& s) {
    double v = 0.0;
    const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
    if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw std::runtime_error("bad number in grid file: " + s);
    return v;
}

}  // namespace

void save_grid(const GridModel& gm, const std::string& dir) {
    fs::create_directories(dir);
    const int n = gm.n_cells();
    json meta = {{"format", "lbe-grid"},
                 {"schema_version", 1},
                 {"lambda", gm.model.lambda},
                 {"quad_rel_tol", gm.model.quad_rel_tol},
                 {"q_cutoff", gm.model.q_cutoff},
                 {"potential", potential_to_json(gm.potential)},
                 {"spec", grid_spec_to_json(gm.spec)},
                 {"seed", gm.seed},
                 {"level", gm.mino.level},
                 {"epsilon", gm.mino.epsilon},
                 {"leakage", gm.leakage},
                 {"observables", gm.ghat_names}};
    std::ofstream(fs::path(dir) / "grid.json") << meta.dump(2) << "\n";

    std::ofstream cells(fs::path(dir) / "cells.csv");
    cells << "cell,ix,ip,x_lo,x_hi,p_lo,p_hi,x_center,p_center,measure,low\n";
    std::vector<char> low(static_cast<std::size_t>(n), 0);
    for (int i : gm.mino.low_set) low[static_cast<std::size_t>(i)] = 1;
    for (int i = 0; i < n; ++i) {
        const int ix = gm.ix_of(i), ip = gm.ip_of(i);
        cells << i << ',' << ix << ',' << ip << ',' << format_double(gm.x_edges[ix]) << ','
              << format_double(gm.x_edges[ix + 1]) << ',' << format_double(gm.p_edges[ip]) << ','
              << format_double(gm.p_edges[ip + 1]) << ',' << format_double(gm.x_center(i)) << ','
              << format_double(gm.p_center(i)) << ',' << format_double(gm.measure(i)) << ','
              << int(low[static_cast<std::size_t>(i)]) << '\n';
    }

    std::ofstream mat(fs::path(dir) / "matrix.csv");
    mat << "row,col,value,se\n";
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j)
            if (gm.T(i, j) != 0.0)
                mat << i << ',' << j << ',' << format_double(gm.T(i, j)) << ',' << format_double(gm.T_se(i, j)) << '\n';

    std::ofstream vec(fs::path(dir) / "vectors.csv");
    vec << "cell,pi,h,nu,leakage";
    for (const auto& name : gm.ghat_names) vec << ",ghat_" << name << ",ghat_" << name << "_se";
    vec << '\n';
    for (int i = 0; i < n; ++i) {
        vec << i << ',' << format_double(gm.pi[i]) << ',' << format_double(gm.mino.h[i]) << ','
            << format_double(gm.mino.nu[i]) << ',' << format_double(gm.row_leakage[i]);
        for (std::size_t k = 0; k < gm.ghat.size(); ++k)
            vec << ',' << format_double(gm.ghat[k][i]) << ',' << format_double(gm.ghat_se[k][i]);
        vec << '\n';
    }
}

GridModel load_grid(const std::string& dir) {
    std::ifstream in(fs::path(dir) / "grid.json");
    if (!in) throw std::runtime_error("no grid.json in " + dir);
    const json meta = json::parse(in);
    if (meta.at("format") != "lbe-grid") throw std::runtime_error("not a grid directory: " + dir);
    ModelParams mp;
    mp.lambda = meta.at("lambda").get<double>();
    mp.quad_rel_tol = meta.at("quad_rel_tol").get<double>();
    mp.q_cutoff = meta.at("q_cutoff").get<double>();
    GridModel gm = grid_geometry(mp, potential_from_json(meta.at("potential")), grid_spec_from_json(meta.at("spec")));
    gm.seed = meta.at("seed").get<std::uint64_t>();
    gm.mino.level = meta.at("level").get<double>();
    gm.mino.epsilon = meta.at("epsilon").get<double>();
    gm.leakage = meta.at("leakage").get<double>();
    gm.ghat_names = meta.at("observables").get<std::vector<std::string>>();
    const int n = gm.n_cells();

    const auto cells = read_csv(fs::path(dir) / "cells.csv");
    if (static_cast<int>(cells.size()) != n) throw std::runtime_error("cells.csv does not match the grid spec");
    for (const auto& c : cells) {
        const int ix = std::stoi(c.at(1)), ip = std::stoi(c.at(2));
        gm.x_edges[ix] = to_d(c.at(3));
        gm.x_edges[ix + 1] = to_d(c.at(4));
        gm.p_edges[ip] = to_d(c.at(5));
        gm.p_edges[ip + 1] = to_d(c.at(6));
        if (c.at(10) == "1") gm.mino.low_set.push_back(std::stoi(c.at(0)));
    }

    gm.T = Eigen::MatrixXd::Zero(n, n);
    gm.T_se = Eigen::MatrixXd::Zero(n, n);
    for (const auto& r : read_csv(fs::path(dir) / "matrix.csv")) {
        const int i = std::stoi(r.at(0)), j = std::stoi(r.at(1));
        gm.T(i, j) = to_d(r.at(2));
        gm.T_se(i, j) = to_d(r.at(3));
    }

    const auto vecs = read_csv(fs::path(dir) / "vectors.csv");
    if (static_cast<int>(vecs.size()) != n) throw std::runtime_error("vectors.csv does not match the grid spec");
    gm.pi.resize(n);
    gm.mino.h.resize(n);
    gm.mino.nu.resize(n);
    gm.row_leakage.resize(n);
    gm.ghat.assign(gm.ghat_names.size(), Eigen::VectorXd(n));
    gm.ghat_se.assign(gm.ghat_names.size(), Eigen::VectorXd(n));
    for (const auto& v : vecs) {
        const int i = std::stoi(v.at(0));
        gm.pi[i] = to_d(v.at(1));
        gm.mino.h[i] = to_d(v.at(2));
        gm.mino.nu[i] = to_d(v.at(3));
        gm.row_leakage[i] = to_d(v.at(4));
        for (std::size_t k = 0; k < gm.ghat_names.size(); ++k) {
            gm.ghat[k][i] = to_d(v.at(5 + 2 * k));
            gm.ghat_se[k][i] = to_d(v.at(6 + 2 * k));
        }
    }
    return gm;
}

}  // namespace lbe
