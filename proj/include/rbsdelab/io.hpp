#pragma once

#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "rbsdelab/glab.hpp"
#include "rbsdelab/pricing.hpp"
#include "rbsdelab/soref.hpp"
#include "rbsdelab/verify.hpp"

namespace rbsdelab {

using nlohmann::json;

// ---------------------------------------------------------------------------
// Instance configuration (the on-disk schema) and the built-in registry
// ---------------------------------------------------------------------------

struct ComponentConfig {
    std::string kind = "zero";
    json params = json::object();
};

struct InstanceConfig {
    TimeGrid grid;
    UncertaintyInterval interval;
    ComponentConfig generator;
    double lipschitz_c = 0.0;
    ComponentConfig obstacle;
    ComponentConfig terminal;
    double x0 = 0.0;
};

namespace detail {

inline double param(const json& p, const std::string& key, double fallback) {
    return p.contains(key) ? p.at(key).get<double>() : fallback;
}

inline std::function<double(double)> polynomial_of(const json& params) {
    std::vector<double> coeffs;
    if (params.contains("coeffs")) coeffs = params.at("coeffs").get<std::vector<double>>();
    return [coeffs](double x) {
        double acc = 0.0;
        for (size_t k = coeffs.size(); k-- > 0;) acc = acc * x + coeffs[k];
        return acc;
    };
}

}  // namespace detail

/// Built-in generator kinds: zero; linear_discount {r} (the pricing driver
/// -r*y + (r - a/2)*z); custom_polynomial {c0, cy, cz} (affine in y and z).
inline GeneratorSpec build_generator(const ComponentConfig& cfg, double lipschitz_c,
                                     const UncertaintyInterval& interval) {
    GeneratorSpec g;
    g.lipschitz_c = lipschitz_c;
    if (cfg.kind == "zero") {
        g.f = [](double, double, double, double, double) { return 0.0; };
    } else if (cfg.kind == "linear_discount") {
        const double r = detail::param(cfg.params, "r", 0.0);
        g.f = [r](double, double, double y, double z, double a) {
            return -r * y + (r - 0.5 * a) * z;
        };
        if (lipschitz_c == 0.0)
            g.lipschitz_c = std::abs(r) + std::max(std::abs(r - 0.5 * interval.a_low),
                                                   std::abs(r - 0.5 * interval.a_high)) /
                                             std::sqrt(interval.a_low);
    } else if (cfg.kind == "custom_polynomial") {
        const double c0 = detail::param(cfg.params, "c0", 0.0);
        const double cy = detail::param(cfg.params, "cy", 0.0);
        const double cz = detail::param(cfg.params, "cz", 0.0);
        g.f = [c0, cy, cz](double, double, double y, double z, double) { return c0 + cy * y + cz * z; };
        if (lipschitz_c == 0.0)
            g.lipschitz_c = std::abs(cy) + std::abs(cz) / std::sqrt(interval.a_low);
    } else {
        throw InvalidInstanceError("unknown generator kind '" + cfg.kind + "'");
    }
    return g;
}

/// Built-in obstacle/terminal kinds: zero; american_put / american_call
/// {strike, spot} on the exponential of the state; custom_polynomial {coeffs}.
inline std::function<double(double)> build_payoff_profile(const ComponentConfig& cfg) {
    if (cfg.kind == "zero") return [](double) { return 0.0; };
    if (cfg.kind == "american_put") {
        const double strike = detail::param(cfg.params, "strike", 1.0);
        const double spot = detail::param(cfg.params, "spot", 1.0);
        return [strike, spot](double x) { return std::max(strike - spot * std::exp(x), 0.0); };
    }
    if (cfg.kind == "american_call") {
        const double strike = detail::param(cfg.params, "strike", 1.0);
        const double spot = detail::param(cfg.params, "spot", 1.0);
        return [strike, spot](double x) { return std::max(spot * std::exp(x) - strike, 0.0); };
    }
    if (cfg.kind == "custom_polynomial") return detail::polynomial_of(cfg.params);
    throw InvalidInstanceError("unknown obstacle/terminal kind '" + cfg.kind + "'");
}

inline Instance build_instance(const InstanceConfig& cfg) {
    cfg.grid.validate();
    cfg.interval.validate();
    Instance inst;
    inst.grid = cfg.grid;
    inst.interval = cfg.interval;
    inst.x0 = cfg.x0;
    inst.gen = build_generator(cfg.generator, cfg.lipschitz_c, cfg.interval);
    auto s_profile = build_payoff_profile(cfg.obstacle);
    inst.obstacle.s = [s_profile](double, double x) { return s_profile(x); };
    auto xi_profile = build_payoff_profile(cfg.terminal);
    inst.terminal.xi = [xi_profile](double x) { return xi_profile(x); };
    return inst;
}

inline InstanceConfig instance_config_from_json(const json& doc) {
    InstanceConfig cfg;
    cfg.grid.horizon = doc.at("grid").at("T").get<double>();
    cfg.grid.steps = doc.at("grid").at("N").get<int>();
    cfg.interval.a_low = doc.at("interval").at("a_low").get<double>();
    cfg.interval.a_high = doc.at("interval").at("a_high").get<double>();
    const auto& gen = doc.at("generator");
    cfg.generator.kind = gen.at("kind").get<std::string>();
    if (gen.contains("params")) cfg.generator.params = gen.at("params");
    if (gen.contains("lipschitz_C")) cfg.lipschitz_c = gen.at("lipschitz_C").get<double>();
    cfg.obstacle.kind = doc.at("obstacle").at("kind").get<std::string>();
    if (doc.at("obstacle").contains("params")) cfg.obstacle.params = doc.at("obstacle").at("params");
    cfg.terminal.kind = doc.at("terminal").at("kind").get<std::string>();
    if (doc.at("terminal").contains("params")) cfg.terminal.params = doc.at("terminal").at("params");
    cfg.x0 = doc.contains("x0") ? doc.at("x0").get<double>() : 0.0;
    return cfg;
}

inline json instance_config_to_json(const InstanceConfig& cfg) {
    json doc;
    doc["grid"] = {{"T", cfg.grid.horizon}, {"N", cfg.grid.steps}};
    doc["interval"] = {{"a_low", cfg.interval.a_low}, {"a_high", cfg.interval.a_high}};
    doc["generator"] = {{"kind", cfg.generator.kind}, {"params", cfg.generator.params},
                        {"lipschitz_C", cfg.lipschitz_c}};
    doc["obstacle"] = {{"kind", cfg.obstacle.kind}, {"params", cfg.obstacle.params}};
    doc["terminal"] = {{"kind", cfg.terminal.kind}, {"params", cfg.terminal.params}};
    doc["x0"] = cfg.x0;
    return doc;
}

inline InstanceConfig load_instance_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInstanceError("cannot open instance file: " + path);
    json doc;
    in >> doc;
    return instance_config_from_json(doc);
}

/// Market JSON: {rate, drift, payoff:{kind: put|call, strike}, price0, T, N}.
inline MarketSpec market_from_json(const json& doc) {
    MarketSpec mkt;
    mkt.rate = detail::param(doc, "rate", 0.0);
    mkt.drift = detail::param(doc, "drift", 0.0);
    mkt.price0 = doc.at("price0").get<double>();
    mkt.horizon = doc.at("T").get<double>();
    mkt.steps = doc.at("N").get<int>();
    const auto& payoff = doc.at("payoff");
    const auto kind = payoff.at("kind").get<std::string>();
    if (kind == "put") mkt.payoff.kind = PayoffSpec::Kind::put;
    else if (kind == "call") mkt.payoff.kind = PayoffSpec::Kind::call;
    else throw InvalidInstanceError("unknown payoff kind '" + kind + "'");
    mkt.payoff.strike = payoff.at("strike").get<double>();
    return mkt;
}

inline MarketSpec load_market(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInstanceError("cannot open market file: " + path);
    json doc;
    in >> doc;
    return market_from_json(doc);
}

// ---------------------------------------------------------------------------
// Scenario parsing: const:<a>, ramp:<a0>:<a1>, dpp-star
// ---------------------------------------------------------------------------

/// Parse one scenario token. "dpp-star" needs a solved SecondOrderSolution.
inline Scenario parse_scenario(const std::string& token, const TimeGrid& grid,
                               const SecondOrderSolution* so = nullptr) {
    if (token.rfind("const:", 0) == 0) return constant_scenario(std::stod(token.substr(6)));
    if (token.rfind("ramp:", 0) == 0) {
        const auto rest = token.substr(5);
        const auto sep = rest.find(':');
        if (sep == std::string::npos) throw InvalidInstanceError("bad scenario token: " + token);
        return ramp_scenario(std::stod(rest.substr(0, sep)), std::stod(rest.substr(sep + 1)),
                             grid.steps);
    }
    if (token == "dpp-star") {
        if (!so) throw InvalidInstanceError("dpp-star scenario requires a solved DPP surface");
        return a_star_scenario(*so);
    }
    throw InvalidInstanceError("bad scenario token: " + token);
}

// ---------------------------------------------------------------------------
// Report serialization (deterministic: sorted keys, no timestamps)
// ---------------------------------------------------------------------------

inline json lattice_summary(const Lattice& lat) {
    return {{"nodes", lat.node_count()},
            {"dx", lat.dx},
            {"dt", lat.dt},
            {"stability_margin", lat.stability_margin()}};
}

inline json soref_report_json(const SecondOrderSolution& so, const Lattice& lat) {
    json doc;
    doc["Y0"] = so.Y.at(0, lat.center);
    doc["Z0"] = so.Z.at(0, lat.center);
    doc["a_grid"] = so.a_grid;
    doc["a_star_histogram"] = so.a_star_histogram();
    doc["min_condition_gap"] = so.min_condition_gap;
    doc["min_gap_scenario"] = so.min_gap_scenario;
    doc["contact_set_mismatch"] = so.contact_set_mismatch;
    doc["lattice"] = lattice_summary(lat);
    doc["per_scenario"] = json::array();
    for (const auto& rec : so.per_scenario)
        doc["per_scenario"].push_back({{"id", rec.id},
                                       {"K_terminal", rec.K_path.empty() ? 0.0 : rec.K_path.back()},
                                       {"k_terminal", rec.k_path.empty() ? 0.0 : rec.k_path.back()},
                                       {"K_minus_k_terminal", rec.K_minus_k_terminal},
                                       {"min_K_increment", rec.min_K_increment},
                                       {"K_contact_part", rec.K_contact_part},
                                       {"K_slack_part", rec.K_slack_part}});
    return doc;
}

inline json price_report_json(const PriceReport& rep) {
    json doc;
    doc["label"] = rep.label;
    doc["price"] = rep.price;
    doc["hedge0"] = rep.hedge0;
    doc["min_condition_gap"] = rep.min_condition_gap;
    doc["dominance_violations"] = rep.dominance_violations;
    doc["fixed_vol_prices"] = json::array();
    for (const auto& [a, p] : rep.fixed_vol_prices)
        doc["fixed_vol_prices"].push_back({{"a", a}, {"price", p}});
    doc["d_eps"] = {{"eps", rep.d_eps.eps}, {"hit_index", rep.d_eps.hit_index}};
    doc["d_eps_per_scenario"] = json::array();
    for (const auto& [id, ss] : rep.d_eps_per_scenario)
        doc["d_eps_per_scenario"].push_back({{"id", id}, {"hit_index", ss.hit_index}});
    doc["lattice"] = lattice_summary(rep.lattice);
    return doc;
}

inline json suite_report_json(const SuiteReport& rep) {
    json doc;
    doc["suite"] = rep.suite;
    doc["seed"] = rep.seed;
    doc["all_pass"] = rep.all_pass();
    doc["checks"] = json::array();
    for (const auto& c : rep.checks) {
        json jc = {{"name", c.name}, {"pass", c.pass}};
        json measured = json::object();
        for (const auto& [k, v] : c.measured) measured[k] = v;
        jc["measured"] = measured;
        doc["checks"].push_back(jc);
    }
    return doc;
}

// ---------------------------------------------------------------------------
// CSV (all floats with 17 significant digits)
// ---------------------------------------------------------------------------

inline std::string csv_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

/// Columns: t, x, y, z, k_cum.
inline void write_solution_csv(const std::string& path, const Instance& inst, const Lattice& lat,
                               const RbsdeSolution& sol) {
    std::ofstream out(path);
    if (!out) throw InvalidInstanceError("cannot open output file: " + path);
    out << "t,x,y,z,k_cum\n";
    const auto kc = sol.k_cum();
    for (int i = 0; i < sol.y.rows(); ++i)
        for (int j = 0; j < sol.y.cols(); ++j)
            out << csv_double(inst.grid.t(i)) << ',' << csv_double(lat.x_nodes[j]) << ','
                << csv_double(sol.y.at(i, j)) << ',' << csv_double(sol.z.at(i, j)) << ','
                << csv_double(kc.at(i, j)) << '\n';
}

/// Columns: t, x, Y, Z, a_star.
inline void write_soref_surfaces_csv(const std::string& path, const Instance& inst,
                                     const Lattice& lat, const SecondOrderSolution& so) {
    std::ofstream out(path);
    if (!out) throw InvalidInstanceError("cannot open output file: " + path);
    out << "t,x,Y,Z,a_star\n";
    for (int i = 0; i < so.Y.rows(); ++i)
        for (int j = 0; j < so.Y.cols(); ++j)
            out << csv_double(inst.grid.t(i)) << ',' << csv_double(lat.x_nodes[j]) << ','
                << csv_double(so.Y.at(i, j)) << ',' << csv_double(so.Z.at(i, j)) << ','
                << csv_double(so.a_star.at(i, j)) << '\n';
}

/// Surface CSV with columns step, node, value (one row per lattice point).
inline Surface read_surface_csv(const std::string& path, int rows, int cols) {
    std::ifstream in(path);
    if (!in) throw InvalidInstanceError("cannot open surface file: " + path);
    Surface surf(rows, cols);
    std::string line;
    std::getline(in, line);  // header
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::istringstream ss(line);
        std::string cell;
        std::getline(ss, cell, ',');
        const int i = std::stoi(cell);
        std::getline(ss, cell, ',');
        const int j = std::stoi(cell);
        std::getline(ss, cell, ',');
        surf.at(i, j) = std::stod(cell);
    }
    return surf;
}

/// Paths CSV: one path per row, comma-separated values.
inline std::vector<std::vector<double>> read_paths_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw InvalidInstanceError("cannot open paths file: " + path);
    std::vector<std::vector<double>> paths;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<double> row;
        std::istringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) row.push_back(std::stod(cell));
        if (!row.empty()) paths.push_back(std::move(row));
    }
    return paths;
}

inline void write_text_file(const std::string& path, const std::string& content) {
    std::ofstream out(path);
    if (!out) throw InvalidInstanceError("cannot open output file: " + path);
    out << content;
}

}  // namespace rbsdelab
