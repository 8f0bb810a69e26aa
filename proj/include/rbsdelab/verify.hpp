#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "rbsdelab/glab.hpp"
#include "rbsdelab/soref.hpp"

namespace rbsdelab {

// ---------------------------------------------------------------------------
// Oracles
// ---------------------------------------------------------------------------

/// Non-recombining binomial tree, heap layout: node k has children 2k+1 (up,
/// probability p) and 2k+2 (down). reward[] holds the stop reward at internal
/// nodes and the terminal reward at leaves. Depth is the number of steps.
struct TinyTree {
    int depth = 1;
    double p = 0.5;
    std::vector<double> reward;  // size 2^(depth+1) - 1

    int node_count() const { return (1 << (depth + 1)) - 1; }
    bool is_leaf(int k) const { return k >= (1 << depth) - 1; }
};

namespace detail {

inline std::vector<double> all_rule_values(const TinyTree& tree, int k) {
    if (tree.is_leaf(k)) return {tree.reward[k]};
    const auto up = all_rule_values(tree, 2 * k + 1);
    const auto down = all_rule_values(tree, 2 * k + 2);
    std::vector<double> out;
    out.reserve(1 + up.size() * down.size());
    out.push_back(tree.reward[k]);  // stop here: descendants unreachable
    for (double vu : up)
        for (double vd : down) out.push_back(tree.p * vu + (1.0 - tree.p) * vd);
    return out;
}

}  // namespace detail

/// Exhaustive enumeration of every adapted stopping rule. Must equal the
/// backward-induction Snell value exactly; refused beyond depth 4.
inline double brute_force_snell(const TinyTree& tree) {
    if (tree.depth > 4)
        throw InvalidInstanceError("brute_force_snell: depth > 4 refused (combinatorial blow-up)");
    if (tree.depth < 1 || static_cast<int>(tree.reward.size()) != tree.node_count())
        throw InvalidInstanceError("brute_force_snell: malformed tree");
    const auto values = detail::all_rule_values(tree, 0);
    return *std::max_element(values.begin(), values.end());
}

/// Backward-induction Snell value on the same tree.
inline double tree_snell_value(const TinyTree& tree, int k = 0) {
    if (tree.is_leaf(k)) return tree.reward[k];
    const double cont = tree.p * tree_snell_value(tree, 2 * k + 1) +
                        (1.0 - tree.p) * tree_snell_value(tree, 2 * k + 2);
    return std::max(tree.reward[k], cont);
}

enum class OptionKind { put, call };

struct BinomialResult {
    double price = 0.0;
    int early_exercise_nodes = 0;  // nodes where exercise strictly beats continuation
};

/// CRR backward induction with early exercise.
inline BinomialResult binomial_american_detail(double s0, double strike, double r, double sigma,
                                               double T, int n, OptionKind kind) {
    if (n < 1 || !(sigma > 0.0)) throw InvalidInstanceError("binomial_american: need N >= 1, sigma > 0");
    const double dt = T / n;
    const double u = std::exp(sigma * std::sqrt(dt));
    const double d = 1.0 / u;
    const double p = (std::exp(r * dt) - d) / (u - d);
    if (p < 0.0 || p > 1.0)
        throw InvalidInstanceError("binomial_american: risk-neutral probability outside [0,1]");
    const double disc = std::exp(-r * dt);
    const auto payoff = [&](double s) {
        return kind == OptionKind::put ? std::max(strike - s, 0.0) : std::max(s - strike, 0.0);
    };
    std::vector<double> v(n + 1);
    for (int j = 0; j <= n; ++j) v[j] = payoff(s0 * std::pow(u, j) * std::pow(d, n - j));
    BinomialResult res;
    for (int i = n - 1; i >= 0; --i)
        for (int j = 0; j <= i; ++j) {
            const double cont = disc * (p * v[j + 1] + (1.0 - p) * v[j]);
            const double ex = payoff(s0 * std::pow(u, j) * std::pow(d, i - j));
            // Count exercises that beat continuation beyond round-off.
            if (ex - cont > 1e-9 * (std::abs(cont) + 1.0)) ++res.early_exercise_nodes;
            v[j] = std::max(cont, ex);
        }
    res.price = v[0];
    return res;
}

inline double binomial_american(double s0, double strike, double r, double sigma, double T, int n,
                                OptionKind kind) {
    return binomial_american_detail(s0, strike, r, sigma, T, n, kind).price;
}

// ---------------------------------------------------------------------------
// Seeded named streams and randomized instances
// ---------------------------------------------------------------------------

/// Independent generator per (seed, stream name), so suites can run in any
/// order without perturbing each other.
inline std::mt19937_64 named_stream(unsigned long long seed, const std::string& name) {
    unsigned long long h = 1469598103934665603ull;
    for (unsigned char c : name) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return std::mt19937_64(seed ^ h);
}

/// Randomized well-posed instance: affine driver, polynomial data. Coefficient
/// ranges keep dt*C < 1 and the z-coefficient below a_low/dx so the discrete
/// comparison principle holds exactly.
inline Instance random_instance(std::mt19937_64& rng, int steps, bool binding_obstacle_allowed = true) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Instance inst;
    inst.grid = {1.0, steps};
    inst.x0 = 0.0;
    inst.interval.a_low = 0.01 + 0.04 * u01(rng);
    inst.interval.a_high = inst.interval.a_low + 0.08 * u01(rng);
    const double c0 = -0.5 + u01(rng);
    const double cy = -0.5 + u01(rng);
    const double cz = 0.2 * (u01(rng) - 0.5);
    inst.gen.f = [c0, cy, cz](double, double, double y, double z, double) {
        return c0 + cy * y + cz * z;
    };
    inst.gen.lipschitz_c = std::abs(cy) + std::abs(cz) / std::sqrt(inst.interval.a_low);
    const int obstacle_kind = binding_obstacle_allowed ? static_cast<int>(u01(rng) * 3.0) : 0;
    if (obstacle_kind == 0) {
        inst.obstacle.s = [](double, double) { return -10.0; };
    } else if (obstacle_kind == 1) {
        const double level = -0.5 + 1.5 * u01(rng);
        inst.obstacle.s = [level](double, double) { return level; };
    } else {
        const double top = 0.5 + u01(rng);
        const double curv = 2.0 * u01(rng);
        inst.obstacle.s = [top, curv](double, double x) { return top - curv * x * x; };
    }
    const double t0 = -1.0 + 2.0 * u01(rng);
    const double t1 = -1.0 + 2.0 * u01(rng);
    const double t2 = -1.0 + 2.0 * u01(rng);
    inst.terminal.xi = [t0, t1, t2](double x) { return t0 + t1 * x + t2 * x * x; };
    return inst;
}

/// Second member of an ordered pair: data dominated by `base` pointwise.
inline Instance dominated_instance(const Instance& base, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u01(0.0, 1.0);
    Instance inst = base;
    const double df = 0.3 * u01(rng);
    const double base_lip = base.gen.lipschitz_c;
    inst.gen.f = [f = base.gen.f, df](double t, double x, double y, double z, double a) {
        return f(t, x, y, z, a) - df;
    };
    inst.gen.lipschitz_c = base_lip;
    const double ds = 0.5 * u01(rng);
    inst.obstacle.s = [s = base.obstacle.s, ds](double t, double x) { return s(t, x) - ds; };
    const double e0 = 0.5 * u01(rng);
    const double e2 = 0.5 * u01(rng);
    inst.terminal.xi = [xi = base.terminal.xi, e0, e2](double x) { return xi(x) - e0 - e2 * x * x; };
    return inst;
}

/// Feedback scenario taking values in the given variance grid; the selection
/// rule is a fixed affine hash of (step, node).
inline Scenario grid_valued_scenario(const std::vector<double>& a_grid, int r1, int r2, int r3) {
    const int g = static_cast<int>(a_grid.size());
    return {"feedback:" + std::to_string(r1) + ":" + std::to_string(r2) + ":" + std::to_string(r3),
            [a_grid, g, r1, r2, r3](int i, int j) {
                const int idx = ((r1 * i + r2 * j + r3) % g + g) % g;
                return a_grid[idx];
            }};
}

inline std::vector<double> default_a_grid(const UncertaintyInterval& iv) {
    return {iv.a_low, iv.midpoint(), iv.a_high};
}

// ---------------------------------------------------------------------------
// Suites
// ---------------------------------------------------------------------------

struct CheckResult {
    std::string name;
    bool pass = false;
    std::vector<std::pair<std::string, double>> measured;
};

struct SuiteReport {
    std::string suite;
    unsigned long long seed = 0;
    std::vector<CheckResult> checks;

    bool all_pass() const {
        for (const auto& c : checks)
            if (!c.pass) return false;
        return true;
    }
};

namespace suites {

inline CheckResult skorohod(unsigned long long seed, int instances, int steps) {
    auto rng = named_stream(seed, "skorohod");
    CheckResult res{"skorohod-exactness", true, {}};
    double worst = 0.0;
    for (int k = 0; k < instances; ++k) {
        auto inst = random_instance(rng, steps);
        const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
        std::uniform_real_distribution<double> ua(inst.interval.a_low, inst.interval.a_high);
        const auto sol = solve_rbsde(inst, lat, constant_scenario(ua(rng)));
        worst = std::max(worst, skorohod_residual(sol, inst, lat));
    }
    res.pass = worst == 0.0;
    res.measured.emplace_back("max_residual", worst);
    res.measured.emplace_back("instances", instances);
    return res;
}

inline CheckResult singleton_reduction(unsigned long long seed, int instances, int steps) {
    auto rng = named_stream(seed, "singleton-reduction");
    CheckResult res{"singleton-reduction", true, {}};
    double worst_kk = 0.0;
    for (int k = 0; k < instances; ++k) {
        auto inst = random_instance(rng, steps);
        const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
        std::uniform_real_distribution<double> ua(inst.interval.a_low, inst.interval.a_high);
        const double a = ua(rng);
        const auto sc = constant_scenario(a);
        const auto rb = solve_rbsde(inst, lat, sc);
        const auto so = solve_2rbsde_dpp(inst, lat, {a});
        if (!(so.Y == rb.y && so.Z == rb.z && so.k_inc == rb.k_inc)) res.pass = false;
        const auto K = extract_K(inst, lat, so, sc, KMode::implicit_continuation);
        for (int i = 0; i < K.dK.rows(); ++i)
            for (int j = 0; j < K.dK.cols(); ++j)
                worst_kk = std::max(worst_kk, std::abs(K.dK.at(i, j) - rb.k_inc.at(i, j)));
    }
    if (worst_kk != 0.0) res.pass = false;
    res.measured.emplace_back("max_K_minus_k", worst_kk);
    res.measured.emplace_back("instances", instances);
    return res;
}

inline CheckResult comparison(unsigned long long seed, int pairs, int steps) {
    auto rng = named_stream(seed, "comparison");
    CheckResult res{"comparison", true, {}};
    int violations = 0;
    double worst_defect = 0.0;
    for (int k = 0; k < pairs; ++k) {
        auto hi = random_instance(rng, steps);
        auto lo = dominated_instance(hi, rng);
        const auto lat = build_lattice(hi.grid, hi.interval, hi.x0);
        const auto grid = default_a_grid(hi.interval);
        const auto y1 = solve_2rbsde_dpp(hi, lat, grid);
        const auto y2 = solve_2rbsde_dpp(lo, lat, grid);
        for (int i = 0; i < y1.Y.rows(); ++i)
            for (int j = 0; j < y1.Y.cols(); ++j)
                if (y1.Y.at(i, j) < y2.Y.at(i, j)) {
                    ++violations;
                    worst_defect = std::max(worst_defect, y2.Y.at(i, j) - y1.Y.at(i, j));
                }
    }
    res.pass = violations == 0;
    res.measured.emplace_back("violations", violations);
    res.measured.emplace_back("worst_defect", worst_defect);
    res.measured.emplace_back("pairs", pairs);
    return res;
}

inline CheckResult stability(unsigned long long seed, int steps) {
    auto rng = named_stream(seed, "stability");
    CheckResult res{"stability", true, {}};
    auto inst = random_instance(rng, steps);
    const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
    const auto grid = default_a_grid(inst.interval);
    const auto base = solve_2rbsde_dpp(inst, lat, grid);
    const std::vector<double> deltas{1e-1, 1e-2, 1e-3};
    double rmin = 0.0, rmax = 0.0;
    for (size_t d = 0; d < deltas.size(); ++d) {
        Instance pert = inst;
        const double delta = deltas[d];
        pert.terminal.xi = [xi = inst.terminal.xi, delta](double x) { return xi(x) + delta; };
        const auto shifted = solve_2rbsde_dpp(pert, lat, grid);
        double sup = 0.0;
        for (int i = 0; i < base.Y.rows(); ++i)
            for (int j = 0; j < base.Y.cols(); ++j)
                sup = std::max(sup, std::abs(shifted.Y.at(i, j) - base.Y.at(i, j)));
        const double ratio = sup / delta;
        rmin = d == 0 ? ratio : std::min(rmin, ratio);
        rmax = d == 0 ? ratio : std::max(rmax, ratio);
        res.measured.emplace_back("ratio_delta_" + std::to_string(delta), ratio);
    }
    const double spread = rmax / rmin;
    res.pass = spread <= 1.5;
    res.measured.emplace_back("spread", spread);
    return res;
}

inline CheckResult snell_oracle(unsigned long long seed, int trees) {
    auto rng = named_stream(seed, "snell");
    CheckResult res{"snell-oracle", true, {}};
    std::uniform_real_distribution<double> up(0.1, 0.9);
    std::uniform_real_distribution<double> ur(-1.0, 2.0);
    std::uniform_int_distribution<int> ud(1, 4);
    int mismatches = 0;
    for (int k = 0; k < trees; ++k) {
        TinyTree tree;
        tree.depth = ud(rng);
        tree.p = up(rng);
        tree.reward.resize(tree.node_count());
        for (auto& v : tree.reward) v = ur(rng);
        if (brute_force_snell(tree) != tree_snell_value(tree)) ++mismatches;
    }
    res.pass = mismatches == 0;
    res.measured.emplace_back("mismatches", mismatches);
    res.measured.emplace_back("trees", trees);
    return res;
}

inline CheckResult binomial_monotone(unsigned long long) {
    CheckResult res{"binomial-monotone", true, {}};
    double prev_put = -1.0, prev_call = 1e300;
    for (double strike : {80.0, 90.0, 100.0, 110.0, 120.0}) {
        const double put = binomial_american(100.0, strike, 0.03, 0.2, 1.0, 64, OptionKind::put);
        const double call = binomial_american(100.0, strike, 0.03, 0.2, 1.0, 64, OptionKind::call);
        if (put < prev_put || call > prev_call) res.pass = false;
        prev_put = put;
        prev_call = call;
    }
    double prev_p = -1.0, prev_c = -1.0;
    for (double sigma : {0.1, 0.2, 0.3, 0.4}) {
        const double put = binomial_american(100.0, 100.0, 0.03, sigma, 1.0, 64, OptionKind::put);
        const double call = binomial_american(100.0, 100.0, 0.03, sigma, 1.0, 64, OptionKind::call);
        if (put < prev_p || call < prev_c) res.pass = false;
        prev_p = put;
        prev_c = call;
    }
    return res;
}

inline CheckResult dominance(unsigned long long seed, int families, int steps) {
    auto rng = named_stream(seed, "dominance");
    CheckResult res{"representation-dominance", true, {}};
    std::uniform_int_distribution<int> ui(0, 1 << 20);
    double worst_slack = 0.0;
    for (int k = 0; k < families; ++k) {
        auto inst = random_instance(rng, steps);
        const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
        const auto grid = default_a_grid(inst.interval);
        const auto so = solve_2rbsde_dpp(inst, lat, grid);
        ScenarioFamily family;
        for (int s = 0; s < 5; ++s)
            family.scenarios.push_back(grid_valued_scenario(grid, ui(rng), ui(rng), ui(rng)));
        const auto rep = representation_sup(inst, lat, family);
        worst_slack = std::min(worst_slack, so.Y.at(0, lat.center) - rep.value);
    }
    res.pass = worst_slack >= -1e-10;
    res.measured.emplace_back("worst_slack", worst_slack);
    res.measured.emplace_back("families", families);
    return res;
}

}  // namespace suites

/// Named suite runner; deterministic given the seed. Unknown names are
/// rejected.
inline SuiteReport run_suite(const std::string& name, unsigned long long seed) {
    SuiteReport rep;
    rep.suite = name;
    rep.seed = seed;
    const auto add = [&rep](CheckResult c) { rep.checks.push_back(std::move(c)); };
    bool known = false;
    const bool all = name == "all";
    if (all || name == "skorohod") { add(suites::skorohod(seed, 30, 100)); known = true; }
    if (all || name == "singleton-reduction") { add(suites::singleton_reduction(seed, 10, 50)); known = true; }
    if (all || name == "comparison") { add(suites::comparison(seed, 20, 50)); known = true; }
    if (all || name == "stability") { add(suites::stability(seed, 100)); known = true; }
    if (all || name == "snell") { add(suites::snell_oracle(seed, 50)); known = true; }
    if (all || name == "binomial-monotone") { add(suites::binomial_monotone(seed)); known = true; }
    if (all || name == "dominance") { add(suites::dominance(seed, 10, 50)); known = true; }
    if (!known) throw InvalidInstanceError("run_suite: unknown suite '" + name + "'");
    return rep;
}

}  // namespace rbsdelab
