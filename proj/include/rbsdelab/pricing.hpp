#pragma once

#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "rbsdelab/soref.hpp"

namespace rbsdelab {

struct PayoffSpec {
    enum class Kind { put, call, custom };
    Kind kind = Kind::put;
    double strike = 1.0;
    std::function<double(double t, double price)> custom;

    double operator()(double t, double price) const {
        switch (kind) {
            case Kind::put: return std::max(strike - price, 0.0);
            case Kind::call: return std::max(price - strike, 0.0);
            case Kind::custom: return custom(t, price);
        }
        return 0.0;
    }
};

struct MarketSpec {
    double rate = 0.0;
    double drift = 0.0;  // real-world drift; absorbed by the pricing measure, never moves the price
    double price0 = 1.0;
    double horizon = 1.0;
    int steps = 100;
    PayoffSpec payoff;

    void validate() const {
        if (!(price0 > 0.0)) throw InvalidInstanceError("MarketSpec: price0 must be positive");
        if (steps < 1) throw InvalidInstanceError("MarketSpec: steps must be >= 1");
        if (!(horizon > 0.0)) throw InvalidInstanceError("MarketSpec: horizon must be positive");
    }
};

/// Map a market onto the lattice machinery: state x = log(price / price0) on a
/// driftless canonical process, obstacle = exercise value, and the linear
/// generator F = -r*y + (r - a/2)*z carrying the discount and the drift the
/// log transform removes from the kernel.
inline Instance market_to_instance(const MarketSpec& mkt, const UncertaintyInterval& interval) {
    mkt.validate();
    interval.validate();
    Instance inst;
    inst.grid = {mkt.horizon, mkt.steps};
    inst.interval = interval;
    inst.x0 = 0.0;
    const double r = mkt.rate;
    inst.gen.f = [r](double, double, double y, double z, double a) {
        return -r * y + (r - 0.5 * a) * z;
    };
    // Lipschitz in (y, z*sqrt(a)): |F_y| + max_a |r - a/2|/sqrt(a_low).
    inst.gen.lipschitz_c =
        std::abs(r) + std::max(std::abs(r - 0.5 * interval.a_low), std::abs(r - 0.5 * interval.a_high)) /
                          std::sqrt(interval.a_low);
    const double p0 = mkt.price0;
    inst.obstacle.s = [payoff = mkt.payoff, p0](double t, double x) {
        return payoff(t, p0 * std::exp(x));
    };
    inst.terminal.xi = [payoff = mkt.payoff, p0, T = mkt.horizon](double x) {
        return payoff(T, p0 * std::exp(x));
    };
    return inst;
}

/// Robust superhedging upper value of the American claim, with hedge and
/// exercise diagnostics. No claim is made that this equals the minimal
/// superreplicating price; the report labels it as the robust upper value.
struct PriceReport {
    double price = 0.0;
    double hedge0 = 0.0;
    std::vector<std::pair<double, double>> fixed_vol_prices;  // (a, price)
    StoppingSurface d_eps;
    std::vector<std::pair<std::string, StoppingSurface>> d_eps_per_scenario;
    int dominance_violations = 0;
    double min_condition_gap = 0.0;
    std::string label = "robust superhedging upper value";
    SecondOrderSolution so;
    Lattice lattice;
    Instance instance;
};

/// Count starting nodes where the robust exercise time comes strictly before a
/// scenario's exercise time. Zero expected: Y >= y^P makes the robust hitting
/// region a subset of every scenario region.
inline int stopping_dominance_check(const Instance& inst, const Lattice& lat,
                                    const SecondOrderSolution& so, const ScenarioFamily& family,
                                    double eps, const PicardParams& pp = {}) {
    const auto robust = epsilon_stopping(inst, lat, so.Y, eps);
    int violations = 0;
    for (const auto& sc : family.scenarios) {
        const auto rb = solve_rbsde(inst, lat, sc, pp);
        const auto per = epsilon_stopping(inst, lat, rb.y, eps);
        for (size_t j = 0; j < robust.hit_index.size(); ++j)
            if (robust.hit_index[j] < per.hit_index[j]) ++violations;
    }
    return violations;
}

inline PriceReport price_american(const MarketSpec& mkt, const UncertaintyInterval& interval,
                                  const std::vector<double>& a_grid, double eps,
                                  double width_sigmas = 6.0, const PicardParams& pp = {}) {
    PriceReport rep;
    rep.instance = market_to_instance(mkt, interval);
    rep.lattice = build_lattice(rep.instance.grid, interval, rep.instance.x0, width_sigmas);
    rep.so = solve_2rbsde_dpp(rep.instance, rep.lattice, a_grid, pp);
    rep.price = rep.so.Y.at(0, rep.lattice.center);
    // Chain rule back to the price variable: dV/dS = V_x / S at S = price0.
    rep.hedge0 = rep.so.Z.at(0, rep.lattice.center) / mkt.price0;

    ScenarioFamily family;
    for (double a : a_grid) {
        const auto sol = solve_rbsde(rep.instance, rep.lattice, constant_scenario(a), pp);
        rep.fixed_vol_prices.emplace_back(a, sol.y.at(0, rep.lattice.center));
        family.scenarios.push_back(constant_scenario(a));
    }
    fill_diagnostics(rep.so, rep.instance, rep.lattice, family, pp);
    rep.min_condition_gap = rep.so.min_condition_gap;

    rep.d_eps = epsilon_stopping(rep.instance, rep.lattice, rep.so.Y, eps);
    std::vector<Scenario> all = family.scenarios;
    all.push_back(a_star_scenario(rep.so));
    for (const auto& sc : all) {
        const auto rb = solve_rbsde(rep.instance, rep.lattice, sc, pp);
        rep.d_eps_per_scenario.emplace_back(sc.id, epsilon_stopping(rep.instance, rep.lattice, rb.y, eps));
    }
    ScenarioFamily all_family{all};
    rep.dominance_violations = stopping_dominance_check(rep.instance, rep.lattice, rep.so, all_family, eps, pp);
    return rep;
}

}  // namespace rbsdelab
