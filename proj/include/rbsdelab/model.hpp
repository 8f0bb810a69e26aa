#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "rbsdelab/surface.hpp"

namespace rbsdelab {

/// Uniform partition of [0, T] into N steps.
struct TimeGrid {
    double horizon = 1.0;
    int steps = 1;

    double dt() const { return horizon / steps; }
    double t(int i) const { return horizon * i / steps; }

    void validate() const {
        if (steps < 1) throw InvalidInstanceError("TimeGrid: steps must be >= 1");
        if (!(horizon > 0.0)) throw InvalidInstanceError("TimeGrid: horizon must be positive");
    }
};

/// Volatility band [a_low, a_high] for the variance rate of the canonical process.
struct UncertaintyInterval {
    double a_low = 0.0;
    double a_high = 0.0;

    bool contains(double a) const { return a >= a_low && a <= a_high; }
    double midpoint() const { return 0.5 * (a_low + a_high); }

    void validate() const {
        if (!(a_low > 0.0)) throw InvalidInstanceError("UncertaintyInterval: a_low must be positive");
        if (!(a_low <= a_high)) throw InvalidInstanceError("UncertaintyInterval: a_low must not exceed a_high");
    }
};

/// Driver F(t, x, y, z, a). lipschitz_c bounds the variation in (y, z*sqrt(a)).
struct GeneratorSpec {
    std::function<double(double t, double x, double y, double z, double a)> f;
    double lipschitz_c = 0.0;
};

/// Hamiltonian H(t, x, y, z, gamma) with an explicit finite gamma grid for its domain.
struct HamiltonianSpec {
    std::function<double(double t, double x, double y, double z, double gamma)> h;
    std::vector<double> gamma_grid;
};

/// Lower obstacle S(t, x).
struct ObstacleSpec {
    std::function<double(double t, double x)> s;
};

/// Terminal condition xi(x) at t = T.
struct TerminalSpec {
    std::function<double(double x)> xi;
};

/// Full problem statement: grid, band, driver, obstacle, terminal data, start state.
struct Instance {
    TimeGrid grid;
    UncertaintyInterval interval;
    GeneratorSpec gen;
    ObstacleSpec obstacle;
    TerminalSpec terminal;
    double x0 = 0.0;
};

/// Result of conjugating a Hamiltonian at one point. boundary_maximizer is the
/// divergence flag: the grid maximum sat on an endpoint of gamma_grid, so the
/// true supremum may be unbounded.
struct ConjugateResult {
    double value = 0.0;
    double gamma = 0.0;
    bool boundary_maximizer = false;
};

/// F(t,x,y,z,a) = max over the gamma grid of { a*gamma/2 - H(t,x,y,z,gamma) }.
/// Ties resolve to the first maximizer in grid order.
inline ConjugateResult conjugate_generator(const HamiltonianSpec& h, double t, double x,
                                           double y, double z, double a) {
    if (h.gamma_grid.empty()) throw InvalidInstanceError("conjugate_generator: empty gamma_grid");
    if (!(a > 0.0)) throw InvalidInstanceError("conjugate_generator: variance rate must be positive");
    ConjugateResult best;
    size_t best_idx = 0;
    for (size_t k = 0; k < h.gamma_grid.size(); ++k) {
        const double g = h.gamma_grid[k];
        const double v = 0.5 * a * g - h.h(t, x, y, z, g);
        if (k == 0 || v > best.value) {
            best.value = v;
            best.gamma = g;
            best_idx = k;
        }
    }
    best.boundary_maximizer =
        h.gamma_grid.size() > 1 && (best_idx == 0 || best_idx == h.gamma_grid.size() - 1);
    return best;
}

/// Wrap a Hamiltonian as a GeneratorSpec via pointwise conjugation.
inline GeneratorSpec generator_from_hamiltonian(HamiltonianSpec h, double lipschitz_c) {
    GeneratorSpec g;
    g.lipschitz_c = lipschitz_c;
    g.f = [h = std::move(h)](double t, double x, double y, double z, double a) {
        return conjugate_generator(h, t, x, y, z, a).value;
    };
    return g;
}

struct ValidationIssue {
    std::string code;
    std::string detail;
};

/// Reporting-only: a non-conforming instance may still be solved.
struct ValidationReport {
    std::vector<ValidationIssue> issues;
    bool conforming() const { return issues.empty(); }
    bool has(const std::string& code) const {
        for (const auto& i : issues)
            if (i.code == code) return true;
        return false;
    }
};

namespace detail {

inline void append_issue(ValidationReport& rep, std::string code, std::string detail) {
    rep.issues.push_back({std::move(code), std::move(detail)});
}

}  // namespace detail

/// Finiteness and Lipschitz probes of the instance data over the range the
/// lattice will visit. Probe points are drawn from a fixed seed so reports
/// are reproducible.
inline ValidationReport validate_instance(const Instance& inst, int probe_samples = 256,
                                          unsigned long long seed = 0x5eedull) {
    ValidationReport rep;
    if (inst.grid.steps < 1) detail::append_issue(rep, "grid", "steps < 1");
    if (!(inst.grid.horizon > 0.0)) detail::append_issue(rep, "grid", "horizon <= 0");
    if (!(inst.interval.a_low > 0.0))
        detail::append_issue(rep, "degenerate ellipticity", "a_low <= 0 violates positivity of the band");
    if (!(inst.interval.a_low <= inst.interval.a_high))
        detail::append_issue(rep, "band", "a_low > a_high");
    if (!rep.conforming()) return rep;

    const double T = inst.grid.horizon;
    const double half_width = 6.0 * std::sqrt(inst.interval.a_high * T);
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> ut(0.0, T);
    std::uniform_real_distribution<double> ux(inst.x0 - half_width, inst.x0 + half_width);
    std::uniform_real_distribution<double> uy(-10.0, 10.0);
    std::uniform_real_distribution<double> uz(-10.0, 10.0);
    std::uniform_real_distribution<double> ua(inst.interval.a_low, inst.interval.a_high);

    // Finiteness of F(.,0,0,.), S^+ and xi on the probed range (integrability
    // reduces to finiteness on a finite lattice).
    bool f0_finite = true, s_finite = true, xi_finite = true, xi_below = false;
    const int nodes = 33;
    for (int j = 0; j < nodes; ++j) {
        const double x = inst.x0 - half_width + 2.0 * half_width * j / (nodes - 1);
        for (int i = 0; i <= 4; ++i) {
            const double t = T * i / 4.0;
            if (!std::isfinite(inst.gen.f(t, x, 0.0, 0.0, inst.interval.a_low))) f0_finite = false;
            if (!std::isfinite(inst.obstacle.s(t, x))) s_finite = false;
        }
        const double xv = inst.terminal.xi(x);
        if (!std::isfinite(xv)) xi_finite = false;
        if (xv < inst.obstacle.s(T, x)) xi_below = true;
    }
    if (!f0_finite) detail::append_issue(rep, "integrability", "F(.,0,0,.) not finite on the probed range");
    if (!s_finite) detail::append_issue(rep, "integrability", "obstacle not finite on the probed range");
    if (!xi_finite) detail::append_issue(rep, "integrability", "terminal data not finite on the probed range");
    if (xi_below)
        detail::append_issue(rep, "terminal_below_obstacle",
                             "xi < S(T,.) at some probed node; Y_T = xi is enforced, not clamped");

    // Lipschitz probe in (y, z*sqrt(a)) against the declared constant.
    const double slack = 0.01;
    double worst_ratio = 0.0;
    for (int k = 0; k < probe_samples; ++k) {
        const double t = ut(rng), x = ux(rng), a = ua(rng);
        const double y1 = uy(rng), y2 = uy(rng), z1 = uz(rng), z2 = uz(rng);
        const double denom = std::abs(y1 - y2) + std::sqrt(a) * std::abs(z1 - z2);
        if (denom < 1e-12) continue;
        const double f1 = inst.gen.f(t, x, y1, z1, a);
        const double f2 = inst.gen.f(t, x, y2, z2, a);
        worst_ratio = std::max(worst_ratio, std::abs(f1 - f2) / denom);
    }
    if (worst_ratio > inst.gen.lipschitz_c * (1.0 + slack))
        detail::append_issue(rep, "lipschitz",
                             "probed ratio " + std::to_string(worst_ratio) + " exceeds declared constant " +
                                 std::to_string(inst.gen.lipschitz_c));
    return rep;
}

}  // namespace rbsdelab
