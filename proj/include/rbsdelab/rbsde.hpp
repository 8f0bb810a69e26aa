#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <utility>

#include "rbsdelab/lattice.hpp"
#include "rbsdelab/model.hpp"
#include "rbsdelab/surface.hpp"

namespace rbsdelab {

/// Feedback volatility control a(step, node), the discrete stand-in for one
/// measure of the family. Values must lie in the instance band.
struct Scenario {
    std::string id;
    std::function<double(int step, int node)> a;
};

inline Scenario constant_scenario(double a) {
    return {"const:" + std::to_string(a), [a](int, int) { return a; }};
}

/// Time-linear interpolation from a0 at t=0 to a1 at t=T.
inline Scenario ramp_scenario(double a0, double a1, int steps) {
    return {"ramp:" + std::to_string(a0) + ":" + std::to_string(a1),
            [a0, a1, steps](int i, int) { return a0 + (a1 - a0) * i / std::max(steps - 1, 1); }};
}

struct PicardParams {
    double tol = 1e-12;
    int max_iters = 100;
};

/// Nodewise solution surfaces of a single-scenario reflected solve.
/// k_inc(i, j) is the reflection increment applied at step i; y >= S holds
/// exactly at all t < T and Delta_k * (y - S) = 0 is machine-exact per step.
struct RbsdeSolution {
    Surface y;
    Surface z;
    Surface k_inc;
    double skorohod_residual = 0.0;
    int max_picard_iters = 0;

    Surface k_cum() const {
        Surface k(k_inc.rows(), k_inc.cols());
        for (int j = 0; j < k_inc.cols(); ++j) {
            double acc = 0.0;
            for (int i = 0; i < k_inc.rows(); ++i) {
                acc += k_inc.at(i, j);
                k.at(i, j) = acc;
            }
        }
        return k;
    }
};

namespace detail {

struct StepEval {
    double e = 0.0;       // conditional expectation of the next-time values
    double z = 0.0;       // covariation estimator
    double y_tilde = 0.0; // pre-reflection value: fixed point of y = e + F(y, z) dt
    int iters = 0;
};

/// Picard fixed point of y = e + F(t, x, y, z, a)*dt. Contraction needs
/// dt*lipschitz_c < 1, checked by the callers once per solve.
inline StepEval evaluate_branch(const Instance& inst, const Lattice& lat,
                                std::span<const double> next, int i, int j, double a,
                                const PicardParams& pp) {
    StepEval ev;
    const double t = inst.grid.t(i);
    const double x = lat.x_nodes[j];
    ev.e = cond_expect(lat, next, a, j);
    ev.z = z_estimate(lat, next, a, j);
    double y = ev.e;
    double residual = 0.0;
    for (ev.iters = 0; ev.iters < pp.max_iters; ++ev.iters) {
        const double y_next = ev.e + inst.gen.f(t, x, y, ev.z, a) * inst.grid.dt();
        residual = std::abs(y_next - y);
        y = y_next;
        if (residual <= pp.tol) break;
    }
    if (residual > pp.tol)
        throw NumericalFailure("Picard iteration did not converge at step " + std::to_string(i) +
                                   " node " + std::to_string(j),
                               residual);
    ev.y_tilde = y;
    return ev;
}

/// Penalized variant: y = e + F(y,z)*dt + n*(y - S)^- * dt with the penalty
/// term solved in closed form inside each Picard sweep, so the step is stable
/// for every penalty level n.
inline StepEval evaluate_branch_penalized(const Instance& inst, const Lattice& lat,
                                          std::span<const double> next, int i, int j, double a,
                                          double n, double s, const PicardParams& pp) {
    StepEval ev;
    const double t = inst.grid.t(i);
    const double x = lat.x_nodes[j];
    const double dt = inst.grid.dt();
    ev.e = cond_expect(lat, next, a, j);
    ev.z = z_estimate(lat, next, a, j);
    const auto pen = [&](double c) { return c >= s ? c : (c + n * dt * s) / (1.0 + n * dt); };
    double y = pen(ev.e);
    double residual = 0.0;
    for (ev.iters = 0; ev.iters < pp.max_iters; ++ev.iters) {
        const double y_next = pen(ev.e + inst.gen.f(t, x, y, ev.z, a) * dt);
        residual = std::abs(y_next - y);
        y = y_next;
        if (residual <= pp.tol) break;
    }
    if (residual > pp.tol)
        throw NumericalFailure("penalized Picard iteration did not converge at step " +
                                   std::to_string(i) + " node " + std::to_string(j),
                               residual);
    ev.y_tilde = y;
    return ev;
}

inline void check_contraction(const Instance& inst) {
    if (inst.grid.dt() * inst.gen.lipschitz_c >= 1.0)
        throw InvalidInstanceError(
            "dt * lipschitz_c >= 1 breaks the Picard contraction; raise N (more time steps)");
}

inline double scenario_rate(const Instance& inst, const Scenario& sc, int i, int j) {
    const double a = sc.a(i, j);
    if (!inst.interval.contains(a))
        throw std::domain_error("scenario '" + sc.id + "' leaves the band at step " +
                                std::to_string(i) + " node " + std::to_string(j));
    return a;
}

}  // namespace detail

/// Backward Euler with pointwise reflection: y_N = xi; then per step and node
///   ytilde = e + F(t, x, ytilde, z, a)*dt  (Picard),
///   y = max(ytilde, S),  Delta_k = y - ytilde.
inline RbsdeSolution solve_rbsde(const Instance& inst, const Lattice& lat, const Scenario& sc,
                                 const PicardParams& pp = {}) {
    detail::check_contraction(inst);
    const int N = inst.grid.steps;
    const int M = lat.node_count();
    RbsdeSolution sol;
    sol.y = Surface(N + 1, M);
    sol.z = Surface(N + 1, M);
    sol.k_inc = Surface(N + 1, M);
    for (int j = 0; j < M; ++j) sol.y.at(N, j) = inst.terminal.xi(lat.x_nodes[j]);
    for (int i = N - 1; i >= 0; --i) {
        const auto next = sol.y.row(i + 1);
        for (int j = 0; j < M; ++j) {
            const double a = detail::scenario_rate(inst, sc, i, j);
            const auto ev = detail::evaluate_branch(inst, lat, next, i, j, a, pp);
            const double s = inst.obstacle.s(inst.grid.t(i), lat.x_nodes[j]);
            sol.y.at(i, j) = std::max(ev.y_tilde, s);
            sol.z.at(i, j) = ev.z;
            sol.k_inc.at(i, j) = sol.y.at(i, j) - ev.y_tilde;
            sol.max_picard_iters = std::max(sol.max_picard_iters, ev.iters);
        }
    }
    return sol;
}

/// Penalized scheme (no reflection step): driver F + n*(y - S)^-, with
/// k^n increments n*(y^n - S)^- * dt. y^n may violate y >= S for finite n.
inline RbsdeSolution solve_penalized(const Instance& inst, const Lattice& lat, const Scenario& sc,
                                     double n, const PicardParams& pp = {}) {
    detail::check_contraction(inst);
    const int N = inst.grid.steps;
    const int M = lat.node_count();
    RbsdeSolution sol;
    sol.y = Surface(N + 1, M);
    sol.z = Surface(N + 1, M);
    sol.k_inc = Surface(N + 1, M);
    for (int j = 0; j < M; ++j) sol.y.at(N, j) = inst.terminal.xi(lat.x_nodes[j]);
    for (int i = N - 1; i >= 0; --i) {
        const auto next = sol.y.row(i + 1);
        for (int j = 0; j < M; ++j) {
            const double a = detail::scenario_rate(inst, sc, i, j);
            const double s = inst.obstacle.s(inst.grid.t(i), lat.x_nodes[j]);
            const auto ev = detail::evaluate_branch_penalized(inst, lat, next, i, j, a, n, s, pp);
            sol.y.at(i, j) = ev.y_tilde;
            sol.z.at(i, j) = ev.z;
            sol.k_inc.at(i, j) = n * std::max(s - ev.y_tilde, 0.0) * inst.grid.dt();
            sol.max_picard_iters = std::max(sol.max_picard_iters, ev.iters);
        }
    }
    return sol;
}

/// Max over steps and nodes of Delta_k * (y - S). Exactly zero for every
/// solve_rbsde output; strictly positive for penalized output with a binding
/// obstacle.
inline double skorohod_residual(const RbsdeSolution& sol, const Instance& inst, const Lattice& lat) {
    double worst = 0.0;
    for (int i = 0; i < sol.y.rows() - 1; ++i)
        for (int j = 0; j < sol.y.cols(); ++j) {
            const double s = inst.obstacle.s(inst.grid.t(i), lat.x_nodes[j]);
            worst = std::max(worst, std::abs(sol.k_inc.at(i, j) * (sol.y.at(i, j) - s)));
        }
    return worst;
}

}  // namespace rbsdelab
