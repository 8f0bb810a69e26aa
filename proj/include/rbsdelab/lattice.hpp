#pragma once

#include <cmath>
#include <span>
#include <vector>

#include "rbsdelab/model.hpp"
#include "rbsdelab/surface.hpp"

namespace rbsdelab {

/// Recombining trinomial lattice on a fixed uniform x grid. The transition
/// kernel is parameterized by the local variance rate a:
///   p_up = p_down = a*dt / (2*dx^2),  p_mid = 1 - a*dt/dx^2.
/// Stability (all probabilities in [0,1] over the whole band) requires
/// dx^2 >= a_max*dt. Boundary nodes use the clamped extension v(outside) := v(edge).
struct Lattice {
    std::vector<double> x_nodes;
    double dx = 0.0;
    double dt = 0.0;
    double a_max = 0.0;
    int center = 0;  // index of the node at x0

    int node_count() const { return static_cast<int>(x_nodes.size()); }
    double stability_margin() const { return dx * dx - a_max * dt; }

    double p_up(double a) const { return a * dt / (2.0 * dx * dx); }
    double p_mid(double a) const { return 1.0 - a * dt / (dx * dx); }
    double p_down(double a) const { return p_up(a); }
};

/// x range covers x0 +/- width_sigmas*sqrt(a_high*T); dx is the smallest uniform
/// step with dx^2 >= a_high*dt and an integer node count symmetric around x0.
inline Lattice build_lattice(const TimeGrid& grid, const UncertaintyInterval& interval, double x0,
                             double width_sigmas = 6.0) {
    grid.validate();
    interval.validate();
    if (!(width_sigmas > 0.0)) throw InvalidInstanceError("build_lattice: width_sigmas must be positive");

    Lattice lat;
    lat.dt = grid.dt();
    lat.a_max = interval.a_high;
    const double half_width = width_sigmas * std::sqrt(interval.a_high * grid.horizon);
    const double dx_min = std::sqrt(interval.a_high * lat.dt);
    int m = static_cast<int>(std::floor(half_width / dx_min));
    if (m < 1) m = 1;
    lat.dx = half_width / m;
    lat.center = m;
    lat.x_nodes.resize(2 * m + 1);
    for (int j = -m; j <= m; ++j) lat.x_nodes[j + m] = x0 + j * lat.dx;
    return lat;
}

/// One-step conditional expectation of next-time values at node j under
/// variance rate a, with clamped boundary extension.
inline double cond_expect(const Lattice& lat, std::span<const double> next, double a, int j) {
    if (a < 0.0 || a > lat.a_max + 1e-15)
        throw std::domain_error("cond_expect: variance rate outside the lattice band");
    const int n = lat.node_count();
    const double vu = next[j + 1 < n ? j + 1 : j];
    const double vm = next[j];
    const double vd = next[j - 1 >= 0 ? j - 1 : j];
    return lat.p_up(a) * vu + lat.p_mid(a) * vm + lat.p_down(a) * vd;
}

/// Covariation estimator E[(v' - v_j) * (x' - x_j)] / (a*dt). Centering on the
/// current value makes it vanish on constants even at clamped edges; on the
/// trinomial kernel it reduces to the central difference (v_up - v_down) /
/// (2*dx) at interior nodes and a one-sided difference at the edges.
inline double z_estimate(const Lattice& lat, std::span<const double> next, double a, int j) {
    const int n = lat.node_count();
    const double vm = next[j];
    const double up = (j + 1 < n) ? (next[j + 1] - vm) * lat.dx : 0.0;
    const double down = (j - 1 >= 0) ? (next[j - 1] - vm) * lat.dx : 0.0;
    return (lat.p_up(a) * up - lat.p_down(a) * down) / (a * lat.dt);
}

}  // namespace rbsdelab
