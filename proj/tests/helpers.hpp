#pragma once

#include "rbsdelab/model.hpp"

namespace testhelpers {

using namespace rbsdelab;

inline Instance zero_gen_instance(double T, int steps, double a_low, double a_high,
                                  double obstacle_level, double terminal_level) {
    Instance inst;
    inst.grid = {T, steps};
    inst.interval = {a_low, a_high};
    inst.x0 = 0.0;
    inst.gen.f = [](double, double, double, double, double) { return 0.0; };
    inst.gen.lipschitz_c = 0.0;
    inst.obstacle.s = [obstacle_level](double, double) { return obstacle_level; };
    inst.terminal.xi = [terminal_level](double) { return terminal_level; };
    return inst;
}

/// F == 0, slack obstacle, xi = x^2: the backward recursion adds a_star*dt per
/// step, so the sup value from the center is a_high*T up to round-off.
inline Instance convex_instance(double T, int steps, double a_low, double a_high) {
    Instance inst = zero_gen_instance(T, steps, a_low, a_high, -1e6, 0.0);
    inst.terminal.xi = [](double x) { return x * x; };
    return inst;
}

}  // namespace testhelpers
