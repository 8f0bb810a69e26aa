#include <catch2/catch_amalgamated.hpp>

#include "rbsdelab/lattice.hpp"

using namespace rbsdelab;

TEST_CASE("lattice sizing: T=1, N=100, a_high=0.04, width 5 gives dx=0.02 on [-1, 1]") {
    const auto lat = build_lattice({1.0, 100}, {0.01, 0.04}, 0.0, 5.0);
    CHECK(lat.dx >= 0.02 - 1e-15);
    CHECK(lat.x_nodes.front() <= -1.0 + 1e-12);
    CHECK(lat.x_nodes.back() >= 1.0 - 1e-12);
    CHECK(lat.stability_margin() >= -1e-15);
    CHECK(lat.x_nodes[lat.center] == 0.0);
}

TEST_CASE("kernel probabilities sum to one and stay in [0, 1] over the band") {
    const auto lat = build_lattice({1.0, 50}, {0.01, 0.09}, 0.3);
    for (double a : {0.01, 0.05, 0.09}) {
        CHECK(lat.p_up(a) + lat.p_mid(a) + lat.p_down(a) == Catch::Approx(1.0).margin(1e-15));
        CHECK(lat.p_up(a) >= 0.0);
        CHECK(lat.p_mid(a) >= -1e-15);
        CHECK(lat.p_up(a) <= 0.5);
    }
}

TEST_CASE("binomial degeneration at the stability boundary") {
    // width_sigmas = 1 with N = 1 makes dx = sqrt(a_high * dt) exactly.
    const auto lat = build_lattice({1.0, 1}, {0.04, 0.04}, 0.0, 1.0);
    CHECK(lat.p_mid(0.04) == Catch::Approx(0.0).margin(1e-15));
    CHECK(lat.p_up(0.04) == Catch::Approx(0.5).margin(1e-15));
}

TEST_CASE("cond_expect of a constant is the constant") {
    const auto lat = build_lattice({1.0, 20}, {0.01, 0.09}, 0.0);
    std::vector<double> v(lat.node_count(), 3.25);
    for (int j = 0; j < lat.node_count(); ++j)
        CHECK(cond_expect(lat, v, 0.05, j) == Catch::Approx(3.25).margin(1e-14));
}

TEST_CASE("cond_expect of the state is a martingale at interior nodes") {
    const auto lat = build_lattice({1.0, 20}, {0.01, 0.09}, 0.5);
    for (int j = 1; j + 1 < lat.node_count(); ++j)
        CHECK(cond_expect(lat, lat.x_nodes, 0.09, j) == Catch::Approx(lat.x_nodes[j]).margin(1e-14));
}

TEST_CASE("second-moment identity: E[x'^2] = x^2 + a*dt at interior nodes") {
    const auto lat = build_lattice({1.0, 100}, {0.01, 0.04}, 0.0, 5.0);
    std::vector<double> sq(lat.node_count());
    for (int j = 0; j < lat.node_count(); ++j) sq[j] = lat.x_nodes[j] * lat.x_nodes[j];
    for (int j = 1; j + 1 < lat.node_count(); ++j)
        for (double a : {0.01, 0.04}) {
            const double expect = sq[j] + a * lat.dt;
            CHECK(cond_expect(lat, sq, a, j) == Catch::Approx(expect).margin(1e-13));
        }
}

TEST_CASE("cond_expect is monotone in the values") {
    const auto lat = build_lattice({1.0, 20}, {0.01, 0.09}, 0.0);
    std::vector<double> v(lat.node_count()), w(lat.node_count());
    for (int j = 0; j < lat.node_count(); ++j) {
        v[j] = std::sin(3.0 * j);
        w[j] = v[j] + 0.25 * (j % 3);
    }
    for (int j = 0; j < lat.node_count(); ++j)
        CHECK(cond_expect(lat, v, 0.07, j) <= cond_expect(lat, w, 0.07, j) + 1e-15);
}

TEST_CASE("cond_expect rejects variance rates outside the band") {
    const auto lat = build_lattice({1.0, 20}, {0.01, 0.09}, 0.0);
    std::vector<double> v(lat.node_count(), 0.0);
    CHECK_THROWS_AS(cond_expect(lat, v, 0.2, 5), std::domain_error);
    CHECK_THROWS_AS(cond_expect(lat, v, -0.01, 5), std::domain_error);
}

TEST_CASE("z_estimate recovers the slope of linear values at interior nodes") {
    const auto lat = build_lattice({1.0, 20}, {0.01, 0.09}, 0.0);
    std::vector<double> v(lat.node_count());
    for (int j = 0; j < lat.node_count(); ++j) v[j] = 2.0 + 1.5 * lat.x_nodes[j];
    for (int j = 1; j + 1 < lat.node_count(); ++j)
        CHECK(z_estimate(lat, v, 0.05, j) == Catch::Approx(1.5).margin(1e-12));
}
