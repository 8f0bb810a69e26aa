#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <fstream>

#include "rbsdelab/io.hpp"

using namespace rbsdelab;

namespace {

json put_instance_json() {
    return json{{"grid", {{"T", 1.0}, {"N", 20}}},
                {"interval", {{"a_low", 0.01}, {"a_high", 0.09}}},
                {"generator", {{"kind", "linear_discount"}, {"params", {{"r", 0.05}}}}},
                {"obstacle", {{"kind", "american_put"}, {"params", {{"strike", 1.0}, {"spot", 1.0}}}}},
                {"terminal", {{"kind", "american_put"}, {"params", {{"strike", 1.0}, {"spot", 1.0}}}}},
                {"x0", 0.0}};
}

struct TempFile {
    std::string path;
    explicit TempFile(std::string p) : path(std::move(p)) {}
    ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("instance config round-trips through JSON") {
    const auto cfg = instance_config_from_json(put_instance_json());
    CHECK(cfg.grid.steps == 20);
    CHECK(cfg.interval.a_high == 0.09);
    CHECK(cfg.generator.kind == "linear_discount");
    const auto doc = instance_config_to_json(cfg);
    const auto cfg2 = instance_config_from_json(doc);
    CHECK(cfg2.grid.horizon == cfg.grid.horizon);
    CHECK(cfg2.obstacle.kind == cfg.obstacle.kind);
    CHECK(cfg2.x0 == cfg.x0);
}

TEST_CASE("built instances solve end to end") {
    const auto inst = build_instance(instance_config_from_json(put_instance_json()));
    const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
    const auto sol = solve_rbsde(inst, lat, constant_scenario(0.04));
    CHECK(sol.y.at(0, lat.center) > 0.0);
    CHECK(skorohod_residual(sol, inst, lat) == 0.0);
}

TEST_CASE("unknown registry kinds are rejected") {
    auto doc = put_instance_json();
    doc["generator"]["kind"] = "mystery";
    CHECK_THROWS_AS(build_instance(instance_config_from_json(doc)), InvalidInstanceError);
    auto doc2 = put_instance_json();
    doc2["obstacle"]["kind"] = "mystery";
    CHECK_THROWS_AS(build_instance(instance_config_from_json(doc2)), InvalidInstanceError);
}

TEST_CASE("custom polynomial profiles evaluate by Horner") {
    ComponentConfig cfg;
    cfg.kind = "custom_polynomial";
    cfg.params = {{"coeffs", {1.0, -2.0, 3.0}}};
    const auto f = build_payoff_profile(cfg);
    CHECK(f(2.0) == Catch::Approx(1.0 - 4.0 + 12.0).margin(1e-15));
}

TEST_CASE("market JSON parses and rejects unknown payoffs") {
    const json doc{{"rate", 0.05}, {"price0", 100.0}, {"T", 1.0}, {"N", 50},
                   {"payoff", {{"kind", "put"}, {"strike", 100.0}}}};
    const auto mkt = market_from_json(doc);
    CHECK(mkt.payoff.kind == PayoffSpec::Kind::put);
    CHECK(mkt.payoff(0.0, 90.0) == 10.0);
    json bad = doc;
    bad["payoff"]["kind"] = "straddle";
    CHECK_THROWS_AS(market_from_json(bad), InvalidInstanceError);
}

TEST_CASE("scenario tokens parse and bad tokens are rejected") {
    const TimeGrid grid{1.0, 10};
    const auto c = parse_scenario("const:0.04", grid);
    CHECK(c.a(3, 5) == 0.04);
    const auto r = parse_scenario("ramp:0.01:0.09", grid);
    CHECK(r.a(0, 0) == 0.01);
    CHECK(r.a(9, 0) == Catch::Approx(0.09).margin(1e-15));
    CHECK_THROWS_AS(parse_scenario("spline:1:2", grid), InvalidInstanceError);
    CHECK_THROWS_AS(parse_scenario("dpp-star", grid), InvalidInstanceError);
}

TEST_CASE("csv doubles round-trip at 17 significant digits") {
    for (double v : {1.0 / 3.0, 0.09, -1.2345678901234567e-7, 2.0}) {
        CHECK(std::stod(csv_double(v)) == v);
    }
}

TEST_CASE("solution CSV has the documented columns") {
    const auto inst = build_instance(instance_config_from_json(put_instance_json()));
    const auto lat = build_lattice(inst.grid, inst.interval, inst.x0);
    const auto sol = solve_rbsde(inst, lat, constant_scenario(0.04));
    TempFile tmp("io_test_solution.csv");
    write_solution_csv(tmp.path, inst, lat, sol);
    std::ifstream in(tmp.path);
    std::string header;
    std::getline(in, header);
    CHECK(header == "t,x,y,z,k_cum");
    int rows = 0;
    std::string line;
    while (std::getline(in, line))
        if (!line.empty()) ++rows;
    CHECK(rows == sol.y.rows() * sol.y.cols());
}

TEST_CASE("surface CSV reader restores written values") {
    TempFile tmp("io_test_surface.csv");
    {
        std::ofstream out(tmp.path);
        out << "step,node,value\n";
        out << "0,0," << csv_double(1.5) << "\n";
        out << "0,1," << csv_double(-2.25) << "\n";
        out << "1,0," << csv_double(1.0 / 3.0) << "\n";
        out << "1,1,0\n";
    }
    const auto surf = read_surface_csv(tmp.path, 2, 2);
    CHECK(surf.at(0, 0) == 1.5);
    CHECK(surf.at(0, 1) == -2.25);
    CHECK(surf.at(1, 0) == 1.0 / 3.0);
    CHECK(surf.at(1, 1) == 0.0);
}

TEST_CASE("paths CSV reader handles ragged rows") {
    TempFile tmp("io_test_paths.csv");
    {
        std::ofstream out(tmp.path);
        out << "3,2,1,0\n";
        out << "1,1\n";
    }
    const auto paths = read_paths_csv(tmp.path);
    REQUIRE(paths.size() == 2);
    CHECK(paths[0].size() == 4);
    CHECK(paths[1].size() == 2);
    CHECK(paths[0][0] == 3.0);
}

TEST_CASE("reports serialize deterministically without timestamps") {
    const auto rep = run_suite("binomial-monotone", 42);
    const auto d1 = suite_report_json(rep).dump();
    const auto d2 = suite_report_json(run_suite("binomial-monotone", 42)).dump();
    CHECK(d1 == d2);
    CHECK(d1.find("time") == std::string::npos);
}

TEST_CASE("missing files raise config errors") {
    CHECK_THROWS_AS(load_instance_config("no/such/file.json"), InvalidInstanceError);
    CHECK_THROWS_AS(load_market("no/such/market.json"), InvalidInstanceError);
    CHECK_THROWS_AS(read_surface_csv("no/such/surface.csv", 1, 1), InvalidInstanceError);
}
