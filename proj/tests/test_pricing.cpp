#include <catch2/catch_amalgamated.hpp>

#include "rbsdelab/pricing.hpp"
#include "rbsdelab/verify.hpp"

using namespace rbsdelab;

namespace {

MarketSpec put_market(double rate, double price0, double strike, double T, int steps) {
    MarketSpec mkt;
    mkt.rate = rate;
    mkt.price0 = price0;
    mkt.horizon = T;
    mkt.steps = steps;
    mkt.payoff.kind = PayoffSpec::Kind::put;
    mkt.payoff.strike = strike;
    return mkt;
}

}  // namespace

TEST_CASE("one-step degenerate-band put against the hand binomial value") {
    // sigma = ln 2 forces u = 2, d = 1/2 in the CRR oracle; its risk-neutral
    // p = 1/3 gives the price 1/3 exactly. The log-state trinomial uses
    // symmetric moves with the drift correction in the generator, so it agrees
    // to the one-step discretization error, not exactly.
    const double sigma = std::log(2.0);
    const double oracle = binomial_american(1.0, 1.0, 0.0, sigma, 1.0, 1, OptionKind::put);
    CHECK(oracle == Catch::Approx(1.0 / 3.0).margin(1e-12));

    const auto mkt = put_market(0.0, 1.0, 1.0, 1.0, 1);
    const UncertaintyInterval band{sigma * sigma, sigma * sigma};
    const auto rep = price_american(mkt, band, {sigma * sigma}, 0.01);
    CHECK(rep.price == Catch::Approx(1.0 / 3.0).margin(0.005));
}

TEST_CASE("degenerate-band American put matches the CRR oracle within 1%") {
    const auto mkt = put_market(0.05, 100.0, 100.0, 1.0, 200);
    const UncertaintyInterval band{0.04, 0.04};
    const auto rep = price_american(mkt, band, {0.04}, 0.01);
    const double oracle = binomial_american(100.0, 100.0, 0.05, 0.2, 1.0, 500, OptionKind::put);
    CHECK(std::abs(rep.price - oracle) / oracle <= 0.01);
    CHECK(rep.hedge0 < 0.0);  // a put hedge is short the asset
    CHECK(rep.dominance_violations == 0);
}

TEST_CASE("robust put price dominates every fixed-volatility price") {
    const auto mkt = put_market(0.0, 1.0, 1.0, 1.0, 50);
    const UncertaintyInterval band{0.01, 0.09};
    const auto rep = price_american(mkt, band, {0.01, 0.04, 0.09}, 0.01);
    for (const auto& [a, p] : rep.fixed_vol_prices) CHECK(rep.price >= p - 1e-10);
    CHECK(rep.dominance_violations == 0);
    CHECK(rep.label == "robust superhedging upper value");
}

TEST_CASE("convex payoff at zero rate collapses to the top of the band") {
    const auto mkt = put_market(0.0, 1.0, 1.0, 1.0, 50);
    const UncertaintyInterval band{0.01, 0.09};
    const auto robust = price_american(mkt, band, {0.01, 0.04, 0.09}, 0.01);
    const UncertaintyInterval top{0.09, 0.09};
    const auto fixed = price_american(mkt, top, {0.09}, 0.01);
    CHECK(std::abs(robust.price - fixed.price) <= 1e-10);
}

TEST_CASE("raising the strike raises the put price") {
    const UncertaintyInterval band{0.01, 0.09};
    double prev = -1.0;
    for (double strike : {0.8, 1.0, 1.2}) {
        const auto rep = price_american(put_market(0.0, 1.0, strike, 1.0, 40), band,
                                        {0.01, 0.09}, 0.01);
        CHECK(rep.price >= prev);
        prev = rep.price;
    }
}

TEST_CASE("market validation rejects bad inputs") {
    auto mkt = put_market(0.0, -1.0, 1.0, 1.0, 10);
    CHECK_THROWS_AS(market_to_instance(mkt, {0.01, 0.09}), InvalidInstanceError);
    auto mkt2 = put_market(0.0, 1.0, 1.0, 1.0, 0);
    CHECK_THROWS_AS(market_to_instance(mkt2, {0.01, 0.09}), InvalidInstanceError);
}

TEST_CASE("degenerate band reduces the minimum-condition gap to round-off") {
    const auto mkt = put_market(0.0, 1.0, 1.0, 1.0, 50);
    const UncertaintyInterval band{0.04, 0.04};
    const auto rep = price_american(mkt, band, {0.04}, 0.01);
    CHECK(std::abs(rep.min_condition_gap) <= 1e-10);
}
