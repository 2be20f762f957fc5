#include "doctest.h"

#include <cmath>

#include "mfgcap/errors.hpp"
#include "mfgcap/model.hpp"

using namespace mfgcap;

namespace {

MarginalCapacityPrice solar(double demand, double r = 1.0) { return {300.0, 30.0, 27500.0, r, demand}; }

CapacityPrice capacity_price(double r) { return {30.0, 405000.0, r, 1e-4, 1500.0}; }

}  // namespace

TEST_CASE("marginal-capacity price is capped below demand") {
    const PriceModel pm = solar(1500.0);
    CHECK(price(pm, 0.0, 1000.0) == 300.0);
    CHECK(price(pm, 0.0, 1500.0) == 300.0);
    // 30 + 27500 / 100 = 305 is above the cap
    CHECK(price(pm, 0.0, 1600.0) == 300.0);
    CHECK(price(pm, 0.0, 2000.0) == doctest::Approx(30.0 + 27500.0 / 500.0));
    CHECK(price_dx(pm, 0.0, 1000.0) == 0.0);
    CHECK(price_dx(pm, 0.0, 2000.0) == doctest::Approx(-27500.0 / (500.0 * 500.0)));
    CHECK(price_cap(pm) == 300.0);
}

TEST_CASE("capacity price switches to a constant below eps2") {
    const PriceModel r1 = capacity_price(1.0);
    CHECK(price_cap(r1) == doctest::Approx(300.0));
    CHECK(price(r1, 0.0, 1000.0) == doctest::Approx(300.0));
    CHECK(price(r1, 0.0, 2000.0) == doctest::Approx(30.0 + 405000.0 / (2000.0 + 1e-4)));
    CHECK(price_dx(r1, 0.0, 1000.0) == 0.0);
    const PriceModel r2 = capacity_price(2.0);
    CHECK(price_cap(r2) == doctest::Approx(30.18));
}

TEST_CASE("price derivative matches central differences") {
    for (const PriceModel& pm : {PriceModel{solar(1500.0, 2.0)}, PriceModel{capacity_price(1.0)},
                                 PriceModel{capacity_price(2.0)}}) {
        for (double x : {1700.0, 2100.0, 3000.0}) {
            const double h = 1e-3;
            const double fd = (price(pm, 0.0, x + h) - price(pm, 0.0, x - h)) / (2.0 * h);
            CHECK(price_dx(pm, 0.0, x) == doctest::Approx(fd).epsilon(1e-6));
        }
    }
}

TEST_CASE("validation names the offending key") {
    MarketParams m;
    m.delta = -1.0;
    try {
        m.validate();
        FAIL("expected ConfigError");
    } catch (const ConfigError& e) {
        CHECK(e.key() == "market.delta");
    }
    MarketParams p;
    p.price = MarginalCapacityPrice{300.0, 30.0, -1.0, 1.0, 1500.0};
    CHECK_THROWS_AS(p.validate(), ConfigError);
    MarketParams q;
    CHECK_THROWS_AS(q.validate(true), ConfigError);  // sigma0 = 0
    PlannerParams pp;
    pp.subsidy_bound = -1.0;
    CHECK_THROWS_AS(pp.validate(), ConfigError);
}

TEST_CASE("drift and driver") {
    MarketParams m;
    CHECK(optimal_alpha(37.35, 0.0, 1.0, 37.35) == 0.0);
    CHECK(drift_l(0.0, 1000.0, 47.35, 0.0, m) == doctest::Approx(-5.0 + 5.0));
    CHECK(drift_l(0.0, 1000.0, 47.35, 0.0, m, DriftVariant::pseudocode) == doctest::Approx(-5.0 + 10.0));
    m.price = ConstantPrice{300.0};
    CHECK(driver_h(0.0, 1000.0, 10.0, m) == doctest::Approx(0.05 + 5.65 - 300.0));
}

TEST_CASE("planner cost") {
    const PlannerParams pp{5.0, 500.0};
    CHECK(planner_cost_g(0.0, 1000.0, 0.0, 0.0, 1500.0, pp, 1.0, 37.35) == doctest::Approx(5.0 * 500.0 * 500.0));
    // v = 2, y = 10: (20 - 74.7 + 4) / 2
    CHECK(planner_cost_g(0.0, 1500.0, 10.0, 2.0, 1500.0, pp, 1.0, 37.35) == doctest::Approx(-25.35));
}

TEST_CASE("costate bounds") {
    MarketParams m;
    m.price = solar(1500.0);
    CHECK(costate_upper(0.0, 1.0, m) == doctest::Approx(294.35 * (1.0 - std::exp(-0.005)) / 0.005));
    CHECK(costate_lower(0.0, 1.0, m) == doctest::Approx(-5.65 * (1.0 - std::exp(-0.005)) / 0.005));
    CHECK(costate_upper(1.0, 1.0, m) == 0.0);
    CHECK(discounted_horizon(0.0, 2.0) == 2.0);
    CHECK(discounted_horizon(1e-12, 2.0) == doctest::Approx(2.0));
}

TEST_CASE("mean-reverting demand relaxes toward its seasonal target") {
    const DemandSpec d = MeanRevertingDemand{2.0, 1500.0, 100.0, 0.0, 1000.0};
    double level = initial_demand(d);
    CHECK(level == 1000.0);
    const double dt = 1e-3;
    for (int i = 0; i < 5000; ++i) level = demand_at(d, i * dt, dt, level);
    CHECK(std::abs(level - 1500.0) < 200.0);
    const DemandSpec c = ConstantDemand{1500.0};
    CHECK(demand_at(c, 0.3, 0.02, 1500.0) == 1500.0);
    CHECK_THROWS_AS(validate_demand(ConstantDemand{0.0}), ConfigError);
}
