#include "doctest.h"

#include <cmath>
#include <cstdlib>

#include "mfgcap/errors.hpp"
#include "mfgcap/mfg_solver.hpp"

using namespace mfgcap;

namespace {

MfgScenario solar(double mu0, double sigma0, double horizon = 1.0, std::size_t steps = 10) {
    MfgScenario s;
    s.market.sigma0 = sigma0;
    s.market.price = MarginalCapacityPrice{300.0, 30.0, 27500.0, 1.0, 1500.0};
    s.grid = {horizon, steps};
    s.mu0 = mu0;
    return s;
}

TrainingConfig small_config() {
    TrainingConfig c;
    c.arch = Arch{2, {6, 6}, 1};
    c.batch = 40;
    c.chunk_size = 16;
    c.iterations = 20;
    c.eval_multiplier = 2;
    return c;
}

double batch_loss(const MfgScenario& s, const CostateNets& nets, const NoisePlan& plan) {
    return loss(rollout(s, nets.y0(s.mu0), nets.z, plan, DriftVariant::optimal_control, 16));
}

}  // namespace

TEST_CASE("scaling covers the costate bounds") {
    const auto s = solar(1000.0, 100.0);
    const MfgScaling sc = make_scaling(s.market, s.grid, s.mu0);
    CHECK(sc.y_offset - 0.5 * sc.y_scale == doctest::Approx(costate_lower(0.0, 1.0, s.market)));
    CHECK(sc.y_offset + 0.5 * sc.y_scale == doctest::Approx(costate_upper(0.0, 1.0, s.market)));
    CHECK(sc.input.x_half_width > 500.0);
}

TEST_CASE("rollout under the capped price and zero z follows the closed form") {
    const auto s = solar(1000.0, 1.0, 1.0, 50);
    const TrainingConfig cfg = small_config();
    CostateNets nets = initial_costate_nets(s, cfg);
    std::fill(nets.z.net.values.begin(), nets.z.net.values.end(), 0.0);
    const double y0 = 293.6178;
    const TrajectoryBatch b = rollout(s, y0, nets.z, {1, 0, 8, 50});
    for (std::size_t i = 0; i <= 50; ++i)
        for (std::size_t j = 0; j < 8; ++j) {
            CHECK(b.price[b.index(i, j)] == 300.0);
            CHECK(b.alpha[b.index(i, j)] == doctest::Approx((b.mu_y[b.index(i, j)] - 37.35) / 2.0));
        }
    // Euler recursion of y' = delta y + c_p - M lands within O(dt) of zero.
    CHECK(std::abs(b.mu_y[b.index(50, 0)]) < 0.1);
}

TEST_CASE("loss gradient matches finite differences") {
    auto s = solar(1900.0, 100.0);
    const TrainingConfig cfg = small_config();
    CostateNets nets = initial_costate_nets(s, cfg);
    for (std::size_t k = 0; k < nets.z.net.values.size(); ++k) nets.z.net.values[k] += 0.05 * std::sin(1.0 + k);
    const NoisePlan plan{3, 0, 24, s.grid.steps};
    const MfgGradient g = loss_gradient(s, nets, plan, DriftVariant::optimal_control, 16);
    CHECK(g.loss == doctest::Approx(batch_loss(s, nets, plan)).epsilon(1e-12));

    auto check_group = [&](NetworkField CostateNets::*field, const std::vector<double>& grad) {
        double worst = 0.0;
        for (std::size_t k = 0; k < grad.size(); ++k) {
            CostateNets hi = nets, lo = nets;
            const double h = 1e-6 * std::max(1.0, std::abs((nets.*field).net.values[k]));
            (hi.*field).net.values[k] += h;
            (lo.*field).net.values[k] -= h;
            const double fd = (batch_loss(s, hi, plan) - batch_loss(s, lo, plan)) / (2.0 * h);
            worst = std::max(worst, std::abs(fd - grad[k]) / std::max({std::abs(fd), std::abs(grad[k]), 1e-3 * g.loss}));
        }
        return worst;
    };
    CHECK(check_group(&CostateNets::z, g.z_grad) < 1e-5);
    CHECK(check_group(&CostateNets::y, g.y_grad) < 1e-5);
}

TEST_CASE("training is deterministic and reduces the loss") {
    const auto s = solar(1000.0, 100.0);
    TrainingConfig cfg = small_config();
    cfg.iterations = 200;
    const MfgSolution a = train(s, cfg);
    const MfgSolution b = train(s, cfg);
    CHECK(a.loss_trace == b.loss_trace);
    CHECK(a.y0 == b.y0);
    CHECK(a.loss_trace.back() < 0.1 * a.loss_trace.front());
    cfg.seed = 43;
    CHECK(train(s, cfg).loss_trace != a.loss_trace);
}

TEST_CASE("thread count does not change results") {
    const auto s = solar(1900.0, 100.0);
    const TrainingConfig cfg = small_config();
    const CostateNets nets = initial_costate_nets(s, cfg);
    const NoisePlan plan{3, 0, 37, s.grid.steps};
    setenv("MFG_THREADS", "1", 1);
    const auto a = rollout(s, 200.0, nets.z, plan, DriftVariant::optimal_control, 5);
    const auto ga = loss_gradient(s, nets, plan, DriftVariant::optimal_control, 5);
    setenv("MFG_THREADS", "4", 1);
    const auto b = rollout(s, 200.0, nets.z, plan, DriftVariant::optimal_control, 5);
    const auto gb = loss_gradient(s, nets, plan, DriftVariant::optimal_control, 5);
    unsetenv("MFG_THREADS");
    CHECK(a.mu_x == b.mu_x);
    CHECK(a.mu_y == b.mu_y);
    CHECK(ga.z_grad == gb.z_grad);
    // Other chunk sizes agree up to rounding.
    const auto c = rollout(s, 200.0, nets.z, plan, DriftVariant::optimal_control, 37);
    for (std::size_t k = 0; k < a.mu_y.size(); ++k) CHECK(c.mu_y[k] == doctest::Approx(a.mu_y[k]).epsilon(1e-12));
}

TEST_CASE("a non-finite state aborts the rollout with its step") {
    auto s = solar(1000.0, 100.0);
    const TrainingConfig cfg = small_config();
    const CostateNets nets = initial_costate_nets(s, cfg);
    try {
        rollout(s, std::nan(""), nets.z, {1, 0, 4, s.grid.steps});
        FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
        CHECK(e.step() >= 1);
    }
}

TEST_CASE("sign change location") {
    CHECK(first_sign_change({0.0, 1.0, 2.0}, {2.0, 1.0, -1.0}) == doctest::Approx(1.5));
    CHECK(first_sign_change({0.0, 1.0}, {1.0, 2.0}) < 0.0);
}
