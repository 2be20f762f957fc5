#include "mfgcap/model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mfgcap/errors.hpp"

namespace mfgcap {

namespace {

template <class... Ts>
struct overloaded : Ts... {
    using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

void require(bool ok, const char* key, const char* what) {
    if (!ok) throw ConfigError(key, what);
}

}  // namespace

void validate_price(const PriceModel& model) {
    std::visit(overloaded{
                   [](const MarginalCapacityPrice& m) {
                       require(m.cap > 0.0, "price.M", "must be > 0");
                       require(m.p1 > 0.0, "price.p1", "must be > 0");
                       require(m.r >= 1.0, "price.r", "must be >= 1");
                       require(std::isfinite(m.p0) && std::isfinite(m.demand), "price",
                               "p0 and D must be finite");
                   },
                   [](const CapacityPrice& m) {
                       require(m.p1 > 0.0, "price.p1", "must be > 0");
                       require(m.r >= 1.0, "price.r", "must be >= 1");
                       require(m.eps1 > 0.0, "price.eps1", "must be > 0");
                       require(m.eps2 > 0.0, "price.eps2", "must be > 0");
                       require(m.p0 + m.p1 / std::pow(m.eps2, m.r) > 0.0, "price",
                               "cap p0 + p1/eps2^r must be > 0");
                   },
                   [](const ConstantPrice& m) { require(m.value > 0.0, "price.M", "must be > 0"); },
               },
               model);
}

void MarketParams::validate(bool require_common_noise) const {
    require(delta > 0.0 && delta < 1.0, "market.delta", "must lie in (0, 1)");
    require(c_p > 0.0, "market.c_p", "must be > 0");
    require(c_i > 0.0, "market.c_i", "must be > 0");
    require(c_a > 0.0, "market.c_a", "must be > 0");
    require(std::isfinite(sigma) && sigma >= 0.0, "market.sigma", "must be finite and >= 0");
    require(std::isfinite(sigma0), "market.sigma0", "must be finite");
    if (require_common_noise) require(sigma0 != 0.0, "market.sigma0", "must be non-zero");
    validate_price(price);
}

void PlannerParams::validate() const {
    require(lambda_d > 0.0, "planner.lambda_d", "must be > 0");
    require(subsidy_bound >= 0.0, "planner.S", "must be >= 0");
}

void validate_demand(const DemandSpec& spec) {
    std::visit(overloaded{
                   [](const ConstantDemand& d) { require(d.level > 0.0, "demand.D", "must be > 0"); },
                   [](const MeanRevertingDemand& d) {
                       require(d.a > 0.0, "demand.a", "must be > 0");
                       require(d.initial > 0.0, "demand.D0", "must be > 0");
                   },
               },
               spec);
}

double price(const PriceModel& model, double /*t*/, double x) {
    return std::visit(overloaded{
                          [x](const MarginalCapacityPrice& m) {
                              const double excess = x - m.demand;
                              if (excess <= 0.0) return m.cap;
                              return std::min(m.cap, m.p0 + m.p1 / std::pow(excess, m.r));
                          },
                          [x](const CapacityPrice& m) {
                              if (x + m.eps1 >= m.eps2) return m.p0 + m.p1 / std::pow(x + m.eps1, m.r);
                              return m.p0 + m.p1 / std::pow(m.eps2, m.r);
                          },
                          [](const ConstantPrice& m) { return m.value; },
                      },
                      model);
}

double price_dx(const PriceModel& model, double /*t*/, double x) {
    return std::visit(overloaded{
                          [x](const MarginalCapacityPrice& m) {
                              const double excess = x - m.demand;
                              if (excess <= 0.0) return 0.0;
                              const double raw = m.p0 + m.p1 / std::pow(excess, m.r);
                              if (raw >= m.cap) return 0.0;
                              return -m.r * m.p1 / std::pow(excess, m.r + 1.0);
                          },
                          [x](const CapacityPrice& m) {
                              if (x + m.eps1 < m.eps2) return 0.0;
                              return -m.r * m.p1 / std::pow(x + m.eps1, m.r + 1.0);
                          },
                          [](const ConstantPrice&) { return 0.0; },
                      },
                      model);
}

double price_cap(const PriceModel& model) {
    return std::visit(overloaded{
                          [](const MarginalCapacityPrice& m) { return m.cap; },
                          [](const CapacityPrice& m) { return m.p0 + m.p1 / std::pow(m.eps2, m.r); },
                          [](const ConstantPrice& m) { return m.value; },
                      },
                      model);
}

double seasonal_target(const MeanRevertingDemand& d, double t) {
    constexpr double two_pi = 2.0 * std::numbers::pi;
    const double phase = two_pi * t - d.b2;
    return d.b0 + d.b1 * std::cos(phase) - two_pi * std::sin(phase);
}

double initial_demand(const DemandSpec& spec) {
    return std::visit(overloaded{
                          [](const ConstantDemand& d) { return d.level; },
                          [](const MeanRevertingDemand& d) { return d.initial; },
                      },
                      spec);
}

double demand_at(const DemandSpec& spec, double t, double dt, double d_prev) {
    return std::visit(overloaded{
                          [](const ConstantDemand& d) { return d.level; },
                          [&](const MeanRevertingDemand& d) {
                              return d_prev + d.a * (seasonal_target(d, t) - d_prev) * dt;
                          },
                      },
                      spec);
}

double optimal_alpha(double y, double v, double c_a, double c_i) {
    return (y - c_i + v) / (2.0 * c_a);
}

double drift_l(double /*t*/, double x, double y, double v, const MarketParams& p, DriftVariant variant) {
    const double gain = variant == DriftVariant::optimal_control ? 2.0 * p.c_a : p.c_a;
    return -p.delta * x + (y - p.c_i + v) / gain;
}

double driver_h(double t, double x, double y, const MarketParams& p) {
    return p.delta * y + p.c_p - price(p.price, t, x);
}

double planner_cost_g(double /*t*/, double x, double y, double v, double demand,
                      const PlannerParams& pp, double c_a, double c_i) {
    const double gap = demand - x;
    return pp.lambda_d * gap * gap + (y * v - c_i * v + v * v) / (2.0 * c_a);
}

double running_profit_f(double t, double x, double mean, double alpha, const MarketParams& p, double v) {
    // The spot price is set by the population mean, not by the individual's capacity.
    return x * (price(p.price, t, mean) - p.c_p) - (p.c_i - v) * alpha - p.c_a * alpha * alpha;
}

double discounted_horizon(double delta, double tau) {
    if (delta == 0.0) return tau;
    return -std::expm1(-delta * tau) / delta;
}

double costate_lower(double t, double horizon, const MarketParams& p) {
    return -p.c_p * discounted_horizon(p.delta, horizon - t);
}

double costate_upper(double t, double horizon, const MarketParams& p) {
    return (price_cap(p.price) - p.c_p) * discounted_horizon(p.delta, horizon - t);
}

}  // namespace mfgcap
