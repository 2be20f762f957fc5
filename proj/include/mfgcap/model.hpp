#pragma once

// Market primitives for the renewable-capacity mean field game: price
// functions, demand dynamics and the coefficient functions shared by both
// solvers. Units: capacity in MWh, prices and costates in $/MWh, time in years.

#include <variant>

namespace mfgcap {

/// Marginal-capacity price: capped at M while capacity does not exceed
/// demand D, otherwise min(M, p0 + p1 / (x - D)^r).
struct MarginalCapacityPrice {
    double cap;     // M, $/MWh
    double p0;      // $/MWh
    double p1;      // $
    double r;       // exponent, >= 1
    double demand;  // D, MWh
};

/// Capacity price: p0 + p1 / (x + eps1)^r above the switch point
/// x + eps1 >= eps2, and the constant p0 + p1 / eps2^r below it.
struct CapacityPrice {
    double p0;
    double p1;
    double r;
    double eps1;  // MWh
    double eps2;  // MWh
};

/// Degenerate price used for testing: P(t, x) = value.
struct ConstantPrice {
    double value;
};

using PriceModel = std::variant<MarginalCapacityPrice, CapacityPrice, ConstantPrice>;

struct MarketParams {
    double delta = 0.005;  // capacity decay, 1/year
    double sigma = 0.0;    // idiosyncratic volatility, MWh/sqrt(year)
    double sigma0 = 0.0;   // common volatility, MWh/sqrt(year)
    double c_p = 5.65;     // production cost, $/MWh
    double c_i = 37.35;    // installation cost, $/MWh
    double c_a = 1.0;      // adjustment cost, $^2/MWh^2
    PriceModel price = ConstantPrice{300.0};

    /// Throws ConfigError naming the first violated constraint.
    /// `require_common_noise` enforces sigma0 != 0 (needed by the planner).
    void validate(bool require_common_noise = false) const;
};

struct ConstantDemand {
    double level;  // MWh
};

/// dD = a (b(t) - D) dt with b(t) = b0 + b1 cos(2 pi t - b2) - 2 pi sin(2 pi t - b2).
struct MeanRevertingDemand {
    double a;
    double b0;
    double b1;
    double b2;
    double initial;  // D_0, MWh
};

using DemandSpec = std::variant<ConstantDemand, MeanRevertingDemand>;

struct PlannerParams {
    double lambda_d = 5.0;        // loss weight, $/MWh^2
    double subsidy_bound = 500.0;  // S, $/MWh

    void validate() const;
};

/// Selects the coefficient of the installation term in the capacity drift.
/// `optimal_control` uses 1/(2 c_a); `pseudocode` uses 1/c_a.
enum class DriftVariant { optimal_control, pseudocode };

/// How the planner's subsidy reads the value-diffusion output: `divided`
/// uses Z_V / sigma0 as the value gradient, `undivided` uses Z_V itself.
enum class SubsidyFormula { divided, undivided };

void validate_price(const PriceModel& model);
void validate_demand(const DemandSpec& spec);

double price(const PriceModel& model, double t, double x);

/// dP/dx, zero on capped / flat branches.
double price_dx(const PriceModel& model, double t, double x);

/// Upper bound of the price over all capacities.
double price_cap(const PriceModel& model);

double seasonal_target(const MeanRevertingDemand& d, double t);
double initial_demand(const DemandSpec& spec);

/// One explicit Euler step of the demand ODE from D_prev at time t.
double demand_at(const DemandSpec& spec, double t, double dt, double d_prev);

/// (y - c_i + v) / (2 c_a).
double optimal_alpha(double y, double v, double c_a, double c_i);

/// -delta x + installation rate.
double drift_l(double t, double x, double y, double v, const MarketParams& p,
               DriftVariant variant = DriftVariant::optimal_control);

/// delta y + c_p - P(t, x).
double driver_h(double t, double x, double y, const MarketParams& p);

/// lambda_d (D - x)^2 + (y v - c_i v + v^2) / (2 c_a).
double planner_cost_g(double t, double x, double y, double v, double demand,
                      const PlannerParams& pp, double c_a, double c_i);

/// x (P - c_p) - (c_i - v) alpha - c_a alpha^2. Diagnostic only.
double running_profit_f(double t, double x, double mean, double alpha, const MarketParams& p,
                        double v = 0.0);

/// Integral of e^{-delta s} over [0, tau]; stable as delta -> 0.
double discounted_horizon(double delta, double tau);

/// Lower costate bound -c_p (1 - e^{-delta (T - t)}) / delta.
double costate_lower(double t, double horizon, const MarketParams& p);

/// Upper costate bound (P_cap - c_p) (1 - e^{-delta (T - t)}) / delta.
double costate_upper(double t, double horizon, const MarketParams& p);

}  // namespace mfgcap
