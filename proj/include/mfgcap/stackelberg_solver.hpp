#pragma once

// Deep solver for the planner's problem. The planner picks an installation
// subsidy v in [-S, S]; producers respond through the decoupling field phi.
// Along simulated paths
//
//   d muX = (-delta muX + (phi - c_i + v) / (2 c_a)) dt + sigma0 dW0
//   d phi = (delta phi + c_p - P(t, muX)) dt + z_phi dW0,          phi_T = 0
//   d V   = -g(t, muX, phi, v) dt + Z_V dW0,                       V_T   = 0
//
// with v the clamped pointwise minimiser of g + l * dV/dx. V and phi start
// from learned initial values and are carried forward; two losses E[V_T^2]
// and E[phi_T^2] train the (V, Z_V) and (phi, z_phi) networks separately.

#include <cstddef>
#include <vector>

#include "mfgcap/network_field.hpp"
#include "mfgcap/paths.hpp"
#include "mfgcap/training.hpp"

namespace mfgcap {

struct StackelbergScenario {
    MarketParams market;
    Grid grid;
    double mu0 = 1000.0;
    DemandSpec demand = ConstantDemand{1500.0};
    PlannerParams planner;

    /// Requires sigma0 != 0. `allow_degenerate` admits lambda_d = 0, which
    /// reduces the planner to the unsubsidized game (diagnostic use only).
    void validate(bool allow_degenerate = false) const;
};

/// clamp((c_i - dV - phi) / 2, -S, S) with dV = zV / sigma0 (or zV itself for
/// the undivided formula). Throws std::invalid_argument when sigma0 == 0.
double minimizer_v(double phi, double z_value, double sigma0, double c_i, double bound,
                   SubsidyFormula formula = SubsidyFormula::divided);

/// v -> g(t, x, phi, v) + l(t, x, phi, v) * dV, the quantity minimised by the subsidy.
double planner_hamiltonian(double t, double x, double phi, double v, double dv, double demand,
                           const MarketParams& m, const PlannerParams& pp);

struct PlannerNets {
    NetworkField value;    // V, evaluated at (0, mu0)
    NetworkField phi;      // phi, evaluated at (0, mu0)
    NetworkField z_value;  // Z_V(t, x)
    NetworkField z_phi;    // z_phi(t, x)
};

PlannerNets initial_planner_nets(const StackelbergScenario& scn, const TrainingConfig& cfg);

/// Forward simulation of the planner system on every sample of `plan`. The
/// recorded subsidy at the last step uses Z_V = 0 since V(T, .) = 0.
TrajectoryBatch rollout_planner(const StackelbergScenario& scn, const PlannerNets& nets, const NoisePlan& plan,
                                DriftVariant drift = DriftVariant::optimal_control,
                                SubsidyFormula formula = SubsidyFormula::divided, std::size_t chunk_size = 250);

struct PlannerLosses {
    double value = 0.0;  // mean V_T^2
    double phi = 0.0;    // mean phi_T^2
};

PlannerLosses losses(const TrajectoryBatch& batch);

/// Both losses and the gradients of each with respect to its own parameter group.
struct PlannerGradient {
    PlannerLosses loss;
    std::vector<double> value_grad, z_value_grad;
    std::vector<double> phi_grad, z_phi_grad;
};

PlannerGradient planner_loss_gradient(const StackelbergScenario& scn, const PlannerNets& nets, const NoisePlan& plan,
                                      DriftVariant drift = DriftVariant::optimal_control,
                                      SubsidyFormula formula = SubsidyFormula::divided,
                                      std::size_t chunk_size = 250);

struct StackelbergSolution {
    PlannerNets nets;
    std::vector<double> value_loss_trace;
    std::vector<double> phi_loss_trace;
    std::size_t lr_halvings = 0;
    RolloutSummary summary;
    PlannerLosses eval_loss;
};

StackelbergSolution train_stackelberg(const StackelbergScenario& scn, const TrainingConfig& cfg);

/// Planner rollout of trained networks on the held-out evaluation plan of `cfg`.
TrajectoryBatch evaluate_planner(const StackelbergScenario& scn, const PlannerNets& nets, const TrainingConfig& cfg);

}  // namespace mfgcap
