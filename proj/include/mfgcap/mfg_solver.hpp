#pragma once

// Deep-BSDE solver for the conditional-mean FBSDE of the unsubsidized game:
//
//   d muX = (-delta muX + (muY - c_i) / (2 c_a)) dt + sigma0 dW0,   muX_0 = mu0
//   d muY = (delta muY + c_p - P(t, muX)) dt + Z0 dW0,               muY_T = 0
//
// The initial costate and Z0(t, muX) are learned by simulating forward and
// minimising E[(muY_T)^2]; gradients flow through every Euler step.

#include <cstddef>
#include <vector>

#include "mfgcap/network_field.hpp"
#include "mfgcap/paths.hpp"
#include "mfgcap/training.hpp"

namespace mfgcap {

struct MfgScenario {
    MarketParams market;
    Grid grid;
    double mu0 = 1000.0;  // E[xi_0], MWh

    void validate() const;
};

/// Output and input scales derived from a scenario's a-priori bounds.
struct MfgScaling {
    InputScaling input;
    double y_offset;  // midpoint of the costate bounds at t = 0
    double y_scale;   // width of the costate bounds at t = 0
    double z_scale;   // sigma0 * y_scale / x_half_width
};

MfgScaling make_scaling(const MarketParams& market, const Grid& grid, double mu0);

/// Initial networks for a training run (deterministic in cfg.seed).
struct CostateNets {
    NetworkField y;  // evaluated only at (0, mu0)
    NetworkField z;

    double y0(double mu0) const { return y(0.0, mu0); }
};

CostateNets initial_costate_nets(const MfgScenario& scn, const TrainingConfig& cfg);

/// Forward simulation of the discretised system for every sample of `plan`.
/// Throws NumericalError naming the first step with a non-finite state.
TrajectoryBatch rollout(const MfgScenario& scn, double y0, const NetworkField& z_net, const NoisePlan& plan,
                        DriftVariant drift = DriftVariant::optimal_control, std::size_t chunk_size = 250);

/// Mean squared terminal costate.
double loss(const TrajectoryBatch& batch);

struct MfgSolution {
    CostateNets nets;
    double y0 = 0.0;
    std::vector<double> loss_trace;
    std::size_t lr_halvings = 0;
    RolloutSummary summary;  // of the evaluation rollout
    double eval_loss = 0.0;
};

/// Runs cfg.iterations of rollout, loss, reverse sweep and optimizer step,
/// then evaluates on the held-out plan. Throws DivergenceError.
MfgSolution train(const MfgScenario& scn, const TrainingConfig& cfg);

/// Rollout of trained networks on the held-out evaluation plan of `cfg`.
TrajectoryBatch evaluate(const MfgScenario& scn, const CostateNets& nets, const TrainingConfig& cfg);

/// Loss and exact gradients of one training batch with respect to the
/// initial-costate and z parameters (exposed for gradient checks).
struct MfgGradient {
    double loss = 0.0;
    std::vector<double> y_grad;
    std::vector<double> z_grad;
};

MfgGradient loss_gradient(const MfgScenario& scn, const CostateNets& nets, const NoisePlan& plan,
                          DriftVariant drift = DriftVariant::optimal_control, std::size_t chunk_size = 250);

/// First time the path `values` (sampled at `time`) changes sign from
/// positive to non-positive, linearly interpolated; negative if none.
double first_sign_change(const std::vector<double>& time, const std::vector<double>& values);

}  // namespace mfgcap
