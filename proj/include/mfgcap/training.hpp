#pragma once

// Types shared by the two deep-BSDE solvers: training configuration,
// simulated trajectory batches and their per-step summaries.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfgcap/approximator.hpp"
#include "mfgcap/model.hpp"
#include "mfgcap/paths.hpp"

namespace mfgcap {

/// Piecewise-constant learning rate: `initial` until the first milestone,
/// then each milestone's rate from its iteration fraction onwards.
struct LearningRateSchedule {
    struct Milestone {
        double fraction;
        double lr;
    };
    double initial = 1e-3;
    std::vector<Milestone> milestones{{0.5, 3e-4}, {0.8, 1e-4}};

    double at(std::size_t iteration, std::size_t total) const;
    void validate() const;
};

struct TrainingConfig {
    std::size_t batch = 2000;
    std::size_t iterations = 1000;
    LearningRateSchedule schedule;
    OptimizerConfig optimizer;
    std::uint64_t seed = 42;
    Arch arch{2, {32, 32}, 1};
    /// Use a full (t, x) network for the initial costate instead of a trainable scalar.
    bool full_initial_network = false;
    /// Learning-rate multiplier for the initial-costate parameters. The scalar
    /// starts far from its target and otherwise lags the z-network.
    double initial_lr_scale = 10.0;
    DriftVariant drift = DriftVariant::optimal_control;
    SubsidyFormula subsidy_formula = SubsidyFormula::divided;
    /// Evaluation batch = eval_multiplier * batch, on held-out streams.
    std::size_t eval_multiplier = 10;
    /// Samples per parallel work unit. Fixed so results never depend on the thread count.
    std::size_t chunk_size = 250;

    void validate() const;
};

/// Stream layout of one seed: training iteration k draws from stream k,
/// evaluation draws from a disjoint block.
inline constexpr std::uint64_t kEvaluationStream = std::uint64_t{1} << 40;
inline constexpr std::uint64_t kIdiosyncraticStream = std::uint64_t{1} << 41;

/// Independent seed for a named component (splitmix64 of seed and tag).
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag);

NoisePlan training_plan(const TrainingConfig& cfg, std::size_t iteration, std::size_t steps);
NoisePlan evaluation_plan(const TrainingConfig& cfg, std::size_t steps);

/// Simulated paths, time-major: entry (step i, sample j) at i * batch + j.
/// Planner-only fields stay empty for the unsubsidized solver.
struct TrajectoryBatch {
    std::size_t batch = 0;
    std::size_t steps = 0;
    std::vector<double> time;  // steps + 1
    std::vector<double> mu_x;
    std::vector<double> mu_y;  // costate, or the carried decoupling value phi
    std::vector<double> alpha;
    std::vector<double> price;
    std::vector<double> z;  // diffusion coefficient of mu_y, zero at the last step
    std::vector<double> value;
    std::vector<double> z_value;
    std::vector<double> subsidy;
    std::vector<double> demand;  // steps + 1, deterministic

    void allocate(std::size_t batch_size, std::size_t step_count, bool planner);
    std::size_t index(std::size_t step, std::size_t sample) const { return step * batch + sample; }
    std::span<const double> row(const std::vector<double>& field, std::size_t step) const {
        return std::span<const double>(field).subspan(step * batch, batch);
    }
    bool planner() const { return !value.empty(); }
};

/// Per-step statistics of a trajectory batch.
struct RolloutSummary {
    std::vector<double> time;
    std::vector<double> mu_x_mean, mu_x_p05, mu_x_p95;
    std::vector<double> mu_y_mean;
    std::vector<double> alpha_mean;
    std::vector<double> price_mean;
    std::vector<double> value_mean;
    std::vector<double> subsidy_mean;
    std::vector<double> demand;
};

RolloutSummary summarize(const TrajectoryBatch& batch);

/// Mean of field at one step, pairwise summed.
double step_mean(const TrajectoryBatch& batch, const std::vector<double>& field, std::size_t step);

/// Sums equal-length gradient vectors in index order.
std::vector<double> reduce_in_order(const std::vector<std::vector<double>>& parts);

}  // namespace mfgcap
