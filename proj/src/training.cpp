#include "mfgcap/training.hpp"

#include <cmath>

#include "mfgcap/errors.hpp"

namespace mfgcap {

double LearningRateSchedule::at(std::size_t iteration, std::size_t total) const {
    double lr = initial;
    const double progress = total == 0 ? 0.0 : static_cast<double>(iteration) / static_cast<double>(total);
    for (const auto& m : milestones)
        if (progress >= m.fraction) lr = m.lr;
    return lr;
}

void LearningRateSchedule::validate() const {
    if (!(initial > 0.0)) throw ConfigError("training.lr", "must be > 0");
    double last = 0.0;
    for (const auto& m : milestones) {
        if (!(m.lr > 0.0)) throw ConfigError("training.lr_milestones", "rates must be > 0");
        if (m.fraction < last || m.fraction > 1.0)
            throw ConfigError("training.lr_milestones", "fractions must be increasing within [0, 1]");
        last = m.fraction;
    }
}

void TrainingConfig::validate() const {
    if (batch < 1) throw ConfigError("training.batch", "must be >= 1");
    if (iterations < 1) throw ConfigError("training.iterations", "must be >= 1");
    if (chunk_size < 1) throw ConfigError("training.chunk_size", "must be >= 1");
    if (!(initial_lr_scale > 0.0)) throw ConfigError("training.initial_lr_scale", "must be > 0");
    if (eval_multiplier < 1) throw ConfigError("training.eval_multiplier", "must be >= 1");
    if (arch.input_dim != 2 || arch.output_dim != 1)
        throw ConfigError("training.hidden", "networks map (t, x) to a scalar");
    if (arch.hidden_widths.empty()) throw ConfigError("training.hidden", "at least one hidden layer required");
    for (auto w : arch.hidden_widths)
        if (w < 1) throw ConfigError("training.hidden", "widths must be >= 1");
    schedule.validate();
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t tag) {
    std::uint64_t z = seed + (tag + 1) * 0x9E3779B97F4A7C15ull;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

NoisePlan training_plan(const TrainingConfig& cfg, std::size_t iteration, std::size_t steps) {
    return {cfg.seed, static_cast<std::uint64_t>(iteration), cfg.batch, steps};
}

NoisePlan evaluation_plan(const TrainingConfig& cfg, std::size_t steps) {
    return {cfg.seed, kEvaluationStream, cfg.batch * cfg.eval_multiplier, steps};
}

void TrajectoryBatch::allocate(std::size_t batch_size, std::size_t step_count, bool planner) {
    batch = batch_size;
    steps = step_count;
    const std::size_t n = (step_count + 1) * batch_size;
    time.assign(step_count + 1, 0.0);
    mu_x.assign(n, 0.0);
    mu_y.assign(n, 0.0);
    alpha.assign(n, 0.0);
    price.assign(n, 0.0);
    z.assign(n, 0.0);
    demand.assign(step_count + 1, 0.0);
    if (planner) {
        value.assign(n, 0.0);
        z_value.assign(n, 0.0);
        subsidy.assign(n, 0.0);
    } else {
        value.clear();
        z_value.clear();
        subsidy.clear();
    }
}

double step_mean(const TrajectoryBatch& batch, const std::vector<double>& field, std::size_t step) {
    return pairwise_sum(batch.row(field, step)) / static_cast<double>(batch.batch);
}

RolloutSummary summarize(const TrajectoryBatch& b) {
    RolloutSummary s;
    s.time = b.time;
    s.demand = b.demand;
    for (std::size_t i = 0; i <= b.steps; ++i) {
        s.mu_x_mean.push_back(step_mean(b, b.mu_x, i));
        s.mu_x_p05.push_back(quantile(b.row(b.mu_x, i), 0.05));
        s.mu_x_p95.push_back(quantile(b.row(b.mu_x, i), 0.95));
        s.mu_y_mean.push_back(step_mean(b, b.mu_y, i));
        s.alpha_mean.push_back(step_mean(b, b.alpha, i));
        s.price_mean.push_back(step_mean(b, b.price, i));
        if (b.planner()) {
            s.value_mean.push_back(step_mean(b, b.value, i));
            s.subsidy_mean.push_back(step_mean(b, b.subsidy, i));
        }
    }
    return s;
}

std::vector<double> reduce_in_order(const std::vector<std::vector<double>>& parts) {
    if (parts.empty()) return {};
    std::vector<double> total = parts.front();
    for (std::size_t p = 1; p < parts.size(); ++p)
        for (std::size_t k = 0; k < total.size(); ++k) total[k] += parts[p][k];
    return total;
}

}  // namespace mfgcap
