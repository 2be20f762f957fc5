#pragma once

// Reproducible Gaussian increments and Euler-Maruyama stepping.
//
// Every increment is addressed by (seed, stream, sample, step) and computed
// by a counter-based generator (Philox-4x32-10), so any entry can be
// regenerated in isolation and batch order never changes a sample.

#include <array>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mfgcap/model.hpp"

namespace mfgcap {

struct Grid {
    double horizon = 1.0;  // T, years
    std::size_t steps = 50;

    double dt() const { return horizon / static_cast<double>(steps); }
    double time(std::size_t i) const { return static_cast<double>(i) * dt(); }
    void validate() const;
};

struct NoiseKey {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
};

struct NoisePlan {
    std::uint64_t seed = 0;
    std::uint64_t stream = 0;
    std::size_t batch = 1;
    std::size_t steps = 1;

    NoiseKey key() const { return {seed, stream}; }
};

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox-4x32 with 10 rounds.
PhiloxCounter philox4x32(PhiloxCounter counter, PhiloxKey key);

/// Uniform in the open interval (0, 1) for one address.
double uniform_at(NoiseKey key, std::uint64_t sample, std::uint64_t step);

/// Standard normal quantile of uniform_at (inverse-CDF transform).
double standard_normal_at(NoiseKey key, std::uint64_t sample, std::uint64_t step);

/// sqrt(dt) * standard_normal_at.
double increment_at(NoiseKey key, std::uint64_t sample, std::uint64_t step, double dt);

/// All increments of a plan, sample-major: entry (j, i) at j * steps + i.
std::vector<double> increments(const NoisePlan& plan, double dt);

/// x + drift dt + vol dW.
inline double em_step(double x, double drift, double dt, double vol, double dw) {
    return x + drift * dt + vol * dw;
}

/// Addresses of the two noise sources driving one producer: a common shock
/// shared by every producer in the same scenario sample, and an
/// idiosyncratic shock that is the producer's own.
struct ProducerNoise {
    NoiseKey common;
    std::uint64_t common_sample = 0;
    NoiseKey idiosyncratic;
    std::uint64_t producer = 0;
};

/// Euler-Maruyama path of one producer under the costate path `y_path`
/// (length steps + 1). No clamping at zero capacity.
std::vector<double> simulate_producer(const MarketParams& params, const Grid& grid,
                                      std::span<const double> y_path, double x0, const ProducerNoise& noise);

/// Pairwise (tree) summation in index order; the result depends only on the values.
double pairwise_sum(std::span<const double> values);

/// Linear-interpolated sample quantile (q in [0, 1]); sorts a copy.
double quantile(std::span<const double> values, double q);

/// Worker count: MFG_THREADS if set and positive, otherwise hardware concurrency.
std::size_t worker_count();

/// Runs fn(task) for task in [0, tasks) over worker_count() threads. Tasks
/// must write only to task-owned outputs; scheduling never affects results.
void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& fn);

}  // namespace mfgcap
