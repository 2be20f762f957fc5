#include "mfgcap/paths.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <numbers>
#include <string>
#include <thread>

#include <boost/math/special_functions/erf.hpp>

#include "mfgcap/errors.hpp"

namespace mfgcap {

namespace {

constexpr std::uint32_t kPhiloxM0 = 0xD2511F53u;
constexpr std::uint32_t kPhiloxM1 = 0xCD9E8D57u;
constexpr std::uint32_t kPhiloxW0 = 0x9E3779B9u;
constexpr std::uint32_t kPhiloxW1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi, std::uint32_t& lo) {
    const std::uint64_t p = static_cast<std::uint64_t>(a) * b;
    hi = static_cast<std::uint32_t>(p >> 32);
    lo = static_cast<std::uint32_t>(p);
}

}  // namespace

void Grid::validate() const {
    if (steps < 1) throw ConfigError("grid.N", "must be >= 1");
    if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("grid.T", "must be finite and > 0");
}

PhiloxCounter philox4x32(PhiloxCounter c, PhiloxKey k) {
    for (int round = 0; round < 10; ++round) {
        std::uint32_t hi0, lo0, hi1, lo1;
        mulhilo(kPhiloxM0, c[0], hi0, lo0);
        mulhilo(kPhiloxM1, c[2], hi1, lo1);
        c = {hi1 ^ c[1] ^ k[0], lo1, hi0 ^ c[3] ^ k[1], lo0};
        k[0] += kPhiloxW0;
        k[1] += kPhiloxW1;
    }
    return c;
}

double uniform_at(NoiseKey key, std::uint64_t sample, std::uint64_t step) {
    const PhiloxCounter ctr{static_cast<std::uint32_t>(step), static_cast<std::uint32_t>(sample),
                            static_cast<std::uint32_t>(key.stream), static_cast<std::uint32_t>(key.stream >> 32)};
    // Sample and step are packed into 32 bits each; the high halves perturb the key
    // so addresses beyond 2^32 remain distinct.
    const PhiloxKey k{static_cast<std::uint32_t>(key.seed) ^ static_cast<std::uint32_t>(step >> 32),
                      static_cast<std::uint32_t>(key.seed >> 32) ^ static_cast<std::uint32_t>(sample >> 32)};
    const auto out = philox4x32(ctr, k);
    const std::uint64_t bits = (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
    return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53;
}

double standard_normal_at(NoiseKey key, std::uint64_t sample, std::uint64_t step) {
    const double u = uniform_at(key, sample, step);
    return -std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * u);
}

double increment_at(NoiseKey key, std::uint64_t sample, std::uint64_t step, double dt) {
    return std::sqrt(dt) * standard_normal_at(key, sample, step);
}

std::vector<double> increments(const NoisePlan& plan, double dt) {
    if (!(dt > 0.0)) throw ConfigError("dt", "must be > 0");
    std::vector<double> out(plan.batch * plan.steps);
    const double scale = std::sqrt(dt);
    for (std::size_t j = 0; j < plan.batch; ++j)
        for (std::size_t i = 0; i < plan.steps; ++i)
            out[j * plan.steps + i] = scale * standard_normal_at(plan.key(), j, i);
    return out;
}

std::vector<double> simulate_producer(const MarketParams& params, const Grid& grid,
                                      std::span<const double> y_path, double x0, const ProducerNoise& noise) {
    if (y_path.size() != grid.steps + 1)
        throw std::invalid_argument("simulate_producer: y_path must have steps + 1 entries");
    const double dt = grid.dt();
    std::vector<double> x(grid.steps + 1);
    x[0] = x0;
    for (std::size_t i = 0; i < grid.steps; ++i) {
        const double dw0 = increment_at(noise.common, noise.common_sample, i, dt);
        const double dw = increment_at(noise.idiosyncratic, noise.producer, i, dt);
        const double drift = drift_l(grid.time(i), x[i], y_path[i], 0.0, params);
        x[i + 1] = em_step(x[i], drift, dt, params.sigma, dw) + params.sigma0 * dw0;
    }
    return x;
}

double pairwise_sum(std::span<const double> values) {
    if (values.size() <= 8) {
        double s = 0.0;
        for (double v : values) s += v;
        return s;
    }
    const std::size_t half = values.size() / 2;
    return pairwise_sum(values.first(half)) + pairwise_sum(values.subspan(half));
}

double quantile(std::span<const double> values, double q) {
    if (values.empty()) throw std::invalid_argument("quantile: empty input");
    std::vector<double> sorted(values.begin(), values.end());
    std::sort(sorted.begin(), sorted.end());
    const double pos = q * static_cast<double>(sorted.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
    const double frac = pos - static_cast<double>(lo);
    return sorted[lo] + frac * (sorted[hi] - sorted[lo]);
}

std::size_t worker_count() {
    if (const char* env = std::getenv("MFG_THREADS")) {
        try {
            const long n = std::stol(env);
            if (n > 0) return static_cast<std::size_t>(n);
        } catch (const std::exception&) {
        }
    }
    return std::max<std::size_t>(1, std::thread::hardware_concurrency());
}

void parallel_for(std::size_t tasks, const std::function<void(std::size_t)>& fn) {
    const std::size_t workers = std::min(worker_count(), tasks);
    if (workers <= 1) {
        for (std::size_t t = 0; t < tasks; ++t) fn(t);
        return;
    }
    std::atomic<std::size_t> next{0};
    // One slot per task so the reported failure is the lowest-index one, independent of scheduling.
    std::vector<std::exception_ptr> errors(tasks);
    auto body = [&] {
        for (std::size_t t = next++; t < tasks; t = next++) {
            try {
                fn(t);
            } catch (...) {
                errors[t] = std::current_exception();
            }
        }
    };
    std::vector<std::thread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(body);
    body();
    for (auto& th : pool) th.join();
    for (auto& e : errors)
        if (e) std::rethrow_exception(e);
}

}  // namespace mfgcap
