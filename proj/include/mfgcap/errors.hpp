#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace mfgcap {

/// Invalid parameters or configuration. `key` names the offending field when known.
class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string key, const std::string& what)
        : std::runtime_error(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string& key() const noexcept { return key_; }

private:
    std::string key_;
};

/// A simulated state became non-finite.
class NumericalError : public std::runtime_error {
public:
    NumericalError(std::size_t step, const std::string& what)
        : std::runtime_error(what + " (step " + std::to_string(step) + ")"), step_(step) {}

    std::size_t step() const noexcept { return step_; }

private:
    std::size_t step_;
};

/// Training diverged even after the learning-rate fallback.
class DivergenceError : public std::runtime_error {
public:
    DivergenceError(const std::string& what, std::vector<double> trace)
        : std::runtime_error(what), trace_(std::move(trace)) {}

    const std::vector<double>& loss_trace() const noexcept { return trace_; }

private:
    std::vector<double> trace_;
};

}  // namespace mfgcap
