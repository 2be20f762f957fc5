#pragma once

// Small fully connected networks with tanh hidden layers, an affine output,
// exact reverse-mode gradients and an Adam / plain-descent optimizer.

#include <Eigen/Dense>

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace mfgcap {

struct Arch {
    std::size_t input_dim = 2;
    std::vector<std::size_t> hidden_widths{32, 32};
    std::size_t output_dim = 1;

    void validate() const;
    std::size_t layer_count() const { return hidden_widths.size() + 1; }
    std::size_t fan_in(std::size_t layer) const;
    std::size_t fan_out(std::size_t layer) const;
    std::size_t param_count() const;

    friend bool operator==(const Arch&, const Arch&) = default;
};

enum class OptimizerMode { adam, plain };

struct OptimizerConfig {
    OptimizerMode mode = OptimizerMode::adam;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;
};

struct OptimizerState {
    std::vector<double> first_moment;
    std::vector<double> second_moment;
    std::uint64_t steps = 0;
};

/// Weights and biases in layer order. Layer l stores its weight matrix
/// (fan_out x fan_in, column-major) followed by its bias vector.
struct NetParams {
    Arch arch;
    std::vector<double> values;
    OptimizerState optimizer;
};

/// Glorot-uniform weights, zero biases. Deterministic in (arch, seed).
NetParams init_params(const Arch& arch, std::uint64_t seed);

/// Single-sample evaluation. Throws std::invalid_argument on a non-finite
/// input or a dimension mismatch.
double forward(const NetParams& params, std::span<const double> input);

/// Hidden activations of one batched forward pass, kept for the reverse sweep.
struct ForwardCache {
    Eigen::MatrixXd input;
    std::vector<Eigen::MatrixXd> hidden;  // post-activation, one per hidden layer
};

/// Batched evaluation; `inputs` is input_dim x n, `out` receives n values.
void forward_batch(const NetParams& params, const Eigen::MatrixXd& inputs, ForwardCache& cache,
                   Eigen::Ref<Eigen::RowVectorXd> out);

/// Reverse sweep for sum_j upstream_j * net(input_j). Parameter gradients are
/// added into `grad_accum` (size param_count). When `input_grad` is non-null it
/// receives d/d input per sample (input_dim x n).
void backward_batch(const NetParams& params, const ForwardCache& cache,
                    const Eigen::Ref<const Eigen::RowVectorXd>& upstream, std::span<double> grad_accum,
                    Eigen::MatrixXd* input_grad = nullptr);

/// Gradient of sum_j upstream_j * net(inputs[:, j]) with respect to every parameter.
std::vector<double> backward(const NetParams& params, const Eigen::MatrixXd& inputs,
                             std::span<const double> upstream);

/// One optimizer update in place. Throws std::invalid_argument on non-finite gradients.
void step(NetParams& params, std::span<const double> grads, double lr, const OptimizerConfig& config = {});

/// Text checkpoint: header lines followed by one parameter per line in
/// shortest round-trip decimal form.
void save_checkpoint(const NetParams& params, const std::filesystem::path& path);
NetParams load_checkpoint(const std::filesystem::path& path);

std::string describe(const Arch& arch);

}  // namespace mfgcap
