#include "mfgcap/approximator.hpp"
#include "mfgcap/format.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <random>
#include <sstream>
#include <stdexcept>

namespace mfgcap {

namespace {

using MatMap = Eigen::Map<const Eigen::MatrixXd>;
using VecMap = Eigen::Map<const Eigen::VectorXd>;
using MutMatMap = Eigen::Map<Eigen::MatrixXd>;
using MutVecMap = Eigen::Map<Eigen::VectorXd>;

struct LayerView {
    std::size_t weight_offset;
    std::size_t bias_offset;
    std::size_t rows;
    std::size_t cols;
};

LayerView layer_view(const Arch& arch, std::size_t layer) {
    std::size_t offset = 0;
    for (std::size_t l = 0; l < layer; ++l) offset += arch.fan_out(l) * (arch.fan_in(l) + 1);
    const std::size_t rows = arch.fan_out(layer);
    const std::size_t cols = arch.fan_in(layer);
    return {offset, offset + rows * cols, rows, cols};
}

// Weights are copied into Eigen-owned storage before any product. Eigen picks
// vectorized or scalar code paths from the runtime alignment of mapped
// operands, and the two paths round differently; std::vector storage has no
// fixed alignment, so products on maps would vary from run to run.
Eigen::MatrixXd weights(const NetParams& p, const LayerView& v) {
    return MatMap(p.values.data() + v.weight_offset, static_cast<Eigen::Index>(v.rows), static_cast<Eigen::Index>(v.cols));
}

// tanh through the vectorized exponential: Eigen only vectorizes tanh for floats.
Eigen::MatrixXd fast_tanh(const Eigen::MatrixXd& z) {
    const Eigen::ArrayXXd e = (2.0 * z.array().min(40.0).max(-40.0)).exp();
    return (1.0 - 2.0 / (e + 1.0)).matrix();
}

}  // namespace

void Arch::validate() const {
    if (input_dim == 0) throw std::invalid_argument("arch: input_dim must be >= 1");
    if (output_dim == 0) throw std::invalid_argument("arch: output_dim must be >= 1");
    for (auto w : hidden_widths)
        if (w == 0) throw std::invalid_argument("arch: hidden widths must be >= 1");
}

std::size_t Arch::fan_in(std::size_t layer) const {
    return layer == 0 ? input_dim : hidden_widths[layer - 1];
}

std::size_t Arch::fan_out(std::size_t layer) const {
    return layer < hidden_widths.size() ? hidden_widths[layer] : output_dim;
}

std::size_t Arch::param_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layer_count(); ++l) n += fan_out(l) * (fan_in(l) + 1);
    return n;
}

std::string describe(const Arch& arch) {
    std::ostringstream os;
    os << arch.input_dim;
    for (auto w : arch.hidden_widths) os << '-' << w;
    os << '-' << arch.output_dim << " tanh";
    return os.str();
}

NetParams init_params(const Arch& arch, std::uint64_t seed) {
    arch.validate();
    NetParams p;
    p.arch = arch;
    p.values.assign(arch.param_count(), 0.0);
    std::mt19937_64 gen(seed);
    for (std::size_t l = 0; l < arch.layer_count(); ++l) {
        const auto view = layer_view(arch, l);
        const double limit = std::sqrt(6.0 / static_cast<double>(view.rows + view.cols));
        for (std::size_t k = 0; k < view.rows * view.cols; ++k) {
            // 53-bit uniform in [0, 1) built directly from the engine output so the
            // sequence does not depend on the standard library's distribution code.
            const double u = static_cast<double>(gen() >> 11) * 0x1.0p-53;
            p.values[view.weight_offset + k] = limit * (2.0 * u - 1.0);
        }
    }
    p.optimizer.first_moment.assign(p.values.size(), 0.0);
    p.optimizer.second_moment.assign(p.values.size(), 0.0);
    return p;
}

void forward_batch(const NetParams& params, const Eigen::MatrixXd& inputs, ForwardCache& cache,
                   Eigen::Ref<Eigen::RowVectorXd> out) {
    const Arch& arch = params.arch;
    if (static_cast<std::size_t>(inputs.rows()) != arch.input_dim)
        throw std::invalid_argument("forward: input dimension mismatch");
    if (arch.output_dim != 1) throw std::invalid_argument("forward: scalar output required");
    if (out.size() != inputs.cols()) throw std::invalid_argument("forward: output size mismatch");

    cache.input = inputs;
    cache.hidden.resize(arch.hidden_widths.size());
    const Eigen::MatrixXd* prev = &cache.input;
    for (std::size_t l = 0; l < arch.hidden_widths.size(); ++l) {
        const auto v = layer_view(arch, l);
        const Eigen::MatrixXd w = weights(params, v);
        const Eigen::VectorXd b = VecMap(params.values.data() + v.bias_offset, static_cast<Eigen::Index>(v.rows));
        Eigen::MatrixXd z = w * (*prev);
        z.colwise() += b;
        cache.hidden[l] = fast_tanh(z);
        prev = &cache.hidden[l];
    }
    const auto v = layer_view(arch, arch.layer_count() - 1);
    const Eigen::MatrixXd w = weights(params, v);
    const double b = params.values[v.bias_offset];
    out.noalias() = w * (*prev);
    out.array() += b;
}

double forward(const NetParams& params, std::span<const double> input) {
    if (input.size() != params.arch.input_dim) throw std::invalid_argument("forward: input dimension mismatch");
    for (double x : input)
        if (!std::isfinite(x)) throw std::invalid_argument("forward: non-finite input");
    Eigen::MatrixXd in(static_cast<Eigen::Index>(input.size()), 1);
    for (std::size_t i = 0; i < input.size(); ++i) in(static_cast<Eigen::Index>(i), 0) = input[i];
    ForwardCache cache;
    Eigen::RowVectorXd out(1);
    forward_batch(params, in, cache, out);
    return out(0);
}

void backward_batch(const NetParams& params, const ForwardCache& cache,
                    const Eigen::Ref<const Eigen::RowVectorXd>& upstream, std::span<double> grad_accum,
                    Eigen::MatrixXd* input_grad) {
    const Arch& arch = params.arch;
    if (grad_accum.size() != params.values.size()) throw std::invalid_argument("backward: gradient size mismatch");
    if (upstream.size() != cache.input.cols()) throw std::invalid_argument("backward: upstream size mismatch");

    Eigen::MatrixXd delta = upstream;
    for (std::size_t l = arch.layer_count(); l-- > 0;) {
        const auto v = layer_view(arch, l);
        const Eigen::MatrixXd& below = l == 0 ? cache.input : cache.hidden[l - 1];
        const auto rows = static_cast<Eigen::Index>(v.rows);
        const auto cols = static_cast<Eigen::Index>(v.cols);
        MutMatMap gw(grad_accum.data() + v.weight_offset, rows, cols);
        MutVecMap gb(grad_accum.data() + v.bias_offset, rows);
        const Eigen::MatrixXd dw = delta * below.transpose();
        const Eigen::VectorXd db = delta.rowwise().sum();
        gw += dw;
        gb += db;
        if (l == 0 && input_grad == nullptr) break;
        Eigen::MatrixXd next = weights(params, v).transpose() * delta;
        if (l == 0) {
            *input_grad = std::move(next);
            break;
        }
        const Eigen::MatrixXd& act = cache.hidden[l - 1];
        delta = (next.array() * (1.0 - act.array().square())).matrix();
    }
}

std::vector<double> backward(const NetParams& params, const Eigen::MatrixXd& inputs,
                             std::span<const double> upstream) {
    if (inputs.cols() == 0) throw std::invalid_argument("backward: empty batch");
    if (upstream.size() != static_cast<std::size_t>(inputs.cols()))
        throw std::invalid_argument("backward: upstream length must equal batch size");
    ForwardCache cache;
    Eigen::RowVectorXd out(inputs.cols());
    forward_batch(params, inputs, cache, out);
    Eigen::RowVectorXd up(inputs.cols());
    for (Eigen::Index j = 0; j < up.size(); ++j) up(j) = upstream[static_cast<std::size_t>(j)];
    std::vector<double> grad(params.values.size(), 0.0);
    backward_batch(params, cache, up, grad);
    return grad;
}

void step(NetParams& params, std::span<const double> grads, double lr, const OptimizerConfig& config) {
    if (grads.size() != params.values.size()) throw std::invalid_argument("step: gradient size mismatch");
    for (std::size_t k = 0; k < grads.size(); ++k) {
        if (!std::isfinite(grads[k]))
            throw std::invalid_argument("step: non-finite gradient at parameter " + std::to_string(k));
    }
    auto& st = params.optimizer;
    st.steps += 1;
    if (config.mode == OptimizerMode::plain) {
        for (std::size_t k = 0; k < grads.size(); ++k) params.values[k] -= lr * grads[k];
        return;
    }
    if (st.first_moment.size() != grads.size()) st.first_moment.assign(grads.size(), 0.0);
    if (st.second_moment.size() != grads.size()) st.second_moment.assign(grads.size(), 0.0);
    const double t = static_cast<double>(st.steps);
    const double c1 = 1.0 - std::pow(config.beta1, t);
    const double c2 = 1.0 - std::pow(config.beta2, t);
    for (std::size_t k = 0; k < grads.size(); ++k) {
        const double g = grads[k];
        st.first_moment[k] = config.beta1 * st.first_moment[k] + (1.0 - config.beta1) * g;
        st.second_moment[k] = config.beta2 * st.second_moment[k] + (1.0 - config.beta2) * g * g;
        const double m_hat = c1 > 0.0 ? st.first_moment[k] / c1 : st.first_moment[k];
        const double v_hat = c2 > 0.0 ? st.second_moment[k] / c2 : st.second_moment[k];
        params.values[k] -= lr * m_hat / (std::sqrt(v_hat) + config.epsilon);
    }
}

void save_checkpoint(const NetParams& params, const std::filesystem::path& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot write checkpoint " + path.string());
    const Arch& a = params.arch;
    os << "mfgcap-mlp 1\n";
    os << "input_dim " << a.input_dim << '\n';
    os << "hidden";
    for (auto w : a.hidden_widths) os << ' ' << w;
    os << '\n';
    os << "output_dim " << a.output_dim << '\n';
    os << "activation tanh\n";
    os << "params " << params.values.size() << '\n';
    for (double v : params.values) os << format_number(v) << '\n';
    if (!os) throw std::runtime_error("failed writing checkpoint " + path.string());
}

NetParams load_checkpoint(const std::filesystem::path& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("cannot read checkpoint " + path.string());
    auto fail = [&](const std::string& what) {
        return std::runtime_error("checkpoint " + path.string() + ": " + what);
    };
    std::string line;
    std::string tag;
    if (!std::getline(is, line) || line != "mfgcap-mlp 1") throw fail("bad header");

    Arch arch;
    arch.hidden_widths.clear();
    std::getline(is, line);
    std::istringstream(line) >> tag >> arch.input_dim;
    if (tag != "input_dim") throw fail("expected input_dim");
    std::getline(is, line);
    {
        std::istringstream ls(line);
        ls >> tag;
        if (tag != "hidden") throw fail("expected hidden");
        std::size_t w;
        while (ls >> w) arch.hidden_widths.push_back(w);
    }
    std::getline(is, line);
    std::istringstream(line) >> tag >> arch.output_dim;
    if (tag != "output_dim") throw fail("expected output_dim");
    std::getline(is, line);
    if (line != "activation tanh") throw fail("unsupported activation");
    std::size_t count = 0;
    std::getline(is, line);
    std::istringstream(line) >> tag >> count;
    if (tag != "params") throw fail("expected params");
    arch.validate();
    if (count != arch.param_count()) throw fail("parameter count does not match architecture");

    NetParams p;
    p.arch = arch;
    p.values.resize(count);
    for (std::size_t k = 0; k < count; ++k) {
        if (!std::getline(is, line)) throw fail("truncated parameter list");
        double v = 0.0;
        auto res = std::from_chars(line.data(), line.data() + line.size(), v);
        if (res.ec != std::errc{}) throw fail("unparsable value on line " + std::to_string(k + 7));
        p.values[k] = v;
    }
    p.optimizer.first_moment.assign(count, 0.0);
    p.optimizer.second_moment.assign(count, 0.0);
    return p;
}

}  // namespace mfgcap
