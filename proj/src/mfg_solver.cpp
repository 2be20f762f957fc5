#include "mfgcap/mfg_solver.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "costate_adjoint.hpp"
#include "mfgcap/errors.hpp"

namespace mfgcap {

namespace {

constexpr std::uint64_t kInitialNetTag = 1;
constexpr std::uint64_t kZNetTag = 2;

std::size_t chunk_count(std::size_t batch, std::size_t chunk_size) {
    return (batch + chunk_size - 1) / chunk_size;
}

/// Simulates samples [first, first + n) of `plan`. Records the reverse-sweep
/// tape and/or full trajectories; returns muY at the terminal step.
Eigen::VectorXd simulate_chunk(const MfgScenario& scn, double y0, const NetworkField& z, const NoisePlan& plan,
                               std::size_t first, std::size_t n, DriftVariant drift, detail::CostateTape* tape,
                               TrajectoryBatch* out) {
    const MarketParams& m = scn.market;
    const Grid& grid = scn.grid;
    const double dt = grid.dt();
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(nn, scn.mu0);
    Eigen::VectorXd y = Eigen::VectorXd::Constant(nn, y0);
    Eigen::VectorXd dw(nn);
    Eigen::MatrixXd inputs;
    Eigen::RowVectorXd zout(nn);
    ForwardCache scratch;
    if (tape) tape->reset(grid.steps);

    auto record = [&](std::size_t i, const Eigen::RowVectorXd* zrow) {
        if (!out) return;
        const double t = grid.time(i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const std::size_t idx = out->index(i, first + j);
            out->mu_x[idx] = x(jj);
            out->mu_y[idx] = y(jj);
            out->alpha[idx] = detail::installation_rate(y(jj), 0.0, m, drift);
            out->price[idx] = price(m.price, t, x(jj));
            out->z[idx] = zrow ? z.offset + z.scale * (*zrow)(jj) : 0.0;
        }
    };

    for (std::size_t i = 0; i < grid.steps; ++i) {
        const double t = grid.time(i);
        for (std::size_t j = 0; j < n; ++j) dw(static_cast<Eigen::Index>(j)) = increment_at(plan.key(), first + j, i, dt);
        fill_inputs(z.input, t, x, inputs);
        ForwardCache& cache = tape ? tape->z_cache[i] : scratch;
        forward_batch(z.net, inputs, cache, zout);
        record(i, &zout);
        if (tape) {
            tape->x[i] = x;
            tape->dw[i] = dw;
        }
        for (Eigen::Index j = 0; j < nn; ++j)
            detail::advance_pair(m, drift, t, dt, 0.0, z.offset + z.scale * zout(j), dw(j), x(j), y(j));
        if (!x.allFinite() || !y.allFinite())
            throw NumericalError(i + 1, "non-finite mean-field state in rollout");
    }
    record(grid.steps, nullptr);
    return y;
}

}  // namespace

void MfgScenario::validate() const {
    market.validate();
    grid.validate();
    if (!std::isfinite(mu0)) throw ConfigError("initial.mu0", "must be finite");
}

MfgScaling make_scaling(const MarketParams& market, const Grid& grid, double mu0) {
    const double y_lo = costate_lower(0.0, grid.horizon, market);
    const double y_hi = costate_upper(0.0, grid.horizon, market);
    const double rate_max = std::max(std::abs(y_lo - market.c_i), std::abs(y_hi - market.c_i)) / (2.0 * market.c_a);
    MfgScaling s{};
    s.input.horizon = grid.horizon;
    s.input.x_center = mu0;
    s.input.x_half_width = 5.0 * std::abs(market.sigma0) * std::sqrt(grid.horizon) + grid.horizon * rate_max + 1.0;
    s.y_offset = 0.5 * (y_lo + y_hi);
    s.y_scale = std::max(y_hi - y_lo, 1e-12);
    s.z_scale = market.sigma0 * s.y_scale / s.input.x_half_width;
    return s;
}

CostateNets initial_costate_nets(const MfgScenario& scn, const TrainingConfig& cfg) {
    const MfgScaling s = make_scaling(scn.market, scn.grid, scn.mu0);
    const Arch y_arch = cfg.full_initial_network ? cfg.arch : Arch{2, {}, 1};
    CostateNets nets{
        NetworkField{init_params(y_arch, derive_seed(cfg.seed, kInitialNetTag)), s.input, s.y_offset, s.y_scale},
        NetworkField{init_params(cfg.arch, derive_seed(cfg.seed, kZNetTag)), s.input, 0.0, s.z_scale},
    };
    // With no hidden layer the initial-value network is an affine map evaluated at the
    // origin of the rescaled inputs, i.e. a trainable scalar (its bias).
    return nets;
}

TrajectoryBatch rollout(const MfgScenario& scn, double y0, const NetworkField& z_net, const NoisePlan& plan,
                        DriftVariant drift, std::size_t chunk_size) {
    TrajectoryBatch out;
    out.allocate(plan.batch, scn.grid.steps, false);
    for (std::size_t i = 0; i <= scn.grid.steps; ++i) out.time[i] = scn.grid.time(i);
    const double d = std::visit(
        [](const auto& pm) {
            if constexpr (requires { pm.demand; }) return pm.demand;
            else return std::nan("");
        },
        scn.market.price);
    std::fill(out.demand.begin(), out.demand.end(), d);
    parallel_for(chunk_count(plan.batch, chunk_size), [&](std::size_t c) {
        const std::size_t first = c * chunk_size;
        const std::size_t n = std::min(chunk_size, plan.batch - first);
        simulate_chunk(scn, y0, z_net, plan, first, n, drift, nullptr, &out);
    });
    return out;
}

double loss(const TrajectoryBatch& batch) {
    std::vector<double> sq(batch.batch);
    const auto last = batch.row(batch.mu_y, batch.steps);
    for (std::size_t j = 0; j < batch.batch; ++j) sq[j] = last[j] * last[j];
    return pairwise_sum(sq) / static_cast<double>(batch.batch);
}

MfgGradient loss_gradient(const MfgScenario& scn, const CostateNets& nets, const NoisePlan& plan,
                          DriftVariant drift, std::size_t chunk_size) {
    const std::size_t chunks = chunk_count(plan.batch, chunk_size);
    const double y0 = nets.y0(scn.mu0);
    const double inv_batch = 1.0 / static_cast<double>(plan.batch);
    std::vector<double> squares(plan.batch);
    std::vector<std::vector<double>> z_parts(chunks), y_bar0_parts(chunks);

    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t first = c * chunk_size;
        const std::size_t n = std::min(chunk_size, plan.batch - first);
        detail::CostateTape tape;
        const Eigen::VectorXd y_T = simulate_chunk(scn, y0, nets.z, plan, first, n, drift, &tape, nullptr);
        for (std::size_t j = 0; j < n; ++j) squares[first + j] = y_T(static_cast<Eigen::Index>(j)) * y_T(static_cast<Eigen::Index>(j));
        z_parts[c].assign(nets.z.net.values.size(), 0.0);
        const Eigen::VectorXd y_bar_T = 2.0 * inv_batch * y_T;
        const Eigen::VectorXd y_bar0 = detail::costate_backward(scn.market, scn.grid, drift, nets.z, tape, y_bar_T, z_parts[c]);
        y_bar0_parts[c].assign(y_bar0.data(), y_bar0.data() + y_bar0.size());
    });

    MfgGradient g;
    g.loss = pairwise_sum(squares) * inv_batch;
    g.z_grad = reduce_in_order(z_parts);
    std::vector<double> y_bar0(plan.batch);
    for (std::size_t c = 0; c < chunks; ++c)
        std::copy(y_bar0_parts[c].begin(), y_bar0_parts[c].end(), y_bar0.begin() + static_cast<std::ptrdiff_t>(c * chunk_size));
    // Every sample starts from the same network input, so the initial-value gradient
    // is one reverse sweep with the summed adjoint.
    Eigen::MatrixXd in(2, 1);
    in << nets.y.input.t_norm(0.0), nets.y.input.x_norm(scn.mu0);
    ForwardCache cache;
    Eigen::RowVectorXd out(1);
    forward_batch(nets.y.net, in, cache, out);
    Eigen::RowVectorXd up(1);
    up(0) = pairwise_sum(y_bar0) * nets.y.scale;
    g.y_grad.assign(nets.y.net.values.size(), 0.0);
    backward_batch(nets.y.net, cache, up, g.y_grad);
    return g;
}

MfgSolution train(const MfgScenario& scn, const TrainingConfig& cfg) {
    scn.validate();
    cfg.validate();
    MfgSolution sol;
    sol.nets = initial_costate_nets(scn, cfg);
    CostateNets checkpoint = sol.nets;
    double lr_factor = 1.0;
    double initial_loss = 0.0;

    for (std::size_t k = 0; k < cfg.iterations;) {
        const NoisePlan plan = training_plan(cfg, k, scn.grid.steps);
        MfgGradient g;
        bool diverged = false;
        try {
            g = loss_gradient(scn, sol.nets, plan, cfg.drift, cfg.chunk_size);
            if (k == 0) initial_loss = g.loss;
            diverged = !std::isfinite(g.loss) || (k > 0 && g.loss > 1e6 * initial_loss);
        } catch (const NumericalError&) {
            diverged = true;
        }
        if (diverged) {
            if (sol.lr_halvings > 0 || k == 0)
                throw DivergenceError("training diverged at iteration " + std::to_string(k), sol.loss_trace);
            sol.lr_halvings = 1;
            lr_factor = 0.5;
            sol.nets = checkpoint;
            continue;
        }
        sol.loss_trace.push_back(g.loss);
        const double lr = cfg.schedule.at(k, cfg.iterations) * lr_factor;
        step(sol.nets.y.net, g.y_grad, lr * cfg.initial_lr_scale, cfg.optimizer);
        step(sol.nets.z.net, g.z_grad, lr, cfg.optimizer);
        ++k;
        if (k % 50 == 0) checkpoint = sol.nets;
    }

    sol.y0 = sol.nets.y0(scn.mu0);
    const TrajectoryBatch eval = evaluate(scn, sol.nets, cfg);
    sol.summary = summarize(eval);
    sol.eval_loss = loss(eval);
    return sol;
}

TrajectoryBatch evaluate(const MfgScenario& scn, const CostateNets& nets, const TrainingConfig& cfg) {
    return rollout(scn, nets.y0(scn.mu0), nets.z, evaluation_plan(cfg, scn.grid.steps), cfg.drift, cfg.chunk_size);
}

double first_sign_change(const std::vector<double>& time, const std::vector<double>& values) {
    for (std::size_t i = 0; i + 1 < values.size(); ++i) {
        if (values[i] > 0.0 && values[i + 1] <= 0.0) {
            const double w = values[i] / (values[i] - values[i + 1]);
            return time[i] + w * (time[i + 1] - time[i]);
        }
    }
    return -1.0;
}

}  // namespace mfgcap
