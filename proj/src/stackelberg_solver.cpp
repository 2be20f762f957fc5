#include "mfgcap/stackelberg_solver.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

#include "costate_adjoint.hpp"
#include "mfgcap/errors.hpp"

namespace mfgcap {

namespace {

constexpr std::uint64_t kValueNetTag = 11;
constexpr std::uint64_t kPhiNetTag = 12;
constexpr std::uint64_t kZValueNetTag = 13;
constexpr std::uint64_t kZPhiNetTag = 14;

std::size_t chunk_count(std::size_t batch, std::size_t chunk_size) {
    return (batch + chunk_size - 1) / chunk_size;
}

struct PlannerTape {
    detail::CostateTape costate;
    std::vector<ForwardCache> zv_cache;
    std::vector<Eigen::VectorXd> dw;
};

std::vector<double> demand_path(const StackelbergScenario& scn) {
    std::vector<double> d(scn.grid.steps + 1);
    d[0] = initial_demand(scn.demand);
    for (std::size_t i = 0; i < scn.grid.steps; ++i) d[i + 1] = demand_at(scn.demand, scn.grid.time(i), scn.grid.dt(), d[i]);
    return d;
}

struct ChunkEnd {
    Eigen::VectorXd value;
    Eigen::VectorXd phi;
};

ChunkEnd simulate_chunk(const StackelbergScenario& scn, const PlannerNets& nets, const std::vector<double>& demand,
                        const NoisePlan& plan, std::size_t first, std::size_t n, DriftVariant drift,
                        SubsidyFormula formula, PlannerTape* tape, TrajectoryBatch* out) {
    const MarketParams& m = scn.market;
    const Grid& grid = scn.grid;
    const double dt = grid.dt();
    const double bound = scn.planner.subsidy_bound;
    const auto nn = static_cast<Eigen::Index>(n);
    Eigen::VectorXd x = Eigen::VectorXd::Constant(nn, scn.mu0);
    Eigen::VectorXd phi = Eigen::VectorXd::Constant(nn, nets.phi(0.0, scn.mu0));
    Eigen::VectorXd value = Eigen::VectorXd::Constant(nn, nets.value(0.0, scn.mu0));
    Eigen::VectorXd dw(nn), v(nn);
    Eigen::MatrixXd inputs;
    Eigen::RowVectorXd zphi_out(nn), zv_out(nn);
    ForwardCache scratch_phi, scratch_v;
    if (tape) {
        tape->costate.reset(grid.steps);
        tape->zv_cache.resize(grid.steps);
        tape->dw.resize(grid.steps);
    }

    auto record = [&](std::size_t i, double zphi_row_scale, double zv_row_scale) {
        if (!out) return;
        const double t = grid.time(i);
        for (std::size_t j = 0; j < n; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const std::size_t idx = out->index(i, first + j);
            out->mu_x[idx] = x(jj);
            out->mu_y[idx] = phi(jj);
            out->value[idx] = value(jj);
            out->subsidy[idx] = v(jj);
            out->alpha[idx] = detail::installation_rate(phi(jj), v(jj), m, drift);
            out->price[idx] = price(m.price, t, x(jj));
            out->z[idx] = zphi_row_scale * (nets.z_phi.offset + nets.z_phi.scale * zphi_out(jj));
            out->z_value[idx] = zv_row_scale * (nets.z_value.offset + nets.z_value.scale * zv_out(jj));
        }
    };

    for (std::size_t i = 0; i < grid.steps; ++i) {
        const double t = grid.time(i);
        for (std::size_t j = 0; j < n; ++j) dw(static_cast<Eigen::Index>(j)) = increment_at(plan.key(), first + j, i, dt);
        fill_inputs(nets.z_phi.input, t, x, inputs);
        ForwardCache& cphi = tape ? tape->costate.z_cache[i] : scratch_phi;
        ForwardCache& cv = tape ? tape->zv_cache[i] : scratch_v;
        forward_batch(nets.z_phi.net, inputs, cphi, zphi_out);
        forward_batch(nets.z_value.net, inputs, cv, zv_out);
        for (Eigen::Index j = 0; j < nn; ++j)
            v(j) = minimizer_v(phi(j), nets.z_value.offset + nets.z_value.scale * zv_out(j), m.sigma0, m.c_i, bound,
                               formula);
        record(i, 1.0, 1.0);
        if (tape) {
            tape->costate.x[i] = x;
            tape->costate.dw[i] = dw;
            tape->dw[i] = dw;
        }
        for (Eigen::Index j = 0; j < nn; ++j) {
            const double zv = nets.z_value.offset + nets.z_value.scale * zv_out(j);
            const double g = planner_cost_g(t, x(j), phi(j), v(j), demand[i], scn.planner, m.c_a, m.c_i);
            value(j) = em_step(value(j), -g, dt, zv, dw(j));
            detail::advance_pair(m, drift, t, dt, v(j), nets.z_phi.offset + nets.z_phi.scale * zphi_out(j), dw(j),
                                 x(j), phi(j));
        }
        if (!x.allFinite() || !phi.allFinite() || !value.allFinite())
            throw NumericalError(i + 1, "non-finite planner state in rollout");
    }
    for (Eigen::Index j = 0; j < nn; ++j) v(j) = minimizer_v(phi(j), 0.0, m.sigma0, m.c_i, bound, formula);
    record(grid.steps, 0.0, 0.0);
    return {value, phi};
}

}  // namespace

void StackelbergScenario::validate(bool allow_degenerate) const {
    market.validate(true);
    grid.validate();
    validate_demand(demand);
    if (!std::isfinite(mu0)) throw ConfigError("initial.mu0", "must be finite");
    if (allow_degenerate) {
        if (!(planner.lambda_d >= 0.0)) throw ConfigError("planner.lambda_d", "must be >= 0");
        if (!(planner.subsidy_bound >= 0.0)) throw ConfigError("planner.S", "must be >= 0");
    } else {
        planner.validate();
    }
}

double minimizer_v(double phi, double z_value, double sigma0, double c_i, double bound, SubsidyFormula formula) {
    if (sigma0 == 0.0) throw std::invalid_argument("minimizer_v: sigma0 must be non-zero");
    const double dv = formula == SubsidyFormula::divided ? z_value / sigma0 : z_value;
    return std::clamp(0.5 * (c_i - dv - phi), -bound, bound);
}

double planner_hamiltonian(double t, double x, double phi, double v, double dv, double demand, const MarketParams& m,
                           const PlannerParams& pp) {
    return planner_cost_g(t, x, phi, v, demand, pp, m.c_a, m.c_i) + drift_l(t, x, phi, v, m) * dv;
}

PlannerNets initial_planner_nets(const StackelbergScenario& scn, const TrainingConfig& cfg) {
    const MarketParams& m = scn.market;
    const double horizon = scn.grid.horizon;
    const double bound = scn.planner.subsidy_bound;
    const double y_lo = costate_lower(0.0, horizon, m);
    const double y_hi = costate_upper(0.0, horizon, m);
    const double rate_max = (std::max(std::abs(y_lo - m.c_i), std::abs(y_hi - m.c_i)) + bound) / (2.0 * m.c_a);

    InputScaling input;
    input.horizon = horizon;
    input.x_center = scn.mu0;
    input.x_half_width = 5.0 * std::abs(m.sigma0) * std::sqrt(horizon) + horizon * rate_max + 1.0;
    const double y_scale = std::max(y_hi - y_lo, 1e-12);

    // Running cost bound: squared demand gap over reachable states plus the
    // largest subsidy outlay.
    const double gap = std::abs(initial_demand(scn.demand) - scn.mu0) + input.x_half_width;
    const double v_scale = std::max(
        (scn.planner.lambda_d * gap * gap + bound * (std::max(std::abs(y_lo), std::abs(y_hi)) + m.c_i + bound) /
                                                (2.0 * m.c_a)) *
            horizon,
        1.0);

    const Arch scalar_arch = cfg.full_initial_network ? cfg.arch : Arch{2, {}, 1};
    return PlannerNets{
        NetworkField{init_params(scalar_arch, derive_seed(cfg.seed, kValueNetTag)), input, 0.0, v_scale},
        NetworkField{init_params(scalar_arch, derive_seed(cfg.seed, kPhiNetTag)), input, 0.5 * (y_lo + y_hi), y_scale},
        NetworkField{init_params(cfg.arch, derive_seed(cfg.seed, kZValueNetTag)), input, 0.0,
                     m.sigma0 * v_scale / input.x_half_width},
        NetworkField{init_params(cfg.arch, derive_seed(cfg.seed, kZPhiNetTag)), input, 0.0,
                     m.sigma0 * y_scale / input.x_half_width},
    };
}

TrajectoryBatch rollout_planner(const StackelbergScenario& scn, const PlannerNets& nets, const NoisePlan& plan,
                                DriftVariant drift, SubsidyFormula formula, std::size_t chunk_size) {
    scn.validate(true);
    TrajectoryBatch out;
    out.allocate(plan.batch, scn.grid.steps, true);
    for (std::size_t i = 0; i <= scn.grid.steps; ++i) out.time[i] = scn.grid.time(i);
    const std::vector<double> demand = demand_path(scn);
    out.demand = demand;
    parallel_for(chunk_count(plan.batch, chunk_size), [&](std::size_t c) {
        const std::size_t first = c * chunk_size;
        const std::size_t n = std::min(chunk_size, plan.batch - first);
        simulate_chunk(scn, nets, demand, plan, first, n, drift, formula, nullptr, &out);
    });
    return out;
}

PlannerLosses losses(const TrajectoryBatch& batch) {
    if (!batch.planner()) throw std::invalid_argument("losses: batch has no planner fields");
    std::vector<double> sv(batch.batch), sp(batch.batch);
    const auto v = batch.row(batch.value, batch.steps);
    const auto p = batch.row(batch.mu_y, batch.steps);
    for (std::size_t j = 0; j < batch.batch; ++j) {
        sv[j] = v[j] * v[j];
        sp[j] = p[j] * p[j];
    }
    const double inv = 1.0 / static_cast<double>(batch.batch);
    return {pairwise_sum(sv) * inv, pairwise_sum(sp) * inv};
}

namespace {

// Gradient of a scalar-valued initial network evaluated at (0, mu0) for upstream u.
std::vector<double> scalar_grad(const NetworkField& f, double mu0, double upstream) {
    Eigen::MatrixXd in(2, 1);
    in << f.input.t_norm(0.0), f.input.x_norm(mu0);
    ForwardCache cache;
    Eigen::RowVectorXd out(1), up(1);
    forward_batch(f.net, in, cache, out);
    up(0) = upstream * f.scale;
    std::vector<double> g(f.net.values.size(), 0.0);
    backward_batch(f.net, cache, up, g);
    return g;
}

}  // namespace

PlannerGradient planner_loss_gradient(const StackelbergScenario& scn, const PlannerNets& nets, const NoisePlan& plan,
                                      DriftVariant drift, SubsidyFormula formula, std::size_t chunk_size) {
    const std::size_t chunks = chunk_count(plan.batch, chunk_size);
    const double inv_batch = 1.0 / static_cast<double>(plan.batch);
    const std::vector<double> demand = demand_path(scn);
    std::vector<double> sq_value(plan.batch), sq_phi(plan.batch), value_bar(plan.batch), phi_bar0(plan.batch);
    std::vector<std::vector<double>> zv_parts(chunks), zphi_parts(chunks);

    parallel_for(chunks, [&](std::size_t c) {
        const std::size_t first = c * chunk_size;
        const std::size_t n = std::min(chunk_size, plan.batch - first);
        PlannerTape tape;
        const ChunkEnd end = simulate_chunk(scn, nets, demand, plan, first, n, drift, formula, &tape, nullptr);
        for (std::size_t j = 0; j < n; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            sq_value[first + j] = end.value(jj) * end.value(jj);
            sq_phi[first + j] = end.phi(jj) * end.phi(jj);
            value_bar[first + j] = 2.0 * inv_batch * end.value(jj);
        }
        // Value group: V_T = V_0 - sum g dt + sum Z_V dW with the subsidy held
        // fixed, so only the initial value and the Z_V outputs carry gradient.
        zv_parts[c].assign(nets.z_value.net.values.size(), 0.0);
        const Eigen::VectorXd vbar = 2.0 * inv_batch * end.value;
        Eigen::RowVectorXd upstream(static_cast<Eigen::Index>(n));
        for (std::size_t i = 0; i < scn.grid.steps; ++i) {
            upstream = (vbar.array() * tape.dw[i].array() * nets.z_value.scale).matrix().transpose();
            backward_batch(nets.z_value.net, tape.zv_cache[i], upstream, zv_parts[c]);
        }
        // Field group: same reverse sweep as the unsubsidized game.
        zphi_parts[c].assign(nets.z_phi.net.values.size(), 0.0);
        const Eigen::VectorXd pbar0 = detail::costate_backward(scn.market, scn.grid, drift, nets.z_phi, tape.costate,
                                                               2.0 * inv_batch * end.phi, zphi_parts[c]);
        std::copy(pbar0.data(), pbar0.data() + n, phi_bar0.begin() + static_cast<std::ptrdiff_t>(first));
    });

    PlannerGradient g;
    g.loss = {pairwise_sum(sq_value) * inv_batch, pairwise_sum(sq_phi) * inv_batch};
    g.z_value_grad = reduce_in_order(zv_parts);
    g.z_phi_grad = reduce_in_order(zphi_parts);
    g.value_grad = scalar_grad(nets.value, scn.mu0, pairwise_sum(value_bar));
    g.phi_grad = scalar_grad(nets.phi, scn.mu0, pairwise_sum(phi_bar0));
    return g;
}

StackelbergSolution train_stackelberg(const StackelbergScenario& scn, const TrainingConfig& cfg) {
    scn.validate();
    cfg.validate();
    StackelbergSolution sol;
    sol.nets = initial_planner_nets(scn, cfg);
    PlannerNets checkpoint = sol.nets;
    double lr_factor = 1.0;
    PlannerLosses initial;

    for (std::size_t k = 0; k < cfg.iterations;) {
        const NoisePlan plan = training_plan(cfg, k, scn.grid.steps);
        PlannerGradient g;
        bool diverged = false;
        try {
            g = planner_loss_gradient(scn, sol.nets, plan, cfg.drift, cfg.subsidy_formula, cfg.chunk_size);
            if (k == 0) initial = g.loss;
            diverged = !std::isfinite(g.loss.value) || !std::isfinite(g.loss.phi) ||
                       (k > 0 && (g.loss.value > 1e6 * initial.value || g.loss.phi > 1e6 * initial.phi));
        } catch (const NumericalError&) {
            diverged = true;
        }
        if (diverged) {
            if (sol.lr_halvings > 0 || k == 0)
                throw DivergenceError("planner training diverged at iteration " + std::to_string(k),
                                      sol.value_loss_trace);
            sol.lr_halvings = 1;
            lr_factor = 0.5;
            sol.nets = checkpoint;
            continue;
        }
        sol.value_loss_trace.push_back(g.loss.value);
        sol.phi_loss_trace.push_back(g.loss.phi);
        const double lr = cfg.schedule.at(k, cfg.iterations) * lr_factor;
        step(sol.nets.value.net, g.value_grad, lr * cfg.initial_lr_scale, cfg.optimizer);
        step(sol.nets.z_value.net, g.z_value_grad, lr, cfg.optimizer);
        step(sol.nets.phi.net, g.phi_grad, lr * cfg.initial_lr_scale, cfg.optimizer);
        step(sol.nets.z_phi.net, g.z_phi_grad, lr, cfg.optimizer);
        ++k;
        if (k % 50 == 0) checkpoint = sol.nets;
    }

    const TrajectoryBatch eval = evaluate_planner(scn, sol.nets, cfg);
    sol.summary = summarize(eval);
    sol.eval_loss = losses(eval);
    return sol;
}

TrajectoryBatch evaluate_planner(const StackelbergScenario& scn, const PlannerNets& nets, const TrainingConfig& cfg) {
    return rollout_planner(scn, nets, evaluation_plan(cfg, scn.grid.steps), cfg.drift, cfg.subsidy_formula,
                           cfg.chunk_size);
}

}  // namespace mfgcap
