#pragma once

// Reverse sweep through the Euler scheme of the (muX, muY) pair, shared by
// the unsubsidized solver and the decoupling-field group of the planner solver.

#include <Eigen/Dense>

#include <span>
#include <vector>

#include "mfgcap/model.hpp"
#include "mfgcap/network_field.hpp"
#include "mfgcap/paths.hpp"

namespace mfgcap::detail {

/// States and z-network activations of one chunk, recorded by the forward pass.
struct CostateTape {
    std::vector<Eigen::VectorXd> x;   // x[i] for i < steps
    std::vector<Eigen::VectorXd> dw;  // dw[i] for i < steps
    std::vector<ForwardCache> z_cache;

    void reset(std::size_t steps) {
        x.resize(steps);
        dw.resize(steps);
        z_cache.resize(steps);
    }
};

/// Installation rate recorded with a trajectory; matches the capacity drift variant.
inline double installation_rate(double y, double v, const MarketParams& p, DriftVariant drift) {
    if (drift == DriftVariant::optimal_control) return optimal_alpha(y, v, p.c_a, p.c_i);
    return (y - p.c_i + v) / p.c_a;
}

/// One Euler-Maruyama step of the (muX, muY) pair under subsidy v. Both
/// solvers advance the pair through this function.
inline void advance_pair(const MarketParams& m, DriftVariant drift, double t, double dt, double v, double z,
                         double dw, double& x, double& y) {
    const double x0 = x;
    const double y0 = y;
    x = em_step(x0, drift_l(t, x0, y0, v, m, drift), dt, m.sigma0, dw);
    y = em_step(y0, driver_h(t, x0, y0, m), dt, z, dw);
}

inline double control_gain(const MarketParams& p, DriftVariant drift) {
    return drift == DriftVariant::optimal_control ? 1.0 / (2.0 * p.c_a) : 1.0 / p.c_a;
}

/// Propagates the adjoint of muY_T back to step 0. Gradients with respect to
/// the z-network parameters are added into `z_grad`; returns the adjoint of muY_0.
inline Eigen::VectorXd costate_backward(const MarketParams& market, const Grid& grid, DriftVariant drift,
                                        const NetworkField& z, const CostateTape& tape,
                                        const Eigen::VectorXd& y_bar_terminal, std::span<double> z_grad) {
    const double dt = grid.dt();
    const double gain = control_gain(market, drift);
    Eigen::VectorXd y_bar = y_bar_terminal;
    Eigen::VectorXd x_bar = Eigen::VectorXd::Zero(y_bar.size());
    Eigen::MatrixXd in_grad;
    Eigen::RowVectorXd upstream(y_bar.size());
    for (std::size_t i = grid.steps; i-- > 0;) {
        const double t = grid.time(i);
        upstream = (y_bar.array() * tape.dw[i].array() * z.scale).matrix().transpose();
        backward_batch(z.net, tape.z_cache[i], upstream, z_grad, &in_grad);
        Eigen::VectorXd next_x_bar = x_bar * (1.0 - market.delta * dt);
        for (Eigen::Index j = 0; j < y_bar.size(); ++j) {
            next_x_bar(j) += -y_bar(j) * price_dx(market.price, t, tape.x[i](j)) * dt +
                             in_grad(1, j) / z.input.x_half_width;
        }
        y_bar = y_bar * (1.0 + market.delta * dt) + x_bar * (gain * dt);
        x_bar = std::move(next_x_bar);
    }
    return y_bar;
}

}  // namespace mfgcap::detail
