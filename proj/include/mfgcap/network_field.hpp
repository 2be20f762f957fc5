#pragma once

#include <Eigen/Dense>

#include "mfgcap/approximator.hpp"

namespace mfgcap {

/// Affine map of (t, x) onto [0, 1] x [-1, 1] over the region a scenario can visit.
struct InputScaling {
    double horizon = 1.0;
    double x_center = 0.0;
    double x_half_width = 1.0;

    double t_norm(double t) const { return t / horizon; }
    double x_norm(double x) const { return (x - x_center) / x_half_width; }
};

/// A network evaluated on rescaled inputs whose raw output is mapped to
/// physical units as offset + scale * net(t_norm, x_norm).
struct NetworkField {
    NetParams net;
    InputScaling input;
    double offset = 0.0;
    double scale = 1.0;

    double operator()(double t, double x) const {
        const double in[2] = {input.t_norm(t), input.x_norm(x)};
        return offset + scale * forward(net, in);
    }
};

/// Fills the 2 x n network input for time t and states x.
inline void fill_inputs(const InputScaling& s, double t, const Eigen::VectorXd& x, Eigen::MatrixXd& inputs) {
    inputs.resize(2, x.size());
    inputs.row(0).setConstant(s.t_norm(t));
    inputs.row(1) = ((x.array() - s.x_center) / s.x_half_width).matrix().transpose();
}

}  // namespace mfgcap
