#pragma once

// Reference solutions used to check the trained solvers: closed forms for the
// capped-price regime, a shooting solver for the noiseless system and an
// explicit finite-difference solver for the decoupling-field PDE.

#include <cstddef>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mfgcap/mfg_solver.hpp"
#include "mfgcap/model.hpp"

namespace mfgcap {

/// Costate when the price stays at M: (M - c_p)(1 - e^{-delta (T - t)}) / delta.
double capped_y(double t, double horizon, double delta, double cap, double c_p);

/// Time at which capped_y(t) falls to c_i, i.e. where the installation rate
/// changes sign. Empty when c_i lies outside (0, capped_y(0)].
std::optional<double> alpha_crossing(double horizon, double delta, double cap, double c_p, double c_i);

struct DeterministicPath {
    std::vector<double> time;
    std::vector<double> x;
    std::vector<double> y;
    double y0 = 0.0;
    std::size_t iterations = 0;
};

/// Noiseless (x, y) system solved by shooting on y(0) with RK4 on 10x the
/// scenario grid. Requires sigma0 == 0.
DeterministicPath shoot_deterministic(const MfgScenario& scn,
                                      DriftVariant drift = DriftVariant::optimal_control);

/// Linear interpolation of a path at time t.
double path_at(const std::vector<double>& time, const std::vector<double>& values, double t);

/// Mesh of the finite-difference solve. nt == 0 picks the smallest stable count.
struct FdMesh {
    double x_lo = 0.0;
    double x_hi = 0.0;
    std::size_t nx = 401;
    std::size_t nt = 0;

    void validate() const;
};

/// Feedback subsidy v(t, x) entering the PDE drift. Empty means v = 0.
using Feedback = std::function<double(double, double)>;

/// phi on a (time, state) mesh, row-major by time: value(n, j) at time[n], state[j].
struct PhiTable {
    std::vector<double> time;
    std::vector<double> state;
    std::vector<double> values;

    double value(std::size_t n, std::size_t j) const { return values[n * state.size() + j]; }
    /// Bilinear interpolation; states outside the mesh are clamped to its edge.
    double operator()(double t, double x) const;
    void write_csv(const std::string& path) const;
};

/// Smallest time-step count for which the explicit scheme is monotone on `mesh`,
/// given |v| <= v_bound.
std::size_t required_time_steps(const MarketParams& market, double horizon, const FdMesh& mesh, double v_bound);

/// Backward explicit solve of the decoupling-field PDE with upwinded drift,
/// centred diffusion and zero-slope boundaries. Throws ConfigError when the
/// requested time steps are below required_time_steps.
PhiTable solve_phi_fd(const MarketParams& market, double horizon, const FdMesh& mesh, const Feedback& v = {},
                      double v_bound = 0.0);

}  // namespace mfgcap
