#include "mfgcap/oracles.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mfgcap/errors.hpp"
#include "mfgcap/format.hpp"

namespace mfgcap {

namespace {

struct OdeState {
    double x;
    double y;
};

OdeState rhs(const MarketParams& m, DriftVariant drift, double t, const OdeState& s) {
    return {drift_l(t, s.x, s.y, 0.0, m, drift), driver_h(t, s.x, s.y, m)};
}

// Classical RK4 from y(0) = y0; fills the path when asked and returns y(T).
double integrate(const MfgScenario& scn, DriftVariant drift, double y0, std::size_t steps, DeterministicPath* path) {
    const MarketParams& m = scn.market;
    const double h = scn.grid.horizon / static_cast<double>(steps);
    OdeState s{scn.mu0, y0};
    if (path) {
        path->time.assign(1, 0.0);
        path->x.assign(1, s.x);
        path->y.assign(1, s.y);
    }
    for (std::size_t i = 0; i < steps; ++i) {
        const double t = static_cast<double>(i) * h;
        const OdeState k1 = rhs(m, drift, t, s);
        const OdeState k2 = rhs(m, drift, t + 0.5 * h, {s.x + 0.5 * h * k1.x, s.y + 0.5 * h * k1.y});
        const OdeState k3 = rhs(m, drift, t + 0.5 * h, {s.x + 0.5 * h * k2.x, s.y + 0.5 * h * k2.y});
        const OdeState k4 = rhs(m, drift, t + h, {s.x + h * k3.x, s.y + h * k3.y});
        s.x += h / 6.0 * (k1.x + 2.0 * k2.x + 2.0 * k3.x + k4.x);
        s.y += h / 6.0 * (k1.y + 2.0 * k2.y + 2.0 * k3.y + k4.y);
        if (!std::isfinite(s.x) || !std::isfinite(s.y)) throw NumericalError(i + 1, "shooting trajectory is not finite");
        if (path) {
            path->time.push_back(static_cast<double>(i + 1) * h);
            path->x.push_back(s.x);
            path->y.push_back(s.y);
        }
    }
    return s.y;
}

}  // namespace

double capped_y(double t, double horizon, double delta, double cap, double c_p) {
    if (t > horizon) throw std::invalid_argument("capped_y: t must not exceed the horizon");
    return (cap - c_p) * discounted_horizon(delta, horizon - t);
}

std::optional<double> alpha_crossing(double horizon, double delta, double cap, double c_p, double c_i) {
    if (!(c_i > 0.0) || !(cap > c_p)) return std::nullopt;
    if (c_i > capped_y(0.0, horizon, delta, cap, c_p)) return std::nullopt;
    // capped_y(t) = c_i  <=>  1 - e^{-delta (T - t)} = delta c_i / (M - c_p)
    const double ratio = c_i / (cap - c_p);
    const double tau = delta == 0.0 ? ratio : -std::log1p(-delta * ratio) / delta;
    return std::max(0.0, horizon - tau);
}

DeterministicPath shoot_deterministic(const MfgScenario& scn, DriftVariant drift) {
    scn.validate();
    if (scn.market.sigma0 != 0.0)
        throw ConfigError("market.sigma0", "the shooting oracle solves the noiseless system and needs sigma0 = 0");
    const std::size_t steps = 10 * scn.grid.steps;
    const double y_hi = costate_upper(0.0, scn.grid.horizon, scn.market);
    const double y_lo = costate_lower(0.0, scn.grid.horizon, scn.market);
    double scale = std::max(std::abs(y_hi), std::abs(y_lo));
    const double tol = scale > 0.0 ? 1e-8 * scale : 1e-12;
    if (scale == 0.0) scale = 1.0;

    // y(T) increases with y(0): a larger costate raises capacity, which lowers the price.
    double lo = y_lo - 0.1 * scale;
    double hi = y_hi + 0.1 * scale;
    double f_lo = integrate(scn, drift, lo, steps, nullptr);
    double f_hi = integrate(scn, drift, hi, steps, nullptr);
    std::ostringstream scan;
    for (int widen = 0; (f_lo > 0.0 || f_hi < 0.0); ++widen) {
        scan << " [" << lo << ", " << hi << "] -> (" << f_lo << ", " << f_hi << ")";
        if (widen == 20) throw NumericalError(0, "shooting bracket not found; scan:" + scan.str());
        const double width = hi - lo;
        if (f_lo > 0.0) lo -= width, f_lo = integrate(scn, drift, lo, steps, nullptr);
        if (f_hi < 0.0) hi += width, f_hi = integrate(scn, drift, hi, steps, nullptr);
    }

    DeterministicPath out;
    double mid = 0.5 * (lo + hi);
    double f_mid = integrate(scn, drift, mid, steps, nullptr);
    for (std::size_t it = 0; std::abs(f_mid) >= tol; ++it) {
        if (it == 200 || hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * std::abs(mid))
            throw NumericalError(0, "shooting did not reach |y(T)| < " + format_number(tol) +
                                        "; residual " + format_number(f_mid));
        (f_mid < 0.0 ? lo : hi) = mid;
        mid = 0.5 * (lo + hi);
        f_mid = integrate(scn, drift, mid, steps, nullptr);
        out.iterations = it + 1;
    }
    out.y0 = mid;
    integrate(scn, drift, mid, steps, &out);
    return out;
}

double path_at(const std::vector<double>& time, const std::vector<double>& values, double t) {
    if (time.empty() || time.size() != values.size()) throw std::invalid_argument("path_at: malformed path");
    if (t <= time.front()) return values.front();
    if (t >= time.back()) return values.back();
    const auto it = std::upper_bound(time.begin(), time.end(), t);
    const std::size_t k = static_cast<std::size_t>(it - time.begin());
    const double w = (t - time[k - 1]) / (time[k] - time[k - 1]);
    return values[k - 1] + w * (values[k] - values[k - 1]);
}

void FdMesh::validate() const {
    if (!(x_hi > x_lo)) throw ConfigError("fd.x_hi", "state interval must satisfy x_lo < x_hi");
    if (nx < 3) throw ConfigError("fd.nx", "need at least 3 state nodes");
}

std::size_t required_time_steps(const MarketParams& market, double horizon, const FdMesh& mesh, double v_bound) {
    mesh.validate();
    const double dx = (mesh.x_hi - mesh.x_lo) / static_cast<double>(mesh.nx - 1);
    const double y_lo = costate_lower(0.0, horizon, market);
    const double y_hi = costate_upper(0.0, horizon, market);
    const double speed = market.delta * std::max(std::abs(mesh.x_lo), std::abs(mesh.x_hi)) +
                         (std::max(std::abs(y_hi - market.c_i), std::abs(y_lo - market.c_i)) + std::abs(v_bound)) /
                             (2.0 * market.c_a);
    const double rate = speed / dx + market.sigma0 * market.sigma0 / (dx * dx) + market.delta;
    // The diagonal coefficient 1 - dt * rate must stay non-negative.
    return static_cast<std::size_t>(std::ceil(horizon * rate * (1.0 + 1e-12)));
}

PhiTable solve_phi_fd(const MarketParams& market, double horizon, const FdMesh& mesh, const Feedback& v,
                      double v_bound) {
    market.validate();
    mesh.validate();
    if (!(horizon > 0.0)) throw ConfigError("grid.horizon", "must be > 0");
    const std::size_t needed = std::max<std::size_t>(1, required_time_steps(market, horizon, mesh, v_bound));
    const std::size_t nt = mesh.nt == 0 ? needed : mesh.nt;
    if (nt < needed)
        throw ConfigError("fd.nt", "explicit scheme unstable with " + std::to_string(nt) + " time steps; need at least " +
                                       std::to_string(needed));

    const std::size_t nx = mesh.nx;
    const double dx = (mesh.x_hi - mesh.x_lo) / static_cast<double>(nx - 1);
    const double dt = horizon / static_cast<double>(nt);
    const double diff = 0.5 * market.sigma0 * market.sigma0 / (dx * dx);

    PhiTable table;
    table.time.resize(nt + 1);
    table.state.resize(nx);
    for (std::size_t n = 0; n <= nt; ++n) table.time[n] = static_cast<double>(n) * dt;
    table.time[nt] = horizon;
    for (std::size_t j = 0; j < nx; ++j) table.state[j] = mesh.x_lo + static_cast<double>(j) * dx;
    table.values.assign((nt + 1) * nx, 0.0);

    std::vector<double> next(nx, 0.0), cur(nx);
    for (std::size_t n = nt; n-- > 0;) {
        const double t = table.time[n];
        for (std::size_t j = 1; j + 1 < nx; ++j) {
            const double x = table.state[j];
            const double phi = next[j];
            const double sub = v ? v(t, x) : 0.0;
            if (std::abs(sub) > std::abs(v_bound))
                throw ConfigError("fd.v_bound", "feedback value " + format_number(sub) + " exceeds the declared bound");
            const double l = drift_l(t, x, phi, sub, market);
            const double adv = l > 0.0 ? l * (next[j + 1] - phi) / dx : l * (phi - next[j - 1]) / dx;
            const double lap = diff * (next[j + 1] - 2.0 * phi + next[j - 1]);
            cur[j] = phi + dt * (adv + lap - driver_h(t, x, phi, market));
        }
        cur[0] = cur[1];
        cur[nx - 1] = cur[nx - 2];
        std::copy(cur.begin(), cur.end(), table.values.begin() + static_cast<std::ptrdiff_t>(n * nx));
        next.swap(cur);
    }
    return table;
}

double PhiTable::operator()(double t, double x) const {
    const std::size_t nt = time.size() - 1;
    const std::size_t nx = state.size();
    const double tc = std::clamp(t, time.front(), time.back());
    const double xc = std::clamp(x, state.front(), state.back());
    const double ft = (tc - time.front()) / (time.back() - time.front()) * static_cast<double>(nt);
    const double fx = (xc - state.front()) / (state.back() - state.front()) * static_cast<double>(nx - 1);
    const std::size_t n = std::min(static_cast<std::size_t>(ft), nt - 1);
    const std::size_t j = std::min(static_cast<std::size_t>(fx), nx - 2);
    const double wt = ft - static_cast<double>(n);
    const double wx = fx - static_cast<double>(j);
    const double a = value(n, j) * (1.0 - wx) + value(n, j + 1) * wx;
    const double b = value(n + 1, j) * (1.0 - wx) + value(n + 1, j + 1) * wx;
    return a * (1.0 - wt) + b * wt;
}

void PhiTable::write_csv(const std::string& path) const {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("cannot open " + path + " for writing");
    os << "t,x,phi\n";
    for (std::size_t n = 0; n < time.size(); ++n)
        for (std::size_t j = 0; j < state.size(); ++j)
            os << format_number(time[n]) << ',' << format_number(state[j]) << ',' << format_number(value(n, j)) << '\n';
    if (!os) throw std::runtime_error("write failed for " + path);
}

}  // namespace mfgcap
