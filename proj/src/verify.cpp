#include "mfgcap/verify.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "costate_adjoint.hpp"
#include "mfgcap/format.hpp"
#include "mfgcap/oracles.hpp"
#include "mfgcap/report.hpp"

namespace mfgcap {

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::string cell;
    std::istringstream is(line);
    while (std::getline(is, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

double parse_cell(const std::string& cell, std::size_t row, const std::string& column) {
    double v = 0.0;
    const char* end = cell.data() + cell.size();
    auto [ptr, ec] = std::from_chars(cell.data(), end, v);
    if (ec != std::errc() || ptr != end)
        throw std::runtime_error("row " + std::to_string(row) + ", column " + column + ": not a number '" + cell + "'");
    return v;
}

CheckResult check(std::string name, bool passed, std::string detail) {
    return {std::move(name), passed, std::move(detail)};
}

/// y_l(t) - eps <= y <= y_u(t) + eps over aligned (t, y) columns.
CheckResult bounds_check(const std::string& name, const std::vector<double>& t, const std::vector<double>& y,
                         const MarketParams& m, double horizon, double slack) {
    const double eps = slack * costate_upper(0.0, horizon, m);
    std::size_t violations = 0;
    double worst = 0.0;
    std::size_t first = 0;
    for (std::size_t k = 0; k < y.size(); ++k) {
        const double lo = costate_lower(t[k], horizon, m) - eps;
        const double hi = costate_upper(t[k], horizon, m) + eps;
        const double excess = std::max(lo - y[k], y[k] - hi);
        if (!(excess <= 0.0)) {
            if (violations == 0) first = k;
            ++violations;
            worst = std::max(worst, std::isfinite(excess) ? excess : INFINITY);
        }
    }
    if (violations == 0)
        return check(name, true, std::to_string(y.size()) + " values within bounds (slack " + format_number(eps) + ")");
    return check(name, false,
                 std::to_string(violations) + " of " + std::to_string(y.size()) + " values outside bounds, first at row " +
                     std::to_string(first + 1) + ", worst excess " + format_number(worst));
}

bool close(double a, double b, double rel) { return std::abs(a - b) <= rel * std::max({1.0, std::abs(a), std::abs(b)}); }

}  // namespace

const std::vector<double>& CsvTable::column(const std::string& name) const {
    auto it = columns.find(name);
    if (it == columns.end()) throw std::runtime_error("missing CSV column '" + name + "'");
    return it->second;
}

CsvTable parse_csv(const std::string& text) {
    CsvTable table;
    std::istringstream is(text);
    std::string line;
    if (!std::getline(is, line)) throw std::runtime_error("empty CSV");
    table.header = split(line);
    for (const auto& h : table.header) table.columns[h];
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        const auto cells = split(line);
        if (cells.size() != table.header.size())
            throw std::runtime_error("row " + std::to_string(table.rows + 1) + " has " + std::to_string(cells.size()) +
                                     " cells, expected " + std::to_string(table.header.size()));
        for (std::size_t c = 0; c < cells.size(); ++c)
            table.columns[table.header[c]].push_back(parse_cell(cells[c], table.rows + 1, table.header[c]));
        ++table.rows;
    }
    return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
    try {
        return parse_csv(read_file(path));
    } catch (const std::runtime_error& e) {
        throw std::runtime_error(path.string() + ": " + e.what());
    }
}

std::vector<CheckResult> verify_run(const std::filesystem::path& run_dir, const VerifyOptions& opt) {
    const RunConfig config = load_config(run_dir / "config.json");
    const SolverKind kind = run_kind(run_dir);
    const nlohmann::json report = nlohmann::json::parse(read_file(run_dir / "report.json"));
    const CsvTable traj = read_csv(run_dir / "trajectories.csv");
    const CsvTable samples = read_csv(run_dir / "samples.csv");
    const MarketParams& m = config.market;
    const double horizon = config.grid.horizon;
    const DriftVariant drift = config.training.drift;

    std::vector<CheckResult> out;
    const bool planner = kind == SolverKind::stackelberg;
    const std::string y_col = planner ? "phi" : "muY";

    out.push_back(bounds_check("costate_bounds", samples.column("t"), samples.column(y_col), m, horizon, opt.bound_slack));
    out.push_back(bounds_check("costate_bounds_mean", traj.column("t"), traj.column(planner ? "phi_mean" : "muY_mean"), m,
                               horizon, opt.bound_slack));

    {
        const auto& y = samples.column(y_col);
        const auto& alpha = samples.column("alpha");
        const std::vector<double> zero(y.size(), 0.0);
        const auto& v = planner ? samples.column("v_hat") : zero;
        std::size_t bad = 0;
        for (std::size_t k = 0; k < y.size(); ++k)
            if (!close(alpha[k], detail::installation_rate(y[k], v[k], m, drift), 1e-9)) ++bad;
        out.push_back(check("control_formula", bad == 0,
                            bad == 0 ? "alpha matches the installation rate on every sample row"
                                     : std::to_string(bad) + " rows with alpha inconsistent with the costate"));
    }

    if (!planner) {
        const double y0 = report.at("y0").get<double>();
        const double first = traj.column("muY_mean").front();
        out.push_back(check("initial_costate", close(y0, first, 1e-9),
                            "report y0 " + format_number(y0) + ", trajectory mean " + format_number(first)));
        const auto& prices = samples.column("price");
        const double cap = price_cap(m.price);
        const bool capped = std::all_of(prices.begin(), prices.end(), [&](double p) { return p == cap; });
        if (capped) {
            const double oracle = capped_y(0.0, horizon, m.delta, cap, m.c_p);
            const double rel = std::abs(y0 - oracle) / std::abs(oracle);
            out.push_back(check("oracle_capped_y", rel < opt.capped_tolerance,
                                "y0 " + format_number(y0) + " vs closed form " + format_number(oracle) +
                                    ", relative " + format_number(rel)));
        } else {
            out.push_back(check("oracle_capped_y", true, "not applicable, price leaves its cap"));
        }
    } else {
        if (!config.planner) throw std::runtime_error("planner run without a planner section");
        const PlannerParams& pp = *config.planner;
        const double bound = pp.subsidy_bound;
        const auto& t = samples.column("t");
        const auto& x = samples.column("muX");
        const auto& phi = samples.column("phi");
        const auto& zv = samples.column("Z_V");
        const auto& v = samples.column("v_hat");
        const auto& d = samples.column("D");
        const SubsidyFormula formula = config.training.subsidy_formula;

        std::size_t outside = 0, misclamped = 0, interior = 0, foc_bad = 0;
        double foc_worst = 0.0;
        for (std::size_t k = 0; k < v.size(); ++k) {
            if (!(std::abs(v[k]) <= bound)) ++outside;
            const double dv = formula == SubsidyFormula::divided ? zv[k] / m.sigma0 : zv[k];
            const double unclamped = 0.5 * (m.c_i - dv - phi[k]);
            if (!close(v[k], std::clamp(unclamped, -bound, bound), 1e-9)) ++misclamped;
            if (std::abs(v[k]) < bound) {
                ++interior;
                const double h = 1e-3 * (1.0 + std::abs(v[k]));
                const double hp = planner_hamiltonian(t[k], x[k], phi[k], v[k] + h, dv, d[k], m, pp);
                const double hm = planner_hamiltonian(t[k], x[k], phi[k], v[k] - h, dv, d[k], m, pp);
                const double slope = (hp - hm) / (2.0 * h);
                const double scale = (std::abs(phi[k]) + m.c_i + 2.0 * std::abs(v[k]) + std::abs(dv)) / (2.0 * m.c_a);
                const double rel = std::abs(slope) / scale;
                foc_worst = std::max(foc_worst, rel);
                if (!(rel < opt.foc_tolerance)) ++foc_bad;
            }
        }
        for (double vm : traj.column("v_hat_mean"))
            if (!(std::abs(vm) <= bound)) ++outside;
        out.push_back(check("clamp", outside == 0 && misclamped == 0,
                            outside + misclamped == 0
                                ? "every v_hat lies in [-" + format_number(bound) + ", " + format_number(bound) +
                                      "] and equals the clamped minimiser"
                                : std::to_string(outside) + " values outside [-S, S], " + std::to_string(misclamped) +
                                      " not equal to the clamped minimiser"));
        out.push_back(check("foc_residual", foc_bad == 0,
                            std::to_string(interior) + " interior rows, worst relative residual " +
                                format_number(foc_worst) + (foc_bad ? ", " + std::to_string(foc_bad) + " above tolerance" : "")));
    }

    if (opt.replay) {
        const std::string stored = read_file(run_dir / "trajectories.csv");
        const std::string again = replay_evaluation(run_dir);
        out.push_back(check("replay", stored == again,
                            stored == again ? "checkpoints reproduce trajectories.csv byte for byte"
                                            : "replayed trajectories differ from trajectories.csv"));
    }
    return out;
}

std::string format_checks(const std::vector<CheckResult>& checks) {
    std::size_t width = 0;
    for (const auto& c : checks) width = std::max(width, c.name.size());
    std::string out;
    for (const auto& c : checks) {
        out += c.passed ? "PASS  " : "FAIL  ";
        out += c.name;
        out.append(width - c.name.size() + 2, ' ');
        out += c.detail;
        out += '\n';
    }
    return out;
}

}  // namespace mfgcap
