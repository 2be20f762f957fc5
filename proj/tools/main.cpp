// mfgcap: solve the capacity game or the planner problem from a scenario
// file, evaluate the oracles, and check finished run directories.
//
// Exit codes: 0 success, 1 configuration or usage error, 2 numerical
// divergence, 3 invariant failure reported by `verify`.

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"

#include "mfgcap/config.hpp"
#include "mfgcap/errors.hpp"
#include "mfgcap/format.hpp"
#include "mfgcap/oracles.hpp"
#include "mfgcap/report.hpp"
#include "mfgcap/verify.hpp"

namespace fs = std::filesystem;
using namespace mfgcap;

namespace {

constexpr int kExitConfig = 1;
constexpr int kExitDivergence = 2;
constexpr int kExitInvariant = 3;

/// Command-line overrides of the training section.
struct Overrides {
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> iterations;
    std::optional<std::size_t> batch;
    std::optional<double> lr;
    bool paper_drift = false;
    bool undivided_z = false;
};

void add_overrides(CLI::App* cmd, Overrides& o) {
    cmd->add_option("--seed", o.seed, "Override the scenario seed");
    cmd->add_option("--iterations", o.iterations, "Override training.iterations");
    cmd->add_option("--batch", o.batch, "Override training.batch");
    cmd->add_option("--lr", o.lr, "Override the initial learning rate");
    cmd->add_flag("--compat-paper-drift", o.paper_drift, "Installation rate (y - c_i + v) / c_a in the forward drift");
    cmd->add_flag("--compat-undivided-z", o.undivided_z, "Subsidy reads Z_V without dividing by sigma0");
}

RunConfig load_with_overrides(const std::string& path, const Overrides& o) {
    RunConfig c = load_config(path);
    TrainingConfig& t = c.training;
    if (o.seed) t.seed = *o.seed;
    if (o.iterations) t.iterations = *o.iterations;
    if (o.batch) t.batch = *o.batch;
    if (o.lr) t.schedule.initial = *o.lr;
    if (o.paper_drift) t.drift = DriftVariant::pseudocode;
    if (o.undivided_z) t.subsidy_formula = SubsidyFormula::undivided;
    t.validate();
    return c;
}

fs::path default_out(const std::string& config_path) { return fs::path("runs") / fs::path(config_path).stem(); }

int run_solve(const std::string& config_path, const std::string& out, const Overrides& o, SolverKind kind) {
    const RunConfig config = load_with_overrides(config_path, o);
    const fs::path dir = out.empty() ? default_out(config_path) : fs::path(out);
    const SolveReport report = kind == SolverKind::mfg ? solve_and_export(config, dir) : export_planner(config, dir);
    write_manifest(config, report, dir);
    const auto& s = report.summary;
    if (kind == SolverKind::mfg) {
        std::cout << "final loss " << format_number(s.at("final_loss").get<double>()) << '\n';
        std::cout << "y0 " << format_number(s.at("y0").get<double>()) << '\n';
    } else {
        std::cout << "final loss V " << format_number(s.at("final_loss").at("value").get<double>()) << ", phi "
                  << format_number(s.at("final_loss").at("phi").get<double>()) << '\n';
        std::cout << "V0 " << format_number(s.at("V0").get<double>()) << '\n';
        std::cout << "phi0 " << format_number(s.at("phi0").get<double>()) << '\n';
    }
    std::cout << "seed " << config.training.seed << '\n';
    std::cout << "output " << dir.string() << " (" << format_number(report.wall_clock_seconds) << " s)\n";
    return 0;
}

int run_verify(const std::string& run_dir, bool replay) {
    VerifyOptions opt;
    opt.replay = replay;
    const auto checks = verify_run(run_dir, opt);
    std::cout << format_checks(checks);
    std::size_t failed = 0;
    for (const auto& c : checks)
        if (!c.passed) ++failed;
    if (failed) {
        std::cout << failed << " invariant(s) failed\n";
        return kExitInvariant;
    }
    std::cout << "all invariants hold\n";
    return 0;
}

std::string fixed4(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Mean-field capacity game and planner solver"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    Overrides overrides;

    auto* mfg = app.add_subcommand("solve-mfg", "Train the unsubsidized game and export a run directory");
    mfg->add_option("config", config_path, "Scenario file")->required();
    mfg->add_option("--out", out_dir, "Output directory (default runs/<config name>)");
    add_overrides(mfg, overrides);

    auto* stk = app.add_subcommand("solve-stackelberg", "Train the planner problem and export a run directory");
    stk->add_option("config", config_path, "Scenario file")->required();
    stk->add_option("--out", out_dir, "Output directory (default runs/<config name>)");
    add_overrides(stk, overrides);

    std::string run_dir;
    bool no_replay = false;
    auto* ver = app.add_subcommand("verify", "Check the invariants of a finished run directory");
    ver->add_option("run_dir", run_dir, "Run directory")->required();
    ver->add_flag("--no-replay", no_replay, "Skip recomputing the evaluation rollout from checkpoints");

    auto* oracle = app.add_subcommand("oracle", "Closed-form and grid-based reference values");
    oracle->require_subcommand(1);

    double t = 0.0, horizon = 1.0, delta = 0.005, cap = 300.0, c_p = 5.65, c_i = 37.35;
    auto add_market = [&](CLI::App* cmd) {
        cmd->add_option("--T", horizon, "Horizon, years")->capture_default_str();
        cmd->add_option("--delta", delta, "Capacity decay rate")->capture_default_str();
        cmd->add_option("--M", cap, "Price cap")->capture_default_str();
        cmd->add_option("--c_p", c_p, "Production cost")->capture_default_str();
    };
    auto* ocy = oracle->add_subcommand("capped-y", "Costate when the price stays at its cap");
    ocy->add_option("--t", t, "Time")->capture_default_str();
    add_market(ocy);
    auto* ocr = oracle->add_subcommand("crossing", "Time at which the capped-price control changes sign");
    add_market(ocr);
    ocr->add_option("--c_i", c_i, "Installation cost")->capture_default_str();

    std::string csv_out;
    auto* osh = oracle->add_subcommand("shoot", "Noiseless paths by shooting (requires sigma0 = 0)");
    osh->add_option("config", config_path, "Scenario file")->required();
    osh->add_option("--csv", csv_out, "Write t,x,y to this file");

    FdMesh mesh;
    std::optional<double> x_lo, x_hi;
    auto* ofd = oracle->add_subcommand("phi-fd", "Finite-difference decoupling field with zero subsidy");
    ofd->add_option("config", config_path, "Scenario file")->required();
    ofd->add_option("--csv", csv_out, "Write the t,x,phi mesh to this file")->required();
    ofd->add_option("--nx", mesh.nx, "State points")->capture_default_str();
    ofd->add_option("--nt", mesh.nt, "Time steps (0 picks the smallest stable count)")->capture_default_str();
    ofd->add_option("--x-lo", x_lo, "Lower state bound");
    ofd->add_option("--x-hi", x_hi, "Upper state bound");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitConfig;
    }

    try {
        if (*mfg) return run_solve(config_path, out_dir, overrides, SolverKind::mfg);
        if (*stk) return run_solve(config_path, out_dir, overrides, SolverKind::stackelberg);
        if (*ver) return run_verify(run_dir, !no_replay);
        if (*ocy) {
            if (!(horizon > 0.0) || t < 0.0 || t > horizon) throw ConfigError("t", "must lie in [0, T] with T > 0");
            std::cout << fixed4(capped_y(t, horizon, delta, cap, c_p)) << '\n';
            return 0;
        }
        if (*ocr) {
            const auto ts = alpha_crossing(horizon, delta, cap, c_p, c_i);
            if (!ts) throw ConfigError("c_i", "no sign change: c_i must lie in (0, capped_y(0))");
            std::cout << fixed4(*ts) << '\n';
            return 0;
        }
        if (*osh) {
            const DeterministicPath path = shoot_deterministic(mfg_scenario(load_config(config_path)));
            std::cout << "y0 " << format_number(path.y0) << " (" << path.iterations << " iterations)\n";
            if (!csv_out.empty()) {
                std::string text = "t,x,y\n";
                for (std::size_t i = 0; i < path.time.size(); ++i)
                    text += format_number(path.time[i]) + ',' + format_number(path.x[i]) + ',' + format_number(path.y[i]) + '\n';
                write_file_atomic(csv_out, text);
            }
            return 0;
        }
        if (*ofd) {
            const RunConfig c = load_config(config_path);
            const MfgScaling s = make_scaling(c.market, c.grid, c.mu0);
            mesh.x_lo = x_lo.value_or(s.input.x_center - s.input.x_half_width);
            mesh.x_hi = x_hi.value_or(s.input.x_center + s.input.x_half_width);
            const PhiTable table = solve_phi_fd(c.market, c.grid.horizon, mesh);
            table.write_csv(csv_out);
            std::cout << "phi(0, mu0) " << format_number(table(0.0, c.mu0)) << '\n';
            std::cout << "mesh " << table.state.size() << " x " << table.time.size() << " written to " << csv_out << '\n';
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << '\n';
        return kExitConfig;
    } catch (const DivergenceError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const NumericalError& e) {
        std::cerr << "divergence: " << e.what() << '\n';
        return kExitDivergence;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitConfig;
    }
    return kExitConfig;
}
