#include "mfgcap/report.hpp"

#include <chrono>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <thread>

#include <unistd.h>

#include "mfgcap/format.hpp"

namespace mfgcap {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

void append_row(std::string& out, std::initializer_list<double> values) {
    bool first = true;
    for (double v : values) {
        if (!first) out += ',';
        out += format_number(v);
        first = false;
    }
    out += '\n';
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw std::runtime_error("cannot create directory " + dir.string() + ": " + ec.message());
}

json trace_json(const std::vector<double>& trace) {
    json a = json::array();
    for (double v : trace) a.push_back(v);
    return a;
}

json seeds_json(const TrainingConfig& cfg) {
    return {{"seed", cfg.seed},
            {"training_streams", {0, cfg.iterations - 1}},
            {"evaluation_stream", kEvaluationStream},
            {"evaluation_batch", cfg.batch * cfg.eval_multiplier}};
}

json arch_json(const Arch& a, const NetworkField& f) {
    return {{"layers", describe(a)},
            {"init", "glorot-uniform weights, zero biases"},
            {"input", {{"t_scale", f.input.horizon}, {"x_center", f.input.x_center}, {"x_half_width", f.input.x_half_width}}},
            {"output", {{"offset", f.offset}, {"scale", f.scale}}}};
}

void save_net(const NetworkField& f, const fs::path& dir, const std::string& name, std::vector<fs::path>& files) {
    const fs::path p = dir / "nets" / (name + ".ckpt");
    save_checkpoint(f.net, p);
    files.push_back(p);
}

void load_net(NetworkField& f, const fs::path& dir, const std::string& name) {
    NetParams p = load_checkpoint(dir / "nets" / (name + ".ckpt"));
    if (!(p.arch == f.net.arch))
        throw std::runtime_error("checkpoint " + name + " has architecture " + describe(p.arch) + ", expected " +
                                 describe(f.net.arch));
    f.net = std::move(p);
}

void write_common(const RunConfig& config, const fs::path& out_dir, const std::string& trajectories,
                  const std::string& samples, SolveReport& report) {
    write_file_atomic(out_dir / "config.json", to_json(config).dump(2) + "\n");
    write_file_atomic(out_dir / "trajectories.csv", trajectories);
    write_file_atomic(out_dir / "samples.csv", samples);
    report.files.push_back(out_dir / "config.json");
    report.files.push_back(out_dir / "trajectories.csv");
    report.files.push_back(out_dir / "samples.csv");
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::string trajectories_csv(const RolloutSummary& s, SolverKind kind) {
    std::string out;
    if (kind == SolverKind::mfg) {
        out = "t,muX_mean,muX_p05,muX_p95,muY_mean,alpha_mean,price_mean\n";
        for (std::size_t i = 0; i < s.time.size(); ++i)
            append_row(out, {s.time[i], s.mu_x_mean[i], s.mu_x_p05[i], s.mu_x_p95[i], s.mu_y_mean[i], s.alpha_mean[i],
                             s.price_mean[i]});
    } else {
        out = "t,muX_mean,muX_p05,muX_p95,phi_mean,V_mean,v_hat_mean,alpha_mean,D,price_mean\n";
        for (std::size_t i = 0; i < s.time.size(); ++i)
            append_row(out, {s.time[i], s.mu_x_mean[i], s.mu_x_p05[i], s.mu_x_p95[i], s.mu_y_mean[i], s.value_mean[i],
                             s.subsidy_mean[i], s.alpha_mean[i], s.demand[i], s.price_mean[i]});
    }
    return out;
}

std::string samples_csv(const TrajectoryBatch& b, std::size_t max_samples) {
    const std::size_t n = std::min(max_samples, b.batch);
    std::string out;
    if (!b.planner()) {
        out = "sample,t,muX,muY,z,alpha,price\n";
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i <= b.steps; ++i) {
                const std::size_t k = b.index(i, j);
                append_row(out, {static_cast<double>(j), b.time[i], b.mu_x[k], b.mu_y[k], b.z[k], b.alpha[k], b.price[k]});
            }
    } else {
        out = "sample,t,muX,phi,V,z_phi,Z_V,v_hat,alpha,D,price\n";
        for (std::size_t j = 0; j < n; ++j)
            for (std::size_t i = 0; i <= b.steps; ++i) {
                const std::size_t k = b.index(i, j);
                append_row(out, {static_cast<double>(j), b.time[i], b.mu_x[k], b.mu_y[k], b.value[k], b.z[k],
                                 b.z_value[k], b.subsidy[k], b.alpha[k], b.demand[i], b.price[k]});
            }
    }
    return out;
}

SolveReport solve_and_export(const RunConfig& config, const fs::path& out_dir, const ExportOptions& options) {
    const MfgScenario scn = mfg_scenario(config);
    ensure_dir(out_dir / "nets");
    const auto t0 = std::chrono::steady_clock::now();
    const MfgSolution sol = train(scn, config.training);
    const TrajectoryBatch eval = evaluate(scn, sol.nets, config.training);

    SolveReport report;
    report.kind = SolverKind::mfg;
    write_common(config, out_dir, trajectories_csv(summarize(eval), SolverKind::mfg), samples_csv(eval, options.sample_rows),
                 report);
    save_net(sol.nets.y, out_dir, "y0", report.files);
    save_net(sol.nets.z, out_dir, "z", report.files);
    report.wall_clock_seconds = seconds_since(t0);

    report.summary = {
        {"solver", "mfg"},
        {"description", config.description},
        {"config", to_json(config)},
        {"seeds", seeds_json(config.training)},
        {"arch", {{"y0", arch_json(sol.nets.y.net.arch, sol.nets.y)}, {"z", arch_json(sol.nets.z.net.arch, sol.nets.z)}}},
        {"y0", sol.y0},
        {"final_loss", sol.loss_trace.empty() ? 0.0 : sol.loss_trace.back()},
        {"eval_loss", loss(eval)},
        {"lr_halvings", sol.lr_halvings},
        {"loss_trace", trace_json(sol.loss_trace)},
        {"wall_clock_seconds", report.wall_clock_seconds},
    };
    write_file_atomic(out_dir / "report.json", report.summary.dump(2) + "\n");
    report.files.push_back(out_dir / "report.json");
    return report;
}

SolveReport export_planner(const RunConfig& config, const fs::path& out_dir, const ExportOptions& options) {
    const StackelbergScenario scn = stackelberg_scenario(config);
    ensure_dir(out_dir / "nets");
    const auto t0 = std::chrono::steady_clock::now();
    const StackelbergSolution sol = train_stackelberg(scn, config.training);
    const TrajectoryBatch eval = evaluate_planner(scn, sol.nets, config.training);
    const PlannerLosses eval_loss = losses(eval);

    SolveReport report;
    report.kind = SolverKind::stackelberg;
    write_common(config, out_dir, trajectories_csv(summarize(eval), SolverKind::stackelberg),
                 samples_csv(eval, options.sample_rows), report);
    save_net(sol.nets.value, out_dir, "value0", report.files);
    save_net(sol.nets.phi, out_dir, "phi0", report.files);
    save_net(sol.nets.z_value, out_dir, "z_value", report.files);
    save_net(sol.nets.z_phi, out_dir, "z_phi", report.files);
    report.wall_clock_seconds = seconds_since(t0);

    report.summary = {
        {"solver", "stackelberg"},
        {"description", config.description},
        {"config", to_json(config)},
        {"seeds", seeds_json(config.training)},
        {"arch",
         {{"value0", arch_json(sol.nets.value.net.arch, sol.nets.value)},
          {"phi0", arch_json(sol.nets.phi.net.arch, sol.nets.phi)},
          {"z_value", arch_json(sol.nets.z_value.net.arch, sol.nets.z_value)},
          {"z_phi", arch_json(sol.nets.z_phi.net.arch, sol.nets.z_phi)}}},
        {"planner", {{"lambda_d", scn.planner.lambda_d}, {"S", scn.planner.subsidy_bound}}},
        {"V0", sol.nets.value(0.0, scn.mu0)},
        {"phi0", sol.nets.phi(0.0, scn.mu0)},
        {"final_loss", {{"value", sol.value_loss_trace.back()}, {"phi", sol.phi_loss_trace.back()}}},
        {"eval_loss", {{"value", eval_loss.value}, {"phi", eval_loss.phi}}},
        {"lr_halvings", sol.lr_halvings},
        {"value_loss_trace", trace_json(sol.value_loss_trace)},
        {"phi_loss_trace", trace_json(sol.phi_loss_trace)},
        {"wall_clock_seconds", report.wall_clock_seconds},
    };
    write_file_atomic(out_dir / "report.json", report.summary.dump(2) + "\n");
    report.files.push_back(out_dir / "report.json");
    return report;
}

SolverKind run_kind(const fs::path& run_dir) {
    const json rep = json::parse(read_file(run_dir / "report.json"));
    const std::string solver = rep.at("solver").get<std::string>();
    if (solver == "mfg") return SolverKind::mfg;
    if (solver == "stackelberg") return SolverKind::stackelberg;
    throw std::runtime_error("unknown solver '" + solver + "' in " + (run_dir / "report.json").string());
}

std::string replay_evaluation(const fs::path& run_dir) {
    const RunConfig config = load_config(run_dir / "config.json");
    if (run_kind(run_dir) == SolverKind::mfg) {
        const MfgScenario scn = mfg_scenario(config);
        CostateNets nets = initial_costate_nets(scn, config.training);
        load_net(nets.y, run_dir, "y0");
        load_net(nets.z, run_dir, "z");
        return trajectories_csv(summarize(evaluate(scn, nets, config.training)), SolverKind::mfg);
    }
    const StackelbergScenario scn = stackelberg_scenario(config);
    PlannerNets nets = initial_planner_nets(scn, config.training);
    load_net(nets.value, run_dir, "value0");
    load_net(nets.phi, run_dir, "phi0");
    load_net(nets.z_value, run_dir, "z_value");
    load_net(nets.z_phi, run_dir, "z_phi");
    return trajectories_csv(summarize(evaluate_planner(scn, nets, config.training)), SolverKind::stackelberg);
}

std::string version_string() {
#ifdef MFGCAP_VERSION
    return MFGCAP_VERSION;
#else
    return "unknown";
#endif
}

void write_manifest(const RunConfig& config, const SolveReport& report, const fs::path& out_dir) {
    char host[256] = {};
    if (gethostname(host, sizeof host - 1) != 0) host[0] = '\0';
    const char* threads = std::getenv("MFG_THREADS");
    json files = json::array();
    for (const auto& f : report.files) files.push_back(fs::relative(f, out_dir).generic_string());
    const json manifest = {
        {"solver", report.kind == SolverKind::mfg ? "mfg" : "stackelberg"},
        {"version", version_string()},
        {"config", to_json(config)},
        {"seeds", seeds_json(config.training)},
        {"files", files},
        {"wall_clock_seconds", report.wall_clock_seconds},
        {"host",
         {{"name", host},
          {"hardware_threads", std::thread::hardware_concurrency()},
          {"MFG_THREADS", threads ? json(threads) : json(nullptr)},
          {"compiler", __VERSION__}}},
    };
    write_file_atomic(out_dir / "manifest.json", manifest.dump(2) + "\n");
}

void write_file_atomic(const fs::path& path, const std::string& text) {
    fs::path tmp = path;
    tmp += ".tmp";
    {
        std::ofstream os(tmp, std::ios::binary | std::ios::trunc);
        if (!os) throw std::runtime_error("cannot open " + tmp.string() + " for writing");
        os << text;
        os.flush();
        if (!os) throw std::runtime_error("write failed for " + tmp.string());
    }
    std::error_code ec;
    fs::rename(tmp, path, ec);
    if (ec) throw std::runtime_error("cannot rename " + tmp.string() + " to " + path.string() + ": " + ec.message());
}

std::string read_file(const fs::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot read " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

}  // namespace mfgcap
