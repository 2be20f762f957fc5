#pragma once

// Run directories: trained checkpoints, per-step CSV summaries, a per-sample
// subset of the evaluation rollout and a JSON report.
//
//   config.json        resolved configuration (re-loadable)
//   trajectories.csv   one row per grid point
//   samples.csv        the first `sample_rows` evaluation samples, every step
//   report.json        losses, initial values, architecture, seeds, timing
//   nets/*.ckpt        network checkpoints

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

#include "mfgcap/config.hpp"

namespace mfgcap {

enum class SolverKind { mfg, stackelberg };

struct SolveReport {
    SolverKind kind = SolverKind::mfg;
    nlohmann::json summary;
    std::vector<std::filesystem::path> files;
    double wall_clock_seconds = 0.0;
};

struct ExportOptions {
    std::size_t sample_rows = 100;
};

/// Fixed-column CSV of per-step statistics. Planner runs add phi, V, subsidy and demand.
std::string trajectories_csv(const RolloutSummary& s, SolverKind kind);

/// Per-sample rows (sample, t, state columns) for the first `max_samples` samples.
std::string samples_csv(const TrajectoryBatch& batch, std::size_t max_samples);

/// Trains the unsubsidized game and writes a run directory.
SolveReport solve_and_export(const RunConfig& config, const std::filesystem::path& out_dir,
                             const ExportOptions& options = {});

/// Trains the planner problem and writes a run directory.
SolveReport export_planner(const RunConfig& config, const std::filesystem::path& out_dir,
                           const ExportOptions& options = {});

/// Reloads config.json and the checkpoints of a run directory and recomputes
/// the evaluation rollout; returns the trajectories CSV it would write.
std::string replay_evaluation(const std::filesystem::path& run_dir);

/// Solver kind recorded in a run directory's report.json.
SolverKind run_kind(const std::filesystem::path& run_dir);

/// Version string of the build (git describe when available).
std::string version_string();

/// Writes manifest.json after a successful run: resolved config, version,
/// effective seed, output files, wall-clock and host details.
void write_manifest(const RunConfig& config, const SolveReport& report, const std::filesystem::path& out_dir);

/// Writes `text` to `path` via a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& text);

std::string read_file(const std::filesystem::path& path);

}  // namespace mfgcap
