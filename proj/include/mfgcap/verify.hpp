#pragma once

// Post-hoc checks of a run directory written by solve_and_export or
// export_planner. Every check reads the stored CSV files, so tampered
// outputs are caught without retraining.

#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mfgcap {

/// Numeric CSV with a header row; columns keyed by header name.
struct CsvTable {
    std::vector<std::string> header;
    std::map<std::string, std::vector<double>> columns;
    std::size_t rows = 0;

    /// Throws std::runtime_error when the column is absent.
    const std::vector<double>& column(const std::string& name) const;
};

CsvTable parse_csv(const std::string& text);
CsvTable read_csv(const std::filesystem::path& path);

struct CheckResult {
    std::string name;
    bool passed = false;
    std::string detail;
};

struct VerifyOptions {
    /// Costate slack as a fraction of the upper bound at t = 0.
    double bound_slack = 0.02;
    /// Relative tolerance of the central-difference first-order condition.
    double foc_tolerance = 1e-6;
    /// Relative tolerance of the capped-price oracle against the stored y0.
    double capped_tolerance = 0.01;
    /// Recompute the evaluation rollout from checkpoints and compare bytes.
    bool replay = true;
};

/// Runs every applicable check. Throws for unreadable or malformed run
/// directories; failed invariants are reported, not thrown.
std::vector<CheckResult> verify_run(const std::filesystem::path& run_dir, const VerifyOptions& options = {});

/// Pass/fail table, one check per line.
std::string format_checks(const std::vector<CheckResult>& checks);

}  // namespace mfgcap
