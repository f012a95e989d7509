#ifndef VPAIR_CLI_HPP
#define VPAIR_CLI_HPP

#include "vpair/analysis.hpp"
#include "vpair/oracle.hpp"

#include <nlohmann/json.hpp>

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace vpair::cli {

inline constexpr const char* kVersion = "vpair 1.0.0";

// Exit codes of the command line tool.
inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitNumerical = 2;
inline constexpr int kExitValidation = 3;

struct ExperimentConfig {
    ModelParams params;
    std::string initial = "g";
    double kr_start = 2.0;
    double kr_stop = 31.4;  // up to five wavelengths
    double kr_step = 0.25;
    double duration = 2e5;  // total simulated time (per sweep point)
    int trajectories = 1;
    double delta_t = 250.0;        // statistics bin width
    double trace_delta_t = 190.0;  // intensity-trace plot bin width
    double subspace_dt = 10.0;     // subspace-population grid spacing
    int min_bins = 1;
    std::uint64_t seed = 1;
    std::string out_dir = ".";
    int threads = 0;
    double target_t0 = 2000.0;
    double tolerance = 0.05;

    // Hard errors (throw) plus soft warnings returned for printing.
    std::vector<std::string> check(const std::string& mode) const;
};

// `# key=value` block embedded in every emitted artifact so outputs are
// reproducible from config plus seed plus version alone.
std::string resolved_config_block(const ExperimentConfig& config);

struct CalibrationSample {
    double omega2;
    double t0;  // NaN when the probe saw no complete dark period
    double se;
    long n0;
};

struct CalibrationResult {
    double omega2;
    double t0;
    double se;
    std::vector<CalibrationSample> samples;
};

// Bisection for the shelving drive omega2 giving mean dark period
// target_t0 in the noninteracting model (include_c3 = false), over the
// bracket [1e-4, 1e-1] a3. Probes measure T0 by simulation; convergence
// requires the measured value within tolerance and a standard error below
// tolerance times the target. Throws std::runtime_error when the target is
// not reachable inside the bracket (reporting both endpoint measurements).
CalibrationResult calibrate_omega2(const ExperimentConfig& config);

struct SweepRow {
    double kr = 0.0;
    double re_c3_over_a3 = 0.0;
    double im_c3_over_a3 = 0.0;
    analysis::DurationStats stats;
    std::optional<double> i2;
    std::string status = "ok";  // error text for failed points
};

struct SweepResult {
    std::vector<SweepRow> rows;
};

std::vector<double> kr_grid(const ExperimentConfig& config);

// Runs trajectories at every grid distance, classifies, aggregates, and
// appends each finished row to csv_path immediately (a rerun resumes after
// the last completed row; a config mismatch with an existing file is an
// error). Per-point failures are recorded in the row and the sweep
// continues.
SweepResult run_sweep(const ExperimentConfig& config,
                      const std::string& csv_path, bool echo = false);

struct ValidationReport {
    bool pass = false;
    nlohmann::json details;
};

// Trajectory-versus-oracle ensemble comparison plus the structural
// invariant battery. corrupt_reset_sign flips the sign of Re C3 in the
// reset weights only (a deliberate fault injection hook used to prove the
// check catches unravelling bugs).
ValidationReport run_validation(const ExperimentConfig& config,
                                bool corrupt_reset_sign = false);

// Full tool entry point: parses arguments, dispatches, writes artifacts.
int run_cli(int argc, const char* const* argv);

}  // namespace vpair::cli

#endif
