#pragma once

// Target-KPI sweeps and their reports: one designed-and-simulated migration
// per (target, profile), classified into feasibility regions, written out as
// CSV plus a plain-text summary.

#include "mose/scenario.hpp"

#include <string>
#include <vector>

namespace mose {

enum class Region { Red, Yellow, Green };

std::string_view to_string(Region r);

struct SweepRow {
    double target_s = 0.0;
    std::string profile;
    MigrationConfig config;
    Kpis simulated;
    bool simulation_completed = false;
    Region region = Region::Red;
};

/// One row per (target, profile), sorted by target then profile id. Rows are
/// independent, so they are computed on up to `parallelism` threads; each row
/// simulates with a seed derived from the scenario seed and its target index,
/// which keeps the output independent of the thread count.
///
/// Sweeping target_duration designs each row as minimize_downtime with that
/// migration-duration target; sweeping target_downtime designs it as
/// minimize_resources with that downtime target.
std::vector<SweepRow> run_sweep(const ScenarioFile& scenario, const SweepSpec& spec, int parallelism = 1);

inline constexpr const char* kSweepCsvHeader =
    "target_s,profile,strategy,iterations,bandwidth_mbps,pred_downtime_s,pred_total_s,sim_downtime_s,"
    "sim_total_s,bytes_transferred,region";

std::string sweep_csv(const std::vector<SweepRow>& rows);
std::string sweep_summary(const std::vector<SweepRow>& rows);

/// Write sweep.csv and sweep_summary.txt into `out_dir` (created if needed).
/// Throws std::invalid_argument for empty results and IoError when the
/// directory or files cannot be written.
void emit_report(const std::vector<SweepRow>& rows, const std::string& out_dir);

/// Strategy frequencies as CSV: outcome,iterations,probability with one row
/// for Cold, one for PreCopy and one per iteration count in the PMF.
std::string distribution_csv(const StrategyDistribution& dist);

/// Predicted against measured step and KPI values as CSV.
std::string kpi_csv(const Kpis& predicted, const Kpis& simulated);

/// %.6g formatting used by every CSV.
std::string format_g6(double v);

/// Create `dir` and write `content` to `dir/name`; throws IoError.
void write_file(const std::string& dir, const std::string& name, const std::string& content);

}  // namespace mose
