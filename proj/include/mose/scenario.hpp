#pragma once

// Scenario documents: the single JSON file every CLI subcommand reads.
// Values keep their boundary units (Mbps, seconds, bytes) so a document
// survives parse -> serialize -> parse unchanged; conversion to internal
// units happens when a simulation scenario or metrics view is built.

#include "mose/orchestrator.hpp"
#include "mose/profiler.hpp"
#include "mose/simnet.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace mose {

struct LinkSpec {
    std::string src;
    std::string dst;
    double bandwidth_mbps = 0.0;
    double latency_s = 0.0;

    friend bool operator==(const LinkSpec&, const LinkSpec&) = default;
};

struct ProfileSpec {
    std::string id;
    MsProfile profile;
    /// Realized rate of the simulated dirty process; defaults to the rate the
    /// normalized worst case maps to over a 1 s window.
    std::optional<double> dirty_rate_pages_per_s;
    std::vector<DirtySample> dirty_samples;   // input to `profile`

    double realized_dirty_rate() const;

    friend bool operator==(const ProfileSpec&, const ProfileSpec&) = default;
};

struct CalibrationSpec {
    double image_bytes = 0.0;
    double ckpt_s = 0.0;
    double restore_s = 0.0;
    double transfer_s = 0.0;
    double bandwidth_mbps = 1000.0;
    std::optional<double> ns_s;
    std::optional<double> flow_s;

    CalibrationRun to_run() const;

    friend bool operator==(const CalibrationSpec&, const CalibrationSpec&) = default;
};

enum class SweepVariable { TargetDuration, TargetDowntime };

std::string_view to_string(SweepVariable v);

struct SweepSpec {
    SweepVariable variable = SweepVariable::TargetDuration;
    double from_s = 0.0;
    double to_s = 0.0;
    double step_s = 0.0;
    std::vector<std::string> profiles;   // empty: the task's profile

    void validate() const;
    /// from_s, from_s + step_s, ... up to to_s (inclusive within rounding).
    std::vector<double> targets() const;

    friend bool operator==(const SweepSpec&, const SweepSpec&) = default;
};

struct DistributionSpec {
    double mean_mbps = 0.0;
    double std_mbps = 0.0;
    std::optional<double> lower_mbps;   // default 0
    std::optional<double> upper_mbps;   // default mean + 5 std
    int samples = 10000;

    BandwidthDistribution to_distribution() const;

    friend bool operator==(const DistributionSpec&, const DistributionSpec&) = default;
};

struct TaskSpec {
    MigrationTask task;
    std::string profile;   // ms_profiles id

    friend bool operator==(const TaskSpec&, const TaskSpec&) = default;
};

struct ScenarioFile {
    std::vector<Host> hosts;
    std::vector<LinkSpec> links;
    std::vector<ProfileSpec> ms_profiles;
    ModelParams model_params;
    std::vector<CalibrationSpec> calibration_runs;
    TaskSpec task;
    std::optional<SweepSpec> sweep;
    std::optional<DistributionSpec> distribution;
    FiveTuple connection{"10.0.0.3", 40000, "10.0.0.1", 11111, "tcp"};
    int iteration_cap = kDefaultIterationCap;
    std::uint64_t seed = 1;

    /// Structural checks; throws ScenarioError.
    void validate() const;
    const ProfileSpec& profile(const std::string& id) const;

    /// Simulation scenario for the task, migrating the given profile.
    Scenario simulation(const std::string& profile_id) const;
    /// What the designer sees for the task and profile.
    MetricsView metrics(const std::string& profile_id) const;

    friend bool operator==(const ScenarioFile&, const ScenarioFile&) = default;
};

/// Throws ScenarioError on malformed or inconsistent documents.
ScenarioFile parse_scenario(const std::string& text);
std::string serialize_scenario(const ScenarioFile& scenario);
/// Throws IoError when the file cannot be read.
ScenarioFile load_scenario(const std::string& path);

}  // namespace mose
