#pragma once

// Migration Task Handler, Metrics Aggregation and Migration Designer.

#include "mose/model.hpp"
#include "mose/units.hpp"

#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mose {

enum class Objective { MinimizeDowntime, MinimizeResources };

std::string_view to_string(Objective o);
std::optional<Objective> objective_from_string(std::string_view s);

struct MigrationTask {
    std::string task_id = "task-0";
    std::string container_id;
    std::string source_agent;
    std::string destination_agent;
    Objective objective = Objective::MinimizeDowntime;
    std::optional<double> target_duration_s;
    std::optional<double> target_downtime_s;

    void validate() const;

    friend bool operator==(const MigrationTask&, const MigrationTask&) = default;
};

struct MetricsView {
    MsProfile profile;
    ModelParams params;
    Bandwidth available_bandwidth;

    void validate() const;
};

struct MigrationConfig {
    StrategyChoice strategy = StrategyChoice::cold();
    Bandwidth bandwidth;
    Kpis predicted;   // upper bounds
    bool target_met = false;

    friend bool operator==(const MigrationConfig&, const MigrationConfig&) = default;
};

struct DesignOptions {
    int iteration_cap = kDefaultIterationCap;
};

/// Configure strategy, bandwidth and iterations for one task.
///
/// MinimizeResources always migrates Cold, at the smallest bandwidth meeting
/// the downtime target, or at the full available bandwidth with
/// target_met = false when no such bandwidth exists. MinimizeDowntime uses
/// the full available bandwidth and the largest iteration count meeting the
/// duration target, falling back to Cold with target_met = false.
MigrationConfig design(const MigrationTask& task, const MetricsView& metrics,
                       const DesignOptions& options = {});

/// One periodic report from an agent's profiling module.
struct AgentReport {
    std::string agent_id;
    double timestamp_s = 0.0;
    std::optional<MsProfile> profile;
    std::map<std::string, Bandwidth> bandwidth_to;   // keyed by peer agent
    std::optional<ModelParams> params;
};

struct AggregateOptions {
    double now_s = 0.0;
    double staleness_horizon_s = 60.0;
};

struct AggregatedMetrics {
    MetricsView view;
    bool stale = false;
    std::vector<std::string> stale_sources;   // "profile", "bandwidth", "params"
};

/// Collect the view the designer needs for `task` from agent reports: the
/// source's latest profile, the latest source-to-destination bandwidth
/// estimate, and the destination's latest calibration (falling back to the
/// source's).
AggregatedMetrics aggregate(const MigrationTask& task, std::span<const AgentReport> reports,
                            const AggregateOptions& options = {});

struct BandwidthDistribution {
    Bandwidth mean;
    Bandwidth std_dev;
    Bandwidth lower_trunc;
    Bandwidth upper_trunc;

    /// Truncation bounds [0, mean + 5 std].
    static BandwidthDistribution with_default_bounds(Bandwidth mean, Bandwidth std_dev);

    void validate() const;
};

struct StrategyDistribution {
    std::map<StrategyKind, double> probability;   // every kind present
    std::map<int, double> iteration_pmf;          // IterativePreCopy outcomes only
};

/// Monte Carlo over the available bandwidth: draw `sample_count` values from
/// the truncated normal, design each, and report empirical frequencies.
/// metrics.available_bandwidth is ignored.
StrategyDistribution strategy_distribution(const MigrationTask& task, const MetricsView& metrics,
                                           const BandwidthDistribution& dist, int sample_count,
                                           std::uint64_t seed, const DesignOptions& options = {});

/// Processes tasks independently and publishes each resulting config as one
/// unit through the sink. Safe to call from several threads.
class TaskHandler {
public:
    using MetricsLookup = std::function<MetricsView(const MigrationTask&)>;
    using ConfigSink = std::function<void(const MigrationTask&, const MigrationConfig&)>;

    TaskHandler(MetricsLookup lookup, ConfigSink sink, DesignOptions options = {});

    MigrationConfig handle(const MigrationTask& task);

    /// Design every task, fanning out over `parallelism` worker threads.
    std::vector<MigrationConfig> handle_all(std::span<const MigrationTask> tasks, int parallelism);

private:
    MetricsLookup lookup_;
    ConfigSink sink_;
    DesignOptions options_;
    std::mutex publish_mutex_;
};

}  // namespace mose
