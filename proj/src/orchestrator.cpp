#include "mose/orchestrator.hpp"

#include "mose/errors.hpp"
#include "mose/rng.hpp"

#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <atomic>
#include <stdexcept>
#include <thread>

namespace mose {

std::string_view to_string(Objective o)
{
    return o == Objective::MinimizeDowntime ? "minimize_downtime" : "minimize_resources";
}

std::optional<Objective> objective_from_string(std::string_view s)
{
    if (s == "minimize_downtime" || s == "MD") return Objective::MinimizeDowntime;
    if (s == "minimize_resources" || s == "MR") return Objective::MinimizeResources;
    return std::nullopt;
}

void MigrationTask::validate() const
{
    if (objective == Objective::MinimizeDowntime && !target_duration_s)
        throw std::domain_error("task " + task_id + ": minimize_downtime needs a target duration");
    if (objective == Objective::MinimizeResources && !target_downtime_s)
        throw std::domain_error("task " + task_id + ": minimize_resources needs a target downtime");
    if (target_duration_s && !(*target_duration_s > 0.0))
        throw std::domain_error("task " + task_id + ": target duration must be > 0");
    if (target_downtime_s && !(*target_downtime_s > 0.0))
        throw std::domain_error("task " + task_id + ": target downtime must be > 0");
}

void MetricsView::validate() const
{
    profile.validate();
    params.validate();
    require_positive(available_bandwidth, "metrics view");
}

MigrationConfig design(const MigrationTask& task, const MetricsView& metrics,
                       const DesignOptions& options)
{
    task.validate();
    metrics.validate();
    const auto& profile = metrics.profile;
    const auto& params = metrics.params;
    const Bandwidth available = metrics.available_bandwidth;

    MigrationConfig cfg;
    if (task.objective == Objective::MinimizeResources) {
        cfg.strategy = StrategyChoice::cold();
        if (auto needed = min_bandwidth(profile, params, *task.target_downtime_s, available)) {
            cfg.bandwidth = *needed;
            cfg.target_met = true;
        } else {
            cfg.bandwidth = available;
            cfg.target_met = false;
        }
        cfg.predicted = cold_kpis(profile, params, cfg.bandwidth);
        return cfg;
    }

    cfg.bandwidth = available;
    if (auto choice = max_iterations(profile, params, available, *task.target_duration_s,
                                     options.iteration_cap)) {
        cfg.strategy = *choice;
        cfg.target_met = true;
        cfg.predicted = precopy_kpis(profile, params, available, choice->iterations());
    } else {
        cfg.strategy = StrategyChoice::cold();
        cfg.target_met = false;
        cfg.predicted = cold_kpis(profile, params, available);
    }
    return cfg;
}

AggregatedMetrics aggregate(const MigrationTask& task, std::span<const AgentReport> reports,
                            const AggregateOptions& options)
{
    const AgentReport* profile_from = nullptr;
    const AgentReport* bandwidth_from = nullptr;
    const AgentReport* dst_params = nullptr;
    const AgentReport* src_params = nullptr;
    bool saw_source = false, saw_destination = false;

    auto newer = [](const AgentReport* cur, const AgentReport& cand) {
        return cur == nullptr || cand.timestamp_s >= cur->timestamp_s;
    };
    for (const auto& r : reports) {
        if (r.agent_id == task.source_agent) {
            saw_source = true;
            if (r.profile && newer(profile_from, r)) profile_from = &r;
            if (r.bandwidth_to.contains(task.destination_agent) && newer(bandwidth_from, r))
                bandwidth_from = &r;
            if (r.params && newer(src_params, r)) src_params = &r;
        }
        if (r.agent_id == task.destination_agent) {
            saw_destination = true;
            if (r.params && newer(dst_params, r)) dst_params = &r;
        }
    }
    if (!saw_source)
        throw IncompleteMetricsError("no report from source agent " + task.source_agent);
    if (!saw_destination)
        throw IncompleteMetricsError("no report from destination agent " + task.destination_agent);
    if (!profile_from)
        throw IncompleteMetricsError("source agent " + task.source_agent + " reported no profile");
    if (!bandwidth_from)
        throw IncompleteMetricsError("no bandwidth estimate from " + task.source_agent + " to " +
                                     task.destination_agent);
    const AgentReport* params_from = dst_params ? dst_params : src_params;
    if (!params_from)
        throw IncompleteMetricsError("no model parameters reported for the agent pair");

    AggregatedMetrics out;
    out.view.profile = *profile_from->profile;
    out.view.available_bandwidth = bandwidth_from->bandwidth_to.at(task.destination_agent);
    out.view.params = *params_from->params;

    const double oldest_allowed = options.now_s - options.staleness_horizon_s;
    auto check = [&](const AgentReport* r, const char* what) {
        if (r->timestamp_s < oldest_allowed) {
            out.stale = true;
            out.stale_sources.emplace_back(what);
        }
    };
    check(profile_from, "profile");
    check(bandwidth_from, "bandwidth");
    check(params_from, "params");
    return out;
}

BandwidthDistribution BandwidthDistribution::with_default_bounds(Bandwidth mean, Bandwidth std_dev)
{
    return {mean, std_dev, Bandwidth::bytes_per_s(0.0),
            Bandwidth::bytes_per_s(mean.bytes_per_s() + 5.0 * std_dev.bytes_per_s())};
}

void BandwidthDistribution::validate() const
{
    if (!(lower_trunc.bytes_per_s() >= 0.0))
        throw std::domain_error("bandwidth distribution: lower truncation must be >= 0");
    if (!(lower_trunc < upper_trunc))
        throw std::domain_error("bandwidth distribution: zero-width truncation");
    if (!(std_dev.bytes_per_s() >= 0.0))
        throw std::domain_error("bandwidth distribution: std dev must be >= 0");
}

namespace {

class TruncatedNormal {
public:
    explicit TruncatedNormal(const BandwidthDistribution& d)
        : mean_(d.mean.bytes_per_s()), sd_(d.std_dev.bytes_per_s()),
          lo_(d.lower_trunc.bytes_per_s()), hi_(d.upper_trunc.bytes_per_s())
    {
        if (sd_ > 0.0) {
            cdf_lo_ = boost::math::cdf(unit_, (lo_ - mean_) / sd_);
            cdf_hi_ = boost::math::cdf(unit_, (hi_ - mean_) / sd_);
            if (!(cdf_hi_ > cdf_lo_))
                throw std::domain_error("bandwidth distribution: no probability mass inside truncation");
        }
    }

    double draw(Rng& rng) const
    {
        if (sd_ == 0.0)
            return std::clamp(mean_, lo_, hi_);
        const double u = cdf_lo_ + rng.uniform_open() * (cdf_hi_ - cdf_lo_);
        const double z = boost::math::quantile(unit_, std::clamp(u, 1e-300, 1.0 - 1e-16));
        return std::clamp(mean_ + sd_ * z, lo_, hi_);
    }

private:
    boost::math::normal unit_{0.0, 1.0};
    double mean_, sd_, lo_, hi_;
    double cdf_lo_ = 0.0, cdf_hi_ = 1.0;
};

}  // namespace

StrategyDistribution strategy_distribution(const MigrationTask& task, const MetricsView& metrics,
                                           const BandwidthDistribution& dist, int sample_count,
                                           std::uint64_t seed, const DesignOptions& options)
{
    if (sample_count < 1)
        throw std::domain_error("strategy_distribution: sample_count must be >= 1");
    dist.validate();
    const TruncatedNormal sampler(dist);
    Rng rng(seed);

    std::map<StrategyKind, long> kinds{{StrategyKind::Cold, 0},
                                       {StrategyKind::PreCopy, 0},
                                       {StrategyKind::IterativePreCopy, 0}};
    std::map<int, long> iterations;
    MetricsView view = metrics;
    for (int i = 0; i < sample_count; ++i) {
        // A zero draw is only reachable at the truncation edge; keep the
        // designer's positive-bandwidth precondition.
        view.available_bandwidth = Bandwidth::bytes_per_s(std::max(sampler.draw(rng), 1.0));
        const auto cfg = design(task, view, options);
        ++kinds[cfg.strategy.kind()];
        if (cfg.strategy.kind() == StrategyKind::IterativePreCopy)
            ++iterations[cfg.strategy.iterations()];
    }

    StrategyDistribution out;
    const double n = static_cast<double>(sample_count);
    for (auto [k, c] : kinds)
        out.probability[k] = static_cast<double>(c) / n;
    for (auto [i, c] : iterations)
        out.iteration_pmf[i] = static_cast<double>(c) / n;
    return out;
}

TaskHandler::TaskHandler(MetricsLookup lookup, ConfigSink sink, DesignOptions options)
    : lookup_(std::move(lookup)), sink_(std::move(sink)), options_(options)
{
}

MigrationConfig TaskHandler::handle(const MigrationTask& task)
{
    const MetricsView metrics = lookup_(task);
    MigrationConfig cfg = design(task, metrics, options_);
    {
        std::lock_guard lock(publish_mutex_);
        sink_(task, cfg);
    }
    return cfg;
}

std::vector<MigrationConfig> TaskHandler::handle_all(std::span<const MigrationTask> tasks,
                                                     int parallelism)
{
    std::vector<MigrationConfig> out(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < tasks.size(); i = next++) {
            try {
                out[i] = handle(tasks[i]);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int n = std::max(1, parallelism);
    std::vector<std::thread> pool;
    for (int t = 1; t < n; ++t)
        pool.emplace_back(worker);
    worker();
    for (auto& th : pool)
        th.join();
    for (const auto& e : errors)
        if (e) std::rethrow_exception(e);
    return out;
}

}  // namespace mose
