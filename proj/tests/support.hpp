#pragma once

// Shared fixtures for the test suites.

#include "mose/model.hpp"
#include "mose/rng.hpp"
#include "mose/simnet.hpp"

#include <string>

namespace mose::test {

inline double relative_error(double a, double b)
{
    const double scale = std::max({std::fabs(a), std::fabs(b), 1e-300});
    return std::fabs(a - b) / scale;
}

/// Parameters in the regime of the edge testbed (second-scale fixed costs,
/// per-byte costs around 50 ns/B).
inline ModelParams testbed_params()
{
    ModelParams p;
    p.ckpt_fixed_s = 0.503;
    p.ckpt_per_byte_s = 4.889e-8;
    p.pre_ckpt_fixed_s = 0.503;
    p.pre_ckpt_per_byte_s = 4.889e-8;
    p.restore_fixed_s = 0.353;
    p.restore_per_byte_s = 4.889e-8;
    p.transfer_signaling_s = 0.003;
    p.ns_overhead_s = 0.084;
    p.flow_update_s = 0.004;
    return p;
}

inline ModelParams random_params(Rng& rng)
{
    ModelParams p;
    p.ckpt_fixed_s = rng.uniform() * 1.0;
    p.ckpt_per_byte_s = rng.uniform() * 1e-7;
    p.pre_ckpt_fixed_s = rng.uniform() * 1.0;
    p.pre_ckpt_per_byte_s = rng.uniform() * 1e-7;
    p.restore_fixed_s = rng.uniform() * 1.0;
    p.restore_per_byte_s = rng.uniform() * 1e-7;
    p.transfer_signaling_s = rng.uniform() * 0.05;
    p.ns_overhead_s = rng.uniform() * 0.2;
    p.flow_update_s = rng.uniform() * 0.01;
    return p;
}

inline MsProfile random_profile(Rng& rng)
{
    MsProfile m;
    m.state_size_bytes = std::floor(1e5 + rng.uniform() * 5e7);
    m.page_size_bytes = 4096;
    m.dirty_rate_norm = rng.uniform();
    m.cpu_context_bytes = std::floor(rng.uniform() * 1e5);
    return m;
}

/// Four hosts, one source-destination link, task targets unset.
inline Scenario make_scenario(const MsProfile& profile, const ModelParams& params, Bandwidth link,
                              double latency_s = 0.0, double dirty_rate_pages_per_s = 0.0,
                              std::uint64_t seed = 1)
{
    Scenario sc;
    sc.hosts = {{"src", Role::Source}, {"dst", Role::Destination}, {"ue", Role::Client}, {"orch", Role::Orchestrator}};
    sc.links = {{"src", "dst", link, latency_s},
                {"orch", "src", link, latency_s},
                {"orch", "dst", link, latency_s},
                {"ue", "dst", link, latency_s},
                {"ue", "src", link, latency_s}};
    sc.profile = profile;
    sc.params = params;
    sc.dirty_rate_pages_per_s = dirty_rate_pages_per_s;
    sc.task.task_id = "t1";
    sc.task.container_id = "ms";
    sc.task.source_agent = "src";
    sc.task.destination_agent = "dst";
    sc.task.objective = Objective::MinimizeDowntime;
    sc.task.target_duration_s = 1e9;
    sc.seed = seed;
    return sc;
}

inline MigrationConfig config_for(const StrategyChoice& strategy, Bandwidth bw)
{
    MigrationConfig c;
    c.strategy = strategy;
    c.bandwidth = bw;
    return c;
}

}  // namespace mose::test
