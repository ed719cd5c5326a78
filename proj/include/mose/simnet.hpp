#pragma once

// Deterministic discrete-event simulation of one migration: hosts, links, the
// service's dirty-page process and the four agents exchanging messages over a
// simulated bus. Measured KPIs come from the timeline, not from the model.

#include "mose/agents.hpp"
#include "mose/flow_table.hpp"
#include "mose/model.hpp"
#include "mose/orchestrator.hpp"

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mose {

struct Host {
    std::string id;
    Role role = Role::Source;

    friend bool operator==(const Host&, const Host&) = default;
};

struct Link {
    std::string src;
    std::string dst;
    Bandwidth bandwidth;
    double latency_s = 0.0;

    friend bool operator==(const Link&, const Link&) = default;
};

struct Scenario {
    std::vector<Host> hosts;
    std::vector<Link> links;
    MsProfile profile;
    double dirty_rate_pages_per_s = 0.0;   // realized rate of the dirty process
    ModelParams params;
    MigrationTask task;
    FiveTuple connection{"10.0.0.3", 40000, "10.0.0.1", 11111, "tcp"};
    std::uint64_t seed = 1;

    void validate() const;

    const Link* link_between(const std::string& a, const std::string& b) const;
    Bandwidth available_bandwidth() const;   // source-destination link
    double latency(const std::string& a, const std::string& b) const;
    std::string agent_with_role(Role role) const;   // empty when absent

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

/// Faults are addressed by bus message id (1-based send order).
struct FaultPlan {
    std::set<std::uint64_t> drop;
    std::set<std::uint64_t> duplicate;
    std::set<std::uint64_t> delay;   // held back so later messages overtake it
    double delay_s = 1.0;
    double loss_probability = 0.0;   // independent random loss, seeded by the scenario

    bool empty() const
    {
        return drop.empty() && duplicate.empty() && delay.empty() && loss_probability == 0.0;
    }
};

struct SimOptions {
    FaultPlan faults;
    std::size_t max_events = 1'000'000;
};

struct MigrationOutcome {
    Kpis kpis;   // measured
    std::vector<ProtocolEvent> event_log;
    std::uint64_t dirty_pages_at_stopcopy = 0;
    bool completed = false;
    std::vector<std::string> diagnostics;
    std::vector<BusMessage> messages;    // every message handed to the bus
    std::size_t pipeline_messages = 0;   // excluding orchestrator traffic
    std::vector<double> round_bytes;     // pre-copy images, round 0 first
    double stop_copy_image_bytes = 0.0;
    FlowTable flow_table;                // client overlay after the run
    std::map<std::string, Phase> final_phases;
};

/// Execute `config` in `scenario`. Throws std::domain_error when the config
/// asks for more bandwidth than the source-destination link has.
MigrationOutcome run_scenario(const Scenario& scenario, const MigrationConfig& config,
                              const SimOptions& options = {});

/// Distinct pages touched by a Poisson stream of `rate` writes/s over
/// `elapsed_s`, each to a uniformly drawn page out of `total_pages`.
std::uint64_t dirty_set_size(double rate_pages_per_s, double elapsed_s, std::uint64_t total_pages,
                             std::uint64_t seed);

/// The event log as JSON lines.
std::string event_log_jsonl(const MigrationOutcome& outcome);

}  // namespace mose
