#pragma once

// Source, destination, client and orchestrator agents as pure state
// machines. advance() consumes one event and returns the successor state and
// the actions the environment must carry out (bus sends, timed work items,
// flow redirects). Timing, dirty-page accounting and message delivery belong
// to the environment (see simnet).
//
// Happy path, I dirty-page rounds:
//   orchestrator  publish task
//   source        publish started; pre-checkpoint round 0
//   destination   query restore-info (namespace config; the reply also carries
//                 the round-0 full image unless the strategy is Cold)
//   per round k:  source publish precheckpoint(k); destination query image(k);
//                 source reply with the image
//   Stop&Copy:    source checkpoint (S1), publish checkpoint; destination
//                 query checkpoint-image; source reply (S3)
//   source clears its namespace (S2) while the destination re-creates it (S4)
//   destination   publish namespace; client updates the flow (S5), publish flow
//   destination   restore (S6), publish completed
//
// That is 10 + 3I bus messages, of which 7 + 3I travel between the
// migrating agents (task/started/completed are orchestrator traffic).

#include "mose/bus.hpp"
#include "mose/flow_table.hpp"
#include "mose/model.hpp"
#include "mose/orchestrator.hpp"
#include "mose/units.hpp"

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace mose {

enum class PhaseKind {
    Idle,
    PreCopyRound,
    AwaitImagePull,
    StopCopyCheckpoint,
    NamespaceTransition,
    AwaitRestore,
    Dispatched,   // orchestrator: task published
    Monitoring,   // orchestrator: migration started
    Done,
    Failed,
};

struct Phase {
    PhaseKind kind = PhaseKind::Idle;
    int round = 0;

    bool terminal() const { return kind == PhaseKind::Done || kind == PhaseKind::Failed; }
    friend bool operator==(const Phase&, const Phase&) = default;
};

std::string to_string(const Phase& p);

/// What the task publication tells the agents.
struct MigrationPlan {
    std::string task_id;
    std::string container_id;
    std::string source;
    std::string destination;
    std::string client;
    StrategyChoice strategy = StrategyChoice::cold();
    Bandwidth bandwidth;
    FiveTuple connection;
    std::string destination_endpoint;

    friend bool operator==(const MigrationPlan&, const MigrationPlan&) = default;
};

std::string encode_plan(const MigrationPlan& plan);
MigrationPlan decode_plan(const std::string& payload);

namespace steps {
inline constexpr const char* kTask = "task";
inline constexpr const char* kStarted = "started";
inline constexpr const char* kRestoreInfo = "restore-info";
inline constexpr const char* kPreCheckpoint = "precheckpoint";
inline constexpr const char* kImage = "image";
inline constexpr const char* kCheckpoint = "checkpoint";
inline constexpr const char* kCheckpointImage = "checkpoint-image";
inline constexpr const char* kNamespace = "namespace";
inline constexpr const char* kFlow = "flow";
inline constexpr const char* kCompleted = "completed";
inline constexpr const char* kFailed = "failed";
}  // namespace steps

struct AgentContext {
    std::string agent_id;
    std::optional<MigrationPlan> plan;
    std::optional<std::string> pending_query;       // source: query awaiting an answer
    std::optional<std::string> outstanding_query;   // destination: query we issued
    int query_seq = 0;
    bool image_ready = false;
    bool transfer_in_flight = false;
    bool restore_info_served = false;
    bool stop_copy = false;
    bool busy = false;                 // client flow update / destination restore running
    bool checkpoint_notice = false;    // destination: early Stop&Copy notice buffered
    double image_bytes = 0.0;
    std::string diagnostic;

    friend bool operator==(const AgentContext&, const AgentContext&) = default;
};

struct AgentState {
    Role role = Role::Source;
    Phase phase;
    AgentContext context;

    friend bool operator==(const AgentState&, const AgentState&) = default;
};

AgentState make_agent(Role role, std::string agent_id);

/// Register the subscriptions and queryables `agent` needs for one task.
void attach(Bus& bus, const AgentState& agent, const std::string& task_id);

enum class WorkKind { PreCheckpoint, Checkpoint, NamespaceClear, NamespaceCreate, FlowUpdate, Restore };

std::string_view to_string(WorkKind k);

struct Kickoff {
    MigrationPlan plan;
};
struct WorkDone {
    WorkKind kind;
    int round = 0;
    double image_bytes = 0.0;
};
struct TransferDone {
    std::uint64_t reply_id = 0;
};
/// Raised by the environment when nothing is left in flight.
struct Watchdog {};

using AgentEvent = std::variant<BusMessage, WorkDone, TransferDone, Watchdog, Kickoff>;

struct SendAction {
    BusMessage message;
};
struct WorkAction {
    WorkKind kind;
    int round = 0;
    double image_bytes = 0.0;   // input image for Restore; the environment sizes checkpoints
};
struct RedirectFlowAction {
    FiveTuple connection;
    std::string egress;
};
struct DiagnosticAction {
    std::string text;
};

using AgentAction = std::variant<SendAction, WorkAction, RedirectFlowAction, DiagnosticAction>;

struct Transition {
    AgentState state;
    std::vector<AgentAction> actions;
};

Transition advance(const AgentState& state, const AgentEvent& event, double now_s = 0.0);

std::string describe(const AgentEvent& event);
std::string describe(const AgentAction& action);

/// One line of the event log.
struct ProtocolEvent {
    double timestamp_s = 0.0;
    std::string agent;
    std::string phase_before;
    std::string event_kind;
    std::string phase_after;
    std::vector<std::string> actions;

    friend bool operator==(const ProtocolEvent&, const ProtocolEvent&) = default;
};

/// JSON object on a single line.
std::string to_json_line(const ProtocolEvent& e);
ProtocolEvent protocol_event_from_json_line(const std::string& line);

struct ScheduledStep {
    Step step;
    double start_s;
    double duration_s;
};

/// Stop&Copy work items, S1..S6, with offsets from the freeze. The image is
/// the full state for Cold and the worst-case dirty volume plus CPU context
/// otherwise.
std::vector<ScheduledStep> coat_schedule(const MigrationConfig& config, const MsProfile& profile,
                                         const ModelParams& params);

}  // namespace mose
