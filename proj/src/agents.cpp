#include "mose/agents.hpp"

#include "json.hpp"

#include <sstream>
#include <stdexcept>

namespace mose {

using nlohmann::json;

std::string to_string(const Phase& p)
{
    switch (p.kind) {
    case PhaseKind::Idle: return "Idle";
    case PhaseKind::PreCopyRound: return "PreCopyRound(" + std::to_string(p.round) + ")";
    case PhaseKind::AwaitImagePull: return "AwaitImagePull(" + std::to_string(p.round) + ")";
    case PhaseKind::StopCopyCheckpoint: return "StopCopyCheckpoint";
    case PhaseKind::NamespaceTransition: return "NamespaceTransition";
    case PhaseKind::AwaitRestore: return "AwaitRestore";
    case PhaseKind::Dispatched: return "Dispatched";
    case PhaseKind::Monitoring: return "Monitoring";
    case PhaseKind::Done: return "Done";
    case PhaseKind::Failed: return "Failed";
    }
    return "?";
}

std::string_view to_string(WorkKind k)
{
    switch (k) {
    case WorkKind::PreCheckpoint: return "pre-checkpoint";
    case WorkKind::Checkpoint: return "checkpoint";
    case WorkKind::NamespaceClear: return "namespace-clear";
    case WorkKind::NamespaceCreate: return "namespace-create";
    case WorkKind::FlowUpdate: return "flow-update";
    case WorkKind::Restore: return "restore";
    }
    return "?";
}

std::string encode_plan(const MigrationPlan& plan)
{
    json j{
        {"task_id", plan.task_id},
        {"container_id", plan.container_id},
        {"source", plan.source},
        {"destination", plan.destination},
        {"client", plan.client},
        {"strategy", to_string(plan.strategy.kind())},
        {"iterations", plan.strategy.iterations()},
        {"bandwidth_bytes_per_s", plan.bandwidth.bytes_per_s()},
        {"connection",
         {{"src_ip", plan.connection.src_ip},
          {"src_port", plan.connection.src_port},
          {"dst_ip", plan.connection.dst_ip},
          {"dst_port", plan.connection.dst_port},
          {"protocol", plan.connection.protocol}}},
        {"destination_endpoint", plan.destination_endpoint},
    };
    return j.dump();
}

MigrationPlan decode_plan(const std::string& payload)
{
    const json j = json::parse(payload);
    MigrationPlan p;
    p.task_id = j.at("task_id").get<std::string>();
    p.container_id = j.at("container_id").get<std::string>();
    p.source = j.at("source").get<std::string>();
    p.destination = j.at("destination").get<std::string>();
    p.client = j.at("client").get<std::string>();
    const auto kind = strategy_kind_from_string(j.at("strategy").get<std::string>());
    if (!kind)
        throw std::invalid_argument("plan: unknown strategy");
    const int iters = j.at("iterations").get<int>();
    p.strategy = *kind == StrategyKind::Cold ? StrategyChoice::cold() : StrategyChoice::precopy_family(iters);
    p.bandwidth = Bandwidth::bytes_per_s(j.at("bandwidth_bytes_per_s").get<double>());
    const auto& c = j.at("connection");
    p.connection = {c.at("src_ip").get<std::string>(), c.at("src_port").get<std::uint16_t>(),
                    c.at("dst_ip").get<std::string>(), c.at("dst_port").get<std::uint16_t>(),
                    c.at("protocol").get<std::string>()};
    p.destination_endpoint = j.at("destination_endpoint").get<std::string>();
    return p;
}

AgentState make_agent(Role role, std::string agent_id)
{
    AgentState s;
    s.role = role;
    s.context.agent_id = std::move(agent_id);
    return s;
}

void attach(Bus& bus, const AgentState& agent, const std::string& task_id)
{
    const auto& id = agent.context.agent_id;
    auto t = [&](Role r, const char* step) { return make_topic(task_id, r, step); };
    switch (agent.role) {
    case Role::Source:
        bus.subscribe(id, t(Role::Orchestrator, steps::kTask));
        bus.declare_queryable(id, t(Role::Source, steps::kRestoreInfo));
        bus.declare_queryable(id, t(Role::Source, steps::kImage));
        bus.declare_queryable(id, t(Role::Source, steps::kCheckpointImage));
        break;
    case Role::Destination:
        bus.subscribe(id, t(Role::Orchestrator, steps::kTask));
        bus.subscribe(id, t(Role::Source, steps::kPreCheckpoint));
        bus.subscribe(id, t(Role::Source, steps::kCheckpoint));
        bus.subscribe(id, t(Role::Client, steps::kFlow));
        break;
    case Role::Client:
        bus.subscribe(id, t(Role::Orchestrator, steps::kTask));
        bus.subscribe(id, t(Role::Destination, steps::kNamespace));
        break;
    case Role::Orchestrator:
        bus.subscribe(id, t(Role::Source, steps::kStarted));
        bus.subscribe(id, t(Role::Destination, steps::kCompleted));
        bus.subscribe(id, "mose/" + task_id + "/*/" + steps::kFailed);
        break;
    }
}

namespace {

std::string topic_step(const std::string& topic)
{
    const auto pos = topic.rfind('/');
    return pos == std::string::npos ? topic : topic.substr(pos + 1);
}

class Machine {
public:
    Machine(const AgentState& s, double now) : s_(s), now_(now) {}

    AgentState& state() { return s_; }
    AgentContext& ctx() { return s_.context; }
    const MigrationPlan& plan() const { return *s_.context.plan; }
    int iterations() const { return plan().strategy.iterations(); }
    bool cold() const { return plan().strategy.kind() == StrategyKind::Cold; }

    void go(PhaseKind k, int round = 0) { s_.phase = Phase{k, round}; }

    BusMessage& send(MessageKind kind, Role topic_role, const char* step, int round = -1,
                     double image_bytes = 0.0)
    {
        BusMessage m;
        m.kind = kind;
        m.topic = make_topic(task_id(), topic_role, step);
        m.sender = s_.context.agent_id;
        m.header = {task_id(), step, round, image_bytes};
        m.timestamp_s = now_;
        actions_.push_back(SendAction{std::move(m)});
        return std::get<SendAction>(actions_.back()).message;
    }

    void reply(const std::string& correlation, const char* step, int round, bool bulk, double bytes,
               std::string payload = {})
    {
        auto& m = send(MessageKind::Reply, Role::Source, step, round, bytes);
        m.correlation_id = correlation;
        m.bulk = bulk;
        m.bulk_bytes = bulk ? bytes : 0.0;
        m.payload = std::move(payload);
    }

    void query(const char* step, int round)
    {
        auto& q = send(MessageKind::Query, Role::Source, step, round);
        q.correlation_id = s_.context.agent_id + "#" + std::to_string(++s_.context.query_seq);
        s_.context.outstanding_query = q.correlation_id;
    }

    void work(WorkKind k, int round = 0, double image_bytes = 0.0)
    {
        actions_.push_back(WorkAction{k, round, image_bytes});
    }

    void act(AgentAction a) { actions_.push_back(std::move(a)); }

    Transition fail(const std::string& why)
    {
        s_.context.diagnostic = why;
        actions_.push_back(DiagnosticAction{why});
        if (s_.role != Role::Orchestrator && !task_id().empty()) {
            auto& m = send(MessageKind::Publish, s_.role, steps::kFailed);
            m.payload = why;
        }
        go(PhaseKind::Failed);
        return finish();
    }

    Transition unexpected(const AgentEvent& ev)
    {
        return fail("unexpected " + describe(ev) + " in phase " + to_string(s_.phase));
    }

    Transition finish() { return {std::move(s_), std::move(actions_)}; }

    std::string task_id() const { return s_.context.plan ? s_.context.plan->task_id : std::string{}; }

private:
    AgentState s_;
    double now_;
    std::vector<AgentAction> actions_;
};

const BusMessage* as_message(const AgentEvent& ev, MessageKind kind)
{
    const auto* m = std::get_if<BusMessage>(&ev);
    return m && m->kind == kind ? m : nullptr;
}

bool is_publish(const AgentEvent& ev, const char* step)
{
    const auto* m = as_message(ev, MessageKind::Publish);
    return m && topic_step(m->topic) == step;
}

const WorkDone* as_work(const AgentEvent& ev, WorkKind k)
{
    const auto* w = std::get_if<WorkDone>(&ev);
    return w && w->kind == k ? w : nullptr;
}

bool take_task(Machine& m, const AgentEvent& ev)
{
    if (!is_publish(ev, steps::kTask))
        return false;
    m.ctx().plan = decode_plan(std::get<BusMessage>(ev).payload);
    return true;
}

// ---- source ---------------------------------------------------------------

void source_answer_restore_info(Machine& m, const std::string& query)
{
    m.ctx().pending_query.reset();
    m.ctx().restore_info_served = true;
    const std::string ns = "netns:" + m.plan().container_id;
    if (m.cold()) {
        m.reply(query, steps::kRestoreInfo, 0, false, 0.0, ns);
    } else {
        m.reply(query, steps::kRestoreInfo, 0, true, m.ctx().image_bytes, ns);
        m.ctx().image_ready = false;
        m.ctx().transfer_in_flight = true;
    }
}

bool source_baseline_ready(Machine& m)
{
    const auto& p = m.state().phase;
    return m.ctx().plan && (m.cold() || (p.kind == PhaseKind::AwaitImagePull && p.round == 0 &&
                                         m.ctx().image_ready));
}

Transition advance_source(Machine& m, const AgentEvent& ev)
{
    const Phase phase = m.state().phase;

    if (const auto* q = as_message(ev, MessageKind::Query); q && topic_step(q->topic) == steps::kRestoreInfo) {
        if (m.ctx().restore_info_served || m.ctx().pending_query)
            return m.fail("duplicate restore-info query");
        if (source_baseline_ready(m))
            source_answer_restore_info(m, q->correlation_id);
        else
            m.ctx().pending_query = q->correlation_id;
        return m.finish();
    }

    switch (phase.kind) {
    case PhaseKind::Idle:
        if (!take_task(m, ev))
            return m.unexpected(ev);
        m.send(MessageKind::Publish, Role::Source, steps::kStarted);
        if (m.cold()) {
            m.work(WorkKind::Checkpoint);
            m.go(PhaseKind::StopCopyCheckpoint);
            if (m.ctx().pending_query)
                source_answer_restore_info(m, *m.ctx().pending_query);
        } else {
            m.work(WorkKind::PreCheckpoint, 0);
            m.go(PhaseKind::PreCopyRound, 0);
        }
        return m.finish();

    case PhaseKind::PreCopyRound:
        if (const auto* w = as_work(ev, WorkKind::PreCheckpoint); w && w->round == phase.round) {
            m.ctx().image_bytes = w->image_bytes;
            m.ctx().image_ready = true;
            m.go(PhaseKind::AwaitImagePull, phase.round);
            if (phase.round == 0) {
                if (m.ctx().pending_query)
                    source_answer_restore_info(m, *m.ctx().pending_query);
            } else {
                m.send(MessageKind::Publish, Role::Source, steps::kPreCheckpoint, phase.round,
                       w->image_bytes);
            }
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::AwaitImagePull:
        if (const auto* q = as_message(ev, MessageKind::Query);
            q && topic_step(q->topic) == steps::kImage && q->header.round == phase.round && phase.round > 0) {
            if (!m.ctx().image_ready)
                return m.fail("duplicate pull of pre-copy image " + std::to_string(phase.round));
            m.reply(q->correlation_id, steps::kImage, phase.round, true, m.ctx().image_bytes);
            m.ctx().image_ready = false;
            m.ctx().transfer_in_flight = true;
            return m.finish();
        }
        if (std::holds_alternative<TransferDone>(ev) && m.ctx().transfer_in_flight) {
            m.ctx().transfer_in_flight = false;
            if (phase.round < m.iterations()) {
                m.work(WorkKind::PreCheckpoint, phase.round + 1);
                m.go(PhaseKind::PreCopyRound, phase.round + 1);
            } else {
                m.work(WorkKind::Checkpoint);
                m.go(PhaseKind::StopCopyCheckpoint);
            }
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::StopCopyCheckpoint:
        if (const auto* w = as_work(ev, WorkKind::Checkpoint); w && !m.ctx().stop_copy) {
            m.ctx().stop_copy = true;
            m.ctx().image_bytes = w->image_bytes;
            m.ctx().image_ready = true;
            m.send(MessageKind::Publish, Role::Source, steps::kCheckpoint, -1, w->image_bytes);
            return m.finish();
        }
        if (const auto* q = as_message(ev, MessageKind::Query);
            q && topic_step(q->topic) == steps::kCheckpointImage && m.ctx().stop_copy) {
            if (!m.ctx().image_ready)
                return m.fail("duplicate pull of the Stop&Copy image");
            m.reply(q->correlation_id, steps::kCheckpointImage, -1, true, m.ctx().image_bytes);
            m.ctx().image_ready = false;
            m.ctx().transfer_in_flight = true;
            return m.finish();
        }
        if (std::holds_alternative<TransferDone>(ev) && m.ctx().transfer_in_flight) {
            m.ctx().transfer_in_flight = false;
            m.work(WorkKind::NamespaceClear);
            m.go(PhaseKind::NamespaceTransition);
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::NamespaceTransition:
        if (as_work(ev, WorkKind::NamespaceClear)) {
            m.go(PhaseKind::Done);
            return m.finish();
        }
        return m.unexpected(ev);

    default:
        return m.unexpected(ev);
    }
}

// ---- destination ----------------------------------------------------------

bool answers_outstanding(Machine& m, const AgentEvent& ev)
{
    const auto* r = as_message(ev, MessageKind::Reply);
    if (!r)
        return false;
    return m.ctx().outstanding_query && r->correlation_id == *m.ctx().outstanding_query;
}

void dest_query_stop_copy(Machine& m)
{
    m.query(steps::kCheckpointImage, -1);
    m.ctx().checkpoint_notice = false;
    m.ctx().stop_copy = true;
    m.go(PhaseKind::AwaitImagePull, m.cold() ? 0 : m.iterations() + 1);
}

Transition advance_destination(Machine& m, const AgentEvent& ev)
{
    const Phase phase = m.state().phase;

    if (std::get_if<BusMessage>(&ev) && as_message(ev, MessageKind::Reply) && !answers_outstanding(m, ev))
        return m.fail("reply " + describe(ev) + " matches no outstanding query");

    switch (phase.kind) {
    case PhaseKind::Idle:
        if (!take_task(m, ev))
            return m.unexpected(ev);
        m.query(steps::kRestoreInfo, 0);
        m.go(PhaseKind::AwaitImagePull, 0);
        return m.finish();

    case PhaseKind::AwaitImagePull:
        if (is_publish(ev, steps::kCheckpoint) && phase.round == 0 && !m.ctx().stop_copy &&
            (m.cold() || m.iterations() == 0) && !m.ctx().checkpoint_notice) {
            m.ctx().checkpoint_notice = true;
            return m.finish();
        }
        if (answers_outstanding(m, ev)) {
            const auto& r = std::get<BusMessage>(ev);
            m.ctx().outstanding_query.reset();
            if (m.ctx().stop_copy) {
                m.ctx().image_bytes = r.header.image_bytes;
                m.work(WorkKind::NamespaceCreate);
                m.go(PhaseKind::NamespaceTransition);
            } else if (phase.round < m.iterations()) {
                m.go(PhaseKind::PreCopyRound, phase.round + 1);
            } else if (m.ctx().checkpoint_notice) {
                dest_query_stop_copy(m);
            } else {
                m.go(PhaseKind::StopCopyCheckpoint);
            }
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::PreCopyRound:
        if (const auto* p = as_message(ev, MessageKind::Publish);
            p && topic_step(p->topic) == steps::kPreCheckpoint && p->header.round == phase.round) {
            m.query(steps::kImage, phase.round);
            m.go(PhaseKind::AwaitImagePull, phase.round);
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::StopCopyCheckpoint:
        if (is_publish(ev, steps::kCheckpoint)) {
            dest_query_stop_copy(m);
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::NamespaceTransition:
        if (as_work(ev, WorkKind::NamespaceCreate)) {
            m.send(MessageKind::Publish, Role::Destination, steps::kNamespace);
            m.go(PhaseKind::AwaitRestore);
            return m.finish();
        }
        return m.unexpected(ev);

    case PhaseKind::AwaitRestore:
        if (is_publish(ev, steps::kFlow) && !m.ctx().busy) {
            m.ctx().busy = true;
            m.work(WorkKind::Restore, 0, m.ctx().image_bytes);
            return m.finish();
        }
        if (as_work(ev, WorkKind::Restore) && m.ctx().busy) {
            m.ctx().busy = false;
            m.send(MessageKind::Publish, Role::Destination, steps::kCompleted);
            m.go(PhaseKind::Done);
            return m.finish();
        }
        return m.unexpected(ev);

    default:
        return m.unexpected(ev);
    }
}

// ---- client ---------------------------------------------------------------

Transition advance_client(Machine& m, const AgentEvent& ev)
{
    switch (m.state().phase.kind) {
    case PhaseKind::Idle:
        if (!take_task(m, ev))
            return m.unexpected(ev);
        m.go(PhaseKind::NamespaceTransition);
        return m.finish();
    case PhaseKind::NamespaceTransition:
        if (is_publish(ev, steps::kNamespace) && !m.ctx().busy) {
            m.ctx().busy = true;
            m.work(WorkKind::FlowUpdate);
            return m.finish();
        }
        if (as_work(ev, WorkKind::FlowUpdate) && m.ctx().busy) {
            m.ctx().busy = false;
            m.act(RedirectFlowAction{m.plan().connection, m.plan().destination_endpoint});
            m.send(MessageKind::Publish, Role::Client, steps::kFlow);
            m.go(PhaseKind::Done);
            return m.finish();
        }
        return m.unexpected(ev);
    default:
        return m.unexpected(ev);
    }
}

// ---- orchestrator ---------------------------------------------------------

Transition advance_orchestrator(Machine& m, const AgentEvent& ev)
{
    if (is_publish(ev, steps::kFailed))
        return m.fail("agent " + std::get<BusMessage>(ev).sender + " failed: " + std::get<BusMessage>(ev).payload);

    switch (m.state().phase.kind) {
    case PhaseKind::Idle:
        if (const auto* k = std::get_if<Kickoff>(&ev)) {
            m.ctx().plan = k->plan;
            auto& msg = m.send(MessageKind::Publish, Role::Orchestrator, steps::kTask);
            msg.payload = encode_plan(k->plan);
            m.go(PhaseKind::Dispatched);
            return m.finish();
        }
        return m.unexpected(ev);
    case PhaseKind::Dispatched:
        if (is_publish(ev, steps::kStarted)) {
            m.go(PhaseKind::Monitoring);
            return m.finish();
        }
        return m.unexpected(ev);
    case PhaseKind::Monitoring:
        if (is_publish(ev, steps::kCompleted)) {
            m.go(PhaseKind::Done);
            return m.finish();
        }
        return m.unexpected(ev);
    default:
        return m.unexpected(ev);
    }
}

}  // namespace

Transition advance(const AgentState& state, const AgentEvent& event, double now_s)
{
    if (state.phase.terminal())
        return {state, {}};

    Machine m(state, now_s);
    if (std::holds_alternative<Watchdog>(event))
        return m.fail("stalled in phase " + to_string(state.phase));

    switch (state.role) {
    case Role::Source: return advance_source(m, event);
    case Role::Destination: return advance_destination(m, event);
    case Role::Client: return advance_client(m, event);
    case Role::Orchestrator: return advance_orchestrator(m, event);
    }
    return m.unexpected(event);
}

std::string describe(const AgentEvent& event)
{
    return std::visit(
        [](const auto& e) -> std::string {
            using T = std::decay_t<decltype(e)>;
            if constexpr (std::is_same_v<T, BusMessage>) {
                std::string s = std::string(to_string(e.kind)) + " " + e.topic;
                if (e.header.round >= 0 && e.kind != MessageKind::Publish)
                    s += " round=" + std::to_string(e.header.round);
                else if (e.header.round > 0)
                    s += " round=" + std::to_string(e.header.round);
                return s;
            } else if constexpr (std::is_same_v<T, WorkDone>) {
                return "done " + std::string(to_string(e.kind)) + " round=" + std::to_string(e.round);
            } else if constexpr (std::is_same_v<T, TransferDone>) {
                return "transfer-done reply=" + std::to_string(e.reply_id);
            } else if constexpr (std::is_same_v<T, Watchdog>) {
                return "watchdog";
            } else {
                return "kickoff " + e.plan.task_id;
            }
        },
        event);
}

std::string describe(const AgentAction& action)
{
    return std::visit(
        [](const auto& a) -> std::string {
            using T = std::decay_t<decltype(a)>;
            if constexpr (std::is_same_v<T, SendAction>) {
                return "send " + describe(AgentEvent{a.message});
            } else if constexpr (std::is_same_v<T, WorkAction>) {
                return "work " + std::string(to_string(a.kind)) + " round=" + std::to_string(a.round);
            } else if constexpr (std::is_same_v<T, RedirectFlowAction>) {
                return "redirect " + to_string(a.connection) + " -> " + a.egress;
            } else {
                return "diagnostic " + a.text;
            }
        },
        action);
}

std::string to_json_line(const ProtocolEvent& e)
{
    json j{{"timestamp_s", e.timestamp_s}, {"agent", e.agent},         {"phase_before", e.phase_before},
           {"event_kind", e.event_kind},   {"phase_after", e.phase_after}, {"actions", e.actions}};
    return j.dump();
}

ProtocolEvent protocol_event_from_json_line(const std::string& line)
{
    const json j = json::parse(line);
    return {j.at("timestamp_s").get<double>(),      j.at("agent").get<std::string>(),
            j.at("phase_before").get<std::string>(), j.at("event_kind").get<std::string>(),
            j.at("phase_after").get<std::string>(),  j.at("actions").get<std::vector<std::string>>()};
}

std::vector<ScheduledStep> coat_schedule(const MigrationConfig& config, const MsProfile& profile,
                                         const ModelParams& params)
{
    require_positive(config.bandwidth, "coat_schedule");
    const double image = config.strategy.kind() == StrategyKind::Cold
                             ? profile.state_size_bytes
                             : profile.dirty_volume_bytes() + profile.cpu_context_bytes;
    const auto d = stop_copy_steps(params, image, config.bandwidth);
    const double s1 = d.at(Step::S1);
    const double s3_end = s1 + d.at(Step::S3);
    const double ns_end = s3_end + d.at(Step::S4);
    const double s5_end = ns_end + d.at(Step::S5);
    return {
        {Step::S1, 0.0, s1},
        {Step::S2, s3_end, d.at(Step::S2)},
        {Step::S3, s1, d.at(Step::S3)},
        {Step::S4, s3_end, d.at(Step::S4)},
        {Step::S5, ns_end, d.at(Step::S5)},
        {Step::S6, s5_end, d.at(Step::S6)},
    };
}

}  // namespace mose
