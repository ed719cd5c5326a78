#include "mose/simnet.hpp"

#include "mose/errors.hpp"
#include "mose/rng.hpp"

#include <algorithm>
#include <cmath>
#include <queue>
#include <sstream>
#include <stdexcept>

namespace mose {

void Scenario::validate() const
{
    profile.validate();
    params.validate();
    task.validate();
    if (!(dirty_rate_pages_per_s >= 0.0))
        throw std::domain_error("scenario: dirty rate must be >= 0");
    auto has = [this](const std::string& id) {
        return std::any_of(hosts.begin(), hosts.end(), [&](const Host& h) { return h.id == id; });
    };
    if (!has(task.source_agent))
        throw ScenarioError("scenario: unknown source host " + task.source_agent);
    if (!has(task.destination_agent))
        throw ScenarioError("scenario: unknown destination host " + task.destination_agent);
    if (!link_between(task.source_agent, task.destination_agent))
        throw ScenarioError("scenario: no link between " + task.source_agent + " and " +
                            task.destination_agent);
    for (const auto& l : links) {
        if (!l.bandwidth.positive() || !(l.latency_s >= 0.0))
            throw ScenarioError("scenario: link " + l.src + "-" + l.dst + " needs positive bandwidth and latency >= 0");
    }
}

const Link* Scenario::link_between(const std::string& a, const std::string& b) const
{
    for (const auto& l : links)
        if ((l.src == a && l.dst == b) || (l.src == b && l.dst == a))
            return &l;
    return nullptr;
}

Bandwidth Scenario::available_bandwidth() const
{
    const Link* l = link_between(task.source_agent, task.destination_agent);
    if (!l)
        throw ScenarioError("scenario: no link between source and destination");
    return l->bandwidth;
}

double Scenario::latency(const std::string& a, const std::string& b) const
{
    if (a == b)
        return 0.0;
    const Link* l = link_between(a, b);
    return l ? l->latency_s : 0.0;
}

std::string Scenario::agent_with_role(Role role) const
{
    for (const auto& h : hosts)
        if (h.role == role && h.id != task.source_agent && h.id != task.destination_agent)
            return h.id;
    return {};
}

std::uint64_t dirty_set_size(double rate_pages_per_s, double elapsed_s, std::uint64_t total_pages,
                             std::uint64_t seed)
{
    if (!(rate_pages_per_s >= 0.0) || !(elapsed_s >= 0.0) || total_pages < 1)
        throw std::domain_error("dirty_set_size: need rate >= 0, elapsed >= 0, pages >= 1");
    if (rate_pages_per_s == 0.0 || elapsed_s == 0.0)
        return 0;
    Rng rng(seed);
    std::vector<bool> dirty(total_pages, false);
    std::uint64_t count = 0;
    for (double t = rng.exponential(rate_pages_per_s); t < elapsed_s && count < total_pages;
         t += rng.exponential(rate_pages_per_s)) {
        const auto page = rng.below(total_pages);
        if (!dirty[page]) {
            dirty[page] = true;
            ++count;
        }
    }
    return count;
}

namespace {

struct Pending {
    double time;
    std::uint64_t seq;
    std::string agent;
    AgentEvent event;
};

struct Later {
    bool operator()(const Pending& a, const Pending& b) const
    {
        return a.time != b.time ? a.time > b.time : a.seq > b.seq;
    }
};

// Poisson dirty-page writes while the service runs, tracked as a dirty set
// that each (pre-)checkpoint snapshots and clears.
class DirtyProcess {
public:
    DirtyProcess(double rate, std::uint64_t pages, std::uint64_t seed)
        : rate_(rate), marks_(pages, 0), rng_(seed)
    {
        if (rate_ > 0.0)
            next_ = rng_.exponential(rate_);
    }

    void advance_to(double t)
    {
        if (rate_ <= 0.0 || frozen_)
            return;
        while (next_ < t) {
            const auto page = rng_.below(marks_.size());
            if (marks_[page] != epoch_) {
                marks_[page] = epoch_;
                ++count_;
            }
            next_ += rng_.exponential(rate_);
        }
    }

    std::uint64_t take()
    {
        const auto c = count_;
        ++epoch_;
        count_ = 0;
        return c;
    }

    void freeze() { frozen_ = true; }

private:
    double rate_;
    std::vector<std::uint32_t> marks_;
    std::uint32_t epoch_ = 1;
    std::uint64_t count_ = 0;
    double next_ = 0.0;
    bool frozen_ = false;
    Rng rng_;
};

class Simulation;

class SimTransport : public Transport {
public:
    explicit SimTransport(Simulation& sim) : sim_(sim) {}
    void send(const std::string& recipient, const BusMessage& message) override;

private:
    Simulation& sim_;
};

bool orchestrator_traffic(const BusMessage& m)
{
    const auto& s = m.header.step;
    return s == steps::kTask || s == steps::kStarted || s == steps::kCompleted || s == steps::kFailed;
}

class Simulation {
public:
    Simulation(const Scenario& sc, const MigrationConfig& cfg, const SimOptions& opt)
        : sc_(sc), cfg_(cfg), opt_(opt), transport_(*this), bus_(transport_),
          dirty_(sc.dirty_rate_pages_per_s,
                 std::max<std::uint64_t>(1, static_cast<std::uint64_t>(
                                                std::ceil(sc.profile.state_size_bytes / sc.profile.page_size_bytes))),
                 Rng::derive(sc.seed, 1)),
          loss_rng_(Rng::derive(sc.seed, 2))
    {
        src_ = sc.task.source_agent;
        dst_ = sc.task.destination_agent;
        client_ = sc.agent_with_role(Role::Client);
        if (client_.empty())
            client_ = "client";
        orch_ = sc.agent_with_role(Role::Orchestrator);
        if (orch_.empty())
            orch_ = "orchestrator";

        for (auto [id, role] : {std::pair{orch_, Role::Orchestrator}, std::pair{src_, Role::Source},
                                std::pair{dst_, Role::Destination}, std::pair{client_, Role::Client}}) {
            order_.push_back(id);
            agents_[id] = make_agent(role, id);
            attach(bus_, agents_[id], sc.task.task_id);
        }
        out_.flow_table.install(sc.connection, src_);
    }

    MigrationOutcome run()
    {
        MigrationPlan plan;
        plan.task_id = sc_.task.task_id;
        plan.container_id = sc_.task.container_id;
        plan.source = src_;
        plan.destination = dst_;
        plan.client = client_;
        plan.strategy = cfg_.strategy;
        plan.bandwidth = cfg_.bandwidth;
        plan.connection = sc_.connection;
        plan.destination_endpoint = dst_;
        push(0.0, orch_, Kickoff{plan});

        std::size_t processed = 0;
        while (true) {
            if (queue_.empty() || processed >= opt_.max_events) {
                if (processed >= opt_.max_events) {
                    out_.diagnostics.push_back("event budget exhausted");
                    queue_ = {};
                }
                bool raised = false;
                for (const auto& id : order_) {
                    if (!agents_[id].phase.terminal()) {
                        push(now_, id, Watchdog{});
                        raised = true;
                    }
                }
                if (!raised)
                    break;
                if (processed >= opt_.max_events + order_.size() * 4)
                    break;
            }
            Pending p = queue_.top();
            queue_.pop();
            ++processed;
            now_ = p.time;
            dirty_.advance_to(now_);
            dispatch(p.agent, p.event);
        }

        finalize();
        return std::move(out_);
    }

    void deliver(const std::string& recipient, const BusMessage& m)
    {
        // A publication fans out to several recipients but is one message.
        if (out_.messages.empty() || out_.messages.back().id != m.id) {
            out_.messages.push_back(m);
            if (!orchestrator_traffic(m))
                ++out_.pipeline_messages;
        }

        const auto& f = opt_.faults;
        if (f.drop.contains(m.id) || (f.loss_probability > 0.0 && loss_rng_.uniform() < f.loss_probability)) {
            log_bus("drop " + describe(AgentEvent{m}) + " to " + recipient);
            if (m.bulk)
                push(now_ + transfer_time(m), m.sender, TransferDone{m.id});
            return;
        }

        double at;
        if (m.bulk) {
            at = now_ + transfer_time(m);
            out_.kpis.bytes_transferred += m.bulk_bytes;
        } else {
            at = now_ + sc_.latency(m.sender, recipient);
        }
        // Per-topic FIFO towards each recipient.
        auto& last = fifo_[{recipient, m.topic}];
        at = std::max(at, last);
        last = at;
        if (f.delay.contains(m.id)) {
            at += f.delay_s;
            log_bus("delay " + describe(AgentEvent{m}) + " to " + recipient);
        }
        push(at, recipient, m);
        if (f.duplicate.contains(m.id)) {
            log_bus("duplicate " + describe(AgentEvent{m}) + " to " + recipient);
            push(at, recipient, m);
        }
        if (m.bulk)
            push(at, m.sender, TransferDone{m.id});
    }

private:
    double transfer_time(const BusMessage& m) const { return sc_.params.transfer_s(m.bulk_bytes, cfg_.bandwidth); }

    void push(double t, const std::string& agent, AgentEvent ev) { queue_.push({t, seq_++, agent, std::move(ev)}); }

    void log_bus(std::string what)
    {
        out_.event_log.push_back({now_, "bus", "-", std::move(what), "-", {}});
    }

    void dispatch(const std::string& agent, const AgentEvent& ev)
    {
        auto it = agents_.find(agent);
        if (it == agents_.end())
            return;
        AgentState& st = it->second;
        observe_before(st, ev);
        const std::string before = to_string(st.phase);
        Transition tr = advance(st, ev, now_);
        st = std::move(tr.state);

        ProtocolEvent rec{now_, agent, before, describe(ev), to_string(st.phase), {}};
        for (auto& a : tr.actions) {
            rec.actions.push_back(describe(a));
            perform(st, a);
        }
        out_.event_log.push_back(std::move(rec));
    }

    // Timeline probes for the KPI decomposition.
    void observe_before(const AgentState& st, const AgentEvent& ev)
    {
        const auto* m = std::get_if<BusMessage>(&ev);
        if (st.role == Role::Source && st.phase.kind == PhaseKind::Idle && m && m->header.step == steps::kTask)
            t_start_ = now_;
        if (st.role == Role::Destination && m && m->kind == MessageKind::Reply &&
            m->header.step == steps::kCheckpointImage && !st.phase.terminal())
            t_image_in_ = now_;
        if (st.role == Role::Destination && m && m->header.step == steps::kFlow && !st.phase.terminal())
            t_flow_in_ = now_;
    }

    void perform(const AgentState& st, AgentAction& a)
    {
        if (auto* s = std::get_if<SendAction>(&a)) {
            bus_.send(s->message);
            return;
        }
        if (auto* r = std::get_if<RedirectFlowAction>(&a)) {
            out_.flow_table = update_flow(out_.flow_table, r->connection, r->egress);
            return;
        }
        if (auto* d = std::get_if<DiagnosticAction>(&a)) {
            out_.diagnostics.push_back(st.context.agent_id + ": " + d->text);
            return;
        }
        auto& w = std::get<WorkAction>(a);
        const auto& p = sc_.params;
        const double page = sc_.profile.page_size_bytes;
        const double m = sc_.profile.state_size_bytes;
        double duration = 0.0;
        double image = 0.0;
        switch (w.kind) {
        case WorkKind::PreCheckpoint: {
            const auto pages = dirty_.take();
            image = w.round == 0 ? m : std::min(static_cast<double>(pages) * page, m);
            out_.round_bytes.push_back(image);
            duration = p.pre_checkpoint_s(image);
            break;
        }
        case WorkKind::Checkpoint: {
            const auto pages = dirty_.take();
            dirty_.freeze();
            out_.dirty_pages_at_stopcopy = cfg_.strategy.kind() == StrategyKind::Cold ? 0 : pages;
            image = cfg_.strategy.kind() == StrategyKind::Cold
                        ? m
                        : std::min(static_cast<double>(pages) * page, m) + sc_.profile.cpu_context_bytes;
            out_.stop_copy_image_bytes = image;
            duration = p.checkpoint_s(image);
            t_freeze_ = now_;
            s1_ = duration;
            break;
        }
        case WorkKind::NamespaceClear:
            duration = p.ns_overhead_s;
            s2_ = duration;
            break;
        case WorkKind::NamespaceCreate:
            duration = p.ns_overhead_s;
            t_ns_created_ = now_ + duration;
            break;
        case WorkKind::FlowUpdate:
            duration = p.flow_update_s;
            break;
        case WorkKind::Restore:
            image = w.image_bytes;
            duration = p.restore_s(image);
            t_restored_ = now_ + duration;
            break;
        }
        w.image_bytes = image;
        push(now_ + duration, st.context.agent_id, WorkDone{w.kind, w.round, image});
    }

    void finalize()
    {
        for (const auto& id : order_)
            out_.final_phases[id] = agents_[id].phase;
        out_.completed = std::all_of(order_.begin(), order_.end(),
                                     [this](const auto& id) { return agents_[id].phase.kind == PhaseKind::Done; });
        if (!out_.completed)
            return;
        auto& k = out_.kpis;
        k.downtime_s = t_restored_ - t_freeze_;
        k.total_s = t_restored_ - t_start_;
        const double s1_end = t_freeze_ + s1_;
        k.step_durations_s = {
            {Step::S1, s1_},
            {Step::S2, s2_},
            {Step::S3, t_image_in_ - s1_end},
            {Step::S4, t_ns_created_ - t_image_in_},
            {Step::S5, t_flow_in_ - t_ns_created_},
            {Step::S6, t_restored_ - t_flow_in_},
        };
    }

    const Scenario& sc_;
    const MigrationConfig& cfg_;
    const SimOptions& opt_;
    SimTransport transport_;
    Bus bus_;
    DirtyProcess dirty_;
    Rng loss_rng_;

    std::string src_, dst_, client_, orch_;
    std::vector<std::string> order_;
    std::map<std::string, AgentState> agents_;
    std::priority_queue<Pending, std::vector<Pending>, Later> queue_;
    std::map<std::pair<std::string, std::string>, double> fifo_;
    std::uint64_t seq_ = 0;
    double now_ = 0.0;

    double t_start_ = 0.0, t_freeze_ = 0.0, s1_ = 0.0, s2_ = 0.0;
    double t_image_in_ = 0.0, t_ns_created_ = 0.0, t_flow_in_ = 0.0, t_restored_ = 0.0;

    MigrationOutcome out_;
};

void SimTransport::send(const std::string& recipient, const BusMessage& message)
{
    sim_.deliver(recipient, message);
}

}  // namespace

MigrationOutcome run_scenario(const Scenario& scenario, const MigrationConfig& config,
                              const SimOptions& options)
{
    scenario.validate();
    require_positive(config.bandwidth, "run_scenario");
    if (config.bandwidth > scenario.available_bandwidth())
        throw std::domain_error("run_scenario: configured bandwidth exceeds the source-destination link");
    Simulation sim(scenario, config, options);
    return sim.run();
}

std::string event_log_jsonl(const MigrationOutcome& outcome)
{
    std::string out;
    for (const auto& e : outcome.event_log) {
        out += to_json_line(e);
        out += '\n';
    }
    return out;
}

}  // namespace mose
