#include "mose/scenario.hpp"

#include "mose/errors.hpp"

#include "json.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

namespace mose {

using nlohmann::json;

namespace {

// ---- reading ----------------------------------------------------------------

[[noreturn]] void bad(const std::string& where, const std::string& what)
{
    throw ScenarioError("scenario: " + where + ": " + what);
}

void check_keys(const json& j, const std::string& where, std::initializer_list<const char*> allowed)
{
    if (!j.is_object())
        bad(where, "expected an object");
    for (const auto& [key, _] : j.items()) {
        if (std::none_of(allowed.begin(), allowed.end(), [&](const char* a) { return key == a; }))
            bad(where, "unknown key '" + key + "'");
    }
}

const json& field(const json& j, const char* key, const std::string& where)
{
    auto it = j.find(key);
    if (it == j.end())
        bad(where, std::string("missing '") + key + "'");
    return *it;
}

double number(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_number())
        bad(where, std::string("'") + key + "' must be a number");
    return v.get<double>();
}

double number_or(const json& j, const char* key, const std::string& where, double fallback)
{
    return j.contains(key) ? number(j, key, where) : fallback;
}

std::optional<double> optional_number(const json& j, const char* key, const std::string& where)
{
    if (!j.contains(key) || j.at(key).is_null())
        return std::nullopt;
    return number(j, key, where);
}

std::string text(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_string())
        bad(where, std::string("'") + key + "' must be a string");
    return v.get<std::string>();
}

std::int64_t integer(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_number_integer())
        bad(where, std::string("'") + key + "' must be an integer");
    return v.get<std::int64_t>();
}

const json& array(const json& j, const char* key, const std::string& where)
{
    const json& v = field(j, key, where);
    if (!v.is_array())
        bad(where, std::string("'") + key + "' must be an array");
    return v;
}

Role role_from(const std::string& s, const std::string& where)
{
    for (Role r : {Role::Source, Role::Destination, Role::Client, Role::Orchestrator})
        if (to_string(r) == s)
            return r;
    bad(where, "unknown role '" + s + "'");
}

ModelParams read_params(const json& j)
{
    const std::string w = "model_params";
    check_keys(j, w,
               {"ckpt_fixed_s", "ckpt_per_byte_s", "pre_ckpt_fixed_s", "pre_ckpt_per_byte_s",
                "restore_fixed_s", "restore_per_byte_s", "transfer_signaling_s", "ns_overhead_s",
                "flow_update_s"});
    ModelParams p;
    p.ckpt_fixed_s = number(j, "ckpt_fixed_s", w);
    p.ckpt_per_byte_s = number(j, "ckpt_per_byte_s", w);
    p.pre_ckpt_fixed_s = number_or(j, "pre_ckpt_fixed_s", w, p.ckpt_fixed_s);
    p.pre_ckpt_per_byte_s = number_or(j, "pre_ckpt_per_byte_s", w, p.ckpt_per_byte_s);
    p.restore_fixed_s = number(j, "restore_fixed_s", w);
    p.restore_per_byte_s = number(j, "restore_per_byte_s", w);
    p.transfer_signaling_s = number(j, "transfer_signaling_s", w);
    p.ns_overhead_s = number(j, "ns_overhead_s", w);
    p.flow_update_s = number(j, "flow_update_s", w);
    return p;
}

ProfileSpec read_profile(const json& j, std::size_t index)
{
    const std::string w = "ms_profiles[" + std::to_string(index) + "]";
    check_keys(j, w,
               {"id", "state_size_bytes", "page_size_bytes", "dirty_rate_norm", "cpu_context_bytes",
                "dirty_rate_pages_per_s", "dirty_samples"});
    ProfileSpec p;
    p.id = text(j, "id", w);
    p.profile.state_size_bytes = number(j, "state_size_bytes", w);
    p.profile.page_size_bytes = number_or(j, "page_size_bytes", w, 4096.0);
    p.profile.dirty_rate_norm = number_or(j, "dirty_rate_norm", w, 0.0);
    p.profile.cpu_context_bytes = number_or(j, "cpu_context_bytes", w, 0.0);
    p.dirty_rate_pages_per_s = optional_number(j, "dirty_rate_pages_per_s", w);
    if (j.contains("dirty_samples")) {
        std::size_t k = 0;
        for (const auto& s : array(j, "dirty_samples", w)) {
            const std::string ws = w + ".dirty_samples[" + std::to_string(k++) + "]";
            check_keys(s, ws, {"window_s", "pages_modified"});
            p.dirty_samples.push_back({number(s, "window_s", ws), number(s, "pages_modified", ws)});
        }
    }
    return p;
}

CalibrationSpec read_calibration(const json& j, std::size_t index)
{
    const std::string w = "calibration_runs[" + std::to_string(index) + "]";
    check_keys(j, w,
               {"image_bytes", "ckpt_s", "restore_s", "transfer_s", "bandwidth_mbps", "ns_s", "flow_s"});
    CalibrationSpec c;
    c.image_bytes = number(j, "image_bytes", w);
    c.ckpt_s = number(j, "ckpt_s", w);
    c.restore_s = number(j, "restore_s", w);
    c.transfer_s = number(j, "transfer_s", w);
    c.bandwidth_mbps = number_or(j, "bandwidth_mbps", w, 1000.0);
    c.ns_s = optional_number(j, "ns_s", w);
    c.flow_s = optional_number(j, "flow_s", w);
    return c;
}

TaskSpec read_task(const json& j)
{
    const std::string w = "task";
    check_keys(j, w,
               {"task_id", "container_id", "source", "destination", "objective", "target_duration_s",
                "target_downtime_s", "profile"});
    TaskSpec t;
    t.task.task_id = j.contains("task_id") ? text(j, "task_id", w) : std::string("task-0");
    t.task.container_id = text(j, "container_id", w);
    t.task.source_agent = text(j, "source", w);
    t.task.destination_agent = text(j, "destination", w);
    const std::string objective = text(j, "objective", w);
    auto o = objective_from_string(objective);
    if (!o)
        bad(w, "unknown objective '" + objective + "'");
    t.task.objective = *o;
    t.task.target_duration_s = optional_number(j, "target_duration_s", w);
    t.task.target_downtime_s = optional_number(j, "target_downtime_s", w);
    t.profile = text(j, "profile", w);
    return t;
}

SweepSpec read_sweep(const json& j)
{
    const std::string w = "sweep";
    check_keys(j, w, {"variable", "from_s", "to_s", "step_s", "profiles"});
    SweepSpec s;
    const std::string v = text(j, "variable", w);
    if (v == to_string(SweepVariable::TargetDuration))
        s.variable = SweepVariable::TargetDuration;
    else if (v == to_string(SweepVariable::TargetDowntime))
        s.variable = SweepVariable::TargetDowntime;
    else
        bad(w, "unknown variable '" + v + "'");
    s.from_s = number(j, "from_s", w);
    s.to_s = number(j, "to_s", w);
    s.step_s = number(j, "step_s", w);
    if (j.contains("profiles")) {
        for (const auto& p : array(j, "profiles", w)) {
            if (!p.is_string())
                bad(w, "profiles must be strings");
            s.profiles.push_back(p.get<std::string>());
        }
    }
    return s;
}

DistributionSpec read_distribution(const json& j)
{
    const std::string w = "distribution";
    check_keys(j, w, {"mean_mbps", "std_mbps", "lower_mbps", "upper_mbps", "samples"});
    DistributionSpec d;
    d.mean_mbps = number(j, "mean_mbps", w);
    d.std_mbps = number(j, "std_mbps", w);
    d.lower_mbps = optional_number(j, "lower_mbps", w);
    d.upper_mbps = optional_number(j, "upper_mbps", w);
    if (j.contains("samples"))
        d.samples = static_cast<int>(integer(j, "samples", w));
    return d;
}

FiveTuple read_connection(const json& j)
{
    const std::string w = "connection";
    check_keys(j, w, {"src_ip", "src_port", "dst_ip", "dst_port", "protocol"});
    FiveTuple t;
    t.src_ip = text(j, "src_ip", w);
    t.src_port = static_cast<std::uint16_t>(integer(j, "src_port", w));
    t.dst_ip = text(j, "dst_ip", w);
    t.dst_port = static_cast<std::uint16_t>(integer(j, "dst_port", w));
    t.protocol = j.contains("protocol") ? text(j, "protocol", w) : std::string("tcp");
    return t;
}

// ---- writing ----------------------------------------------------------------

void put_optional(json& j, const char* key, const std::optional<double>& v)
{
    if (v)
        j[key] = *v;
}

json write_params(const ModelParams& p)
{
    return json{{"ckpt_fixed_s", p.ckpt_fixed_s},
                {"ckpt_per_byte_s", p.ckpt_per_byte_s},
                {"pre_ckpt_fixed_s", p.pre_ckpt_fixed_s},
                {"pre_ckpt_per_byte_s", p.pre_ckpt_per_byte_s},
                {"restore_fixed_s", p.restore_fixed_s},
                {"restore_per_byte_s", p.restore_per_byte_s},
                {"transfer_signaling_s", p.transfer_signaling_s},
                {"ns_overhead_s", p.ns_overhead_s},
                {"flow_update_s", p.flow_update_s}};
}

}  // namespace

// ---- boundary types ---------------------------------------------------------

double ProfileSpec::realized_dirty_rate() const
{
    if (dirty_rate_pages_per_s)
        return *dirty_rate_pages_per_s;
    if (profile.dirty_rate_norm == 0.0)
        return 0.0;
    return absolute_dirty_rate(profile.dirty_rate_norm, profile.state_size_bytes, profile.page_size_bytes);
}

CalibrationRun CalibrationSpec::to_run() const
{
    CalibrationRun r;
    r.image_bytes = image_bytes;
    r.ckpt_s = ckpt_s;
    r.restore_s = restore_s;
    r.transfer_s = transfer_s;
    r.bandwidth = Bandwidth::mbps(bandwidth_mbps);
    r.ns_s = ns_s;
    r.flow_s = flow_s;
    return r;
}

std::string_view to_string(SweepVariable v)
{
    return v == SweepVariable::TargetDuration ? "target_duration" : "target_downtime";
}

void SweepSpec::validate() const
{
    if (!(from_s < to_s))
        throw ScenarioError("sweep: from_s must be < to_s");
    if (!(step_s > 0.0))
        throw ScenarioError("sweep: step_s must be > 0");
    if (!(from_s > 0.0))
        throw ScenarioError("sweep: targets must be > 0");
}

std::vector<double> SweepSpec::targets() const
{
    validate();
    const auto n = static_cast<std::int64_t>(std::floor((to_s - from_s) / step_s + 1e-9));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(n) + 1);
    for (std::int64_t i = 0; i <= n; ++i)
        out.push_back(from_s + static_cast<double>(i) * step_s);
    return out;
}

BandwidthDistribution DistributionSpec::to_distribution() const
{
    auto d = BandwidthDistribution::with_default_bounds(Bandwidth::mbps(mean_mbps), Bandwidth::mbps(std_mbps));
    if (lower_mbps)
        d.lower_trunc = Bandwidth::mbps(*lower_mbps);
    if (upper_mbps)
        d.upper_trunc = Bandwidth::mbps(*upper_mbps);
    d.validate();
    return d;
}

// ---- scenario ---------------------------------------------------------------

void ScenarioFile::validate() const
{
    std::set<std::string> host_ids;
    for (const auto& h : hosts) {
        if (h.id.empty())
            throw ScenarioError("scenario: host with empty id");
        if (!host_ids.insert(h.id).second)
            throw ScenarioError("scenario: duplicate host " + h.id);
    }
    for (const auto& l : links) {
        if (!host_ids.contains(l.src) || !host_ids.contains(l.dst))
            throw ScenarioError("scenario: link " + l.src + "-" + l.dst + " names an unknown host");
        if (!(l.bandwidth_mbps > 0.0) || !(l.latency_s >= 0.0))
            throw ScenarioError("scenario: link " + l.src + "-" + l.dst +
                                " needs bandwidth_mbps > 0 and latency_s >= 0");
    }
    std::set<std::string> profile_ids;
    for (const auto& p : ms_profiles) {
        if (!profile_ids.insert(p.id).second)
            throw ScenarioError("scenario: duplicate profile " + p.id);
        try {
            p.profile.validate();
        } catch (const std::exception& e) {
            throw ScenarioError("scenario: profile " + p.id + ": " + e.what());
        }
        if (p.dirty_rate_pages_per_s && !(*p.dirty_rate_pages_per_s >= 0.0))
            throw ScenarioError("scenario: profile " + p.id + ": dirty_rate_pages_per_s must be >= 0");
    }
    try {
        model_params.validate();
    } catch (const std::exception& e) {
        throw ScenarioError(std::string("scenario: model_params: ") + e.what());
    }
    if (!profile_ids.contains(task.profile))
        throw ScenarioError("scenario: task names unknown profile " + task.profile);
    if (!host_ids.contains(task.task.source_agent) || !host_ids.contains(task.task.destination_agent))
        throw ScenarioError("scenario: task names an unknown source or destination host");
    if (sweep) {
        sweep->validate();
        for (const auto& id : sweep->profiles)
            if (!profile_ids.contains(id))
                throw ScenarioError("scenario: sweep names unknown profile " + id);
    }
    if (distribution && distribution->samples < 1)
        throw ScenarioError("scenario: distribution.samples must be >= 1");
    if (iteration_cap < 1)
        throw ScenarioError("scenario: iteration_cap must be >= 1");
}

const ProfileSpec& ScenarioFile::profile(const std::string& id) const
{
    for (const auto& p : ms_profiles)
        if (p.id == id)
            return p;
    throw ScenarioError("scenario: unknown profile " + id);
}

Scenario ScenarioFile::simulation(const std::string& profile_id) const
{
    const ProfileSpec& p = profile(profile_id);
    Scenario sc;
    sc.hosts = hosts;
    for (const auto& l : links)
        sc.links.push_back({l.src, l.dst, Bandwidth::mbps(l.bandwidth_mbps), l.latency_s});
    sc.profile = p.profile;
    sc.dirty_rate_pages_per_s = p.realized_dirty_rate();
    sc.params = model_params;
    sc.task = task.task;
    sc.connection = connection;
    sc.seed = seed;
    return sc;
}

MetricsView ScenarioFile::metrics(const std::string& profile_id) const
{
    const Scenario sc = simulation(profile_id);
    return MetricsView{sc.profile, sc.params, sc.available_bandwidth()};
}

ScenarioFile parse_scenario(const std::string& input)
{
    json j;
    try {
        j = json::parse(input);
    } catch (const json::parse_error& e) {
        throw ScenarioError(std::string("scenario: not valid JSON: ") + e.what());
    }
    check_keys(j, "document",
               {"hosts", "links", "ms_profiles", "model_params", "calibration_runs", "task", "sweep",
                "distribution", "connection", "iteration_cap", "seed"});

    ScenarioFile s;
    std::size_t k = 0;
    for (const auto& h : array(j, "hosts", "document")) {
        const std::string w = "hosts[" + std::to_string(k++) + "]";
        check_keys(h, w, {"id", "role"});
        s.hosts.push_back({text(h, "id", w), role_from(text(h, "role", w), w)});
    }
    k = 0;
    for (const auto& l : array(j, "links", "document")) {
        const std::string w = "links[" + std::to_string(k++) + "]";
        check_keys(l, w, {"src", "dst", "bandwidth_mbps", "latency_s"});
        s.links.push_back({text(l, "src", w), text(l, "dst", w), number(l, "bandwidth_mbps", w),
                           number_or(l, "latency_s", w, 0.0)});
    }
    k = 0;
    for (const auto& p : array(j, "ms_profiles", "document"))
        s.ms_profiles.push_back(read_profile(p, k++));
    s.model_params = read_params(field(j, "model_params", "document"));
    if (j.contains("calibration_runs")) {
        k = 0;
        for (const auto& c : array(j, "calibration_runs", "document"))
            s.calibration_runs.push_back(read_calibration(c, k++));
    }
    s.task = read_task(field(j, "task", "document"));
    if (j.contains("sweep"))
        s.sweep = read_sweep(j.at("sweep"));
    if (j.contains("distribution"))
        s.distribution = read_distribution(j.at("distribution"));
    if (j.contains("connection"))
        s.connection = read_connection(j.at("connection"));
    if (j.contains("iteration_cap"))
        s.iteration_cap = static_cast<int>(integer(j, "iteration_cap", "document"));
    if (j.contains("seed")) {
        const json& v = j.at("seed");
        if (!v.is_number_unsigned())
            bad("document", "'seed' must be a nonnegative integer");
        s.seed = v.get<std::uint64_t>();
    }
    s.validate();
    return s;
}

std::string serialize_scenario(const ScenarioFile& s)
{
    json j;
    j["hosts"] = json::array();
    for (const auto& h : s.hosts)
        j["hosts"].push_back({{"id", h.id}, {"role", std::string(to_string(h.role))}});
    j["links"] = json::array();
    for (const auto& l : s.links)
        j["links"].push_back(
            {{"src", l.src}, {"dst", l.dst}, {"bandwidth_mbps", l.bandwidth_mbps}, {"latency_s", l.latency_s}});
    j["ms_profiles"] = json::array();
    for (const auto& p : s.ms_profiles) {
        json e{{"id", p.id},
               {"state_size_bytes", p.profile.state_size_bytes},
               {"page_size_bytes", p.profile.page_size_bytes},
               {"dirty_rate_norm", p.profile.dirty_rate_norm},
               {"cpu_context_bytes", p.profile.cpu_context_bytes}};
        put_optional(e, "dirty_rate_pages_per_s", p.dirty_rate_pages_per_s);
        if (!p.dirty_samples.empty()) {
            e["dirty_samples"] = json::array();
            for (const auto& d : p.dirty_samples)
                e["dirty_samples"].push_back({{"window_s", d.window_s}, {"pages_modified", d.pages_modified}});
        }
        j["ms_profiles"].push_back(std::move(e));
    }
    j["model_params"] = write_params(s.model_params);
    if (!s.calibration_runs.empty()) {
        j["calibration_runs"] = json::array();
        for (const auto& c : s.calibration_runs) {
            json e{{"image_bytes", c.image_bytes},
                   {"ckpt_s", c.ckpt_s},
                   {"restore_s", c.restore_s},
                   {"transfer_s", c.transfer_s},
                   {"bandwidth_mbps", c.bandwidth_mbps}};
            put_optional(e, "ns_s", c.ns_s);
            put_optional(e, "flow_s", c.flow_s);
            j["calibration_runs"].push_back(std::move(e));
        }
    }
    json t{{"task_id", s.task.task.task_id},
           {"container_id", s.task.task.container_id},
           {"source", s.task.task.source_agent},
           {"destination", s.task.task.destination_agent},
           {"objective", std::string(to_string(s.task.task.objective))},
           {"profile", s.task.profile}};
    put_optional(t, "target_duration_s", s.task.task.target_duration_s);
    put_optional(t, "target_downtime_s", s.task.task.target_downtime_s);
    j["task"] = std::move(t);
    if (s.sweep) {
        j["sweep"] = {{"variable", std::string(to_string(s.sweep->variable))},
                      {"from_s", s.sweep->from_s},
                      {"to_s", s.sweep->to_s},
                      {"step_s", s.sweep->step_s},
                      {"profiles", s.sweep->profiles}};
    }
    if (s.distribution) {
        json d{{"mean_mbps", s.distribution->mean_mbps},
               {"std_mbps", s.distribution->std_mbps},
               {"samples", s.distribution->samples}};
        put_optional(d, "lower_mbps", s.distribution->lower_mbps);
        put_optional(d, "upper_mbps", s.distribution->upper_mbps);
        j["distribution"] = std::move(d);
    }
    j["connection"] = {{"src_ip", s.connection.src_ip},
                       {"src_port", s.connection.src_port},
                       {"dst_ip", s.connection.dst_ip},
                       {"dst_port", s.connection.dst_port},
                       {"protocol", s.connection.protocol}};
    j["iteration_cap"] = s.iteration_cap;
    j["seed"] = s.seed;
    return j.dump(2) + "\n";
}

ScenarioFile load_scenario(const std::string& path)
{
    std::ifstream in(path);
    if (!in)
        throw IoError("cannot read scenario " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    return parse_scenario(buf.str());
}

}  // namespace mose
