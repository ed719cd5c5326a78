// mose: plan, simulate and sweep stateful-service migrations from one
// scenario file.
//
// Exit codes: 0 success, 1 runtime or domain error (including a simulated
// migration that did not complete), 2 usage error or malformed scenario,
// 3 I/O error.

#include "mose/errors.hpp"
#include "mose/report.hpp"
#include "mose/scenario.hpp"

#include "CLI11.hpp"
#include "json.hpp"

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

namespace {

using nlohmann::json;
using namespace mose;

enum ExitCode { kOk = 0, kRuntime = 1, kUsage = 2, kIo = 3 };

struct Common {
    std::string scenario;
    std::string out = "mose-out";
    std::optional<std::uint64_t> seed;
    int parallel = 1;
    std::optional<int> samples;
};

ScenarioFile load(const Common& c)
{
    ScenarioFile s = load_scenario(c.scenario);
    if (c.seed)
        s.seed = *c.seed;
    return s;
}

json config_json(const MigrationTask& task, const std::string& profile, const MigrationConfig& c)
{
    return json{{"task_id", task.task_id},
                {"profile", profile},
                {"objective", std::string(to_string(task.objective))},
                {"strategy", std::string(to_string(c.strategy.kind()))},
                {"iterations", c.strategy.iterations()},
                {"bandwidth_mbps", c.bandwidth.mbps()},
                {"target_met", c.target_met},
                {"pred_downtime_s", c.predicted.downtime_s},
                {"pred_total_s", c.predicted.total_s},
                {"pred_bytes", c.predicted.bytes_transferred}};
}

void print_config(const MigrationConfig& c)
{
    std::printf("strategy %s, iterations %d, bandwidth %s Mbps, target %s\n",
                std::string(to_string(c.strategy.kind())).c_str(), c.strategy.iterations(),
                format_g6(c.bandwidth.mbps()).c_str(), c.target_met ? "met" : "not met");
    std::printf("predicted downtime %s s, total %s s\n", format_g6(c.predicted.downtime_s).c_str(),
                format_g6(c.predicted.total_s).c_str());
}

int cmd_profile(const Common& c)
{
    const ScenarioFile s = load(c);
    json out = json::object();
    for (const auto& p : s.ms_profiles) {
        if (p.dirty_samples.empty())
            continue;
        const auto e = estimate_dirty_rate(p.dirty_samples, p.profile.state_size_bytes, p.profile.page_size_bytes);
        out[p.id] = {{"rate_pages_per_s", e.rate_pages_per_s},
                     {"mean_rate_pages_per_s", e.mean_rate_pages_per_s},
                     {"dirty_rate_norm", e.normalized},
                     {"window_s", e.window_s}};
        std::printf("%s: worst case %s pages/s (mean %s), r = %s\n", p.id.c_str(),
                    format_g6(e.rate_pages_per_s).c_str(), format_g6(e.mean_rate_pages_per_s).c_str(),
                    format_g6(e.normalized).c_str());
    }
    if (out.empty())
        throw std::domain_error("no profile carries dirty_samples");
    write_file(c.out, "profile.json", out.dump(2) + "\n");
    return kOk;
}

int cmd_fit(const Common& c)
{
    const ScenarioFile s = load(c);
    std::vector<CalibrationRun> runs;
    for (const auto& r : s.calibration_runs)
        runs.push_back(r.to_run());
    const FitResult fit = fit_params(runs);
    const auto& p = fit.params;
    json out{{"model_params",
              {{"ckpt_fixed_s", p.ckpt_fixed_s},
               {"ckpt_per_byte_s", p.ckpt_per_byte_s},
               {"pre_ckpt_fixed_s", p.pre_ckpt_fixed_s},
               {"pre_ckpt_per_byte_s", p.pre_ckpt_per_byte_s},
               {"restore_fixed_s", p.restore_fixed_s},
               {"restore_per_byte_s", p.restore_per_byte_s},
               {"transfer_signaling_s", p.transfer_signaling_s},
               {"ns_overhead_s", p.ns_overhead_s},
               {"flow_update_s", p.flow_update_s}}},
             {"ckpt_rms_s", fit.ckpt_rms_s},
             {"restore_rms_s", fit.restore_rms_s},
             {"transfer_rms_s", fit.transfer_rms_s}};
    std::printf("checkpoint %s s + %s s/B, restore %s s + %s s/B, signaling %s s\n",
                format_g6(p.ckpt_fixed_s).c_str(), format_g6(p.ckpt_per_byte_s).c_str(),
                format_g6(p.restore_fixed_s).c_str(), format_g6(p.restore_per_byte_s).c_str(),
                format_g6(p.transfer_signaling_s).c_str());
    std::printf("rms residuals: checkpoint %s s, restore %s s, transfer %s s\n", format_g6(fit.ckpt_rms_s).c_str(),
                format_g6(fit.restore_rms_s).c_str(), format_g6(fit.transfer_rms_s).c_str());
    write_file(c.out, "fit.json", out.dump(2) + "\n");
    return kOk;
}

int cmd_plan(const Common& c)
{
    const ScenarioFile s = load(c);
    const MigrationConfig cfg = design(s.task.task, s.metrics(s.task.profile), DesignOptions{s.iteration_cap});
    print_config(cfg);
    write_file(c.out, "plan.json", config_json(s.task.task, s.task.profile, cfg).dump(2) + "\n");
    return kOk;
}

int cmd_simulate(const Common& c)
{
    const ScenarioFile s = load(c);
    const MigrationConfig cfg = design(s.task.task, s.metrics(s.task.profile), DesignOptions{s.iteration_cap});
    const MigrationOutcome out = run_scenario(s.simulation(s.task.profile), cfg);
    print_config(cfg);
    write_file(c.out, "plan.json", config_json(s.task.task, s.task.profile, cfg).dump(2) + "\n");
    write_file(c.out, "kpis.csv", kpi_csv(cfg.predicted, out.kpis));
    write_file(c.out, "events.jsonl", event_log_jsonl(out));
    if (!out.completed) {
        for (const auto& d : out.diagnostics)
            std::fprintf(stderr, "mose: %s\n", d.c_str());
        std::fprintf(stderr, "mose: simulated migration did not complete\n");
        return kRuntime;
    }
    std::printf("simulated downtime %s s, total %s s, %s bytes, %zu messages\n",
                format_g6(out.kpis.downtime_s).c_str(), format_g6(out.kpis.total_s).c_str(),
                format_g6(out.kpis.bytes_transferred).c_str(), out.messages.size());
    return kOk;
}

int cmd_sweep(const Common& c)
{
    const ScenarioFile s = load(c);
    if (!s.sweep)
        throw ScenarioError("scenario has no sweep section");
    const auto rows = run_sweep(s, *s.sweep, c.parallel);
    emit_report(rows, c.out);
    std::fputs(sweep_summary(rows).c_str(), stdout);
    return kOk;
}

int cmd_dist(const Common& c)
{
    const ScenarioFile s = load(c);
    if (!s.distribution)
        throw ScenarioError("scenario has no distribution section");
    const int samples = c.samples.value_or(s.distribution->samples);
    if (samples < 1)
        throw ScenarioError("--samples must be >= 1");
    const StrategyDistribution d = strategy_distribution(s.task.task, s.metrics(s.task.profile),
                                                         s.distribution->to_distribution(), samples, s.seed,
                                                         DesignOptions{s.iteration_cap});
    const std::string csv = distribution_csv(d);
    write_file(c.out, "dist.csv", csv);
    std::fputs(csv.c_str(), stdout);
    return kOk;
}

}  // namespace

int main(int argc, char** argv)
{
    CLI::App app{"Plan, simulate and sweep stateful-service migrations"};
    app.require_subcommand(1);
    Common common;

    auto add = [&](const char* name, const char* help, int (*fn)(const Common&)) {
        auto* sub = app.add_subcommand(name, help);
        sub->add_option("--scenario", common.scenario, "Scenario JSON file")->required();
        sub->add_option("--out", common.out, "Output directory")->capture_default_str();
        sub->add_option("--seed", common.seed, "Override the scenario seed");
        sub->add_option("--parallel", common.parallel, "Worker threads for sweeps")->check(CLI::PositiveNumber);
        return std::pair{sub, fn};
    };
    std::vector<std::pair<CLI::App*, int (*)(const Common&)>> commands{
        add("profile", "Estimate worst-case dirty rates from dirty_samples", cmd_profile),
        add("fit", "Fit model parameters to calibration_runs", cmd_fit),
        add("plan", "Design a migration for the task", cmd_plan),
        add("simulate", "Design and simulate the task's migration", cmd_simulate),
        add("sweep", "Sweep the target KPI and write sweep.csv", cmd_sweep),
        add("dist", "Strategy distribution under a random bandwidth", cmd_dist),
    };
    commands.back().first->add_option("--samples", common.samples, "Monte Carlo samples")
        ->check(CLI::PositiveNumber);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? kOk : kUsage;
    }

    try {
        for (const auto& [sub, fn] : commands)
            if (sub->parsed())
                return fn(common);
    } catch (const IoError& e) {
        std::fprintf(stderr, "mose: %s\n", e.what());
        return kIo;
    } catch (const ScenarioError& e) {
        std::fprintf(stderr, "mose: %s\n", e.what());
        return kUsage;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "mose: %s\n", e.what());
        return kRuntime;
    }
    return kUsage;
}
