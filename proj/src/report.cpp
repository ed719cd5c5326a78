#include "mose/report.hpp"

#include "mose/errors.hpp"
#include "mose/rng.hpp"

#include <algorithm>
#include <atomic>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <thread>

namespace mose {

std::string_view to_string(Region r)
{
    switch (r) {
    case Region::Red: return "red";
    case Region::Yellow: return "yellow";
    case Region::Green: return "green";
    }
    return "?";
}

std::string format_g6(double v)
{
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.6g", v);
    return buf;
}

namespace {

SweepRow sweep_one(const ScenarioFile& file, const SweepSpec& spec, double target, std::size_t target_index,
                   const std::string& profile_id)
{
    MigrationTask task = file.task.task;
    task.target_duration_s.reset();
    task.target_downtime_s.reset();
    if (spec.variable == SweepVariable::TargetDuration) {
        task.objective = Objective::MinimizeDowntime;
        task.target_duration_s = target;
    } else {
        task.objective = Objective::MinimizeResources;
        task.target_downtime_s = target;
    }

    Scenario sc = file.simulation(profile_id);
    sc.task = task;
    sc.seed = Rng::derive(file.seed, target_index);

    SweepRow row;
    row.target_s = target;
    row.profile = profile_id;
    row.config = design(task, MetricsView{sc.profile, sc.params, sc.available_bandwidth()},
                        DesignOptions{file.iteration_cap});
    const MigrationOutcome out = run_scenario(sc, row.config);
    row.simulated = out.kpis;
    row.simulation_completed = out.completed;
    return row;
}

void classify(std::vector<SweepRow>& rows, std::size_t profile_count)
{
    std::map<double, std::pair<std::size_t, std::size_t>> met;   // target -> (met, total)
    for (const auto& r : rows) {
        auto& [m, n] = met[r.target_s];
        m += r.config.target_met ? 1 : 0;
        ++n;
    }
    for (auto& r : rows) {
        if (!r.config.target_met)
            r.region = Region::Red;
        else if (profile_count >= 2 && met[r.target_s].first < met[r.target_s].second)
            r.region = Region::Yellow;
        else
            r.region = Region::Green;
    }
}

}  // namespace

std::vector<SweepRow> run_sweep(const ScenarioFile& scenario, const SweepSpec& spec, int parallelism)
{
    spec.validate();
    std::vector<std::string> profiles = spec.profiles;
    if (profiles.empty())
        profiles.push_back(scenario.task.profile);
    std::sort(profiles.begin(), profiles.end());
    profiles.erase(std::unique(profiles.begin(), profiles.end()), profiles.end());
    for (const auto& id : profiles)
        scenario.profile(id);   // unknown ids fail before any work starts

    const std::vector<double> targets = spec.targets();
    struct Job {
        double target;
        std::size_t target_index;
        std::string profile;
    };
    std::vector<Job> jobs;
    for (std::size_t t = 0; t < targets.size(); ++t)
        for (const auto& p : profiles)
            jobs.push_back({targets[t], t, p});

    std::vector<SweepRow> rows(jobs.size());
    std::vector<std::exception_ptr> errors(jobs.size());
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < jobs.size(); i = next++) {
            try {
                rows[i] = sweep_one(scenario, spec, jobs[i].target, jobs[i].target_index, jobs[i].profile);
            } catch (...) {
                errors[i] = std::current_exception();
            }
        }
    };
    const int threads = std::clamp(parallelism, 1, static_cast<int>(std::max<std::size_t>(jobs.size(), 1)));
    if (threads == 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t)
            pool.emplace_back(worker);
        for (auto& th : pool)
            th.join();
    }
    for (const auto& e : errors)
        if (e)
            std::rethrow_exception(e);

    std::stable_sort(rows.begin(), rows.end(), [](const SweepRow& a, const SweepRow& b) {
        return a.target_s != b.target_s ? a.target_s < b.target_s : a.profile < b.profile;
    });
    classify(rows, profiles.size());
    return rows;
}

std::string sweep_csv(const std::vector<SweepRow>& rows)
{
    std::string out = kSweepCsvHeader;
    out += '\n';
    for (const auto& r : rows) {
        const auto& c = r.config;
        out += format_g6(r.target_s) + ',' + r.profile + ',' + std::string(to_string(c.strategy.kind())) + ',' +
               std::to_string(c.strategy.iterations()) + ',' + format_g6(c.bandwidth.mbps()) + ',' +
               format_g6(c.predicted.downtime_s) + ',' + format_g6(c.predicted.total_s) + ',' +
               format_g6(r.simulated.downtime_s) + ',' + format_g6(r.simulated.total_s) + ',' +
               format_g6(r.simulated.bytes_transferred) + ',' + std::string(to_string(r.region)) + '\n';
    }
    return out;
}

std::string sweep_summary(const std::vector<SweepRow>& rows)
{
    std::map<std::string, std::vector<const SweepRow*>> by_profile;
    for (const auto& r : rows)
        by_profile[r.profile].push_back(&r);

    std::string out = "Sweep summary: " + std::to_string(rows.size()) + " rows\n";
    for (const auto& [id, list] : by_profile) {
        std::map<Region, int> counts;
        const SweepRow* first_met = nullptr;
        int max_iterations = 0;
        bool all_completed = true;
        for (const auto* r : list) {
            ++counts[r->region];
            if (!first_met && r->config.target_met)
                first_met = r;
            max_iterations = std::max(max_iterations, r->config.strategy.iterations());
            all_completed = all_completed && r->simulation_completed;
        }
        out += "profile " + id + ": green " + std::to_string(counts[Region::Green]) + ", yellow " +
               std::to_string(counts[Region::Yellow]) + ", red " + std::to_string(counts[Region::Red]);
        out += first_met ? ", lowest feasible target " + format_g6(first_met->target_s) + " s"
                         : std::string(", no feasible target");
        out += ", max iterations " + std::to_string(max_iterations);
        out += all_completed ? "\n" : ", some simulations did not complete\n";
    }
    return out;
}

void write_file(const std::string& dir, const std::string& name, const std::string& content)
{
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec)
        throw IoError("cannot create output directory " + dir + ": " + ec.message());
    const auto path = std::filesystem::path(dir) / name;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out)
        throw IoError("cannot write " + path.string());
    out << content;
    out.close();
    if (!out)
        throw IoError("failed writing " + path.string());
}

void emit_report(const std::vector<SweepRow>& rows, const std::string& out_dir)
{
    if (rows.empty())
        throw std::invalid_argument("emit_report: no results");
    write_file(out_dir, "sweep.csv", sweep_csv(rows));
    write_file(out_dir, "sweep_summary.txt", sweep_summary(rows));
}

std::string distribution_csv(const StrategyDistribution& dist)
{
    auto p = [&dist](StrategyKind k) {
        auto it = dist.probability.find(k);
        return it == dist.probability.end() ? 0.0 : it->second;
    };
    std::string out = "outcome,iterations,probability\n";
    out += "Cold,0," + format_g6(p(StrategyKind::Cold)) + '\n';
    out += "PreCopy,0," + format_g6(p(StrategyKind::PreCopy)) + '\n';
    for (const auto& [i, q] : dist.iteration_pmf)
        out += "IterativePreCopy," + std::to_string(i) + ',' + format_g6(q) + '\n';
    return out;
}

std::string kpi_csv(const Kpis& predicted, const Kpis& simulated)
{
    auto step = [](const Kpis& k, Step s) {
        auto it = k.step_durations_s.find(s);
        return it == k.step_durations_s.end() ? 0.0 : it->second;
    };
    std::string out = "quantity,predicted,simulated\n";
    for (Step s : {Step::S1, Step::S2, Step::S3, Step::S4, Step::S5, Step::S6})
        out += std::string(to_string(s)) + "_s," + format_g6(step(predicted, s)) + ',' +
               format_g6(step(simulated, s)) + '\n';
    out += "downtime_s," + format_g6(predicted.downtime_s) + ',' + format_g6(simulated.downtime_s) + '\n';
    out += "total_s," + format_g6(predicted.total_s) + ',' + format_g6(simulated.total_s) + '\n';
    out += "bytes_transferred," + format_g6(predicted.bytes_transferred) + ',' +
           format_g6(simulated.bytes_transferred) + '\n';
    return out;
}

}  // namespace mose
