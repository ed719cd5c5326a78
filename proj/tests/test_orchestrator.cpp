#include "doctest.h"

#include "mose/errors.hpp"
#include "mose/orchestrator.hpp"
#include "support.hpp"

#include <mutex>
#include <numeric>
#include <set>

using namespace mose;

namespace {

MigrationTask md_task(double target_duration)
{
    MigrationTask t;
    t.task_id = "t";
    t.source_agent = "a";
    t.destination_agent = "b";
    t.objective = Objective::MinimizeDowntime;
    t.target_duration_s = target_duration;
    return t;
}

MigrationTask mr_task(double target_downtime)
{
    MigrationTask t = md_task(1.0);
    t.objective = Objective::MinimizeResources;
    t.target_duration_s.reset();
    t.target_downtime_s = target_downtime;
    return t;
}

// round0 = 1.0, per_round = 0.1, downtime = 0.2.
MetricsView textbook_view()
{
    MsProfile p;
    p.state_size_bytes = 1e8;
    p.dirty_rate_norm = 0.1;
    p.cpu_context_bytes = 1e7;
    return MetricsView{p, ModelParams{}, Bandwidth::bytes_per_s(1e8)};
}

MetricsView testbed_view(double m, double r)
{
    MsProfile p;
    p.state_size_bytes = m;
    p.dirty_rate_norm = r;
    p.cpu_context_bytes = 65536;
    return MetricsView{p, test::testbed_params(), Bandwidth::mbps(1000)};
}

}  // namespace

TEST_SUITE("orchestrator")
{
    TEST_CASE("objective names")
    {
        CHECK(objective_from_string("minimize_downtime") == Objective::MinimizeDowntime);
        CHECK(objective_from_string("MR") == Objective::MinimizeResources);
        CHECK_FALSE(objective_from_string("fastest"));
        CHECK(to_string(Objective::MinimizeResources) == "minimize_resources");
    }

    TEST_CASE("design: MinimizeResources always migrates Cold")
    {
        const auto view = testbed_view(10485760, 0.01);
        for (double theta : {2.1, 2.5, 3.0, 10.0}) {
            const auto c = design(mr_task(theta), view);
            CHECK(c.strategy == StrategyChoice::cold());
            CHECK(c.target_met);
            CHECK(c.predicted.downtime_s <= theta);
            CHECK(c.bandwidth <= view.available_bandwidth);
        }
    }

    TEST_CASE("design: MinimizeResources infeasible falls back at full bandwidth")
    {
        const auto view = testbed_view(10485760, 0.01);
        const auto c = design(mr_task(0.5), view);
        CHECK(c.strategy == StrategyChoice::cold());
        CHECK_FALSE(c.target_met);
        CHECK(c.bandwidth == view.available_bandwidth);
    }

    TEST_CASE("design: MinimizeDowntime below the PreCopy floor falls back to Cold")
    {
        const auto view = textbook_view();
        const auto c = design(md_task(1.1), view);
        CHECK(c.strategy == StrategyChoice::cold());
        CHECK_FALSE(c.target_met);
        CHECK(c.bandwidth == view.available_bandwidth);
        CHECK(c.predicted == cold_kpis(view.profile, view.params, view.available_bandwidth));
    }

    TEST_CASE("design: MinimizeDowntime textbook example")
    {
        const auto view = textbook_view();
        const auto c = design(md_task(2.0), view);
        CHECK(c.strategy == StrategyChoice::iterative(8));
        CHECK(c.target_met);
        CHECK(c.predicted.total_s <= 2.0);
        CHECK(precopy_kpis(view.profile, view.params, view.available_bandwidth, 9).total_s > 2.0);
    }

    TEST_CASE("design: exactly PreCopy when no extra round fits")
    {
        const auto view = textbook_view();
        const auto c = design(md_task(1.25), view);
        CHECK(c.strategy == StrategyChoice::precopy());
        CHECK(c.target_met);
    }

    TEST_CASE("design: invalid inputs are domain errors")
    {
        auto t = md_task(2.0);
        t.target_duration_s.reset();
        CHECK_THROWS_AS(design(t, textbook_view()), std::domain_error);
        auto v = textbook_view();
        v.available_bandwidth = Bandwidth{};
        CHECK_THROWS_AS(design(md_task(2.0), v), std::domain_error);
        CHECK_THROWS_AS(design(md_task(-1.0), textbook_view()), std::domain_error);
    }

    TEST_CASE("design: pure, target_met implies the target, monotone in the target")
    {
        Rng rng(41);
        for (int i = 0; i < 40; ++i) {
            MetricsView v{test::random_profile(rng), test::random_params(rng), Bandwidth::mbps(10 + rng.uniform() * 990)};
            v.profile.dirty_rate_norm *= 0.3;
            int prev_iters = -1;
            bool prev_met = false;
            for (int k = 1; k <= 30; ++k) {
                const double theta = 0.5 * k;
                const auto c = design(md_task(theta), v);
                CHECK(c == design(md_task(theta), v));
                if (c.target_met) {
                    CHECK(c.predicted.total_s <= theta);
                    CHECK(c.strategy.iterations() >= prev_iters);
                    prev_iters = c.strategy.iterations();
                } else {
                    CHECK_FALSE(prev_met);
                }
                prev_met = c.target_met;
            }
            Bandwidth prev_bw = Bandwidth::bytes_per_s(1e300);
            for (int k = 1; k <= 30; ++k) {
                const double theta = 0.3 * k;
                const auto c = design(mr_task(theta), v);
                if (c.target_met) {
                    CHECK(c.predicted.downtime_s <= theta);
                    CHECK(c.bandwidth <= prev_bw);
                    prev_bw = c.bandwidth;
                }
            }
        }
    }

    TEST_CASE("design: smaller state is feasible for smaller targets")
    {
        const auto small = testbed_view(524288, 0.03);
        const auto large = testbed_view(10485760, 0.03);
        auto first_feasible = [](const MetricsView& v, bool md) {
            for (int k = 1; k <= 2000; ++k) {
                const double theta = 0.01 * k;
                if (design(md ? md_task(theta) : mr_task(theta), v).target_met)
                    return theta;
            }
            return 1e9;
        };
        CHECK(first_feasible(small, true) < first_feasible(large, true));
        CHECK(first_feasible(small, false) < first_feasible(large, false));
    }

    TEST_CASE("aggregate: echo, recency, staleness, missing agents")
    {
        const MigrationTask task = md_task(5.0);
        MsProfile old_profile, new_profile;
        old_profile.state_size_bytes = 1e6;
        new_profile.state_size_bytes = 2e6;
        const auto params = test::testbed_params();
        auto dst_params = params;
        dst_params.restore_fixed_s = 0.4;

        std::vector<AgentReport> reports{
            {"a", 10.0, old_profile, {{"b", Bandwidth::mbps(500)}}, params},
            {"b", 11.0, std::nullopt, {}, dst_params},
        };
        auto m = aggregate(task, reports, {12.0});
        CHECK(m.view.profile == old_profile);
        CHECK(m.view.available_bandwidth == Bandwidth::mbps(500));
        CHECK(m.view.params == dst_params);
        CHECK_FALSE(m.stale);

        reports.push_back({"a", 20.0, new_profile, {{"b", Bandwidth::mbps(800)}}, std::nullopt});
        m = aggregate(task, reports, {21.0});
        CHECK(m.view.profile == new_profile);
        CHECK(m.view.available_bandwidth == Bandwidth::mbps(800));

        m = aggregate(task, reports, {75.0});
        CHECK(m.stale);
        CHECK(m.stale_sources == std::vector<std::string>{"params"});
        m = aggregate(task, reports, {200.0});
        CHECK(m.stale_sources.size() == 3);

        // Destination without parameters: the source's calibration is used.
        std::vector<AgentReport> fallback{{"a", 1.0, old_profile, {{"b", Bandwidth::mbps(500)}}, params},
                                          {"b", 1.0, std::nullopt, {}, std::nullopt}};
        CHECK(aggregate(task, fallback, {1.0}).view.params == params);

        std::vector<AgentReport> only_source{reports[0]};
        CHECK_THROWS_AS(aggregate(task, only_source, {}), IncompleteMetricsError);
        std::vector<AgentReport> only_dest{reports[1]};
        CHECK_THROWS_AS(aggregate(task, only_dest, {}), IncompleteMetricsError);
    }

    TEST_CASE("strategy_distribution: point mass when std is zero")
    {
        const auto view = testbed_view(10485760, 0.0016);
        const auto task = md_task(5.0);
        const auto d = strategy_distribution(task, view,
                                             BandwidthDistribution::with_default_bounds(Bandwidth::mbps(1000), Bandwidth{}),
                                             100, 1);
        const auto c = design(task, view);
        CHECK(d.probability.at(c.strategy.kind()) == 1.0);
        CHECK(d.iteration_pmf.at(c.strategy.iterations()) == 1.0);
        CHECK(d.probability.size() == 3);
    }

    TEST_CASE("strategy_distribution: certain when feasible across the support")
    {
        const auto view = testbed_view(524288, 0.03);
        auto dist = BandwidthDistribution::with_default_bounds(Bandwidth::mbps(1000), Bandwidth::mbps(100));
        dist.lower_trunc = Bandwidth::mbps(200);
        const auto d = strategy_distribution(md_task(30.0), view, dist, 2000, 5);
        CHECK(d.probability.at(StrategyKind::IterativePreCopy) == 1.0);
    }

    TEST_CASE("strategy_distribution: pmf sums to P(IterativePreCopy), trends in the target")
    {
        const auto view = testbed_view(10485760, 0.0016);
        const auto dist = BandwidthDistribution::with_default_bounds(Bandwidth::mbps(1000), Bandwidth::mbps(100));
        double prev_cold = 2.0, prev_iter = -1.0;
        for (double theta : {1.8, 2.0, 2.1, 2.2, 2.4, 3.0}) {
            const auto d = strategy_distribution(md_task(theta), view, dist, 3000, 77);
            double pmf = 0.0;
            for (auto [i, p] : d.iteration_pmf)
                pmf += p;
            CHECK(std::fabs(pmf - d.probability.at(StrategyKind::IterativePreCopy)) < 1e-12);
            double total = 0.0;
            for (auto [k, p] : d.probability)
                total += p;
            CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
            CHECK(d.probability.at(StrategyKind::Cold) <= prev_cold);
            CHECK(d.probability.at(StrategyKind::IterativePreCopy) >= prev_iter);
            prev_cold = d.probability.at(StrategyKind::Cold);
            prev_iter = d.probability.at(StrategyKind::IterativePreCopy);
        }
    }

    TEST_CASE("strategy_distribution: deterministic per seed; degenerate truncation rejected")
    {
        const auto view = testbed_view(10485760, 0.0016);
        const auto dist = BandwidthDistribution::with_default_bounds(Bandwidth::mbps(1000), Bandwidth::mbps(100));
        const auto a = strategy_distribution(md_task(2.1), view, dist, 500, 3);
        const auto b = strategy_distribution(md_task(2.1), view, dist, 500, 3);
        CHECK(a.probability == b.probability);
        CHECK(a.iteration_pmf == b.iteration_pmf);

        auto bad = dist;
        bad.upper_trunc = bad.lower_trunc;
        CHECK_THROWS_AS(strategy_distribution(md_task(2.1), view, bad, 10, 1), std::domain_error);
    }

    TEST_CASE("task handler: parallel fan-out publishes each config whole")
    {
        const auto view = testbed_view(10485760, 0.0016);
        std::mutex seen_mutex;
        std::vector<std::string> published;
        TaskHandler handler([&](const MigrationTask&) { return view; },
                            [&](const MigrationTask& t, const MigrationConfig&) {
                                std::lock_guard lock(seen_mutex);
                                published.push_back(t.task_id);
                            });
        std::vector<MigrationTask> tasks;
        for (int i = 0; i < 64; ++i) {
            auto t = md_task(2.0 + 0.1 * i);
            t.task_id = "t" + std::to_string(i);
            tasks.push_back(t);
        }
        const auto configs = handler.handle_all(tasks, 4);
        REQUIRE(configs.size() == tasks.size());
        for (std::size_t i = 0; i < tasks.size(); ++i)
            CHECK(configs[i] == design(tasks[i], view));
        CHECK(std::set<std::string>(published.begin(), published.end()).size() == tasks.size());
    }
}
