#include "doctest.h"

#include "mose/errors.hpp"
#include "mose/report.hpp"
#include "mose/scenario.hpp"
#include "support.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

using namespace mose;
namespace fs = std::filesystem;

namespace {

const char* kScenario = R"({
  "hosts": [
    {"id": "edge-a", "role": "source"}, {"id": "edge-b", "role": "destination"},
    {"id": "ue", "role": "client"}, {"id": "orch", "role": "orchestrator"}
  ],
  "links": [{"src": "edge-a", "dst": "edge-b", "bandwidth_mbps": 1000, "latency_s": 0}],
  "ms_profiles": [
    {"id": "small", "state_size_bytes": 524288, "dirty_rate_norm": 0.031496062992125984,
     "cpu_context_bytes": 65536, "dirty_samples": [{"window_s": 1, "pages_modified": 5}]},
    {"id": "large", "state_size_bytes": 10485760, "dirty_rate_norm": 0.0015631105900742478,
     "cpu_context_bytes": 65536}
  ],
  "model_params": {"ckpt_fixed_s": 0.503, "ckpt_per_byte_s": 4.889e-8, "restore_fixed_s": 0.353,
                   "restore_per_byte_s": 4.889e-8, "transfer_signaling_s": 0.003,
                   "ns_overhead_s": 0.084, "flow_update_s": 0.004},
  "calibration_runs": [
    {"image_bytes": 1000000, "ckpt_s": 0.6, "restore_s": 0.4, "transfer_s": 0.011},
    {"image_bytes": 5000000, "ckpt_s": 1.0, "restore_s": 0.6, "transfer_s": 0.043}
  ],
  "task": {"container_id": "c1", "source": "edge-a", "destination": "edge-b",
           "objective": "minimize_downtime", "target_duration_s": 5, "profile": "large"},
  "sweep": {"variable": "target_duration", "from_s": 2, "to_s": 10, "step_s": 1, "profiles": ["small", "large"]},
  "distribution": {"mean_mbps": 1000, "std_mbps": 100, "samples": 2000},
  "seed": 7
})";

fs::path scratch(const std::string& name)
{
    const auto dir = fs::temp_directory_path() / ("mose-test-" + std::to_string(::getpid())) / name;
    fs::remove_all(dir);
    fs::create_directories(dir);
    return dir;
}

std::string slurp(const fs::path& p)
{
    std::ifstream in(p, std::ios::binary);
    std::ostringstream s;
    s << in.rdbuf();
    return s.str();
}

fs::path write_scenario(const fs::path& dir, const std::string& text)
{
    const auto p = dir / "scenario.json";
    std::ofstream(p) << text;
    return p;
}

int run_cli(const std::string& args)
{
    const std::string cmd = std::string(MOSE_CLI_PATH) + " " + args + " >/dev/null 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::size_t line_count(const std::string& s)
{
    return static_cast<std::size_t>(std::count(s.begin(), s.end(), '\n'));
}

}  // namespace

TEST_SUITE("cli")
{
    TEST_CASE("scenario round trip")
    {
        const auto a = parse_scenario(kScenario);
        const auto text = serialize_scenario(a);
        const auto b = parse_scenario(text);
        CHECK(a == b);
        CHECK(serialize_scenario(b) == text);
        CHECK(a.links[0].bandwidth_mbps == 1000);
        CHECK(a.simulation("large").available_bandwidth() == Bandwidth::mbps(1000));
        // Pre-checkpoint costs default to the checkpoint costs.
        CHECK(a.model_params.pre_ckpt_fixed_s == a.model_params.ckpt_fixed_s);
    }

    TEST_CASE("malformed scenarios are rejected")
    {
        CHECK_THROWS_AS(parse_scenario("{not json"), ScenarioError);
        CHECK_THROWS_AS(parse_scenario("{}"), ScenarioError);
        std::string s = kScenario;
        auto bad = [&](const std::string& from, const std::string& to) {
            std::string t = s;
            const auto pos = t.find(from);
            REQUIRE(pos != std::string::npos);
            t.replace(pos, from.size(), to);
            return t;
        };
        CHECK_THROWS_AS(parse_scenario(bad("\"step_s\": 1", "\"step_s\": 0")), ScenarioError);
        CHECK_THROWS_AS(parse_scenario(bad("\"from_s\": 2", "\"from_s\": 20")), ScenarioError);
        CHECK_THROWS_AS(parse_scenario(bad("\"profile\": \"large\"", "\"profile\": \"huge\"")), ScenarioError);
        CHECK_THROWS_AS(parse_scenario(bad("\"role\": \"client\"", "\"role\": \"phone\"")), ScenarioError);
        CHECK_THROWS_AS(parse_scenario(bad("\"seed\": 7", "\"seed\": 7, \"colour\": 1")), ScenarioError);
        CHECK_THROWS_AS(parse_scenario(bad("\"bandwidth_mbps\": 1000, \"latency_s\": 0",
                                           "\"bandwidth_mbps\": -1, \"latency_s\": 0")),
                        ScenarioError);
        CHECK_THROWS_AS(load_scenario("/nonexistent/scenario.json"), IoError);
    }

    TEST_CASE("sweep: rows, order, regions, green rows meet the target in simulation")
    {
        const auto sc = parse_scenario(kScenario);
        const auto rows = run_sweep(sc, *sc.sweep);
        REQUIRE(rows.size() == 18);
        const auto csv = sweep_csv(rows);
        CHECK(line_count(csv) == 19);
        CHECK(csv.substr(0, csv.find('\n')) == kSweepCsvHeader);
        for (std::size_t i = 1; i < rows.size(); ++i) {
            const bool ordered = rows[i - 1].target_s < rows[i].target_s ||
                                 (rows[i - 1].target_s == rows[i].target_s && rows[i - 1].profile < rows[i].profile);
            CHECK(ordered);
        }
        bool saw_yellow = false;
        for (const auto& r : rows) {
            CHECK(r.simulation_completed);
            // Simulated KPIs are differences of absolute clock readings; allow
            // for the rounding that adds when a design lands on its target.
            if (r.region != Region::Red)
                CHECK(r.simulated.total_s <= r.target_s * (1 + 1e-9));
            if (r.region == Region::Yellow) {
                saw_yellow = true;
                CHECK(r.profile == "small");
            }
            CHECK((r.region == Region::Red) == !r.config.target_met);
        }
        CHECK(saw_yellow);
    }

    TEST_CASE("sweep: everything below the floor is Cold and red")
    {
        auto sc = parse_scenario(kScenario);
        SweepSpec spec{SweepVariable::TargetDuration, 0.1, 0.9, 0.1, {"small", "large"}};
        const auto rows = run_sweep(sc, spec);
        CHECK(rows.size() == 18);
        for (const auto& r : rows) {
            CHECK(r.config.strategy == StrategyChoice::cold());
            CHECK(r.region == Region::Red);
        }
    }

    TEST_CASE("sweep: single profile uses red/green only; downtime sweeps lower the bandwidth")
    {
        auto sc = parse_scenario(kScenario);
        SweepSpec spec{SweepVariable::TargetDowntime, 1.0, 5.0, 0.5, {"large"}};
        const auto rows = run_sweep(sc, spec);
        Bandwidth prev = Bandwidth::mbps(1e9);
        for (const auto& r : rows) {
            CHECK(r.region != Region::Yellow);
            CHECK(r.config.strategy == StrategyChoice::cold());
            if (r.config.target_met) {
                CHECK(r.config.bandwidth <= prev);
                CHECK(r.simulated.downtime_s <= r.target_s * (1 + 1e-9));
                prev = r.config.bandwidth;
            }
        }
    }

    TEST_CASE("sweep: thread count does not change the result")
    {
        const auto sc = parse_scenario(kScenario);
        CHECK(sweep_csv(run_sweep(sc, *sc.sweep, 1)) == sweep_csv(run_sweep(sc, *sc.sweep, 4)));
    }

    TEST_CASE("report: single row, byte-identical reruns, unwritable path")
    {
        const auto sc = parse_scenario(kScenario);
        SweepSpec one{SweepVariable::TargetDuration, 5.0, 5.5, 1.0, {"large"}};
        const auto rows = run_sweep(sc, one);
        REQUIRE(rows.size() == 1);
        const auto dir = scratch("report");
        emit_report(rows, dir.string());
        CHECK(line_count(slurp(dir / "sweep.csv")) == 2);
        CHECK_FALSE(slurp(dir / "sweep_summary.txt").empty());
        const auto first = slurp(dir / "sweep.csv");
        emit_report(run_sweep(sc, one), dir.string());
        CHECK(slurp(dir / "sweep.csv") == first);

        CHECK_THROWS_AS(emit_report({}, dir.string()), std::invalid_argument);
        std::ofstream(dir / "blocker") << "x";
        CHECK_THROWS_AS(emit_report(rows, (dir / "blocker" / "sub").string()), IoError);
    }

    TEST_CASE("format_g6")
    {
        CHECK(format_g6(2.0) == "2");
        CHECK(format_g6(1.0 / 3.0) == "0.333333");
        CHECK(format_g6(10485760) == "1.04858e+07");
    }

    TEST_CASE("cli: subcommands and exit codes")
    {
        const auto dir = scratch("cli");
        const auto scenario = write_scenario(dir, kScenario).string();
        const auto out = (dir / "out").string();
        for (const char* cmd : {"profile", "fit", "plan", "simulate", "sweep", "dist"})
            CHECK_MESSAGE(run_cli(std::string(cmd) + " --scenario " + scenario + " --out " + out) == 0, cmd);
        for (const char* f : {"profile.json", "fit.json", "plan.json", "kpis.csv", "events.jsonl", "sweep.csv",
                              "sweep_summary.txt", "dist.csv"})
            CHECK_MESSAGE(fs::exists(fs::path(out) / f), f);
        CHECK(line_count(slurp(fs::path(out) / "sweep.csv")) == 19);

        // Usage errors.
        CHECK(run_cli("") == 2);
        CHECK(run_cli("teleport --scenario " + scenario) == 2);
        CHECK(run_cli("plan") == 2);
        CHECK(run_cli("dist --scenario " + scenario + " --samples 0") == 2);

        // Malformed scenario.
        fs::create_directories(dir / "broken");
        std::ofstream(dir / "broken" / "scenario.json") << "{\"hosts\": 3}";
        CHECK(run_cli("plan --scenario " + (dir / "broken" / "scenario.json").string()) == 2);

        // Missing scenario file and unwritable output are I/O errors.
        CHECK(run_cli("plan --scenario " + (dir / "missing.json").string()) == 3);
        std::ofstream(dir / "blocker") << "x";
        CHECK(run_cli("plan --scenario " + scenario + " --out " + (dir / "blocker" / "sub").string()) == 3);

        // Runtime error: the task's target is invalid for the designer.
        std::string neg = kScenario;
        neg.replace(neg.find("\"target_duration_s\": 5"), 22, "\"target_duration_s\": -5");
        const auto neg_dir = dir / "neg";
        fs::create_directories(neg_dir);
        std::ofstream(neg_dir / "scenario.json") << neg;
        CHECK(run_cli("plan --scenario " + (neg_dir / "scenario.json").string() + " --out " + out) == 1);
    }

    TEST_CASE("cli: simulate, sweep and dist are byte-identical across runs")
    {
        const auto dir = scratch("determinism");
        const auto scenario = write_scenario(dir, kScenario).string();
        for (const char* cmd : {"simulate", "sweep", "dist"}) {
            const auto a = dir / (std::string(cmd) + "-a");
            const auto b = dir / (std::string(cmd) + "-b");
            REQUIRE(run_cli(std::string(cmd) + " --scenario " + scenario + " --out " + a.string() + " --seed 11") == 0);
            REQUIRE(run_cli(std::string(cmd) + " --scenario " + scenario + " --out " + b.string() +
                            " --seed 11 --parallel 3") == 0);
            for (const auto& entry : fs::directory_iterator(a))
                CHECK_MESSAGE(slurp(entry.path()) == slurp(b / entry.path().filename()), entry.path());
        }
    }
}
