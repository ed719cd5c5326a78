#include "doctest.h"

#include "mose/model.hpp"
#include "support.hpp"

#include <cstdint>
#include <numeric>

using namespace mose;
using mose::test::relative_error;

namespace {

MsProfile profile_of(double m, double r = 0.0, double kappa = 0.0)
{
    MsProfile p;
    p.state_size_bytes = m;
    p.dirty_rate_norm = r;
    p.cpu_context_bytes = kappa;
    return p;
}

// Brute-force reference: sum every phase explicitly instead of using the
// closed form's I * per_round product.
double summed_total(const MsProfile& prof, const ModelParams& p, Bandwidth bw, int iterations)
{
    const double m = prof.state_size_bytes;
    const double vd = prof.dirty_rate_norm * m;
    double t = p.pre_checkpoint_s(m) + p.transfer_s(m, bw);
    for (int k = 0; k < iterations; ++k)
        t += p.pre_checkpoint_s(vd) + p.transfer_s(vd, bw);
    const double image = vd + prof.cpu_context_bytes;
    t += p.checkpoint_s(image) + p.ns_overhead_s + p.transfer_s(image, bw) + p.flow_update_s + p.restore_s(image);
    return t;
}

}  // namespace

TEST_SUITE("model")
{
    TEST_CASE("cold: pure transfer")
    {
        const auto k = cold_kpis(profile_of(1e8), ModelParams{}, Bandwidth::bytes_per_s(5e7));
        CHECK(k.downtime_s == doctest::Approx(2.0).epsilon(1e-12));
        CHECK(k.total_s == k.downtime_s);
        CHECK(k.bytes_transferred == 1e8);
    }

    TEST_CASE("cold: empty state pays fixed costs only")
    {
        ModelParams p;
        p.ckpt_fixed_s = 0.5;
        p.restore_fixed_s = 0.3;
        const auto k = cold_kpis(profile_of(0), p, Bandwidth::bytes_per_s(1e9));
        CHECK(k.downtime_s == doctest::Approx(0.8).epsilon(1e-12));
        CHECK(k.total_s == doctest::Approx(0.8).epsilon(1e-12));
    }

    TEST_CASE("cold: step decomposition adds up")
    {
        Rng rng(7);
        for (int i = 0; i < 50; ++i) {
            const auto prof = test::random_profile(rng);
            const auto p = test::random_params(rng);
            const auto bw = Bandwidth::mbps(10 + rng.uniform() * 990);
            const auto k = cold_kpis(prof, p, bw);
            CHECK(relative_error(k.stop_copy_sum_s(), k.downtime_s) < 1e-12);
            const double m = prof.state_size_bytes;
            const double expect = p.checkpoint_s(m) + p.ns_overhead_s + p.transfer_s(m, bw) + p.flow_update_s +
                                  p.restore_s(m);
            CHECK(relative_error(k.downtime_s, expect) < 1e-12);
        }
    }

    TEST_CASE("non-positive bandwidth is a domain error")
    {
        CHECK_THROWS_AS(cold_kpis(profile_of(1e6), ModelParams{}, Bandwidth{}), std::domain_error);
        CHECK_THROWS_AS(precopy_kpis(profile_of(1e6), ModelParams{}, Bandwidth::bytes_per_s(-1), 2),
                        std::domain_error);
    }

    TEST_CASE("precopy: no dirtying leaves only the first copy")
    {
        const auto k = precopy_kpis(profile_of(1e8), ModelParams{}, Bandwidth::bytes_per_s(1e8), 5);
        CHECK(k.downtime_s == 0.0);
        CHECK(k.total_s == doctest::Approx(1.0).epsilon(1e-12));
    }

    TEST_CASE("precopy: fully re-dirtied state degenerates to a Cold-sized Stop&Copy")
    {
        Rng rng(11);
        for (int i = 0; i < 20; ++i) {
            auto prof = test::random_profile(rng);
            prof.dirty_rate_norm = 1.0;
            const auto p = test::random_params(rng);
            const auto bw = Bandwidth::mbps(100);
            auto cold_image = prof;
            cold_image.state_size_bytes += prof.cpu_context_bytes;
            const double cold_down = cold_kpis(cold_image, p, bw).downtime_s;
            for (int iters : {0, 1, 4, 9})
                CHECK(relative_error(precopy_kpis(prof, p, bw, iters).downtime_s, cold_down) < 1e-12);
            // Transfer volume of I = 0 matches Cold up to the CPU context and
            // the initial copy.
            const auto k = precopy_kpis(prof, p, bw, 0);
            CHECK(k.bytes_transferred - prof.state_size_bytes ==
                  doctest::Approx(cold_kpis(prof, p, bw).bytes_transferred + prof.cpu_context_bytes));
        }
    }

    TEST_CASE("precopy: hand-computed closed form")
    {
        const auto prof = profile_of(1e8, 0.1);
        const auto bw = Bandwidth::bytes_per_s(1e8);
        const auto t = precopy_terms(prof, ModelParams{}, bw);
        CHECK(t.round0_s == doctest::Approx(1.0));
        CHECK(t.per_round_s == doctest::Approx(0.1));
        CHECK(t.downtime_s == doctest::Approx(0.1));
        const auto k = precopy_kpis(prof, ModelParams{}, bw, 8);
        CHECK(k.downtime_s == doctest::Approx(0.1));
        CHECK(k.total_s == doctest::Approx(1.9));
        CHECK(k.bytes_transferred == doctest::Approx(1e8 + 8 * 1e7 + 1e7));
    }

    TEST_CASE("precopy: closed form equals the phase-by-phase sum")
    {
        Rng rng(13);
        for (int i = 0; i < 100; ++i) {
            const auto prof = test::random_profile(rng);
            const auto p = test::random_params(rng);
            const auto bw = Bandwidth::mbps(1 + rng.uniform() * 1000);
            const int iters = static_cast<int>(rng.below(21));
            const auto k = precopy_kpis(prof, p, bw, iters);
            CHECK(relative_error(k.total_s, summed_total(prof, p, bw, iters)) < 1e-12);
            CHECK(relative_error(k.stop_copy_sum_s(), k.downtime_s) < 1e-12);
        }
    }

    TEST_CASE("monotonicity in bandwidth, state size and iterations")
    {
        Rng rng(17);
        for (int i = 0; i < 100; ++i) {
            const auto prof = test::random_profile(rng);
            const auto p = test::random_params(rng);
            const auto lo = Bandwidth::mbps(1 + rng.uniform() * 500);
            const auto hi = Bandwidth::bytes_per_s(lo.bytes_per_s() * 1.5);
            CHECK(cold_kpis(prof, p, hi).downtime_s < cold_kpis(prof, p, lo).downtime_s);
            auto bigger = prof;
            bigger.state_size_bytes *= 1.5;
            CHECK(cold_kpis(bigger, p, lo).downtime_s > cold_kpis(prof, p, lo).downtime_s);
            const auto t = precopy_terms(prof, p, lo);
            if (t.per_round_s > 0) {
                for (int it = 0; it < 10; ++it)
                    CHECK(precopy_kpis(prof, p, lo, it + 1).total_s > precopy_kpis(prof, p, lo, it).total_s);
            }
        }
    }

    TEST_CASE("predict dispatches on the strategy")
    {
        const auto prof = profile_of(5e7, 0.2, 1e4);
        const auto p = test::testbed_params();
        const auto bw = Bandwidth::mbps(500);
        CHECK(predict(prof, p, bw, StrategyChoice::cold()) == cold_kpis(prof, p, bw));
        CHECK(predict(prof, p, bw, StrategyChoice::precopy()) == precopy_kpis(prof, p, bw, 0));
        CHECK(predict(prof, p, bw, StrategyChoice::iterative(3)) == precopy_kpis(prof, p, bw, 3));
        CHECK_THROWS_AS(StrategyChoice::iterative(0), std::invalid_argument);
        CHECK(StrategyChoice::precopy_family(0) == StrategyChoice::precopy());
        CHECK(StrategyChoice::precopy_family(2) == StrategyChoice::iterative(2));
    }

    TEST_CASE("min_bandwidth: pure transfer inversion")
    {
        const auto bw = min_bandwidth(profile_of(1e8), ModelParams{}, 2.0, Bandwidth::bytes_per_s(1e9));
        REQUIRE(bw);
        CHECK(bw->bytes_per_s() == doctest::Approx(5e7).epsilon(1e-12));
    }

    TEST_CASE("min_bandwidth: infeasible targets")
    {
        const auto prof = profile_of(1e7);
        const auto p = test::testbed_params();
        const double fixed = p.checkpoint_s(1e7) + p.ns_overhead_s + p.transfer_signaling_s + p.flow_update_s +
                             p.restore_s(1e7);
        CHECK_FALSE(min_bandwidth(prof, p, fixed, Bandwidth::mbps(1000)));
        CHECK_FALSE(min_bandwidth(prof, p, fixed * 0.5, Bandwidth::mbps(1000)));
        // Feasible only with more than the available bandwidth.
        CHECK_FALSE(min_bandwidth(prof, p, fixed + 1e-6, Bandwidth::mbps(1000)));
    }

    TEST_CASE("min_bandwidth round-trips through cold_kpis")
    {
        Rng rng(19);
        int feasible = 0;
        for (int i = 0; i < 100; ++i) {
            const auto prof = test::random_profile(rng);
            const auto p = test::random_params(rng);
            const auto avail = Bandwidth::mbps(1000);
            const double floor = cold_kpis(prof, p, avail).downtime_s;
            const double target = floor * (1.0 + rng.uniform() * 3.0);
            const auto bw = min_bandwidth(prof, p, target, avail);
            REQUIRE(bw);
            ++feasible;
            const double down = cold_kpis(prof, p, *bw).downtime_s;
            CHECK(down <= target);
            CHECK(relative_error(down, target) < 1e-9);
            CHECK(*bw <= avail);
        }
        CHECK(feasible == 100);
    }

    TEST_CASE("max_iterations: hand-computed example")
    {
        // round0 = 1.0, per_round = 0.1, downtime = 0.2.
        const auto prof = profile_of(1e8, 0.1, 1e7);
        const auto bw = Bandwidth::bytes_per_s(1e8);
        const auto t = precopy_terms(prof, ModelParams{}, bw);
        REQUIRE(t.round0_s == doctest::Approx(1.0));
        REQUIRE(t.per_round_s == doctest::Approx(0.1));
        REQUIRE(t.downtime_s == doctest::Approx(0.2));
        const auto s = max_iterations(prof, ModelParams{}, bw, 2.0);
        REQUIRE(s);
        CHECK(*s == StrategyChoice::iterative(8));
        CHECK(precopy_kpis(prof, ModelParams{}, bw, 8).total_s <= 2.0);
        CHECK(precopy_kpis(prof, ModelParams{}, bw, 9).total_s > 2.0);
        CHECK_FALSE(max_iterations(prof, ModelParams{}, bw, 1.1));
    }

    TEST_CASE("max_iterations is maximal (brute-force scan)")
    {
        Rng rng(23);
        for (int i = 0; i < 100; ++i) {
            const auto prof = test::random_profile(rng);
            const auto p = test::random_params(rng);
            const auto bw = Bandwidth::mbps(10 + rng.uniform() * 990);
            const int cap = 1 + static_cast<int>(rng.below(40));
            const double base = precopy_kpis(prof, p, bw, 0).total_s;
            const double target = base * (0.8 + rng.uniform() * 3.0);

            int best = -1;
            for (int it = 0; it <= cap; ++it)
                if (precopy_kpis(prof, p, bw, it).total_s <= target)
                    best = it;
            const auto got = max_iterations(prof, p, bw, target, cap);
            if (best < 0) {
                CHECK_FALSE(got);
                continue;
            }
            REQUIRE(got);
            CHECK(got->iterations() == best);
            CHECK(precopy_kpis(prof, p, bw, got->iterations()).total_s <= target);
            if (got->iterations() < cap)
                CHECK(precopy_kpis(prof, p, bw, got->iterations() + 1).total_s > target);
        }
    }

    TEST_CASE("max_iterations honours the cap when rounds are free")
    {
        const auto s = max_iterations(profile_of(1e6, 0.0), ModelParams{}, Bandwidth::mbps(100), 10.0);
        REQUIRE(s);
        CHECK(s->iterations() == kDefaultIterationCap);
        const auto capped = max_iterations(profile_of(1e6, 0.0), ModelParams{}, Bandwidth::mbps(100), 10.0, 3);
        CHECK(capped->iterations() == 3);
    }

    TEST_CASE("frame_loss")
    {
        CHECK(frame_loss(30, 0.5) == 15);
        CHECK(frame_loss(0, 3.2) == 0);
        CHECK(frame_loss(2.5, 1.0) == 3);
        CHECK(frame_loss(30, 0.1) == 3);
        CHECK_THROWS_AS(frame_loss(-1, 1), std::domain_error);
    }

    TEST_CASE("frame_loss matches exact rational arithmetic")
    {
        // fps = a/10, downtime = b/1000; frames = ceil(a*b / 10000).
        Rng rng(29);
        for (int i = 0; i < 2000; ++i) {
            const std::int64_t a = static_cast<std::int64_t>(rng.below(1201));
            const std::int64_t b = static_cast<std::int64_t>(rng.below(20001));
            const std::int64_t num = a * b;
            const std::int64_t expect = (num + 9999) / 10000;
            CHECK(frame_loss(static_cast<double>(a) / 10.0, static_cast<double>(b) / 1000.0) == expect);
        }
    }
}
