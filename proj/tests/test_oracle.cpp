#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <vector>

#include "test_util.hpp"

using namespace arbsched;
using testutil::quad;
using testutil::two_price;
using Catch::Matchers::WithinAbs;

namespace {

// Random walk over the oracle's own lattice, staying feasible via suffix
// capability windows.  Used to confirm the value iteration lower-bounds any
// lattice schedule.
Schedule random_lattice_schedule(Lcg64& rng, const Problem& p, int lpu) {
    const std::int64_t n = std::llround(p.E * lpu);
    const std::int64_t ist = std::llround(p.ST * lpu);
    std::vector<std::int64_t> kin(p.T), kout(p.T);
    for (std::size_t t = 0; t < p.T; ++t) {
        kin[t] = std::llround(p.costs[t].rate.p_in * lpu);
        kout[t] = std::llround(p.costs[t].rate.p_out * lpu);
    }
    std::vector<std::int64_t> in_left(p.T + 1, 0), out_left(p.T + 1, 0);
    for (std::size_t t = p.T; t-- > 0;) {
        in_left[t] = in_left[t + 1] + kin[t];
        out_left[t] = out_left[t + 1] + kout[t];
    }
    Schedule s;
    std::int64_t cur = std::llround(p.S0 * lpu);
    s.levels.push_back(static_cast<double>(cur) / lpu);
    for (std::size_t t = 1; t <= p.T; ++t) {
        std::int64_t j;
        if (t == p.T) {
            j = ist;
        } else {
            const std::int64_t lo =
                std::max({cur - kout[t - 1], std::int64_t{0}, ist - in_left[t]});
            const std::int64_t hi = std::min({cur + kin[t - 1], n, ist + out_left[t]});
            j = testutil::uniform_int(rng, lo, std::max(lo, hi));
        }
        const double level = static_cast<double>(j) / lpu;
        s.flows.push_back(level - s.levels.back());
        s.levels.push_back(level);
        cur = j;
    }
    return s;
}

} // namespace

TEST_CASE("value iteration and exhaustive search agree bit for bit") {
    Lcg64 rng(21);
    const GridSpec grid{4};
    int compared = 0;
    for (int i = 0; i < 60; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 1, 4));
        const Problem p = testutil::random_problem(rng, T);
        OracleResult dp, ex;
        bool dp_infeasible = false;
        try {
            dp = dp_solve(p, grid);
        } catch (const GridInfeasible&) {
            dp_infeasible = true;
        }
        if (dp_infeasible) {
            // Snapping can sever the lattice; both oracles must agree on that.
            CHECK_THROWS_AS(exhaustive_solve(p, grid), GridInfeasible);
            continue;
        }
        ex = exhaustive_solve(p, grid);
        REQUIRE(dp.objective == ex.objective);
        REQUIRE(dp.levels == ex.levels);
        CHECK(dp.snap_distance == ex.snap_distance);
        ++compared;
    }
    CHECK(compared >= 40); // snapping should only rarely disconnect S0 from ST
}

TEST_CASE("oracles price a forced single-period flow exactly") {
    const Problem p = testutil::make_problem(1.0, 0.0, 0.5, {two_price(2.0, 1.0)});
    const OracleResult dp = dp_solve(p);
    CHECK(dp.objective == 1.0);
    CHECK(dp.levels == std::vector<double>{0.0, 0.5});
    const OracleResult ex = exhaustive_solve(p);
    CHECK(ex.objective == 1.0);
    CHECK(ex.levels == dp.levels);
}

TEST_CASE("buy low sell high nets the price difference") {
    const Problem p = testutil::make_problem(
        1.0, 0.0, 0.0, {two_price(1.0, 0.9), two_price(3.0, 2.0)});
    CHECK(dp_solve(p, GridSpec{100}).objective == -1.0);
    CHECK(dp_solve(p, GridSpec{2}).objective == -1.0);
    const OracleResult ex = exhaustive_solve(p, GridSpec{2});
    CHECK(ex.objective == -1.0);
    CHECK(ex.levels == std::vector<double>{0.0, 1.0, 0.0});
}

TEST_CASE("flat prices leave no profit") {
    std::vector<CostFunction> costs(4, two_price(2.0, 2.0));
    const Problem p = testutil::make_problem(1.0, 0.5, 0.5, std::move(costs));
    CHECK_THAT(dp_solve(p).objective, WithinAbs(0.0, 1e-12));
}

TEST_CASE("value iteration lower-bounds random lattice schedules") {
    Lcg64 rng(22);
    testutil::InstanceOptions opt;
    opt.grid_commensurate = true;
    for (int i = 0; i < 15; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 2, 8));
        const Problem p = testutil::random_problem(rng, T, opt);
        const OracleResult dp = dp_solve(p);
        REQUIRE(dp.snap_distance == 0.0);
        for (int k = 0; k < 20; ++k) {
            const Schedule s = random_lattice_schedule(rng, p, 100);
            CHECK(dp.objective <= objective(p, s) + 1e-9);
        }
    }
}

TEST_CASE("unreachable targets raise grid infeasibility") {
    const Problem p = testutil::make_problem(
        1.0, 0.0, 1.0,
        {two_price(2.0, 1.0, 0.3, 0.3), two_price(2.0, 1.0, 0.3, 0.3)});
    CHECK_THROWS_AS(dp_solve(p), GridInfeasible);
    CHECK_THROWS_AS(exhaustive_solve(p), GridInfeasible);
}

TEST_CASE("exhaustive search enforces its size caps") {
    std::vector<CostFunction> costs(7, two_price(2.0, 1.0));
    const Problem long_horizon = testutil::make_problem(1.0, 0.0, 0.0, std::move(costs));
    CHECK_THROWS_AS(exhaustive_solve(long_horizon), TooLarge);

    std::vector<CostFunction> wide(6, two_price(2.0, 1.0, 2.0, 2.0));
    const Problem many_paths = testutil::make_problem(10.0, 0.0, 0.0, std::move(wide));
    CHECK_THROWS_AS(exhaustive_solve(many_paths), TooLarge);
    CHECK_NOTHROW(dp_solve(many_paths)); // value iteration has no such cap
}

TEST_CASE("lattice snapping is reported") {
    const Problem off = testutil::make_problem(1.0, 0.333, 0.0, {two_price(2.0, 1.0)});
    const OracleResult r = dp_solve(off, GridSpec{2});
    CHECK_THAT(r.snap_distance, WithinAbs(0.167, 1e-12));
    CHECK(r.levels.front() == 0.5); // S0 snapped to the nearest lattice level

    const Problem on = testutil::make_problem(1.0, 0.5, 0.0, {two_price(2.0, 1.0)});
    CHECK(dp_solve(on, GridSpec{2}).snap_distance == 0.0);
}

TEST_CASE("finer lattices only improve the value") {
    // Strictly convex, so the continuous optimum sits between lattice points
    // and the discretization gap is visible and shrinking.
    const Problem p = testutil::make_problem(
        2.0, 1.0, 1.0,
        {quad(5.0, 4.0, 0.5, 0.5), quad(1.0, 0.8, 0.3, 0.3), quad(9.0, 8.5, 0.4, 0.4)});
    const double opt = objective(p, solve(p).schedule);

    double prev = std::numeric_limits<double>::infinity();
    std::vector<double> gaps;
    for (const int lpu : {10, 20, 40, 80}) {
        const double v = dp_solve(p, GridSpec{lpu}).objective;
        CHECK(v <= prev);
        CHECK(v >= opt - 1e-9); // restricted minimum can't beat the optimum
        gaps.push_back(v - opt);
        prev = v;
    }
    CHECK(gaps.back() <= gaps.front() / 2.0);
}
