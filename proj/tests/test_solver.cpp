#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <cstdint>
#include <variant>
#include <vector>

#include "test_util.hpp"

using namespace arbsched;
using testutil::make_problem;
using testutil::two_price;
using Catch::Matchers::WithinAbs;

namespace {

// T=2 buy-cheap-then-sell-dear instance used across several tests.
Problem buy_then_sell() {
    return make_problem(1.0, 0.0, 0.0, {two_price(1.0, 0.9), two_price(3.0, 2.0)});
}

Problem scale_problem(const Problem& p, double k) {
    Problem q = p;
    q.E *= k;
    q.S0 *= k;
    q.ST *= k;
    for (auto& cf : q.costs) {
        cf.rate.p_in *= k;
        cf.rate.p_out *= k;
        if (auto* pl = std::get_if<PiecewiseLinearConvex>(&cf.family)) {
            for (auto& kn : pl->knots) kn.x *= k;
        } else if (auto* qd = std::get_if<QuadraticImpact>(&cf.family)) {
            qd->buy_curvature /= k;
            qd->sell_curvature /= k;
        }
    }
    validate(q);
    return q;
}

} // namespace

TEST_CASE("reach bands classify a trial reference value") {
    const Problem p = buy_then_sell();
    for (int i = 0; i <= 40; ++i) {
        const double mu = i / 10.0;
        const ReachBand b = classify_mu(p, mu);
        INFO("mu = " << mu);
        if (i < 9) {
            CHECK(b.cls.kind == Feasibility::Under);
            CHECK(b.cls.violation_time == 1);
        } else if (i < 10) {
            CHECK(b.cls.kind == Feasibility::Under);
            CHECK(b.cls.violation_time == 2);
        } else if (i <= 20) {
            CHECK(b.cls.kind == Feasibility::Feasible);
        } else {
            CHECK(b.cls.kind == Feasibility::Over);
            CHECK(b.cls.violation_time == 2);
        }
    }
}

TEST_CASE("saturated reference values pin every flow") {
    std::vector<CostFunction> costs(3, two_price(5.0, 4.0));
    const Problem p = make_problem(2.0, 1.0, 1.0, std::move(costs));

    const ReachBand low = classify_mu(p, 0.0); // below every sell price
    CHECK(low.cls.kind == Feasibility::Under);
    CHECK(low.cls.violation_time == 2);

    const ReachBand high = classify_mu(p, 100.0); // above every buy price
    CHECK(high.cls.kind == Feasibility::Over);
    CHECK(high.cls.violation_time == 2);
}

TEST_CASE("the critical reference value lands on the price threshold") {
    // Forced single-period buy: the threshold is the buy price itself.
    const Problem single = make_problem(1.0, 0.0, 1.0, {two_price(2.0, 1.0)});
    const MuBarResult r1 = find_mu_bar(single);
    CHECK(r1.mu_bar == 2.0);
    CHECK(r1.band.cls.kind == Feasibility::Feasible);
    CHECK(classify_mu(single, 2.0 - 1e-6).cls.kind == Feasibility::Under);
    CHECK(classify_mu(single, 2.0 + 1e-6).cls.kind == Feasibility::Feasible);

    // Buy-then-sell: any mu in [1, 2] is feasible; the critical value is the
    // lower edge of that flat band.
    const Problem pair = buy_then_sell();
    const MuBarResult r2 = find_mu_bar(pair);
    CHECK(r2.mu_bar == 1.0);
    CHECK(r2.band.cls.kind == Feasibility::Feasible);
    CHECK(classify_mu(pair, 1.0 - 1e-6).cls.kind == Feasibility::Under);
}

TEST_CASE("infeasible targets are detected in both directions") {
    std::vector<CostFunction> slow(2, two_price(2.0, 1.0, 0.5, 0.5));
    const Problem up = make_problem(2.0, 0.0, 2.0, slow);
    CHECK_THROWS_AS(solve(up), InfeasibleProblem);
    CHECK_THROWS_AS(find_mu_bar(up), InfeasibleProblem);

    const Problem down = make_problem(2.0, 2.0, 0.0, slow);
    CHECK_THROWS_AS(solve(down), InfeasibleProblem);
    CHECK_THROWS_AS(find_mu_bar(down), InfeasibleProblem);
}

TEST_CASE("a paying middle period folds into one terminal segment") {
    const Problem p = make_problem(
        1.0, 0.0, 0.0,
        {two_price(1.0, 0.9), two_price(5.0, 4.0), two_price(1.2, 1.1)});
    const MuBarResult r = find_mu_bar(p);
    CHECK(r.mu_bar == 1.1);
    CHECK(r.band.cls.kind == Feasibility::Feasible);

    const SolveResult sr = solve(p);
    CHECK(sr.certificate.boundaries == std::vector<std::size_t>{0, 3});
    REQUIRE(sr.certificate.pins.size() == 1);
    CHECK(sr.certificate.pins[0] == PinKind::Terminal);
    CHECK(sr.certificate.mu == std::vector<double>{1.1, 1.1, 1.1});
    CHECK(sr.schedule.flows == std::vector<double>{1.0, -1.0, 0.0});
    CHECK(objective(p, sr.schedule) == -3.0);
    CHECK(dp_solve(p).objective == -3.0);
    CHECK(verify_certificate(p, sr.schedule, sr.certificate).ok());
}

TEST_CASE("pinned segments chain with monotone reference values") {
    const Problem p = make_problem(1.0, 0.0, 0.0,
                                   {two_price(2.0, 1.8), two_price(11.0, 10.0),
                                    two_price(1.0, 0.9), two_price(1.6, 1.5)});
    const SolveResult sr = solve(p);
    CHECK(sr.certificate.boundaries == std::vector<std::size_t>{0, 2, 4});
    REQUIRE(sr.certificate.pins.size() == 2);
    CHECK(sr.certificate.pins[0] == PinKind::Empty);
    CHECK(sr.certificate.pins[1] == PinKind::Terminal);
    CHECK(sr.certificate.mu == std::vector<double>{2.0, 2.0, 1.0, 1.0});
    CHECK(sr.schedule.flows == std::vector<double>{1.0, -1.0, 1.0, -1.0});
    CHECK(sr.schedule.levels == std::vector<double>{0.0, 1.0, 0.0, 1.0, 0.0});
    CHECK(objective(p, sr.schedule) == -8.5);
    CHECK(verify_certificate(p, sr.schedule, sr.certificate).ok());

    // The reference value may only fall across an empty pin.
    CHECK(sr.certificate.mu[2] <= sr.certificate.mu[1]);
}

TEST_CASE("a single-period tail forms its own segment") {
    const Problem p = make_problem(
        1.0, 0.0, 0.0,
        {two_price(2.0, 1.8), two_price(11.0, 10.0), two_price(0.5, 0.4)});
    const SolveResult sr = solve(p);
    CHECK(sr.certificate.boundaries == std::vector<std::size_t>{0, 2, 3});
    REQUIRE(sr.certificate.pins.size() == 2);
    CHECK(sr.certificate.pins[0] == PinKind::Empty);
    CHECK(sr.certificate.pins[1] == PinKind::Terminal);
    CHECK(sr.certificate.mu == std::vector<double>{2.0, 2.0, 0.4});
    CHECK(sr.schedule.flows == std::vector<double>{1.0, -1.0, 0.0});
    CHECK(objective(p, sr.schedule) == -8.0);
    CHECK(verify_certificate(p, sr.schedule, sr.certificate).ok());
}

TEST_CASE("a pinned segment's tail re-solves to the same certificate") {
    const Problem tail =
        make_problem(1.0, 0.0, 0.0, {two_price(1.0, 0.9), two_price(1.6, 1.5)});
    const SolveResult sr = solve(tail);
    CHECK(sr.certificate.mu == std::vector<double>{1.0, 1.0});
    CHECK(sr.schedule.flows == std::vector<double>{1.0, -1.0});
}

TEST_CASE("objective sums period costs and enforces feasibility") {
    const Problem p = buy_then_sell();
    Schedule s;
    s.levels = {0.0, 1.0, 0.0};
    s.flows = {1.0, -1.0};
    CHECK(objective(p, s) == -1.0);

    Schedule bad = s;
    bad.levels[0] = 0.5;
    CHECK_THROWS_AS(objective(p, bad), InfeasibleSchedule);
    bad = s;
    bad.levels[2] = 0.5;
    CHECK_THROWS_AS(objective(p, bad), InfeasibleSchedule);
    bad = s;
    bad.levels[1] = 1.5; // above capacity and inconsistent with the flow
    CHECK_THROWS_AS(objective(p, bad), InfeasibleSchedule);
    bad = s;
    bad.flows[0] = 0.5; // no longer matches the level step
    CHECK_THROWS_AS(objective(p, bad), InfeasibleSchedule);
    bad = s;
    bad.flows.pop_back();
    CHECK_THROWS_AS(objective(p, bad), InfeasibleSchedule);

    Lcg64 rng(31);
    for (int i = 0; i < 25; ++i) {
        const Problem q = testutil::random_problem(
            rng, static_cast<std::size_t>(testutil::uniform_int(rng, 1, 10)));
        const Schedule r = testutil::random_feasible_schedule(rng, q);
        double again = 0.0;
        for (std::size_t t = 0; t < q.T; ++t) again += evaluate(q.costs[t], r.flows[t]);
        CHECK_THAT(objective(q, r), WithinAbs(again, 1e-12));
    }
}

TEST_CASE("solver output certifies optimal on random instances") {
    Lcg64 rng(32);
    for (int i = 0; i < 60; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 1, 24));
        const Problem p = testutil::random_problem(rng, T);
        const SolveResult sr = solve(p);
        const CertificateReport rep = verify_certificate(p, sr.schedule, sr.certificate);
        INFO("instance " << i << ": " << rep.details);
        CHECK(rep.ok());

        // Certificate structure: strictly increasing boundaries covering the
        // horizon, constant mu per segment, Terminal only at the end.
        const auto& c = sr.certificate;
        REQUIRE(c.boundaries.front() == 0);
        REQUIRE(c.boundaries.back() == T);
        REQUIRE(c.pins.size() + 1 == c.boundaries.size());
        CHECK(c.pins.back() == PinKind::Terminal);
        const double tol = 8.0 * detail::resolve_tol_mu(p, {});
        for (std::size_t k = 0; k + 1 < c.boundaries.size(); ++k) {
            CHECK(c.boundaries[k] < c.boundaries[k + 1]);
            if (k + 2 < c.boundaries.size()) CHECK(c.pins[k] != PinKind::Terminal);
            for (std::size_t t = c.boundaries[k]; t < c.boundaries[k + 1]; ++t)
                CHECK(c.mu[t] == c.mu[c.boundaries[k]]);
        }
        // Across pins the reference value moves with the binding bound.
        const auto segs = segments(c);
        for (std::size_t k = 0; k + 1 < segs.size(); ++k) {
            if (segs[k].pin == PinKind::Full)
                CHECK(segs[k + 1].mu >= segs[k].mu - tol);
            else if (segs[k].pin == PinKind::Empty)
                CHECK(segs[k + 1].mu <= segs[k].mu + tol);
        }
    }
}

TEST_CASE("certified schedules dominate random feasible schedules") {
    Lcg64 rng(33);
    for (int i = 0; i < 15; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 2, 16));
        const Problem p = testutil::random_problem(rng, T);
        const double best = objective(p, solve(p).schedule);
        for (int k = 0; k < 50; ++k) {
            const Schedule s = testutil::random_feasible_schedule(rng, p);
            CHECK(best <= objective(p, s) + 1e-9);
        }
    }
}

TEST_CASE("classification is monotone in the reference value") {
    Lcg64 rng(34);
    for (int i = 0; i < 20; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 1, 12));
        const Problem p = testutil::random_problem(rng, T);
        const Interval hull = detail::slope_hull(p);
        std::vector<double> mus;
        for (int k = 0; k < 15; ++k)
            mus.push_back(testutil::uniform(rng, hull.lo - 2.0, hull.hi + 2.0));
        std::sort(mus.begin(), mus.end());
        bool seen_not_under = false, seen_over = false;
        for (const double mu : mus) {
            const Feasibility kind = classify_mu(p, mu).cls.kind;
            if (seen_not_under) CHECK(kind != Feasibility::Under);
            if (seen_over) CHECK(kind == Feasibility::Over);
            seen_not_under = seen_not_under || kind != Feasibility::Under;
            seen_over = seen_over || kind == Feasibility::Over;
        }
    }
}

TEST_CASE("certified prices drive bang-bang flows at strict thresholds") {
    Lcg64 rng(35);
    testutil::InstanceOptions opt;
    opt.allow_plc = false;
    opt.allow_quadratic = false;
    const double margin = 1e-6;
    for (int i = 0; i < 25; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 2, 24));
        const Problem p = testutil::random_problem(rng, T, opt);
        const SolveResult sr = solve(p);
        REQUIRE(verify_certificate(p, sr.schedule, sr.certificate).ok());
        for (std::size_t t = 0; t < T; ++t) {
            const auto& tp = std::get<TwoPriceLinear>(p.costs[t].family);
            const double mu = sr.certificate.mu[t];
            const double x = sr.schedule.flows[t];
            if (mu > tp.buy + margin) {
                CHECK_THAT(x, WithinAbs(p.costs[t].rate.p_in, 1e-9));
            } else if (mu < tp.sell - margin) {
                CHECK_THAT(x, WithinAbs(-p.costs[t].rate.p_out, 1e-9));
            } else if (mu > tp.sell + margin && mu < tp.buy - margin) {
                CHECK_THAT(x, WithinAbs(0.0, 1e-9));
            }
        }
    }
}

TEST_CASE("scaling capacity and rates rescales the schedule, not the prices") {
    Lcg64 rng(36);
    for (int i = 0; i < 10; ++i) {
        const std::size_t T = static_cast<std::size_t>(testutil::uniform_int(rng, 2, 12));
        const Problem p = testutil::random_problem(rng, T);
        const SolveResult base = solve(p);
        const double base_obj = objective(p, base.schedule);
        for (const double k : {2.0, 10.0}) {
            const Problem q = scale_problem(p, k);
            const SolveResult scaled = solve(q);
            const double scaled_obj = objective(q, scaled.schedule);
            CHECK_THAT(scaled_obj,
                       WithinAbs(k * base_obj, 1e-6 * (1.0 + std::abs(k * base_obj))));
            CHECK(scaled.certificate.boundaries == base.certificate.boundaries);
            for (std::size_t t = 0; t < T; ++t)
                CHECK_THAT(scaled.certificate.mu[t],
                           WithinAbs(base.certificate.mu[t], 1e-5));

            // The unscaled certificate certifies the scaled-up schedule.
            Schedule s = base.schedule;
            for (double& v : s.levels) v *= k;
            for (double& v : s.flows) v *= k;
            VerifyOptions vopts;
            vopts.tol_x = kTolX * k;
            vopts.tol_cost = kTolCost * k;
            const CertificateReport rep = verify_certificate(q, s, base.certificate, vopts);
            INFO("scale " << k << ": " << rep.details);
            CHECK(rep.ok());
        }
    }
}

TEST_CASE("slack capacity yields one flat segment") {
    Lcg64 rng(37);
    for (int i = 0; i < 10; ++i) {
        const std::size_t T = 12;
        std::vector<CostFunction> costs;
        for (std::size_t t = 0; t < T; ++t) {
            const double buy = testutil::uniform(rng, 1.0, 10.0);
            costs.push_back(two_price(buy, buy * testutil::uniform(rng, 0.3, 1.0)));
        }
        // Boundary levels so far from both bounds that neither can bind.
        const double s0 = static_cast<double>(T) + 1.0;
        const Problem p =
            make_problem(2.0 * s0 + 1.0, s0, s0, std::move(costs));
        const SolveResult sr = solve(p);
        CHECK(sr.certificate.boundaries == std::vector<std::size_t>{0, T});
        REQUIRE(sr.certificate.pins.size() == 1);
        CHECK(sr.certificate.pins[0] == PinKind::Terminal);
        CHECK(verify_certificate(p, sr.schedule, sr.certificate).ok());
        for (std::size_t t = 1; t < T; ++t) {
            CHECK(sr.schedule.levels[t] > 0.0);
            CHECK(sr.schedule.levels[t] < p.E);
        }
    }
}

TEST_CASE("tampered certificates fail the matching check") {
    // A flow pair nudged off the optimum stays feasible but loses pointwise
    // minimality.
    const Problem p = make_problem(
        1.0, 0.0, 0.0,
        {two_price(1.0, 0.9), two_price(2.0, 1.9), two_price(3.0, 2.0)});
    const SolveResult sr = solve(p);
    REQUIRE(sr.schedule.flows == std::vector<double>{1.0, 0.0, -1.0});
    Schedule nudged = sr.schedule;
    nudged.flows[0] -= 0.1;
    nudged.flows[1] += 0.1;
    nudged.levels[1] -= 0.1;
    const CertificateReport rep = verify_certificate(p, nudged, sr.certificate);
    CHECK(rep.feasible);
    CHECK_FALSE(rep.pointwise_min);
    CHECK(rep.comp_slack);
    CHECK_FALSE(rep.ok());
    CHECK(rep.details.find("reduced-cost minimizer") != std::string::npos);

    // A rising mu ramp across interior levels breaks complementary slackness.
    std::vector<CostFunction> flat(2, two_price(2.0, 1.0));
    const Problem q = make_problem(2.0, 1.0, 1.0, std::move(flat));
    const SolveResult qr = solve(q);
    REQUIRE(qr.schedule.flows == std::vector<double>{0.0, 0.0});
    MuCertificate ramp = qr.certificate;
    ramp.mu = {1.2, 1.4};
    const CertificateReport rep2 = verify_certificate(q, qr.schedule, ramp);
    CHECK(rep2.feasible);
    CHECK(rep2.pointwise_min);
    CHECK_FALSE(rep2.comp_slack);

    // A corrupted level breaks feasibility outright.
    Schedule broken = qr.schedule;
    broken.levels[1] += 0.5;
    CHECK_FALSE(verify_certificate(q, broken, qr.certificate).feasible);
}
