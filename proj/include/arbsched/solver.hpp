// Optimal charge/discharge scheduling via a local-in-time construction.
//
// For a trial reference value mu, replacing each period's cost C_t(x) by the
// reduced cost C_t(x) - mu * x decouples the periods: every period wants a
// flow inside minimizer_interval(C_t, mu).  Propagating those intervals
// forward from the fixed start level yields a band of reachable levels.  The
// band either threads [0, E] all the way to the target (mu is admissible), or
// first dies below the floor ("Under": mu prices storage too low) or above
// the cap ("Over").  Both failure modes are monotone in mu, so the largest
// still-Under mu can be found by bisection.  At that critical value the band
// is pinned against a storage bound strictly before the failure time; fixing
// the level there closes one constant-mu segment, and the construction
// restarts from the pin.  The resulting (schedule, mu) pair satisfies the
// standard complementary-slackness optimality conditions, which
// verify_certificate checks independently.
//
// Bisection probes the finitely many slopes of linear cost pieces exactly.
// At those values the minimizer intervals are genuinely set-valued, so for
// piecewise-linear instances the critical mu, the pinned level and the
// recovered flows are all exact rather than tolerance-limited.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "arbsched/cost.hpp"
#include "arbsched/errors.hpp"
#include "arbsched/interval.hpp"
#include "arbsched/problem.hpp"

namespace arbsched {

struct SolverOptions {
    double tol_x = kTolX;
    double tol_cost = kTolCost;
    // Absolute mu tolerance; 0 means tol_mu_rel * max(1, slope spread).
    double tol_mu = 0.0;
    double tol_mu_rel = 1e-7;
    // Hard cap on bisection steps per segment.  A bracket of doubles
    // collapses in well under 2^11 halvings, so hitting this means a bug.
    int max_bisect_steps = 2048;
};

enum class Feasibility { Feasible, Under, Over };

struct Classification {
    Feasibility kind = Feasibility::Feasible;
    // First time the reach band leaves [0, E] (or misses ST at the horizon).
    std::size_t violation_time = 0;
};

// Reach bands R_t for one trial mu, propagated from (start_time, start_level).
// levels[i] is the band at time start_time + 1 + i, clipped to [0, E] at
// interior times.  Propagation stops at the first violation; the violating
// band itself is not stored (except at t = T, where the band is kept and
// compared against ST instead of [0, E]).
struct ReachBand {
    std::size_t start_time = 0;
    double start_level = 0.0;
    double mu = 0.0;
    Classification cls;
    std::vector<Interval> levels;

    const Interval& at(std::size_t t) const { return levels[t - start_time - 1]; }
    std::size_t last_time() const { return start_time + levels.size(); }
};

/** Propagates minimizer intervals from (start_time, start_level) and
 *  classifies mu as Under, Over or Feasible for the subproblem ending at
 *  (T, ST).  Both band endpoints are nondecreasing in mu, hence Under is
 *  downward closed and Over upward closed in mu. */
inline ReachBand classify_mu(const Problem& p, double mu, std::size_t start_time = 0,
                             double start_level = -1.0,
                             const SolverOptions& opts = {}) {
    if (start_level < 0.0) start_level = p.S0;
    ReachBand r{start_time, start_level, mu, {}, {}};
    r.levels.reserve(p.T - start_time);
    Interval band{start_level, start_level};
    for (std::size_t t = start_time + 1; t <= p.T; ++t) {
        band = band + minimizer_interval(p.costs[t - 1], mu);
        if (t < p.T) {
            if (band.hi < 0.0) {
                r.cls = {Feasibility::Under, t};
                return r;
            }
            if (band.lo > p.E) {
                r.cls = {Feasibility::Over, t};
                return r;
            }
            band.lo = std::max(band.lo, 0.0);
            band.hi = std::min(band.hi, p.E);
            r.levels.push_back(band);
        } else {
            r.levels.push_back(band);
            if (band.hi < p.ST - opts.tol_x)
                r.cls = {Feasibility::Under, t};
            else if (band.lo > p.ST + opts.tol_x)
                r.cls = {Feasibility::Over, t};
            else
                r.cls = {Feasibility::Feasible, t};
        }
    }
    return r;
}

namespace detail {

// Slopes of all linear cost pieces over the whole horizon, sorted and
// deduplicated.  Minimizer intervals are set-valued exactly at these values
// and vary continuously between them.
inline std::vector<double> mu_candidates(const Problem& p) {
    std::vector<double> cs;
    for (const auto& c : p.costs) flat_slopes(c, cs);
    std::sort(cs.begin(), cs.end());
    cs.erase(std::unique(cs.begin(), cs.end()), cs.end());
    return cs;
}

// Smallest interval containing every marginal cost of the whole horizon.
inline Interval slope_hull(const Problem& p) {
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (const auto& c : p.costs) {
        const Interval r = slope_range(c);
        lo = std::min(lo, r.lo);
        hi = std::max(hi, r.hi);
    }
    return {lo, hi};
}

inline double resolve_tol_mu(const Problem& p, const SolverOptions& opts) {
    if (opts.tol_mu > 0.0) return opts.tol_mu;
    const Interval h = slope_hull(p);
    return opts.tol_mu_rel * std::max(1.0, h.hi - h.lo);
}

// Largest stored time strictly before the violation at which the clipped
// band touches the requested bound (within tol).  This is where the segment
// can be pinned.
inline std::optional<std::size_t> pin_time(const ReachBand& band, const Problem& p,
                                           PinKind kind, double tol) {
    std::size_t last = std::min(band.last_time(), band.cls.violation_time - 1);
    for (std::size_t t = last; t > band.start_time; --t) {
        const Interval& b = band.at(t);
        if (kind == PinKind::Full ? b.hi >= p.E - tol : b.lo <= tol) return t;
    }
    return std::nullopt;
}

} // namespace detail

struct MuBarResult {
    double mu_bar = 0.0;
    ReachBand band; // classification and reach bands at mu_bar
};

/** Finds the critical reference value for the subproblem starting at
 *  (start_time, start_level): the supremum of the Under set, located to
 *  within the mu tolerance and refined until the segment at the returned
 *  value can actually be extracted (feasible terminal band, or a band
 *  pinned against a storage bound).  candidates, if given, must be the
 *  sorted flat slopes of the problem; hull, if given, must contain the
 *  slope hull of the remaining periods.  solve() precomputes both once so
 *  that per-segment work stays proportional to the segment's lookahead.
 *
 *  Throws InfeasibleProblem when every mu classifies Under (target
 *  unreachable from below) or every mu classifies Over (unreachable from
 *  above). */
inline MuBarResult find_mu_bar(const Problem& p, std::size_t start_time = 0,
                               double start_level = -1.0, const SolverOptions& opts = {},
                               const std::vector<double>* candidates = nullptr,
                               const Interval* hull = nullptr) {
    if (start_level < 0.0) start_level = p.S0;
    const double tol_mu = detail::resolve_tol_mu(p, opts);
    std::vector<double> own;
    if (!candidates) {
        own = detail::mu_candidates(p);
        candidates = &own;
    }

    // Bracket strictly outside every marginal cost of the remaining periods.
    // Beyond it all minimizer intervals saturate at a domain endpoint, so the
    // classification is constant and no further expansion can change it.  A
    // hull of the whole horizon works for any suffix.
    Interval sl;
    if (hull) {
        sl = *hull;
    } else {
        double smin = std::numeric_limits<double>::infinity(), smax = -smin;
        for (std::size_t t = start_time + 1; t <= p.T; ++t) {
            const Interval r = slope_range(p.costs[t - 1]);
            smin = std::min(smin, r.lo);
            smax = std::max(smax, r.hi);
        }
        sl = {smin, smax};
    }
    double lo = sl.lo - 1.0, hi = sl.hi + 1.0;

    auto classify = [&](double mu) { return classify_mu(p, mu, start_time, start_level, opts); };

    ReachBand blo = classify(lo);
    if (blo.cls.kind == Feasibility::Feasible)
        return {lo, std::move(blo)}; // no mu classifies Under; lowest admissible works
    if (blo.cls.kind == Feasibility::Over)
        throw InfeasibleProblem("target level unreachable from above: even maximal "
                                "discharge overshoots at t=" +
                                std::to_string(blo.cls.violation_time));
    ReachBand bhi = classify(hi);
    if (bhi.cls.kind == Feasibility::Under)
        throw InfeasibleProblem("target level unreachable from below: even maximal "
                                "charge falls short at t=" +
                                std::to_string(bhi.cls.violation_time));

    // Binary search over the flat slopes inside the bracket, so that for
    // piecewise-linear costs the bracket endpoints land on the transition
    // value exactly.
    {
        auto first = std::upper_bound(candidates->begin(), candidates->end(), lo);
        auto last = std::lower_bound(candidates->begin(), candidates->end(), hi);
        std::ptrdiff_t a = first - candidates->begin(), b = last - candidates->begin();
        while (a < b) {
            const std::ptrdiff_t m = a + (b - a) / 2;
            const double c = (*candidates)[static_cast<std::size_t>(m)];
            ReachBand bm = classify(c);
            if (bm.cls.kind == Feasibility::Under) {
                lo = c;
                blo = std::move(bm);
                a = m + 1;
            } else {
                hi = c;
                bhi = std::move(bm);
                b = m;
            }
        }
    }

    // Bisect, accepting a point only once the segment there is extractable.
    // For strictly convex pieces the bands move continuously in mu, so the
    // required terminal fit or bound touch appears as the bracket tightens.
    for (int step = 0; step < opts.max_bisect_steps; ++step) {
        if (hi - lo <= tol_mu) {
            if (bhi.cls.kind == Feasibility::Feasible) return {hi, std::move(bhi)};
            if (blo.cls.kind == Feasibility::Under &&
                detail::pin_time(blo, p, PinKind::Full, opts.tol_x))
                return {lo, std::move(blo)};
            if (bhi.cls.kind == Feasibility::Over &&
                detail::pin_time(bhi, p, PinKind::Empty, opts.tol_x))
                return {hi, std::move(bhi)};
        }
        const double mid = 0.5 * (lo + hi);
        if (!(mid > lo && mid < hi))
            throw InternalInvariantViolation(
                "mu bracket collapsed without an extractable segment");
        ReachBand bm = classify(mid);
        if (bm.cls.kind == Feasibility::Under) {
            lo = mid;
            blo = std::move(bm);
        } else {
            hi = mid;
            bhi = std::move(bm);
        }
    }
    throw InternalInvariantViolation("mu search exceeded the step limit");
}

// One extracted constant-mu segment.
struct Segment {
    std::size_t start_time = 0;
    std::size_t end_time = 0;
    double mu = 0.0;
    PinKind pin = PinKind::Terminal;
    std::vector<double> flows;  // periods start_time+1 .. end_time
    std::vector<double> levels; // times   start_time+1 .. end_time
};

/** Turns the critical-mu reach bands into concrete levels and flows for one
 *  segment.  Case Feasible ends the horizon at ST; case Under pins the level
 *  at capacity at the latest possible time before the violation; case Over
 *  pins at empty.  Within the segment, levels are confined to the
 *  intersection of the forward band with a backward band propagated from the
 *  pinned end, and each flow is the admissible minimizer closest to zero. */
inline Segment extract_segment(const Problem& p, const MuBarResult& r,
                               const SolverOptions& opts = {}) {
    const ReachBand& fwd = r.band;
    const std::size_t t0 = fwd.start_time;
    const double s0 = fwd.start_level;
    const double mu = r.mu_bar;

    std::size_t t1 = p.T;
    double s1 = p.ST;
    PinKind pin = PinKind::Terminal;
    if (fwd.cls.kind != Feasibility::Feasible) {
        pin = fwd.cls.kind == Feasibility::Under ? PinKind::Full : PinKind::Empty;
        const auto pt = detail::pin_time(fwd, p, pin, opts.tol_x);
        if (!pt)
            throw InternalInvariantViolation("no pinnable time in the reach band");
        t1 = *pt;
        s1 = pin == PinKind::Full ? fwd.at(t1).hi : fwd.at(t1).lo;
    }

    // Backward reach band from the pinned end level.
    std::vector<Interval> back(t1 - t0 + 1);
    back[t1 - t0] = {s1, s1};
    for (std::size_t t = t1; t > t0; --t) {
        Interval b = back[t - t0] - minimizer_interval(p.costs[t - 1], mu);
        if (t - 1 > t0) {
            b.lo = std::max(b.lo, 0.0);
            b.hi = std::min(b.hi, p.E);
        }
        back[t - 1 - t0] = b;
    }
    if (!back.front().valid() ||
        back.front().lo > s0 + 8 * opts.tol_x || back.front().hi < s0 - 8 * opts.tol_x)
        throw InternalInvariantViolation("backward band does not reach the start level");

    Segment seg{t0, t1, mu, pin, {}, {}};
    seg.flows.reserve(t1 - t0);
    seg.levels.reserve(t1 - t0);
    double prev = s0;
    for (std::size_t t = t0 + 1; t <= t1; ++t) {
        const Interval m = minimizer_interval(p.costs[t - 1], mu);
        const Interval goal =
            (t == t1 ? Interval{s1, s1}
                     : fwd.at(t).intersect_slack(back[t - t0]));
        double alo = std::max(m.lo, goal.lo - prev);
        double ahi = std::min(m.hi, goal.hi - prev);
        if (alo > ahi) {
            if (alo - ahi > 8 * opts.tol_x)
                throw InternalInvariantViolation(
                    "empty admissible flow set at t=" + std::to_string(t) +
                    "; mu tolerance too coarse");
            alo = ahi = 0.5 * (alo + ahi);
        }
        double x = std::min(std::max(0.0, alo), ahi);
        double level = prev + x;
        if (t == t1) { // land on the pinned level exactly
            x = s1 - prev;
            level = s1;
        }
        seg.flows.push_back(x);
        seg.levels.push_back(level);
        prev = level;
    }
    return seg;
}

struct SolveResult {
    Schedule schedule;
    MuCertificate certificate;
};

/** Computes an optimal schedule with its optimality certificate by chaining
 *  critical-mu segments from (0, S0) until the horizon is reached.  Runtime
 *  is linear in T when band violations stay local, as they do for cyclical
 *  prices.  Throws InfeasibleProblem if no feasible schedule exists. */
inline SolveResult solve(const Problem& p, const SolverOptions& opts = {}) {
    validate(p);
    const std::vector<double> candidates = detail::mu_candidates(p);
    const Interval hull = detail::slope_hull(p);
    SolverOptions eff = opts;
    eff.tol_mu = detail::resolve_tol_mu(p, opts);

    SolveResult out;
    out.schedule.levels.reserve(p.T + 1);
    out.schedule.flows.reserve(p.T);
    out.certificate.mu.reserve(p.T);
    out.schedule.levels.push_back(p.S0);
    out.certificate.boundaries.push_back(0);

    std::size_t t0 = 0;
    double s0 = p.S0;
    while (t0 < p.T) {
        MuBarResult r = find_mu_bar(p, t0, s0, eff, &candidates, &hull);
        Segment seg;
        try {
            seg = extract_segment(p, r, eff);
        } catch (const InternalInvariantViolation&) {
            // One retry with a much tighter mu tolerance, then give up.
            SolverOptions tighter = eff;
            tighter.tol_mu = eff.tol_mu / 1024.0;
            r = find_mu_bar(p, t0, s0, tighter, &candidates, &hull);
            seg = extract_segment(p, r, tighter);
        }
        out.schedule.levels.insert(out.schedule.levels.end(), seg.levels.begin(),
                                   seg.levels.end());
        out.schedule.flows.insert(out.schedule.flows.end(), seg.flows.begin(),
                                  seg.flows.end());
        out.certificate.mu.insert(out.certificate.mu.end(), seg.flows.size(), seg.mu);
        out.certificate.boundaries.push_back(seg.end_time);
        out.certificate.pins.push_back(seg.pin);
        t0 = seg.end_time;
        s0 = seg.levels.back();
    }
    return out;
}

struct VerifyOptions {
    double tol_x = kTolX;
    double tol_cost = kTolCost;
    // Slack for the per-period reduced-cost minimality check; 0 derives a
    // value that absorbs the flow tolerance scaled by the price magnitude.
    double tol_cert = 0.0;
    // Slack for mu jumps in the complementary-slackness check; 0 derives the
    // solver default.
    double tol_mu = 0.0;
};

struct CertificateReport {
    bool feasible = false;      // (i)  schedule satisfies all constraints
    bool pointwise_min = false; // (ii) each flow minimizes its reduced cost
    bool comp_slack = false;    // (iii) mu moves only at pinned levels
    std::string details;

    bool ok() const { return feasible && pointwise_min && comp_slack; }
};

/** Checks the three optimality conditions for an arbitrary
 *  (schedule, certificate) pair.  Satisfying all three proves the schedule
 *  optimal; this check shares no code path with the solver's segment
 *  construction.  Reports rather than throws. */
inline CertificateReport verify_certificate(const Problem& p, const Schedule& s,
                                            const MuCertificate& c,
                                            const VerifyOptions& vopts = {}) {
    CertificateReport rep;
    auto note = [&rep](const std::string& m) {
        if (!rep.details.empty()) rep.details += "; ";
        rep.details += m;
    };

    if (s.levels.size() != p.T + 1 || s.flows.size() != p.T || c.mu.size() != p.T) {
        note("size mismatch between schedule, certificate and horizon");
        return rep;
    }

    double max_abs_slope = 1.0;
    for (const auto& cf : p.costs) {
        const Interval r = slope_range(cf);
        max_abs_slope = std::max({max_abs_slope, std::abs(r.lo), std::abs(r.hi)});
    }
    const double tol_cert =
        vopts.tol_cert > 0.0 ? vopts.tol_cert
                             : std::max(vopts.tol_cost, 32.0 * vopts.tol_x * max_abs_slope);
    double tol_mu = vopts.tol_mu;
    if (tol_mu <= 0.0) {
        double smin = std::numeric_limits<double>::infinity(), smax = -smin;
        for (const auto& cf : p.costs) {
            const Interval r = slope_range(cf);
            smin = std::min(smin, r.lo);
            smax = std::max(smax, r.hi);
        }
        tol_mu = 4.0 * 1e-7 * std::max(1.0, smax - smin);
    }

    // (i) feasibility
    rep.feasible = true;
    auto infeasible = [&](const std::string& m) {
        if (rep.feasible) note(m);
        rep.feasible = false;
    };
    if (std::abs(s.levels.front() - p.S0) > vopts.tol_x) infeasible("start level mismatch");
    if (std::abs(s.levels.back() - p.ST) > vopts.tol_x) infeasible("end level mismatch");
    for (std::size_t t = 0; t <= p.T; ++t) {
        if (!std::isfinite(s.levels[t]) || s.levels[t] < -vopts.tol_x ||
            s.levels[t] > p.E + vopts.tol_x) {
            infeasible("level outside [0, E] at t=" + std::to_string(t));
            break;
        }
    }
    for (std::size_t t = 1; t <= p.T; ++t) {
        const double x = s.flows[t - 1];
        const auto& r = p.costs[t - 1].rate;
        if (!std::isfinite(x) || std::abs(x - (s.levels[t] - s.levels[t - 1])) > vopts.tol_x ||
            x > r.p_in + vopts.tol_x || x < -r.p_out - vopts.tol_x) {
            infeasible("flow invalid at t=" + std::to_string(t));
            break;
        }
    }

    // (ii) pointwise reduced-cost minimality
    rep.pointwise_min = true;
    for (std::size_t t = 1; t <= p.T; ++t) {
        const double mu = c.mu[t - 1];
        double gap = 0.0;
        try {
            const Interval m = minimizer_interval(p.costs[t - 1], mu);
            const double best = evaluate(p.costs[t - 1], m.lo, vopts.tol_x) - mu * m.lo;
            gap = (evaluate(p.costs[t - 1], s.flows[t - 1], vopts.tol_x) -
                   mu * s.flows[t - 1]) -
                  best;
        } catch (const DomainViolation&) {
            gap = std::numeric_limits<double>::infinity();
        }
        if (!(gap <= tol_cert)) {
            if (rep.pointwise_min)
                note("flow at t=" + std::to_string(t) + " is not a reduced-cost minimizer (gap " +
                     std::to_string(gap) + ")");
            rep.pointwise_min = false;
        }
    }

    // (iii) complementary slackness: mu may only rise where the store is
    // full and only fall where it is empty.
    rep.comp_slack = true;
    for (std::size_t t = 1; t < p.T; ++t) {
        const double d = c.mu[t] - c.mu[t - 1]; // mu of period t+1 minus period t
        const bool at_empty = s.levels[t] <= vopts.tol_x;
        const bool at_full = s.levels[t] >= p.E - vopts.tol_x;
        bool bad = false;
        if (at_empty && at_full) {
            bad = false;
        } else if (at_empty) {
            bad = d > tol_mu;
        } else if (at_full) {
            bad = d < -tol_mu;
        } else {
            bad = std::abs(d) > tol_mu;
        }
        if (bad) {
            if (rep.comp_slack)
                note("mu jump " + std::to_string(d) + " not allowed at interior level, t=" +
                     std::to_string(t));
            rep.comp_slack = false;
        }
    }
    return rep;
}

} // namespace arbsched
