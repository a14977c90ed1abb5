// Independent reference solvers used to cross-check the segment solver.
//
// Both work on a uniform level lattice with spacing 1 / levels_per_unit and
// share nothing with the mu-based construction: dp_solve is a backward value
// iteration over lattice levels, exhaustive_solve enumerates every lattice
// path.  Costs-to-go are accumulated right-to-left in both, so on the same
// instance the two produce bit-identical objectives.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "arbsched/cost.hpp"
#include "arbsched/errors.hpp"
#include "arbsched/problem.hpp"

namespace arbsched {

struct GridSpec {
    int levels_per_unit = 100; // lattice spacing is 1 / levels_per_unit
};

struct OracleResult {
    double objective = 0.0;
    std::vector<double> levels; // one optimal lattice trajectory, size T + 1
    // Largest distance any of E, S0, ST, p_in, p_out moved when snapped to
    // the lattice.  Zero for grid-commensurate instances.
    double snap_distance = 0.0;
};

namespace detail {

struct Lattice {
    std::int64_t n_levels = 0; // indices 0..n_levels (level E)
    std::int64_t i_s0 = 0;
    std::int64_t i_st = 0;
    std::vector<std::int64_t> k_in;  // per-period max index step up
    std::vector<std::int64_t> k_out; // per-period max index step down
    double snap = 0.0;
    int lpu = 1;

    double level(std::int64_t i) const { return static_cast<double>(i) / lpu; }
};

inline Lattice make_lattice(const Problem& p, const GridSpec& g) {
    if (g.levels_per_unit <= 0)
        throw ValidationError("levels_per_unit must be positive");
    Lattice lat;
    lat.lpu = g.levels_per_unit;
    auto snap_to = [&](double v) {
        const std::int64_t i = std::llround(v * g.levels_per_unit);
        lat.snap = std::max(lat.snap, std::abs(lat.level(i) - v));
        return i;
    };
    lat.n_levels = snap_to(p.E);
    lat.i_s0 = std::clamp(snap_to(p.S0), std::int64_t{0}, lat.n_levels);
    lat.i_st = std::clamp(snap_to(p.ST), std::int64_t{0}, lat.n_levels);
    lat.k_in.reserve(p.T);
    lat.k_out.reserve(p.T);
    for (const auto& c : p.costs) {
        lat.k_in.push_back(snap_to(c.rate.p_in));
        lat.k_out.push_back(snap_to(c.rate.p_out));
    }
    return lat;
}

// Cost of moving k lattice steps in period t, with the flow clamped onto the
// true rate window (snapping may overshoot it by up to half a step).
inline double lattice_cost(const Problem& p, const Lattice& lat, std::size_t t,
                           std::int64_t k) {
    double x = lat.level(k);
    x = std::min(std::max(x, -p.costs[t - 1].rate.p_out), p.costs[t - 1].rate.p_in);
    return evaluate(p.costs[t - 1], x);
}

} // namespace detail

/** Backward value iteration over the level lattice.  Exact for
 *  piecewise-linear costs with lattice-commensurate breakpoints, capacity,
 *  rates and boundary levels; otherwise an upper bound that tightens as the
 *  lattice is refined.  Throws GridInfeasible when no lattice path connects
 *  S0 to ST. */
inline OracleResult dp_solve(const Problem& p, const GridSpec& grid = {}) {
    validate(p);
    const auto lat = detail::make_lattice(p, grid);
    const double inf = std::numeric_limits<double>::infinity();
    const std::size_t n = static_cast<std::size_t>(lat.n_levels) + 1;

    // tail[t][i] = cheapest cost of periods t+1..T starting from level i.
    // All value functions are kept for the trajectory reconstruction; at the
    // sizes the oracle is used for this is a few megabytes at most.
    std::vector<std::vector<double>> tail(p.T + 1);
    tail[p.T].assign(n, inf);
    tail[p.T][static_cast<std::size_t>(lat.i_st)] = 0.0;
    std::vector<double> step_cost;
    for (std::size_t t = p.T; t >= 1; --t) {
        const std::int64_t kin = lat.k_in[t - 1], kout = lat.k_out[t - 1];
        step_cost.assign(static_cast<std::size_t>(kin + kout) + 1, 0.0);
        for (std::int64_t k = -kout; k <= kin; ++k)
            step_cost[static_cast<std::size_t>(k + kout)] = detail::lattice_cost(p, lat, t, k);
        auto& cur = tail[t - 1];
        cur.assign(n, inf);
        const auto& nxt = tail[t];
        for (std::int64_t i = 0; i <= lat.n_levels; ++i) {
            const std::int64_t jlo = std::max<std::int64_t>(0, i - kout);
            const std::int64_t jhi = std::min<std::int64_t>(lat.n_levels, i + kin);
            double best = inf;
            for (std::int64_t j = jlo; j <= jhi; ++j) {
                const double v = nxt[static_cast<std::size_t>(j)];
                if (v == inf) continue;
                const double c = step_cost[static_cast<std::size_t>(j - i + kout)] + v;
                if (c < best) best = c;
            }
            cur[static_cast<std::size_t>(i)] = best;
        }
    }

    const double total = tail[0][static_cast<std::size_t>(lat.i_s0)];
    if (total == inf)
        throw GridInfeasible("no lattice path from S0 to ST");

    // Forward pass: recover one optimal trajectory, preferring the smallest
    // flow magnitude among exact ties.
    OracleResult out;
    out.objective = total;
    out.snap_distance = lat.snap;
    out.levels.reserve(p.T + 1);
    out.levels.push_back(lat.level(lat.i_s0));
    std::int64_t i = lat.i_s0;
    for (std::size_t t = 1; t <= p.T; ++t) {
        const std::int64_t kin = lat.k_in[t - 1], kout = lat.k_out[t - 1];
        std::int64_t best_j = i;
        double best = inf;
        std::int64_t best_abs = std::numeric_limits<std::int64_t>::max();
        for (std::int64_t j = std::max<std::int64_t>(0, i - kout);
             j <= std::min<std::int64_t>(lat.n_levels, i + kin); ++j) {
            const double v = tail[t][static_cast<std::size_t>(j)];
            if (v == inf) continue;
            const double c = detail::lattice_cost(p, lat, t, j - i) + v;
            const std::int64_t a = std::llabs(j - i);
            if (c < best || (c == best && a < best_abs)) {
                best = c;
                best_j = j;
                best_abs = a;
            }
        }
        i = best_j;
        out.levels.push_back(lat.level(i));
    }
    return out;
}

/** Enumerates every lattice path (no memoization) and returns the best.
 *  Limited to T <= 6 and max_paths explored paths; throws TooLarge beyond
 *  either cap.  Agrees exactly with dp_solve on the same instance. */
inline OracleResult exhaustive_solve(const Problem& p, const GridSpec& grid = {},
                                     double max_paths = 1e7) {
    validate(p);
    if (p.T > 6)
        throw TooLarge("exhaustive oracle capped at T <= 6, got T=" + std::to_string(p.T));
    const auto lat = detail::make_lattice(p, grid);

    double est = 1.0;
    for (std::size_t t = 1; t <= p.T; ++t) {
        const double branch = std::min<double>(
            static_cast<double>(lat.k_in[t - 1] + lat.k_out[t - 1] + 1),
            static_cast<double>(lat.n_levels + 1));
        est *= branch;
        if (est > max_paths)
            throw TooLarge("path count estimate exceeds the cap");
    }

    const double inf = std::numeric_limits<double>::infinity();
    std::vector<std::int64_t> choice(p.T + 1, 0), best_path;
    double best_total = inf;

    // Depth-first over periods; cost accumulated right-to-left on unwind so
    // the floating-point sums match dp_solve exactly.
    auto rec = [&](auto&& self, std::size_t t, std::int64_t i) -> double {
        if (t == p.T)
            return i == lat.i_st ? 0.0 : inf;
        double best = inf;
        const std::int64_t kin = lat.k_in[t], kout = lat.k_out[t];
        for (std::int64_t j = std::max<std::int64_t>(0, i - kout);
             j <= std::min<std::int64_t>(lat.n_levels, i + kin); ++j) {
            choice[t + 1] = j;
            const double rest = self(self, t + 1, j);
            if (rest == inf) continue;
            const double c = detail::lattice_cost(p, lat, t + 1, j - i) + rest;
            if (c < best) best = c;
        }
        return best;
    };

    // First pass: exact optimum.  Second pass: rebuild one optimal path with
    // the same tie rule as dp_solve.
    best_total = rec(rec, 0, lat.i_s0);
    if (best_total == inf)
        throw GridInfeasible("no lattice path from S0 to ST");

    OracleResult out;
    out.objective = best_total;
    out.snap_distance = lat.snap;
    out.levels.push_back(lat.level(lat.i_s0));
    std::int64_t i = lat.i_s0;
    double remaining = best_total;
    for (std::size_t t = 1; t <= p.T; ++t) {
        const std::int64_t kin = lat.k_in[t - 1], kout = lat.k_out[t - 1];
        std::int64_t best_j = i;
        double best_rest = inf;
        std::int64_t best_abs = std::numeric_limits<std::int64_t>::max();
        bool found = false;
        for (std::int64_t j = std::max<std::int64_t>(0, i - kout);
             j <= std::min<std::int64_t>(lat.n_levels, i + kin); ++j) {
            const double rest = rec(rec, t, j);
            if (rest == inf) continue;
            const double c = detail::lattice_cost(p, lat, t, j - i) + rest;
            const std::int64_t a = std::llabs(j - i);
            if (c == remaining && (!found || a < best_abs)) {
                best_j = j;
                best_rest = rest;
                best_abs = a;
                found = true;
            }
        }
        if (!found)
            throw InternalInvariantViolation("path reconstruction lost the optimum");
        i = best_j;
        remaining = best_rest;
        out.levels.push_back(lat.level(i));
    }
    return out;
}

} // namespace arbsched
