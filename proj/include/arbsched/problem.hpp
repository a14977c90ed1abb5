// Storage arbitrage problem data and solution containers.
//
// A problem fixes the horizon T, the storage capacity E, boundary levels
// S0 and ST, and one cost function per period.  A schedule holds the level
// trajectory S_0..S_T and the per-period flows x_t = S_t - S_{t-1}.
#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "arbsched/cost.hpp"
#include "arbsched/errors.hpp"

namespace arbsched {

struct Problem {
    std::size_t T = 0;
    double E = 0.0;  // capacity
    double S0 = 0.0; // required starting level
    double ST = 0.0; // required final level
    std::vector<CostFunction> costs; // costs[t-1] is the cost for period t
};

inline void validate(const Problem& p) {
    if (p.T == 0) throw ValidationError("horizon must be positive");
    if (p.costs.size() != p.T)
        throw ValidationError("need exactly one cost function per period");
    detail::check_finite(p.E, "capacity");
    if (p.E < 0.0) throw ValidationError("capacity must be nonnegative");
    detail::check_finite(p.S0, "start level");
    detail::check_finite(p.ST, "end level");
    if (p.S0 < 0.0 || p.S0 > p.E)
        throw ValidationError("start level must lie in [0, E]");
    if (p.ST < 0.0 || p.ST > p.E)
        throw ValidationError("end level must lie in [0, E]");
    for (const auto& c : p.costs) validate(c);
}

struct Schedule {
    std::vector<double> levels; // size T + 1, levels[0] = S0
    std::vector<double> flows;  // size T, flows[t-1] = levels[t] - levels[t-1]
};

// How a segment of constant reference value ends: at the horizon, or pinned
// against a storage bound.
enum class PinKind { Terminal, Full, Empty };

inline const char* to_string(PinKind k) {
    switch (k) {
        case PinKind::Full: return "full";
        case PinKind::Empty: return "empty";
        default: return "terminal";
    }
}

// Optimality certificate: one reference value per period, constant on each
// segment [boundaries[i], boundaries[i+1]].  pins[i] records how segment i
// ends; only the last segment is Terminal.
struct MuCertificate {
    std::vector<double> mu;               // size T
    std::vector<std::size_t> boundaries;  // 0 = B_0 < B_1 < ... < B_k = T
    std::vector<PinKind> pins;            // size k, pins[i] for boundary i+1
};

struct SegmentView {
    std::size_t start = 0; // level index of the segment start
    std::size_t end = 0;   // level index of the segment end
    double mu = 0.0;
    PinKind pin = PinKind::Terminal;
};

inline std::vector<SegmentView> segments(const MuCertificate& c) {
    std::vector<SegmentView> out;
    for (std::size_t i = 0; i + 1 < c.boundaries.size(); ++i)
        out.push_back({c.boundaries[i], c.boundaries[i + 1], c.mu[c.boundaries[i]],
                       c.pins[i]});
    return out;
}

/** Total cost of a schedule.  Throws InfeasibleSchedule if the schedule
 *  violates the problem constraints by more than tol_x. */
inline double objective(const Problem& p, const Schedule& s, double tol_x = kTolX) {
    if (s.levels.size() != p.T + 1 || s.flows.size() != p.T)
        throw InfeasibleSchedule("schedule size does not match horizon");
    auto fail = [](const std::string& m) { throw InfeasibleSchedule(m); };
    if (std::abs(s.levels.front() - p.S0) > tol_x) fail("start level mismatch");
    if (std::abs(s.levels.back() - p.ST) > tol_x) fail("end level mismatch");
    for (std::size_t t = 0; t + 1 < s.levels.size(); ++t) {
        if (s.levels[t] < -tol_x || s.levels[t] > p.E + tol_x)
            fail("level outside [0, E] at t=" + std::to_string(t));
    }
    double acc = 0.0;
    for (std::size_t t = 1; t <= p.T; ++t) {
        const double x = s.flows[t - 1];
        if (std::abs(x - (s.levels[t] - s.levels[t - 1])) > tol_x)
            fail("flow inconsistent with levels at t=" + std::to_string(t));
        const auto& r = p.costs[t - 1].rate;
        if (x > r.p_in + tol_x || x < -r.p_out - tol_x)
            fail("flow outside rate limits at t=" + std::to_string(t));
        acc += evaluate(p.costs[t - 1], x, tol_x);
    }
    return acc;
}

} // namespace arbsched
