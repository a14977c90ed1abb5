// Schedule serialization: per-period CSV plus a JSON run summary.
//
// CSV layout: header `t,timestamp,buy,sell,mu,x,level,action`, one row per
// period t = 1..T. `level` is the store level at the end of period t; the
// start level is implied by `level - x` of the first row. `action` is
// buy/sell/hold by the sign of x, with |x| <= tol_x reading as hold.
// Doubles are written with shortest round-trip formatting, so re-reading our
// own output reproduces them bit-for-bit.
//
// JSON summary schema (schema_version 1):
//   { schema_version, objective, profit, segments: [{start, end, mu, pin}],
//     horizon_stats: {max, mean} }
// `objective` is money spent (negative when the schedule earns); `profit` is
// its negation. Segment bounds are period indices with start exclusive,
// end inclusive; horizon_stats summarizes segment lengths.
#pragma once

#include <cmath>
#include <cstdint>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "arbsched/errors.hpp"
#include "arbsched/prices.hpp"
#include "arbsched/problem.hpp"

namespace arbsched {

inline const char* action_of(double x, double tol_x = kTolX) {
    if (x > tol_x) return "buy";
    if (x < -tol_x) return "sell";
    return "hold";
}

// Money cost of running `flows` against a two-price series; negative values
// are earnings. Matches the problem objective exactly for in-range flows.
inline double series_cost(const PriceSeries& ps, const std::vector<double>& flows) {
    if (flows.size() != ps.size())
        throw ValidationError("flow count does not match the price series");
    double total = 0.0;
    for (std::size_t t = 0; t < flows.size(); ++t)
        total += flows[t] >= 0.0 ? ps.buy[t] * flows[t] : ps.sell[t] * flows[t];
    return total;
}

inline std::size_t active_periods(const std::vector<double>& flows, double tol_x = kTolX) {
    std::size_t n = 0;
    for (const double x : flows)
        if (std::abs(x) > tol_x) ++n;
    return n;
}

struct HorizonStats {
    std::size_t max = 0;
    double mean = 0.0;
};

inline HorizonStats horizon_stats(const MuCertificate& c) {
    HorizonStats h;
    if (c.boundaries.size() < 2) return h;
    std::size_t total = 0;
    for (std::size_t i = 0; i + 1 < c.boundaries.size(); ++i) {
        const std::size_t len = c.boundaries[i + 1] - c.boundaries[i];
        h.max = std::max(h.max, len);
        total += len;
    }
    h.mean = static_cast<double>(total) / static_cast<double>(c.boundaries.size() - 1);
    return h;
}

inline void write_schedule(std::ostream& out, const Schedule& s, const MuCertificate& c,
                           const PriceSeries& ps, double tol_x = kTolX) {
    const std::size_t T = ps.size();
    if (s.flows.size() != T || s.levels.size() != T + 1 || c.mu.size() != T)
        throw ValidationError("schedule, certificate and price series lengths disagree");
    out << "t,timestamp,buy,sell,mu,x,level,action\n";
    for (std::size_t t = 1; t <= T; ++t) {
        const double x = s.flows[t - 1];
        out << t << ',' << format_rfc3339(ps.timestamps[t - 1]) << ','
            << detail::format_double(ps.buy[t - 1]) << ','
            << detail::format_double(ps.sell[t - 1]) << ','
            << detail::format_double(c.mu[t - 1]) << ',' << detail::format_double(x) << ','
            << detail::format_double(s.levels[t]) << ',' << action_of(x, tol_x) << '\n';
    }
    if (!out)
        throw IoError("failed to write schedule");
}

inline nlohmann::ordered_json summary_json(const Schedule& s, const MuCertificate& c,
                                           const PriceSeries& ps) {
    const double objective = series_cost(ps, s.flows);
    nlohmann::ordered_json j;
    j["schema_version"] = 1;
    j["objective"] = objective;
    j["profit"] = -objective;
    j["segments"] = nlohmann::ordered_json::array();
    for (const SegmentView& seg : segments(c)) {
        nlohmann::ordered_json js;
        js["start"] = seg.start;
        js["end"] = seg.end;
        js["mu"] = seg.mu;
        js["pin"] = to_string(seg.pin);
        j["segments"].push_back(std::move(js));
    }
    const HorizonStats h = horizon_stats(c);
    j["horizon_stats"] = {{"max", h.max}, {"mean", h.mean}};
    return j;
}

inline void write_summary(std::ostream& out, const Schedule& s, const MuCertificate& c,
                          const PriceSeries& ps) {
    out << summary_json(s, c, ps).dump(2) << '\n';
    if (!out)
        throw IoError("failed to write summary");
}

// A schedule CSV read back: the series, the mu column, and the schedule with
// the start level inferred from the first row.
struct ScheduleFile {
    PriceSeries prices;
    Schedule schedule;
    std::vector<double> mu;
};

inline ScheduleFile read_schedule(std::istream& in) {
    const auto chomp = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };
    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line))
        throw ParseError("line 1: missing header row");
    chomp(line);
    if (line != "t,timestamp,buy,sell,mu,x,level,action")
        throw ParseError("line 1: unrecognized header '" + line + "'");

    ScheduleFile f;
    std::vector<double> end_levels;
    while (std::getline(in, line)) {
        ++lineno;
        chomp(line);
        if (line.empty()) continue;
        std::vector<std::string_view> fields;
        std::string_view rest = line;
        while (true) {
            const std::size_t comma = rest.find(',');
            if (comma == std::string_view::npos) {
                fields.push_back(rest);
                break;
            }
            fields.push_back(rest.substr(0, comma));
            rest.remove_prefix(comma + 1);
        }
        if (fields.size() != 8)
            throw ParseError("line " + std::to_string(lineno) + ": expected 8 fields, got " +
                             std::to_string(fields.size()));
        const double t = detail::parse_double(fields[0], lineno, "period index");
        if (t != static_cast<double>(end_levels.size() + 1))
            throw ParseError("line " + std::to_string(lineno) + ": period index out of order");
        std::int64_t ts = 0;
        try {
            ts = parse_rfc3339(fields[1]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        f.prices.timestamps.push_back(ts);
        f.prices.buy.push_back(detail::parse_double(fields[2], lineno, "buy price"));
        f.prices.sell.push_back(detail::parse_double(fields[3], lineno, "sell price"));
        f.mu.push_back(detail::parse_double(fields[4], lineno, "mu"));
        f.schedule.flows.push_back(detail::parse_double(fields[5], lineno, "flow"));
        end_levels.push_back(detail::parse_double(fields[6], lineno, "level"));
        if (fields[7] != "buy" && fields[7] != "sell" && fields[7] != "hold")
            throw ParseError("line " + std::to_string(lineno) + ": unknown action '" +
                             std::string(fields[7]) + "'");
    }
    if (end_levels.empty())
        throw ParseError("no data rows");
    if (f.prices.size() >= 2)
        f.prices.period_seconds = f.prices.timestamps[1] - f.prices.timestamps[0];
    f.schedule.levels.reserve(end_levels.size() + 1);
    f.schedule.levels.push_back(end_levels.front() - f.schedule.flows.front());
    f.schedule.levels.insert(f.schedule.levels.end(), end_levels.begin(), end_levels.end());
    return f;
}

// Rebuilds certificate structure from a per-period mu vector and the levels
// it accompanied: a boundary wherever mu changes, pinned full or empty by
// whichever bound the level sits on.
inline MuCertificate reconstruct_certificate(const std::vector<double>& mu,
                                             const std::vector<double>& levels, double E) {
    if (levels.size() != mu.size() + 1)
        throw ValidationError("level and mu vectors have inconsistent lengths");
    MuCertificate c;
    c.mu = mu;
    c.boundaries.push_back(0);
    for (std::size_t t = 1; t < mu.size(); ++t) {
        if (mu[t] == mu[t - 1]) continue;
        c.boundaries.push_back(t);
        c.pins.push_back(levels[t] * 2.0 >= E ? PinKind::Full : PinKind::Empty);
    }
    c.boundaries.push_back(mu.size());
    c.pins.push_back(PinKind::Terminal);
    return c;
}

} // namespace arbsched
