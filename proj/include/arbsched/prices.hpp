// Price-series ingestion and synthetic price generation.
//
// File format (CSV, UTF-8, '\n' or '\r\n' line ends):
//   header `timestamp,buy,sell`  - explicit buy and sell prices per period, or
//   header `timestamp,price`     - single price; sell is derived as eta*price
//                                  with the efficiency passed by the caller.
// Timestamps are RFC 3339 instants (e.g. 2011-01-09T00:00:00Z); they must be
// strictly increasing and uniformly spaced. Prices are decimal literals and
// are written back with shortest round-trip formatting, so a read of our own
// output reproduces every double bit-for-bit.
//
// The synthetic generator is fully specified so that fixtures are portable:
// a 64-bit linear congruential generator (Knuth's MMIX multiplier
// 6364136223846793005 and increment 1442695040888963407), uniforms taken as
// the top 53 bits scaled by 2^-53, normals via Box-Muller. Buy prices are
// base + daily sinusoid + weekly sinusoid + Gaussian noise, floored at 5% of
// base; sell = eta * buy. 48 periods of 30 minutes per day.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "arbsched/cost.hpp"
#include "arbsched/errors.hpp"
#include "arbsched/problem.hpp"

namespace arbsched {

namespace detail {

// Days since 1970-01-01 of a proleptic Gregorian date (Hinnant's algorithm).
inline std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
    y -= m <= 2;
    const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
    const unsigned yoe = static_cast<unsigned>(y - era * 400);
    const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
    const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
    return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

inline void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m, unsigned& d) {
    z += 719468;
    const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
    const unsigned doe = static_cast<unsigned>(z - era * 146097);
    const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
    const std::int64_t yy = static_cast<std::int64_t>(yoe) + era * 400;
    const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    const unsigned mp = (5 * doy + 2) / 153;
    d = doy - (153 * mp + 2) / 5 + 1;
    m = mp + (mp < 10 ? 3 : -9);
    y = yy + (m <= 2);
}

inline std::string format_double(double v) {
    if (v == 0.0) v = 0.0; // normalize -0.0
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, res.ptr);
}

inline double parse_double(std::string_view s, std::size_t lineno, const char* what) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError("line " + std::to_string(lineno) + ": bad " + what + " '" +
                         std::string(s) + "'");
    return v;
}

} // namespace detail

// Parses an RFC 3339 timestamp to Unix seconds. Accepts 'T' or 't' as the
// date/time separator and 'Z'/'z' or a +-HH:MM offset as the zone; fractional
// seconds must be zero.
inline std::int64_t parse_rfc3339(std::string_view s) {
    const auto fail = [&s](const char* why) {
        throw ParseError(std::string("bad timestamp '") + std::string(s) + "': " + why);
    };
    std::size_t pos = 0;
    const auto digits = [&](std::size_t n, const char* what) {
        if (pos + n > s.size()) fail(what);
        std::int64_t v = 0;
        for (std::size_t i = 0; i < n; ++i) {
            const char c = s[pos + i];
            if (c < '0' || c > '9') fail(what);
            v = v * 10 + (c - '0');
        }
        pos += n;
        return v;
    };
    const auto expect = [&](char c, const char* what) {
        if (pos >= s.size() || s[pos] != c) fail(what);
        ++pos;
    };

    const std::int64_t year = digits(4, "year");
    expect('-', "date separator");
    const std::int64_t month = digits(2, "month");
    expect('-', "date separator");
    const std::int64_t day = digits(2, "day");
    if (pos >= s.size() || (s[pos] != 'T' && s[pos] != 't')) fail("expected 'T'");
    ++pos;
    const std::int64_t hour = digits(2, "hour");
    expect(':', "time separator");
    const std::int64_t minute = digits(2, "minute");
    expect(':', "time separator");
    const std::int64_t second = digits(2, "second");

    if (month < 1 || month > 12) fail("month out of range");
    static constexpr int dim[12] = {31, 28, 31, 30, 31, 30, 31, 31, 30, 31, 30, 31};
    const bool leap = (year % 4 == 0 && year % 100 != 0) || year % 400 == 0;
    const std::int64_t max_day = dim[month - 1] + (month == 2 && leap ? 1 : 0);
    if (day < 1 || day > max_day) fail("day out of range");
    if (hour > 23) fail("hour out of range");
    if (minute > 59) fail("minute out of range");
    if (second > 59) fail("second out of range");

    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        std::size_t n = 0;
        bool zero = true;
        while (pos < s.size() && s[pos] >= '0' && s[pos] <= '9') {
            zero = zero && s[pos] == '0';
            ++pos;
            ++n;
        }
        if (n == 0) fail("empty fractional seconds");
        if (!zero) fail("sub-second timestamps are not supported");
    }

    std::int64_t offset = 0;
    if (pos < s.size() && (s[pos] == 'Z' || s[pos] == 'z')) {
        ++pos;
    } else if (pos < s.size() && (s[pos] == '+' || s[pos] == '-')) {
        const bool neg = s[pos] == '-';
        ++pos;
        const std::int64_t oh = digits(2, "offset hour");
        expect(':', "offset separator");
        const std::int64_t om = digits(2, "offset minute");
        if (oh > 23 || om > 59) fail("offset out of range");
        offset = (neg ? -1 : 1) * (oh * 3600 + om * 60);
    } else {
        fail("missing zone designator");
    }
    if (pos != s.size()) fail("trailing characters");

    const std::int64_t days = detail::days_from_civil(year, static_cast<unsigned>(month),
                                                      static_cast<unsigned>(day));
    return days * 86400 + hour * 3600 + minute * 60 + second - offset;
}

inline std::string format_rfc3339(std::int64_t t) {
    std::int64_t days = t / 86400;
    std::int64_t rem = t % 86400;
    if (rem < 0) {
        rem += 86400;
        --days;
    }
    std::int64_t year = 0;
    unsigned month = 0, day = 0;
    detail::civil_from_days(days, year, month, day);
    char buf[32];
    std::snprintf(buf, sizeof buf, "%04lld-%02u-%02uT%02d:%02d:%02dZ",
                  static_cast<long long>(year), month, day, static_cast<int>(rem / 3600),
                  static_cast<int>(rem / 60 % 60), static_cast<int>(rem % 60));
    return buf;
}

// Deterministic 64-bit LCG (Knuth's MMIX constants). Not cryptographic; used
// only so synthetic fixtures are identical across platforms and runs.
class Lcg64 {
  public:
    explicit Lcg64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        state_ = state_ * 6364136223846793005ULL + 1442695040888963407ULL;
        return state_;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Standard normal via Box-Muller; pairs are consumed in order.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform01();
        while (u1 <= 0.0) u1 = uniform01();
        const double u2 = uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * 3.14159265358979323846 * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

  private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

struct PriceSeries {
    std::int64_t period_seconds = 1800;
    std::vector<std::int64_t> timestamps; // period start instants, Unix seconds
    std::vector<double> buy;
    std::vector<double> sell;

    std::size_t size() const { return timestamps.size(); }
};

inline void validate(const PriceSeries& ps) {
    if (ps.period_seconds <= 0)
        throw ValidationError("period length must be positive");
    if (ps.buy.size() != ps.size() || ps.sell.size() != ps.size())
        throw ValidationError("price series columns must have equal length");
    for (std::size_t i = 0; i < ps.size(); ++i) {
        if (!std::isfinite(ps.buy[i]) || !std::isfinite(ps.sell[i]))
            throw ValidationError("non-finite price in record " + std::to_string(i + 1));
        if (ps.sell[i] > ps.buy[i])
            throw ValidationError("sell price exceeds buy price in record " +
                                  std::to_string(i + 1));
        if (i > 0 && ps.timestamps[i] - ps.timestamps[i - 1] != ps.period_seconds)
            throw ValidationError("timestamps are not uniformly spaced at record " +
                                  std::to_string(i + 1));
    }
}

struct SyntheticSpec {
    std::size_t days = 7;
    double base = 50.0;
    double daily_amplitude = 20.0;
    double weekly_amplitude = 5.0;
    double noise_sd = 2.0;
    double eta = 1.0;
    std::uint64_t seed = 1;
};

inline void validate(const SyntheticSpec& spec) {
    if (spec.days == 0)
        throw ValidationError("synthetic spec needs at least one day");
    if (!(spec.base > 0.0) || !std::isfinite(spec.base))
        throw ValidationError("base price must be positive");
    if (!(spec.daily_amplitude >= 0.0) || !(spec.weekly_amplitude >= 0.0) ||
        !(spec.noise_sd >= 0.0))
        throw ValidationError("amplitudes and noise stddev must be nonnegative");
    if (!(spec.eta > 0.0) || spec.eta > 1.0)
        throw InvalidEfficiency("efficiency must lie in (0, 1]");
}

inline constexpr std::size_t kPeriodsPerDay = 48;
inline constexpr std::int64_t kPeriodSeconds = 1800;

// Deterministic synthetic series; see the file header for the exact recipe.
inline PriceSeries generate_prices(const SyntheticSpec& spec) {
    validate(spec);
    const std::size_t T = spec.days * kPeriodsPerDay;
    const std::int64_t start = detail::days_from_civil(2011, 1, 9) * 86400;
    const double floor_price = 0.05 * spec.base;
    constexpr double two_pi = 2.0 * 3.14159265358979323846;

    PriceSeries ps;
    ps.period_seconds = kPeriodSeconds;
    ps.timestamps.reserve(T);
    ps.buy.reserve(T);
    ps.sell.reserve(T);
    Lcg64 rng(spec.seed);
    for (std::size_t t = 0; t < T; ++t) {
        const double day_phase = static_cast<double>(t % kPeriodsPerDay) /
                                 static_cast<double>(kPeriodsPerDay);
        const double week_phase = static_cast<double>(t % (7 * kPeriodsPerDay)) /
                                  static_cast<double>(7 * kPeriodsPerDay);
        double buy = spec.base - spec.daily_amplitude * std::cos(two_pi * day_phase) -
                     spec.weekly_amplitude * std::cos(two_pi * week_phase) +
                     spec.noise_sd * rng.normal();
        buy = std::max(buy, floor_price);
        ps.timestamps.push_back(start + static_cast<std::int64_t>(t) * kPeriodSeconds);
        ps.buy.push_back(buy);
        ps.sell.push_back(spec.eta * buy);
    }
    return ps;
}

// Reads a CSV price series. `eta` is only consulted for the single-column
// `timestamp,price` layout, where sell = eta * price; two-column files carry
// their own sell prices and `eta` is ignored.
inline PriceSeries read_prices(std::istream& in, double eta = 1.0) {
    if (!(eta > 0.0) || eta > 1.0)
        throw InvalidEfficiency("efficiency must lie in (0, 1]");

    const auto chomp = [](std::string& s) {
        if (!s.empty() && s.back() == '\r') s.pop_back();
    };

    std::string line;
    std::size_t lineno = 1;
    if (!std::getline(in, line))
        throw ParseError("line 1: missing header row");
    chomp(line);
    bool single_price = false;
    if (line == "timestamp,buy,sell")
        single_price = false;
    else if (line == "timestamp,price")
        single_price = true;
    else
        throw ParseError("line 1: unrecognized header '" + line + "'");

    PriceSeries ps;
    std::vector<std::size_t> row_lines;
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
        const std::size_t want = single_price ? 2 : 3;
        if (fields.size() != want)
            throw ParseError("line " + std::to_string(lineno) + ": expected " +
                             std::to_string(want) + " fields, got " +
                             std::to_string(fields.size()));

        std::int64_t ts = 0;
        try {
            ts = parse_rfc3339(fields[0]);
        } catch (const ParseError& e) {
            throw ParseError("line " + std::to_string(lineno) + ": " + e.what());
        }
        const double buy = detail::parse_double(fields[1], lineno, "price");
        const double sell =
            single_price ? eta * buy : detail::parse_double(fields[2], lineno, "price");

        ps.timestamps.push_back(ts);
        ps.buy.push_back(buy);
        ps.sell.push_back(sell);
        row_lines.push_back(lineno);
    }
    if (ps.timestamps.empty())
        throw ParseError("no data rows");

    for (std::size_t i = 0; i < ps.size(); ++i) {
        const std::string where = "line " + std::to_string(row_lines[i]);
        if (!std::isfinite(ps.buy[i]) || !std::isfinite(ps.sell[i]))
            throw ValidationError(where + ": non-finite price");
        if (ps.sell[i] > ps.buy[i])
            throw ValidationError(where + ": sell price " + detail::format_double(ps.sell[i]) +
                                  " exceeds buy price " + detail::format_double(ps.buy[i]));
        if (i > 0 && ps.timestamps[i] <= ps.timestamps[i - 1])
            throw ValidationError(where + ": timestamps must be strictly increasing");
    }
    if (ps.size() >= 2) {
        ps.period_seconds = ps.timestamps[1] - ps.timestamps[0];
        for (std::size_t i = 2; i < ps.size(); ++i)
            if (ps.timestamps[i] - ps.timestamps[i - 1] != ps.period_seconds)
                throw ValidationError("line " + std::to_string(row_lines[i]) +
                                      ": gap in timestamps; expected uniform spacing of " +
                                      std::to_string(ps.period_seconds) + " s");
    }
    return ps;
}

inline void write_prices(std::ostream& out, const PriceSeries& ps) {
    out << "timestamp,buy,sell\n";
    for (std::size_t i = 0; i < ps.size(); ++i)
        out << format_rfc3339(ps.timestamps[i]) << ',' << detail::format_double(ps.buy[i])
            << ',' << detail::format_double(ps.sell[i]) << '\n';
    if (!out)
        throw IoError("failed to write price series");
}

// Assembles the arbitrage problem for a two-price series: per-period linear
// buy/sell costs with common rate limits.
inline Problem make_problem(const PriceSeries& ps, double E, double S0, double ST,
                            RateLimits rates) {
    validate(ps);
    Problem p;
    p.T = ps.size();
    p.E = E;
    p.S0 = S0;
    p.ST = ST;
    p.costs.reserve(ps.size());
    for (std::size_t t = 0; t < ps.size(); ++t)
        p.costs.push_back({TwoPriceLinear{ps.buy[t], ps.sell[t]}, rates});
    validate(p);
    return p;
}

} // namespace arbsched
