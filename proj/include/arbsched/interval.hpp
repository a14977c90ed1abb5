// Closed interval arithmetic used for minimizer sets and reach bands.
#pragma once

#include <algorithm>
#include <cmath>

namespace arbsched {

struct Interval {
    double lo = 0.0;
    double hi = 0.0;

    bool contains(double v) const { return lo <= v && v <= hi; }
    double width() const { return hi - lo; }
    double clamp(double v) const { return std::min(std::max(v, lo), hi); }
    bool valid() const { return lo <= hi && std::isfinite(lo) && std::isfinite(hi); }

    bool operator==(const Interval&) const = default;

    Interval operator+(const Interval& o) const { return {lo + o.lo, hi + o.hi}; }
    Interval operator-(const Interval& o) const { return {lo - o.hi, hi - o.lo}; }

    bool intersects(const Interval& o) const { return lo <= o.hi && o.lo <= hi; }

    // Plain intersection; caller must know the intervals overlap.
    Interval intersect(const Interval& o) const {
        return {std::max(lo, o.lo), std::min(hi, o.hi)};
    }

    // Intersection that collapses an empty result to the midpoint of the gap.
    // Keeps flow recovery robust to roundoff; callers bound acceptable gaps.
    Interval intersect_slack(const Interval& o) const {
        Interval r = intersect(o);
        if (r.lo > r.hi) {
            double mid = 0.5 * (r.lo + r.hi);
            r.lo = r.hi = mid;
        }
        return r;
    }
};

} // namespace arbsched
