// Per-period purchase/sale cost functions.
//
// Every family is convex on [-p_out, p_in] with C(0) = 0: buying x > 0 costs
// money, selling x < 0 earns it.  The solver only ever needs two things from
// a cost function: its value at a flow, and the set of flows minimizing the
// reduced cost C(x) - mu * x for a given reference value mu.  Convexity makes
// that set a closed interval whose endpoints are nondecreasing in mu.
#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <variant>
#include <vector>

#include "arbsched/errors.hpp"
#include "arbsched/interval.hpp"

namespace arbsched {

inline constexpr double kTolX = 1e-9;    // flow/level comparison tolerance
inline constexpr double kTolCost = 1e-9; // objective comparison tolerance

// Per-period charge/discharge limits in units of stored quantity.
struct RateLimits {
    double p_in = 0.0;  // max purchase (charge) per period
    double p_out = 0.0; // max sale (discharge) per period
};

// C(x) = buy * x for x >= 0, sell * x for x < 0.  Requires buy >= sell, so
// a buy-then-sell round trip never profits within one period.
struct TwoPriceLinear {
    double buy = 0.0;
    double sell = 0.0;
};

// Convex piecewise-linear cost.  knots[i] gives the slope on
// [knots[i].x, knots[i+1].x) (the last knot's slope extends to p_in);
// knots.front().x must equal -p_out.  Slopes are nondecreasing.
struct PiecewiseLinearConvex {
    struct Knot {
        double x = 0.0;
        double slope = 0.0;
    };
    std::vector<Knot> knots;
};

// Market-impact cost: each additional unit bought costs more, each
// additional unit sold earns less.
//   C(x) = buy_price * x + buy_curvature * x^2    for x >= 0
//   C(x) = sell_price * x + sell_curvature * x^2  for x < 0
// The sell-side quadratic term carries a positive x^2 coefficient (i.e. the
// penalty is -sell_curvature * x * |x|), which is the convex orientation:
// marginal revenue sell_price + 2 * sell_curvature * x decreases as more is
// sold.  Strictly convex on each side when the curvatures are positive.
struct QuadraticImpact {
    double buy_price = 0.0;
    double sell_price = 0.0;
    double buy_curvature = 0.0;
    double sell_curvature = 0.0;
};

struct CostFunction {
    std::variant<TwoPriceLinear, PiecewiseLinearConvex, QuadraticImpact> family;
    RateLimits rate;
};

namespace detail {

inline void check_finite(double v, const char* what) {
    if (!std::isfinite(v))
        throw ValidationError(std::string(what) + " must be finite");
}

// Right end of piecewise-linear segment i.
inline double plc_seg_end(const PiecewiseLinearConvex& f, std::size_t i, double p_in) {
    return i + 1 < f.knots.size() ? f.knots[i + 1].x : p_in;
}

} // namespace detail

inline void validate(const RateLimits& r) {
    detail::check_finite(r.p_in, "p_in");
    detail::check_finite(r.p_out, "p_out");
    if (r.p_in < 0.0 || r.p_out < 0.0)
        throw ValidationError("rate limits must be nonnegative");
    if (r.p_in == 0.0 && r.p_out == 0.0)
        throw ValidationError("at least one rate limit must be positive");
}

inline void validate(const CostFunction& cf) {
    validate(cf.rate);
    const double p_in = cf.rate.p_in, p_out = cf.rate.p_out;
    if (const auto* tp = std::get_if<TwoPriceLinear>(&cf.family)) {
        detail::check_finite(tp->buy, "buy price");
        detail::check_finite(tp->sell, "sell price");
        if (tp->buy < tp->sell)
            throw ValidationError("buy price must be >= sell price");
    } else if (const auto* pl = std::get_if<PiecewiseLinearConvex>(&cf.family)) {
        if (pl->knots.empty())
            throw ValidationError("piecewise-linear cost needs at least one knot");
        for (const auto& k : pl->knots) {
            detail::check_finite(k.x, "knot position");
            detail::check_finite(k.slope, "knot slope");
        }
        if (std::abs(pl->knots.front().x + p_out) > 1e-12)
            throw ValidationError("first knot must sit at -p_out");
        for (std::size_t i = 1; i < pl->knots.size(); ++i) {
            if (!(pl->knots[i].x > pl->knots[i - 1].x))
                throw ValidationError("knot positions must be strictly increasing");
            if (pl->knots[i].slope < pl->knots[i - 1].slope)
                throw ValidationError("slopes must be nondecreasing (convexity)");
        }
        if (pl->knots.back().x > p_in)
            throw ValidationError("knots must not extend beyond p_in");
    } else {
        const auto& q = std::get<QuadraticImpact>(cf.family);
        detail::check_finite(q.buy_price, "buy price");
        detail::check_finite(q.sell_price, "sell price");
        detail::check_finite(q.buy_curvature, "buy curvature");
        detail::check_finite(q.sell_curvature, "sell curvature");
        if (q.buy_price < q.sell_price)
            throw ValidationError("buy price must be >= sell price");
        if (q.buy_curvature < 0.0 || q.sell_curvature < 0.0)
            throw ValidationError("curvatures must be nonnegative");
    }
}

/** Cost of flow x, exactly 0 at x = 0.  Flows within tol_x beyond the rate
 *  limits are clamped onto the domain edge; anything further throws
 *  DomainViolation. */
inline double evaluate(const CostFunction& cf, double x, double tol_x = kTolX) {
    const double p_in = cf.rate.p_in, p_out = cf.rate.p_out;
    if (!std::isfinite(x) || x > p_in + tol_x || x < -p_out - tol_x)
        throw DomainViolation("flow " + std::to_string(x) + " outside [-" +
                              std::to_string(p_out) + ", " + std::to_string(p_in) + "]");
    x = std::min(std::max(x, -p_out), p_in);
    if (x == 0.0) return 0.0;

    if (const auto* tp = std::get_if<TwoPriceLinear>(&cf.family))
        return x >= 0.0 ? tp->buy * x : tp->sell * x;

    if (const auto* pl = std::get_if<PiecewiseLinearConvex>(&cf.family)) {
        // Signed integral of the slope from 0 to x.
        const double a = std::min(0.0, x), b = std::max(0.0, x);
        double acc = 0.0;
        for (std::size_t i = 0; i < pl->knots.size(); ++i) {
            const double s0 = pl->knots[i].x;
            const double s1 = detail::plc_seg_end(*pl, i, p_in);
            const double overlap = std::min(b, s1) - std::max(a, s0);
            if (overlap > 0.0) acc += pl->knots[i].slope * overlap;
        }
        return x >= 0.0 ? acc : -acc;
    }

    const auto& q = std::get<QuadraticImpact>(cf.family);
    return x >= 0.0 ? q.buy_price * x + q.buy_curvature * x * x
                    : q.sell_price * x + q.sell_curvature * x * x;
}

/** The set argmin_x { C(x) - mu * x : x in [-p_out, p_in] }, always a
 *  nonempty closed interval.  Both endpoints are nondecreasing in mu. */
inline Interval minimizer_interval(const CostFunction& cf, double mu) {
    const double p_in = cf.rate.p_in;
    const double p_out = cf.rate.p_out;
    const double neg = p_out == 0.0 ? 0.0 : -p_out; // avoid -0.0 in results

    if (const auto* tp = std::get_if<TwoPriceLinear>(&cf.family)) {
        if (mu < tp->sell) return {neg, neg};
        if (mu == tp->sell) return {neg, tp->buy == tp->sell ? p_in : 0.0};
        if (mu < tp->buy) return {0.0, 0.0};
        if (mu == tp->buy) return {0.0, p_in};
        return {p_in, p_in};
    }

    if (const auto* pl = std::get_if<PiecewiseLinearConvex>(&cf.family)) {
        const auto& ks = pl->knots;
        // Smallest minimizer: left end of the first segment with slope >= mu.
        double lo = p_in;
        for (std::size_t i = 0; i < ks.size(); ++i) {
            if (ks[i].slope >= mu) {
                lo = ks[i].x;
                break;
            }
        }
        // Largest minimizer: right end of the last segment with slope <= mu.
        double hi = ks.front().x;
        for (std::size_t i = ks.size(); i-- > 0;) {
            if (ks[i].slope <= mu) {
                hi = detail::plc_seg_end(*pl, i, p_in);
                break;
            }
        }
        return {lo, hi};
    }

    const auto& q = std::get<QuadraticImpact>(cf.family);
    auto lo_of = [&]() -> double {
        // Smallest x whose right derivative is >= mu.
        if (mu <= q.sell_price - 2.0 * q.sell_curvature * p_out) return neg;
        if (mu <= q.sell_price)
            return q.sell_curvature > 0.0
                       ? std::max(neg, (mu - q.sell_price) / (2.0 * q.sell_curvature))
                       : neg;
        if (mu <= q.buy_price) return 0.0;
        return q.buy_curvature > 0.0
                   ? std::min(p_in, (mu - q.buy_price) / (2.0 * q.buy_curvature))
                   : p_in;
    };
    auto hi_of = [&]() -> double {
        // Largest x whose left derivative is <= mu.
        if (mu >= q.buy_price + 2.0 * q.buy_curvature * p_in) return p_in;
        if (mu >= q.buy_price)
            return q.buy_curvature > 0.0
                       ? std::min(p_in, (mu - q.buy_price) / (2.0 * q.buy_curvature))
                       : p_in;
        if (mu >= q.sell_price) return 0.0;
        return q.sell_curvature > 0.0
                   ? std::max(neg, (mu - q.sell_price) / (2.0 * q.sell_curvature))
                   : neg;
    };
    Interval r{lo_of(), hi_of()};
    r.lo = std::min(std::max(r.lo, neg), p_in);
    r.hi = std::min(std::max(r.hi, neg), p_in);
    return r;
}

/** Range of the marginal cost over the domain.  Outside this range the
 *  minimizer interval saturates at a domain endpoint, so any mu search can
 *  be bracketed by it. */
inline Interval slope_range(const CostFunction& cf) {
    const double p_in = cf.rate.p_in, p_out = cf.rate.p_out;
    if (const auto* tp = std::get_if<TwoPriceLinear>(&cf.family)) {
        const double lo = p_out > 0.0 ? tp->sell : tp->buy;
        const double hi = p_in > 0.0 ? tp->buy : tp->sell;
        return {lo, hi};
    }
    if (const auto* pl = std::get_if<PiecewiseLinearConvex>(&cf.family))
        return {pl->knots.front().slope, pl->knots.back().slope};
    const auto& q = std::get<QuadraticImpact>(cf.family);
    const double lo = p_out > 0.0 ? q.sell_price - 2.0 * q.sell_curvature * p_out : q.buy_price;
    const double hi = p_in > 0.0 ? q.buy_price + 2.0 * q.buy_curvature * p_in : q.sell_price;
    return {lo, hi};
}

/** Appends every mu at which the minimizer interval is set-valued, i.e. the
 *  slopes of linear pieces of positive length.  The mu search probes these
 *  values exactly so that flat-cost flexibility is seen as a whole band. */
inline void flat_slopes(const CostFunction& cf, std::vector<double>& out) {
    const double p_in = cf.rate.p_in, p_out = cf.rate.p_out;
    if (const auto* tp = std::get_if<TwoPriceLinear>(&cf.family)) {
        if (p_out > 0.0) out.push_back(tp->sell);
        if (p_in > 0.0) out.push_back(tp->buy);
        return;
    }
    if (const auto* pl = std::get_if<PiecewiseLinearConvex>(&cf.family)) {
        for (std::size_t i = 0; i < pl->knots.size(); ++i)
            if (detail::plc_seg_end(*pl, i, p_in) > pl->knots[i].x)
                out.push_back(pl->knots[i].slope);
        return;
    }
    const auto& q = std::get<QuadraticImpact>(cf.family);
    if (q.sell_curvature == 0.0 && p_out > 0.0) out.push_back(q.sell_price);
    if (q.buy_curvature == 0.0 && p_in > 0.0) out.push_back(q.buy_price);
}

/** Returns the cost function with its sell side (x < 0) scaled by the
 *  round-trip efficiency eta in (0, 1]: selling earns eta times as much.
 *  Throws InvalidEfficiency for eta outside (0, 1] and ValidationError if
 *  the scaled function would lose convexity (possible with negative sell
 *  prices). */
inline CostFunction apply_efficiency(const CostFunction& cf, double eta) {
    if (!(eta > 0.0) || eta > 1.0 || !std::isfinite(eta))
        throw InvalidEfficiency("efficiency must lie in (0, 1], got " + std::to_string(eta));
    CostFunction out = cf;
    if (auto* tp = std::get_if<TwoPriceLinear>(&out.family)) {
        tp->sell *= eta;
    } else if (auto* pl = std::get_if<PiecewiseLinearConvex>(&out.family)) {
        // Make sure a knot sits at 0 so scaling stops exactly there.
        auto& ks = pl->knots;
        std::size_t n0 = 0;
        while (n0 < ks.size() && ks[n0].x < 0.0) ++n0;
        if (n0 > 0 && (n0 == ks.size() || ks[n0].x > 0.0))
            ks.insert(ks.begin() + static_cast<std::ptrdiff_t>(n0),
                      {0.0, ks[n0 - 1].slope});
        for (auto& k : ks)
            if (k.x < 0.0) k.slope *= eta;
    } else {
        auto& q = std::get<QuadraticImpact>(out.family);
        q.sell_price *= eta;
        q.sell_curvature *= eta;
    }
    validate(out);
    return out;
}

} // namespace arbsched
