#pragma once

#include <utility>

#include "clab/error.hpp"
#include "clab/rational.hpp"

// Rational interval enclosures for the one transcendental the library needs:
// arctan (and pi through Machin's formula). Comparisons against rational
// thresholds either certify or report "undecided", and callers escalate the
// precision until the interval clears the threshold.

namespace clab {

struct RatInterval {
    Rat lo, hi;

    static RatInterval point(const Rat& v) { return {v, v}; }
    Rat width() const { return hi - lo; }

    friend RatInterval operator+(const RatInterval& a, const RatInterval& b) {
        return {a.lo + b.lo, a.hi + b.hi};
    }
    friend RatInterval operator-(const RatInterval& a, const RatInterval& b) {
        return {a.lo - b.hi, a.hi - b.lo};
    }
    RatInterval operator-() const { return {-hi, -lo}; }

    RatInterval scaled(const Rat& c) const {
        return c >= 0 ? RatInterval{lo * c, hi * c} : RatInterval{hi * c, lo * c};
    }

    RatInterval abs() const {
        if (lo >= 0) return *this;
        if (hi <= 0) return -*this;
        return {Rat(0), max(-lo, hi)};
    }
};

namespace detail {

/// Alternating Taylor series for arctan on |x| <= 1/2: consecutive partial
/// sums bracket the limit, so stopping once a term drops under err/2 yields
/// a certified enclosure.
inline RatInterval arctan_series(const Rat& x, const Rat& err) {
    Rat x2 = x * x;
    Rat term = x;
    Rat sum = x;
    Rat prev = sum;
    long k = 1;
    for (;;) {
        term *= x2;
        Rat t = term / Rat(2 * k + 1);
        prev = sum;
        sum += (k % 2 == 1) ? -t : t;
        if (t <= err / Rat(2)) break;
        ++k;
        if (k > 4096) throw PrecisionExhausted("arctan series failed to converge");
    }
    return {min(sum, prev), max(sum, prev)};
}

}  // namespace detail

/// Enclosure of pi with width <= err (Machin: pi = 16 atan(1/5) - 4 atan(1/239)).
inline RatInterval pi_interval(const Rat& err) {
    RatInterval a = detail::arctan_series(Rat(1, 5), err / Rat(32));
    RatInterval b = detail::arctan_series(Rat(1, 239), err / Rat(8));
    return a.scaled(Rat(16)) - b.scaled(Rat(4));
}

/// Enclosure of arctan(x) with width <= err, for any rational x.
inline RatInterval arctan_interval(const Rat& x, const Rat& err) {
    if (x < 0) return -arctan_interval(-x, err);
    if (x > 1) {
        // arctan(x) = pi/2 - arctan(1/x)
        RatInterval half_pi = pi_interval(err).scaled(Rat(1, 2));
        return half_pi - arctan_interval(x.inverse(), err / Rat(2));
    }
    if (x > Rat(1, 2)) {
        // arctan(x) = pi/4 + arctan((x-1)/(x+1)), argument in (-1/3, 0]
        RatInterval quarter_pi = pi_interval(err).scaled(Rat(1, 4));
        Rat y = (x - Rat(1)) / (x + Rat(1));
        return quarter_pi + arctan_interval(y, err / Rat(2));
    }
    return detail::arctan_series(x, err);
}

/// Tri-state certified comparison of an interval against a rational.
enum class IntervalOrder { Less, Greater, Undecided };

inline IntervalOrder compare(const RatInterval& iv, const Rat& threshold) {
    if (iv.hi < threshold) return IntervalOrder::Less;
    if (iv.lo > threshold) return IntervalOrder::Greater;
    return IntervalOrder::Undecided;
}

}  // namespace clab
